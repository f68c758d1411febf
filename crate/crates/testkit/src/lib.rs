//! Shared helpers for tests: a reference propagation oracle and seeded
//! scenario generators.

pub mod gen;
pub mod oracle;

pub use gen::{random_acyclic, random_cyclic, random_program, Scenario};

//! Agent runtime: executes an agent's code when triggered and writes the
//! result back to the graph.

pub mod builtin;
pub mod executor;
pub mod graph;
pub mod runtime;
pub mod service;
pub mod subprocess;

pub use builtin::BuiltinExecutor;
pub use executor::{cancel_pair, CancelHandle, CancelToken, DispatchExecutor, ExecutionResult, Executor, Mode, Outcome};
pub use graph::{GraphClient, GraphClientError, HttpGraph, LocalGraph, WireCause};
pub use runtime::{AgentRuntime, AgentState};
pub use service::{agent_main, run_agent, serve_connection, serve_messages, termination_signal, AgentError, AgentOptions};
pub use subprocess::SubprocessExecutor;

//! Graph-blackboard core: a typed property graph of entities, agents and
//! widgets, plus the propagation engine that enforces watches/sets rules.

mod builder;
pub mod error;
pub mod graph;
pub mod kind;
pub mod label;
pub mod program;
pub mod propagation;
pub mod protocol;
pub mod value;

pub use builder::EntityRef;
pub use error::{GraphError, ValueError};
pub use graph::{Edge, EdgeId, Entity, EntityId, Graph, Property, PropertyDecl};
pub use kind::{KindRegistry, KindSchema, Role, SchemaProperty};
pub use label::EdgeLabel;
pub use program::{EdgeSpec, EntitySpec, EntityView, ProgramSpec, PropertySpec, PropertyView, SpecDifference};
pub use propagation::{
    Cause, ChangeEvent, Delivery, EngineConfig, EngineError, Interface, Notification, Scope, SinkKind,
    Trigger, WaveId, WaveReport,
};
pub use value::{Code, Tensor, Value, ValueType};

/// Environment variable naming the graph server address.
pub const ENV_SERVER: &str = "BEESTAR_SERVER";
/// Environment variable naming the agent a runtime serves.
pub const ENV_AGENT: &str = "BEESTAR_AGENT";
/// Set to `1` for executions in debug mode.
pub const ENV_DEBUG: &str = "BEESTAR_DEBUG";

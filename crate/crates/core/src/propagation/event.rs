use serde::{Deserialize, Serialize};

use crate::error::GraphError;
use crate::graph::Graph;
use crate::value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WaveId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ChainId(pub u64);

/// Why a property changed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Cause {
    /// A user, widget or script wrote the property directly.
    External,
    /// An agent run finished and its result was mapped to `output`.
    AgentRun { agent: String },
    /// An agent runtime mirrored its state into `status`.
    AgentStatus { agent: String },
    /// A `sets` edge copied the source's emission value.
    SetsEdge { from: String },
    /// A watched property changed and filled the agent's `input`.
    WatchTrigger { source: String, prop: String },
}

impl Cause {
    /// Parses the short cause names accepted over the API.
    pub fn from_wire(s: &str, entity: &str) -> Option<Cause> {
        match s {
            "external" | "" => Some(Cause::External),
            "agent-run" => Some(Cause::AgentRun {
                agent: entity.to_string(),
            }),
            "agent-status" => Some(Cause::AgentStatus {
                agent: entity.to_string(),
            }),
            _ => None,
        }
    }
}

/// One committed property assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangeEvent {
    /// Global commit sequence, starting at 1.
    pub seq: u64,
    pub wave: WaveId,
    pub entity: String,
    pub prop: String,
    pub old: Value,
    pub new: Value,
    /// Version after this assignment; always the previous version plus one.
    pub version: u64,
    pub cause: Cause,
}

impl ChangeEvent {
    pub fn to_canonical_string(&self) -> String {
        crate::value::canonical_string(&serde_json::to_value(self).expect("events serialize"))
    }
}

/// A display entity told that something it watches changed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Notification {
    pub display: String,
    pub entity: String,
    pub prop: String,
    pub version: u64,
    pub wave: WaveId,
}

/// A request for an agent to run, emitted after its input was filled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trigger {
    pub agent: String,
    pub input: Value,
    pub wave: WaveId,
    pub chain: ChainId,
    pub hop: u32,
}

/// Outcome of a committed wave.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WaveReport {
    pub wave: WaveId,
    pub chain: ChainId,
    pub hop: u32,
    pub events: Vec<ChangeEvent>,
    pub notifications: Vec<Notification>,
    pub triggers: Vec<Trigger>,
}

/// Structural graph changes, published alongside property events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum GraphDelta {
    Loaded { entities: usize, edges: usize },
    EntityCreated { name: String, kind: String },
    EntityRemoved { name: String, edges: Vec<u64> },
    PropertyDeclared { entity: String, prop: String },
    EdgeAdded { id: u64, from: String, to: String, label: String },
    EdgeRemoved { id: u64 },
}

/// Replays committed events onto `initial`, writing each new value and version.
pub fn replay(initial: &Graph, events: &[ChangeEvent]) -> Result<Graph, GraphError> {
    let mut g = initial.clone();
    for ev in events {
        let id = g.resolve(&ev.entity)?;
        g.check_assignment(id, &ev.prop, &ev.new)?;
        g.write(id, &ev.prop, ev.new.clone(), ev.version);
    }
    Ok(g)
}

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use parking_lot::{Mutex, RwLock};
use thiserror::Error;
use tokio::sync::mpsc::UnboundedReceiver;

use crate::error::GraphError;
use crate::graph::{EdgeId, Graph, PropertyDecl};
use crate::kind::{props, KindSchema, Role};
use crate::program::{EntityView, ProgramSpec};
use crate::value::Value;

use super::event::{
    Cause, ChainId, ChangeEvent, GraphDelta, Notification, Trigger, WaveId, WaveReport,
};
use super::subscription::{Delivery, FeedItem, Hub, Scope, SinkKind, Subscription, SubscriptionId};
use super::wave::{self, WaveFailure};

pub const DEFAULT_MAX_CHAIN_DEPTH: u32 = 64;

#[derive(Debug, Clone)]
pub struct EngineConfig {
    pub strict: bool,
    /// Longest run of agent-triggers-agent hops before a wave is refused.
    pub max_chain_depth: u32,
    /// Append-only newline-delimited event log.
    pub event_log: Option<PathBuf>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            strict: true,
            max_chain_depth: DEFAULT_MAX_CHAIN_DEPTH,
            event_log: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("wave {wave:?} rejected: {source}")]
    Type {
        wave: WaveId,
        #[source]
        source: GraphError,
    },
    #[error("wave {wave:?} revisits {entity}.{prop}")]
    Cycle {
        wave: WaveId,
        entity: String,
        prop: String,
    },
    #[error("wave {wave:?} would trigger hop {hop} past max chain depth {max}")]
    ChainDepthExceeded { wave: WaveId, hop: u32, max: u32 },
    #[error("`{0}` is not an agent")]
    NotAnAgent(String),
    #[error("unknown scope: {0}")]
    UnknownScope(String),
    #[error("event log: {0}")]
    Io(#[from] std::io::Error),
}

impl EngineError {
    pub fn code(&self) -> &'static str {
        match self {
            EngineError::Graph(g) => g.code(),
            EngineError::Type { .. } => "type_error",
            EngineError::Cycle { .. } => "cycle_error",
            EngineError::ChainDepthExceeded { .. } => "chain_depth_exceeded",
            EngineError::NotAnAgent(_) => "not_an_agent",
            EngineError::UnknownScope(_) => "unknown_scope",
            EngineError::Io(_) => "io_error",
        }
    }
}

struct State {
    graph: Graph,
    log: Vec<ChangeEvent>,
    next_wave: u64,
    next_chain: u64,
    /// Chain position of each agent's most recent trigger.
    chains: HashMap<String, (ChainId, u32)>,
    log_file: Option<BufWriter<File>>,
}

/// The single enforcement point for property updates.
///
/// Writers are serialized behind one lock; readers see a consistent
/// snapshot. Results fan out to subscribers after commit and never block
/// the writer.
pub struct Interface {
    config: EngineConfig,
    state: RwLock<State>,
    hub: Mutex<Hub>,
}

impl Interface {
    pub fn new(config: EngineConfig) -> Result<Self, EngineError> {
        let log_file = match &config.event_log {
            Some(path) => Some(BufWriter::new(
                OpenOptions::new().create(true).append(true).open(path)?,
            )),
            None => None,
        };
        Ok(Interface {
            state: RwLock::new(State {
                graph: Graph::new(config.strict),
                log: Vec::new(),
                next_wave: 0,
                next_chain: 0,
                chains: HashMap::new(),
                log_file,
            }),
            config,
            hub: Mutex::new(Hub::default()),
        })
    }

    pub fn in_memory() -> Self {
        Self::new(EngineConfig::default()).expect("no file to open")
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    /// Runs `f` against a consistent snapshot of the graph.
    pub fn read<R>(&self, f: impl FnOnce(&Graph) -> R) -> R {
        f(&self.state.read().graph)
    }

    pub fn snapshot(&self) -> Graph {
        self.read(Graph::clone)
    }

    pub fn export_program(&self) -> ProgramSpec {
        self.read(ProgramSpec::export)
    }

    pub fn entity_view(&self, name: &str) -> Result<EntityView, GraphError> {
        self.read(|g| EntityView::of(g, name))
    }

    pub fn kind_chain(&self, name: &str) -> Result<Vec<String>, GraphError> {
        self.read(|g| g.kind_chain(name))
    }

    pub fn watchers_of(&self, entity: &str, prop: &str) -> Result<Vec<String>, GraphError> {
        self.read(|g| g.watchers_named(entity, prop))
    }

    pub fn set_targets_of(&self, entity: &str) -> Result<Vec<(String, String)>, GraphError> {
        self.read(|g| g.set_targets_named(entity))
    }

    /// Committed events with sequence greater than `since`, in commit order.
    pub fn event_log(&self, since: u64) -> Vec<ChangeEvent> {
        let st = self.state.read();
        // seq is 1-based and dense, so it doubles as an index.
        let start = (since as usize).min(st.log.len());
        st.log[start..].to_vec()
    }

    pub fn head(&self) -> u64 {
        self.state.read().log.len() as u64
    }

    // ---- structure ----

    /// Replaces the whole graph with the loaded document.
    pub fn load_program(&self, doc: &ProgramSpec) -> Result<(), GraphError> {
        let graph = doc.load(self.config.strict)?;
        let mut st = self.state.write();
        let delta = GraphDelta::Loaded {
            entities: graph.len(),
            edges: graph.edges().count(),
        };
        st.graph = graph;
        st.chains.clear();
        self.hub.lock().publish_delta(&delta);
        Ok(())
    }

    pub fn register_kind(&self, schema: KindSchema) -> Result<(), GraphError> {
        self.state.write().graph.register_kind(schema)
    }

    pub fn create_entity(&self, name: &str, kind: &str, props: Vec<PropertyDecl>) -> Result<(), GraphError> {
        let mut st = self.state.write();
        st.graph.create_entity(name, kind, props)?;
        self.hub.lock().publish_delta(&GraphDelta::EntityCreated {
            name: name.into(),
            kind: kind.into(),
        });
        Ok(())
    }

    pub fn declare_property(&self, entity: &str, decl: PropertyDecl) -> Result<(), GraphError> {
        let mut st = self.state.write();
        let prop = decl.name.clone();
        st.graph.declare_property(entity, decl)?;
        self.hub.lock().publish_delta(&GraphDelta::PropertyDeclared {
            entity: entity.into(),
            prop,
        });
        Ok(())
    }

    pub fn remove_entity(&self, name: &str) -> Result<(), GraphError> {
        let mut st = self.state.write();
        let removed = st.graph.remove_entity(name)?;
        st.chains.remove(name);
        self.hub.lock().publish_delta(&GraphDelta::EntityRemoved {
            name: name.into(),
            edges: removed.iter().map(|e| e.id.0).collect(),
        });
        Ok(())
    }

    pub fn add_edge(&self, from: &str, to: &str, label: &str) -> Result<EdgeId, GraphError> {
        let mut st = self.state.write();
        let id = st.graph.add_edge(from, to, label)?;
        self.publish_edge(&st.graph, id);
        Ok(id)
    }

    pub fn remove_edge(&self, id: EdgeId) -> Result<(), GraphError> {
        let mut st = self.state.write();
        st.graph.remove_edge(id)?;
        self.hub
            .lock()
            .publish_delta(&GraphDelta::EdgeRemoved { id: id.0 });
        Ok(())
    }

    /// Builder sugar, see [`Graph::sets`].
    pub fn sets(&self, source: &str, prop: &str, targets: &[&str]) -> Result<Vec<EdgeId>, GraphError> {
        let mut st = self.state.write();
        let ids = st.graph.sets(source, prop, targets)?;
        ids.iter().for_each(|id| self.publish_edge(&st.graph, *id));
        Ok(ids)
    }

    /// Builder sugar, see [`Graph::watch`].
    pub fn watch(&self, watcher: &str, prop: &str, targets: &[&str]) -> Result<Vec<EdgeId>, GraphError> {
        let mut st = self.state.write();
        let ids = st.graph.watch(watcher, prop, targets)?;
        ids.iter().for_each(|id| self.publish_edge(&st.graph, *id));
        Ok(ids)
    }

    fn publish_edge(&self, g: &Graph, id: EdgeId) {
        let e = g.edge(id).expect("just added");
        self.hub.lock().publish_delta(&GraphDelta::EdgeAdded {
            id: id.0,
            from: g.name_of(e.from).to_string(),
            to: g.name_of(e.to).to_string(),
            label: e.label.to_string(),
        });
    }

    // ---- propagation ----

    /// Assigns `entity.prop := value` and propagates one wave.
    pub fn set_property(
        &self,
        entity: &str,
        prop: &str,
        value: Value,
        cause: Cause,
    ) -> Result<WaveReport, EngineError> {
        let mut guard = self.state.write();
        let st = &mut *guard;
        let id = st.graph.resolve(entity)?;
        if st.graph.entity(id).and_then(|e| e.property(prop)).is_none() {
            return Err(GraphError::UnknownProperty {
                entity: entity.into(),
                prop: prop.into(),
            }
            .into());
        }

        let wave_id = WaveId(st.next_wave);
        st.next_wave += 1;
        let (chain, hop) = match &cause {
            Cause::AgentRun { agent } => st.chains.remove(agent),
            Cause::AgentStatus { agent } => st.chains.get(agent).copied(),
            _ => None,
        }
        .unwrap_or_else(|| {
            let c = ChainId(st.next_chain);
            st.next_chain += 1;
            (c, 0)
        });

        let plan = wave::plan(&st.graph, id, prop, value, cause).map_err(|f| match f {
            WaveFailure::Type(source) => EngineError::Type {
                wave: wave_id,
                source,
            },
            WaveFailure::Cycle { entity, prop } => EngineError::Cycle {
                wave: wave_id,
                entity,
                prop,
            },
        })?;
        if !plan.triggers.is_empty() && hop >= self.config.max_chain_depth {
            return Err(EngineError::ChainDepthExceeded {
                wave: wave_id,
                hop: hop + 1,
                max: self.config.max_chain_depth,
            });
        }

        // Commit.
        let mut events = Vec::with_capacity(plan.changes.len());
        for change in plan.changes {
            let seq = st.log.len() as u64 + 1;
            let ev = ChangeEvent {
                seq,
                wave: wave_id,
                entity: st.graph.name_of(change.entity).to_string(),
                prop: change.prop.clone(),
                old: change.old,
                new: change.new.clone(),
                version: change.version,
                cause: change.cause,
            };
            st.graph.write(change.entity, &change.prop, change.new, change.version);
            st.log.push(ev.clone());
            events.push(ev);
        }
        if let Some(file) = st.log_file.as_mut() {
            for ev in &events {
                writeln!(file, "{}", ev.to_canonical_string())?;
            }
            file.flush()?;
        }

        let notifications: Vec<Notification> = plan
            .notifications
            .into_iter()
            .map(|(display, watched, prop)| {
                let version = st
                    .graph
                    .entity(watched)
                    .and_then(|e| e.property(&prop))
                    .map_or(0, |p| p.version);
                Notification {
                    display: st.graph.name_of(display).to_string(),
                    entity: st.graph.name_of(watched).to_string(),
                    prop,
                    version,
                    wave: wave_id,
                }
            })
            .collect();
        let triggers: Vec<Trigger> = plan
            .triggers
            .into_iter()
            .map(|(agent, input)| Trigger {
                agent: st.graph.name_of(agent).to_string(),
                input,
                wave: wave_id,
                chain,
                hop: hop + 1,
            })
            .collect();
        for t in &triggers {
            st.chains.insert(t.agent.clone(), (t.chain, t.hop));
        }

        let mut hub = self.hub.lock();
        events.iter().for_each(|e| hub.publish_event(e));
        notifications.iter().for_each(|n| hub.publish_notification(n));
        triggers.iter().for_each(|t| hub.publish_trigger(t));

        Ok(WaveReport {
            wave: wave_id,
            chain,
            hop,
            events,
            notifications,
            triggers,
        })
    }

    /// Maps an agent's result to its `output` property.
    pub fn apply_agent_output(&self, agent: &str, value: Value) -> Result<WaveReport, EngineError> {
        let role = self.read(|g| g.id_of(agent).map(|id| g.role_of(id)));
        match role {
            None => Err(GraphError::UnknownEntity(agent.into()).into()),
            Some(Role::Agent) => self.set_property(
                agent,
                props::OUTPUT,
                value,
                Cause::AgentRun {
                    agent: agent.into(),
                },
            ),
            Some(_) => Err(EngineError::NotAnAgent(agent.into())),
        }
    }

    // ---- subscriptions ----

    pub fn subscribe(
        &self,
        scope: Scope,
        sink: SinkKind,
    ) -> Result<(Subscription, UnboundedReceiver<Delivery>), EngineError> {
        // Hold the read lock so no commit slips between validation and registration.
        let st = self.state.read();
        let resolvable = match &scope {
            Scope::All => true,
            Scope::Entity { entity } => st.graph.id_of(entity).is_some(),
            Scope::Property { entity, prop } => st
                .graph
                .entity_by_name(entity)
                .is_some_and(|e| e.property(prop).is_some()),
        };
        if !resolvable {
            return Err(EngineError::UnknownScope(format!("{scope:?}")));
        }
        let out = self.hub.lock().subscribe(scope, sink);
        drop(st);
        Ok(out)
    }

    pub fn unsubscribe(&self, id: SubscriptionId) -> bool {
        self.hub.lock().unsubscribe(id)
    }

    /// Every committed event and structural change, in commit order.
    pub fn subscribe_feed(&self) -> UnboundedReceiver<FeedItem> {
        let _st = self.state.read();
        self.hub.lock().feed()
    }

    /// Registers a callback run inline for every committed event and
    /// structural change. It must not call back into the interface.
    pub fn observe(&self, f: impl Fn(&FeedItem) + Send + Sync + 'static) {
        let _st = self.state.read();
        self.hub.lock().observe(Box::new(f));
    }

    /// Play triggers, emitted after the wave that filled the agent's input commits.
    pub fn subscribe_triggers(&self) -> UnboundedReceiver<Trigger> {
        let _st = self.state.read();
        self.hub.lock().trigger_feed()
    }
}

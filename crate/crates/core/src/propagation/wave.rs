//! The wave planner: computes every staged assignment, notification and
//! trigger that one external write implies, without touching the graph.
//!
//! Staging an assignment to `(entity, prop)`:
//! 1. fails on revisit, records the assignment otherwise;
//! 2. if `prop` is the entity's emission property, stages each Sets target
//!    in ordinal order;
//! 3. for each watcher in ordinal order, queues a notification (non-agents)
//!    or stages the agent's `input` and queues a play trigger (agents).

use std::collections::HashSet;

use crate::error::GraphError;
use crate::graph::{EntityId, Graph};
use crate::kind::{props, Role};
use crate::value::Value;

use super::event::Cause;

#[derive(Debug, Clone)]
pub(crate) struct StagedChange {
    pub entity: EntityId,
    pub prop: String,
    pub old: Value,
    pub new: Value,
    pub version: u64,
    pub cause: Cause,
}

#[derive(Debug, Default)]
pub(crate) struct WavePlan {
    pub changes: Vec<StagedChange>,
    /// (display, watched entity, watched prop)
    pub notifications: Vec<(EntityId, EntityId, String)>,
    pub triggers: Vec<(EntityId, Value)>,
}

#[derive(Debug)]
pub(crate) enum WaveFailure {
    Type(GraphError),
    Cycle { entity: String, prop: String },
}

struct Planner<'g> {
    graph: &'g Graph,
    visited: HashSet<(EntityId, String)>,
    plan: WavePlan,
}

pub(crate) fn plan(
    graph: &Graph,
    entity: EntityId,
    prop: &str,
    value: Value,
    cause: Cause,
) -> Result<WavePlan, WaveFailure> {
    let mut planner = Planner {
        graph,
        visited: HashSet::new(),
        plan: WavePlan::default(),
    };
    planner.stage(entity, prop, value, cause)?;
    Ok(planner.plan)
}

impl Planner<'_> {
    fn stage(
        &mut self,
        entity: EntityId,
        prop: &str,
        value: Value,
        cause: Cause,
    ) -> Result<(), WaveFailure> {
        let g = self.graph;
        if !self.visited.insert((entity, prop.to_string())) {
            return Err(WaveFailure::Cycle {
                entity: g.name_of(entity).to_string(),
                prop: prop.to_string(),
            });
        }
        let current = g
            .check_assignment(entity, prop, &value)
            .map_err(WaveFailure::Type)?;
        self.plan.changes.push(StagedChange {
            entity,
            prop: prop.to_string(),
            old: current.value.clone(),
            new: value.clone(),
            version: current.version + 1,
            cause,
        });

        if g.emission_property_of(entity) == Some(prop) {
            for (target, target_prop) in g.set_targets_of(entity) {
                self.stage(
                    target,
                    &target_prop,
                    value.clone(),
                    Cause::SetsEdge {
                        from: g.name_of(entity).to_string(),
                    },
                )?;
            }
        }

        for watcher in g.watchers_of(entity, prop) {
            if g.role_of(watcher) == Role::Agent {
                self.stage(
                    watcher,
                    props::INPUT,
                    value.clone(),
                    Cause::WatchTrigger {
                        source: g.name_of(entity).to_string(),
                        prop: prop.to_string(),
                    },
                )?;
                self.plan.triggers.push((watcher, value.clone()));
            } else {
                self.plan
                    .notifications
                    .push((watcher, entity, prop.to_string()));
            }
        }
        Ok(())
    }
}

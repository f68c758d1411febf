//! Brute-force reference for one wave of watches/sets propagation.
//!
//! Works directly on a program document with its own role table and type
//! rule, and scans every edge until nothing changes. Each (entity, prop)
//! may be assigned at most once per wave; a second assignment is a cycle.

use std::collections::{BTreeMap, HashSet};

use beestar_core::{ProgramSpec, Value, ValueType};

pub type PropKey = (String, String);

#[derive(Debug, Clone, PartialEq)]
pub struct Slot {
    pub ty: ValueType,
    pub value: Value,
    pub version: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Committed,
    Rejected,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleRun {
    pub state: BTreeMap<PropKey, Slot>,
    pub outcomes: Vec<Outcome>,
    /// Agents triggered by each committed wave, sorted.
    pub triggers: Vec<Vec<String>>,
}

fn emission_prop(kind: &str) -> Option<&'static str> {
    match kind {
        "AgentEntity" => Some("output"),
        "InputEntity" => Some("value"),
        _ => None,
    }
}

fn is_agent(kind: &str) -> bool {
    kind == "AgentEntity"
}

fn admits(ty: ValueType, v: &Value) -> bool {
    ty == ValueType::Any || matches!(v, Value::Null | Value::Link(_)) || v.tag() == ty
}

enum Rule {
    Sets { from: String, to: String, prop: String },
    Watches { watcher: String, target: String, prop: String },
}

fn parse_rules(doc: &ProgramSpec) -> Vec<Rule> {
    doc.edges
        .iter()
        .filter_map(|e| {
            if let Some(p) = e.label.strip_prefix("sets ") {
                Some(Rule::Sets {
                    from: e.from.clone(),
                    to: e.to.clone(),
                    prop: p.to_string(),
                })
            } else {
                e.label.strip_prefix("watches ").map(|p| Rule::Watches {
                    watcher: e.from.clone(),
                    target: e.to.clone(),
                    prop: p.to_string(),
                })
            }
        })
        .collect()
}

/// Applies `sets` in order to the loaded document; kinds must be built-in
/// and fully declared (schema fill is the caller's concern).
pub fn run(doc: &ProgramSpec, sets: &[(String, String, Value)]) -> OracleRun {
    let kinds: BTreeMap<&str, &str> = doc
        .entities
        .iter()
        .map(|e| (e.name.as_str(), e.kind.as_str()))
        .collect();
    let mut state: BTreeMap<PropKey, Slot> = BTreeMap::new();
    for e in &doc.entities {
        for (p, spec) in &e.properties {
            state.insert(
                (e.name.clone(), p.clone()),
                Slot {
                    ty: spec.ty,
                    value: spec.value.clone(),
                    version: 0,
                },
            );
        }
    }
    let rules = parse_rules(doc);
    let mut outcomes = Vec::new();
    let mut triggers = Vec::new();

    for (entity, prop, value) in sets {
        let mut assigned: BTreeMap<PropKey, Value> = BTreeMap::new();
        let mut fired: HashSet<usize> = HashSet::new();
        let mut triggered = Vec::new();
        let mut ok = true;

        let assign = |assigned: &mut BTreeMap<PropKey, Value>, key: PropKey, v: Value| -> bool {
            if assigned.contains_key(&key) {
                return false;
            }
            match state.get(&key) {
                Some(slot) if admits(slot.ty, &v) => {
                    assigned.insert(key, v);
                    true
                }
                _ => false,
            }
        };

        if !assign(&mut assigned, (entity.clone(), prop.clone()), value.clone()) {
            ok = false;
        }
        while ok {
            let mut changed = false;
            for (i, rule) in rules.iter().enumerate() {
                if fired.contains(&i) {
                    continue;
                }
                match rule {
                    Rule::Sets { from, to, prop } => {
                        let Some(emit) = kinds.get(from.as_str()).and_then(|k| emission_prop(k))
                        else {
                            continue;
                        };
                        let Some(v) = assigned.get(&(from.clone(), emit.to_string())).cloned()
                        else {
                            continue;
                        };
                        fired.insert(i);
                        changed = true;
                        if !assign(&mut assigned, (to.clone(), prop.clone()), v) {
                            ok = false;
                        }
                    }
                    Rule::Watches {
                        watcher,
                        target,
                        prop,
                    } => {
                        let Some(v) = assigned.get(&(target.clone(), prop.clone())).cloned() else {
                            continue;
                        };
                        fired.insert(i);
                        if kinds.get(watcher.as_str()).is_some_and(|k| is_agent(k)) {
                            changed = true;
                            triggered.push(watcher.clone());
                            if !assign(&mut assigned, (watcher.clone(), "input".into()), v) {
                                ok = false;
                            }
                        }
                    }
                }
                if !ok {
                    break;
                }
            }
            if !changed {
                break;
            }
        }

        if ok {
            for (key, v) in assigned {
                let slot = state.get_mut(&key).expect("assigned keys exist");
                slot.value = v;
                slot.version += 1;
            }
            triggered.sort();
            triggers.push(triggered);
            outcomes.push(Outcome::Committed);
        } else {
            outcomes.push(Outcome::Rejected);
        }
    }

    OracleRun {
        state,
        outcomes,
        triggers,
    }
}

/// Flattens a live graph into the oracle's state shape.
pub fn graph_state(g: &beestar_core::Graph) -> BTreeMap<PropKey, Slot> {
    g.entities()
        .flat_map(|e| {
            e.properties.values().map(move |p| {
                (
                    (e.name.clone(), p.name.clone()),
                    Slot {
                        ty: p.declared_type,
                        value: p.value.clone(),
                        version: p.version,
                    },
                )
            })
        })
        .collect()
}

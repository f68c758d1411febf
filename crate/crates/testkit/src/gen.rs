//! Seeded scenario generators.

use std::collections::{BTreeMap, BTreeSet};

use beestar_core::{Code, EdgeSpec, EntitySpec, ProgramSpec, PropertySpec, Value, ValueType};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

/// A program plus the external property sets to apply to it, in order.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub program: ProgramSpec,
    pub sets: Vec<(String, String, Value)>,
}

const KINDS: [&str; 4] = ["Entity", "AgentEntity", "InputEntity", "GalleryEntity"];

fn random_scalar(rng: &mut StdRng) -> Value {
    match rng.gen_range(0..5) {
        0 => Value::Null,
        1 => Value::String(format!("s{}", rng.gen_range(0..100))),
        2 => Value::Number(rng.gen_range(-50..50) as f64),
        3 => Value::Number(rng.gen_range(-1000..1000) as f64 / 8.0),
        _ => Value::Boolean(rng.gen()),
    }
}

fn schema_props(kind: &str) -> Vec<(&'static str, PropertySpec)> {
    match kind {
        "AgentEntity" => vec![
            ("source code", PropertySpec::new(ValueType::Code, Code::builtin("identity"))),
            ("input", PropertySpec::new(ValueType::Any, Value::Null)),
            ("output", PropertySpec::new(ValueType::Any, Value::Null)),
            ("requirements", PropertySpec::new(ValueType::Array, Value::Array(vec![]))),
            ("status", PropertySpec::new(ValueType::String, "idle")),
        ],
        "InputEntity" => vec![
            ("label", PropertySpec::new(ValueType::String, Value::Null)),
            ("value", PropertySpec::new(ValueType::Any, Value::Null)),
        ],
        "GalleryEntity" => vec![
            ("background", PropertySpec::new(ValueType::String, Value::Null)),
            ("border", PropertySpec::new(ValueType::String, Value::Null)),
        ],
        _ => vec![],
    }
}

/// Names of the properties a watches/sets edge may use on an entity.
fn edge_props(e: &EntitySpec) -> Vec<String> {
    e.properties
        .keys()
        .filter(|p| p.as_str() != "source code")
        .cloned()
        .collect()
}

fn random_entities(rng: &mut StdRng, max: usize) -> Vec<EntitySpec> {
    let n = rng.gen_range(2..=max);
    (0..n)
        .map(|i| {
            let kind = *KINDS.choose(rng).unwrap();
            let mut properties: BTreeMap<String, PropertySpec> = schema_props(kind)
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect();
            for j in 0..rng.gen_range(1..=3) {
                let ty = if rng.gen_bool(0.6) { ValueType::Any } else { ValueType::Number };
                let value = if ty == ValueType::Number {
                    Value::Number(rng.gen_range(0..10) as f64)
                } else {
                    random_scalar(rng)
                };
                properties.insert(format!("p{j}"), PropertySpec::new(ty, value));
            }
            EntitySpec {
                name: format!("e{i}"),
                kind: kind.to_string(),
                properties,
            }
        })
        .collect()
}

fn random_sets(rng: &mut StdRng, entities: &[EntitySpec], emitters_first: bool) -> Vec<(String, String, Value)> {
    let emitters: Vec<&EntitySpec> = entities
        .iter()
        .filter(|e| e.kind == "AgentEntity" || e.kind == "InputEntity")
        .collect();
    (0..rng.gen_range(1..=5))
        .map(|_| {
            let e = if emitters_first && !emitters.is_empty() && rng.gen_bool(0.7) {
                *emitters.choose(rng).unwrap()
            } else {
                entities.choose(rng).unwrap()
            };
            let prop = match e.kind.as_str() {
                "AgentEntity" if rng.gen_bool(0.7) => "output".to_string(),
                "InputEntity" if rng.gen_bool(0.7) => "value".to_string(),
                _ => edge_props(e).choose(rng).unwrap().clone(),
            };
            (e.name.clone(), prop, random_scalar(rng))
        })
        .collect()
}

/// A graph whose data flow only runs from lower to higher creation index,
/// so no wave can revisit a property through edges alone.
pub fn random_acyclic(seed: u64) -> Scenario {
    let mut rng = StdRng::seed_from_u64(seed);
    let entities = random_entities(&mut rng, 10);
    let mut seen = BTreeSet::new();
    let mut edges = Vec::new();
    let budget = rng.gen_range(0..=15);
    let mut attempts = 0;
    while edges.len() < budget && attempts < 200 {
        attempts += 1;
        let a = rng.gen_range(0..entities.len());
        let b = rng.gen_range(0..entities.len());
        if a == b {
            continue;
        }
        let (lo, hi) = (a.min(b), a.max(b));
        let edge = if rng.gen_bool(0.5) {
            let prop = edge_props(&entities[hi]).choose(&mut rng).unwrap().clone();
            EdgeSpec::new(&entities[lo].name, &entities[hi].name, &format!("sets {prop}"))
        } else {
            let prop = edge_props(&entities[lo]).choose(&mut rng).unwrap().clone();
            EdgeSpec::new(&entities[hi].name, &entities[lo].name, &format!("watches {prop}"))
        };
        if seen.insert((edge.from.clone(), edge.to.clone(), edge.label.clone())) {
            edges.push(edge);
        }
    }
    let mut sets = random_sets(&mut rng, &entities, true);
    // Aim about half the writes at properties some edge reacts to.
    let hot: Vec<(String, String)> = edges
        .iter()
        .filter_map(|e| match e.label.split_once(' ') {
            Some(("watches", p)) => Some((e.to.clone(), p.to_string())),
            Some(("sets", _)) => entities
                .iter()
                .find(|x| x.name == e.from)
                .and_then(|x| match x.kind.as_str() {
                    "AgentEntity" => Some("output"),
                    "InputEntity" => Some("value"),
                    _ => None,
                })
                .map(|p| (e.from.clone(), p.to_string())),
            _ => None,
        })
        .collect();
    for set in &mut sets {
        if !hot.is_empty() && rng.gen_bool(0.5) {
            let (e, p) = hot.choose(&mut rng).unwrap().clone();
            set.0 = e;
            set.1 = p;
        }
    }
    Scenario {
        program: ProgramSpec {
            kinds: vec![],
            entities,
            edges,
        },
        sets,
    }
}

fn kind_entity(name: &str, kind: &str) -> EntitySpec {
    EntitySpec {
        name: name.to_string(),
        kind: kind.to_string(),
        properties: schema_props(kind)
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect(),
    }
}

/// A graph containing a feedback loop. Either a ring of agents where each
/// watches the previous one's input, or a ring of input widgets where each
/// sets the next one's value. The first external set enters the ring and
/// must be rejected; the second touches an unrelated property and commits.
pub fn random_cyclic(seed: u64) -> Scenario {
    let mut rng = StdRng::seed_from_u64(seed);
    let n = rng.gen_range(2..=5);
    let mut entities = Vec::new();
    let mut edges = Vec::new();
    let mut side = kind_entity("side", "Entity");
    side.properties
        .insert("x".into(), PropertySpec::new(ValueType::Any, Value::Null));
    side.properties
        .insert("y".into(), PropertySpec::new(ValueType::Any, Value::Null));
    entities.push(side);
    let first_set = if rng.gen_bool(0.5) {
        for i in 0..n {
            entities.push(kind_entity(&format!("a{i}"), "AgentEntity"));
            let prev = format!("a{}", (i + n - 1) % n);
            edges.push(EdgeSpec::new(&format!("a{i}"), &prev, "watches input"));
        }
        edges.push(EdgeSpec::new("a0", "side", "watches x"));
        ("side".to_string(), "x".to_string())
    } else {
        for i in 0..n {
            entities.push(kind_entity(&format!("w{i}"), "InputEntity"));
            let next = format!("w{}", (i + 1) % n);
            edges.push(EdgeSpec::new(&format!("w{i}"), &next, "sets value"));
        }
        let start = rng.gen_range(0..n);
        (format!("w{start}"), "value".to_string())
    };
    let sets = vec![
        (first_set.0, first_set.1, random_scalar(&mut rng)),
        ("side".into(), "y".into(), random_scalar(&mut rng)),
    ];
    Scenario {
        program: ProgramSpec {
            kinds: vec![],
            entities,
            edges,
        },
        sets,
    }
}

/// A random well-formed program document for round-trip checks. Values are
/// chosen so they never look like links, tensors or code when untyped.
pub fn random_program(seed: u64) -> ProgramSpec {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut entities = random_entities(&mut rng, 8);
    for e in &mut entities {
        if rng.gen_bool(0.4) {
            let mut rec = BTreeMap::new();
            rec.insert("k".to_string(), random_scalar(&mut rng));
            rec.insert("n".to_string(), Value::Array(vec![random_scalar(&mut rng)]));
            e.properties
                .insert("rec".into(), PropertySpec::new(ValueType::Record, Value::Record(rec)));
        }
        if rng.gen_bool(0.3) {
            e.properties.insert(
                "t".into(),
                PropertySpec::new(
                    ValueType::Tensor,
                    Value::Tensor(beestar_core::Tensor {
                        shape: vec![2],
                        data: vec![rng.gen_range(0..9) as f64, 0.5],
                    }),
                ),
            );
        }
        if rng.gen_bool(0.3) {
            e.properties
                .insert("ref".into(), PropertySpec::new(ValueType::Any, Value::Link("e0".into())));
        }
    }
    let mut edges = Vec::new();
    let mut seen = BTreeSet::new();
    for _ in 0..rng.gen_range(0..12) {
        let a = rng.gen_range(0..entities.len());
        let b = rng.gen_range(0..entities.len());
        if a == b {
            continue;
        }
        let edge = match rng.gen_range(0..3) {
            0 => {
                let prop = edge_props(&entities[b]).choose(&mut rng).unwrap().clone();
                EdgeSpec::new(&entities[a].name, &entities[b].name, &format!("sets {prop}"))
            }
            1 => {
                let prop = edge_props(&entities[b]).choose(&mut rng).unwrap().clone();
                EdgeSpec::new(&entities[a].name, &entities[b].name, &format!("watches {prop}"))
            }
            _ => EdgeSpec::new(&entities[a].name, &entities[b].name, "messages"),
        };
        if seen.insert((edge.from.clone(), edge.to.clone(), edge.label.clone())) {
            edges.push(edge);
        }
    }
    ProgramSpec {
        kinds: vec![],
        entities,
        edges,
    }
}

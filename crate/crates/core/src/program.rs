//! Declarative program documents: load into a [`Graph`], export back out,
//! and compare two documents structurally.

use std::collections::BTreeMap;

use serde::{Deserialize, Deserializer, Serialize};
use serde_json::Value as Json;

use crate::error::GraphError;
use crate::graph::{Graph, PropertyDecl};
use crate::kind::KindSchema;
use crate::value::{Value, ValueType};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ProgramSpec {
    /// Custom kinds; omitted from the document when there are none.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub kinds: Vec<KindSchema>,
    #[serde(default)]
    pub entities: Vec<EntitySpec>,
    #[serde(default)]
    pub edges: Vec<EdgeSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntitySpec {
    pub name: String,
    pub kind: String,
    #[serde(default)]
    pub properties: BTreeMap<String, PropertySpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertySpec {
    #[serde(rename = "type")]
    pub ty: ValueType,
    pub value: Value,
}

impl PropertySpec {
    pub fn new(ty: ValueType, value: impl Into<Value>) -> Self {
        PropertySpec {
            ty,
            value: value.into(),
        }
    }
}

#[derive(Deserialize)]
struct RawTypedValue {
    #[serde(rename = "type")]
    ty: ValueType,
    #[serde(default)]
    value: Json,
}

impl<'de> Deserialize<'de> for PropertySpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = RawTypedValue::deserialize(d)?;
        let value = Value::from_json_typed(&raw.value, raw.ty).map_err(serde::de::Error::custom)?;
        Ok(PropertySpec { ty: raw.ty, value })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgeSpec {
    pub from: String,
    pub to: String,
    pub label: String,
}

impl EdgeSpec {
    pub fn new(from: &str, to: &str, label: &str) -> Self {
        EdgeSpec {
            from: from.into(),
            to: to.into(),
            label: label.into(),
        }
    }
}

impl ProgramSpec {
    pub fn from_json_str(s: &str) -> Result<ProgramSpec, serde_json::Error> {
        serde_json::from_str(s)
    }

    pub fn to_json(&self) -> Json {
        serde_json::to_value(self).expect("program documents always serialize")
    }

    pub fn to_canonical_string(&self) -> String {
        crate::value::canonical_string(&self.to_json())
    }

    /// Materializes the document into a fresh graph.
    pub fn load(&self, strict: bool) -> Result<Graph, GraphError> {
        let mut g = Graph::new(strict);
        for (i, k) in self.kinds.iter().enumerate() {
            g.register_kind(k.clone())
                .map_err(|e| e.at(format!("kinds[{i}] ({})", k.name)))?;
        }
        for (i, e) in self.entities.iter().enumerate() {
            let props = e
                .properties
                .iter()
                .map(|(name, p)| PropertyDecl::new(name.clone(), p.ty, p.value.clone()))
                .collect();
            g.create_entity(&e.name, &e.kind, props)
                .map_err(|err| err.at(format!("entities[{i}] ({})", e.name)))?;
        }
        for (i, edge) in self.edges.iter().enumerate() {
            g.add_edge(&edge.from, &edge.to, &edge.label).map_err(|err| {
                err.at(format!(
                    "edges[{i}] ({} -> {} '{}')",
                    edge.from, edge.to, edge.label
                ))
            })?;
        }
        Ok(g)
    }

    /// Exports a graph: entities in creation order, edges in ordinal order.
    pub fn export(graph: &Graph) -> ProgramSpec {
        ProgramSpec {
            kinds: graph.kinds().custom().cloned().collect(),
            entities: graph
                .entities()
                .map(|e| EntitySpec {
                    name: e.name.clone(),
                    kind: e.kind.clone(),
                    properties: e
                        .properties
                        .values()
                        .map(|p| (p.name.clone(), PropertySpec::new(p.declared_type, p.value.clone())))
                        .collect(),
                })
                .collect(),
            edges: graph
                .edges()
                .map(|e| EdgeSpec {
                    from: graph.name_of(e.from).to_string(),
                    to: graph.name_of(e.to).to_string(),
                    label: e.label.to_string(),
                })
                .collect(),
        }
    }

    /// Structural differences from `self` to `other`.
    pub fn diff(&self, other: &ProgramSpec) -> Vec<SpecDifference> {
        let mut out = Vec::new();
        if self.kinds != other.kinds {
            out.push(SpecDifference::KindsChanged);
        }
        let theirs: BTreeMap<&str, &EntitySpec> =
            other.entities.iter().map(|e| (e.name.as_str(), e)).collect();
        let ours: BTreeMap<&str, &EntitySpec> =
            self.entities.iter().map(|e| (e.name.as_str(), e)).collect();
        for e in &self.entities {
            let Some(o) = theirs.get(e.name.as_str()) else {
                out.push(SpecDifference::EntityRemoved(e.name.clone()));
                continue;
            };
            if e.kind != o.kind {
                out.push(SpecDifference::KindChanged {
                    entity: e.name.clone(),
                    from: e.kind.clone(),
                    to: o.kind.clone(),
                });
            }
            for (name, p) in &e.properties {
                match o.properties.get(name) {
                    None => out.push(SpecDifference::PropertyRemoved {
                        entity: e.name.clone(),
                        prop: name.clone(),
                    }),
                    Some(q) if q.ty != p.ty => out.push(SpecDifference::TypeChanged {
                        entity: e.name.clone(),
                        prop: name.clone(),
                        from: p.ty,
                        to: q.ty,
                    }),
                    Some(q) if q.value != p.value => out.push(SpecDifference::ValueChanged {
                        entity: e.name.clone(),
                        prop: name.clone(),
                        from: p.value.clone(),
                        to: q.value.clone(),
                    }),
                    Some(_) => {}
                }
            }
            for name in o.properties.keys().filter(|n| !e.properties.contains_key(*n)) {
                out.push(SpecDifference::PropertyAdded {
                    entity: e.name.clone(),
                    prop: name.clone(),
                });
            }
        }
        for o in other.entities.iter().filter(|o| !ours.contains_key(o.name.as_str())) {
            out.push(SpecDifference::EntityAdded(o.name.clone()));
        }
        for e in self.edges.iter().filter(|e| !other.edges.contains(e)) {
            out.push(SpecDifference::EdgeRemoved(e.clone()));
        }
        for e in other.edges.iter().filter(|e| !self.edges.contains(e)) {
            out.push(SpecDifference::EdgeAdded(e.clone()));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SpecDifference {
    KindsChanged,
    EntityAdded(String),
    EntityRemoved(String),
    KindChanged {
        entity: String,
        from: String,
        to: String,
    },
    PropertyAdded {
        entity: String,
        prop: String,
    },
    PropertyRemoved {
        entity: String,
        prop: String,
    },
    TypeChanged {
        entity: String,
        prop: String,
        from: ValueType,
        to: ValueType,
    },
    ValueChanged {
        entity: String,
        prop: String,
        from: Value,
        to: Value,
    },
    EdgeAdded(EdgeSpec),
    EdgeRemoved(EdgeSpec),
}

/// Read model of one entity as served over the API.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityView {
    pub name: String,
    pub kind: String,
    pub kind_chain: Vec<String>,
    pub properties: BTreeMap<String, PropertyView>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyView {
    #[serde(rename = "type")]
    pub ty: ValueType,
    pub value: Value,
    pub version: u64,
}

impl<'de> Deserialize<'de> for PropertyView {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            #[serde(rename = "type")]
            ty: ValueType,
            #[serde(default)]
            value: Json,
            version: u64,
        }
        let raw = Raw::deserialize(d)?;
        let value = Value::from_json_typed(&raw.value, raw.ty).map_err(serde::de::Error::custom)?;
        Ok(PropertyView {
            ty: raw.ty,
            value,
            version: raw.version,
        })
    }
}

impl EntityView {
    pub fn of(graph: &Graph, name: &str) -> Result<EntityView, GraphError> {
        let e = graph
            .entity_by_name(name)
            .ok_or_else(|| GraphError::UnknownEntity(name.to_string()))?;
        Ok(EntityView {
            name: e.name.clone(),
            kind: e.kind.clone(),
            kind_chain: graph.kinds().chain(&e.kind),
            properties: e
                .properties
                .values()
                .map(|p| {
                    (
                        p.name.clone(),
                        PropertyView {
                            ty: p.declared_type,
                            value: p.value.clone(),
                            version: p.version,
                        },
                    )
                })
                .collect(),
        })
    }

    pub fn value(&self, prop: &str) -> Option<&Value> {
        self.properties.get(prop).map(|p| &p.value)
    }

    pub fn is_a(&self, kind: &str) -> bool {
        self.kind_chain.iter().any(|k| k == kind)
    }
}

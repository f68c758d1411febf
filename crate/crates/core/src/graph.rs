//! The typed property graph.
//!
//! Entities are addressed by name publicly; ids are internal and opaque.
//! Every entity's "is a" relation is its `kind`, walked through the
//! [`KindRegistry`]; explicit edges carry watches/sets/messages labels and
//! an insertion ordinal that fixes propagation order.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{GraphError, ValueError};
use crate::kind::{KindRegistry, KindSchema, Role};
use crate::label::{is_identifier, EdgeLabel};
use crate::value::{Value, ValueType};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EntityId(u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EdgeId(pub u64);

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Property {
    pub name: String,
    pub declared_type: ValueType,
    pub value: Value,
    pub version: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entity {
    pub id: EntityId,
    pub name: String,
    pub kind: String,
    pub properties: BTreeMap<String, Property>,
}

impl Entity {
    pub fn property(&self, name: &str) -> Option<&Property> {
        self.properties.get(name)
    }

    pub fn value(&self, name: &str) -> Option<&Value> {
        self.properties.get(name).map(|p| &p.value)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub id: EdgeId,
    pub from: EntityId,
    pub to: EntityId,
    pub label: EdgeLabel,
    pub ordinal: u64,
}

/// Declaration of one property at entity creation time.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyDecl {
    pub name: String,
    pub ty: ValueType,
    pub value: Value,
}

impl PropertyDecl {
    pub fn new(name: impl Into<String>, ty: ValueType, value: impl Into<Value>) -> Self {
        PropertyDecl {
            name: name.into(),
            ty,
            value: value.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    kinds: KindRegistry,
    entities: IndexMap<EntityId, Entity>,
    names: HashMap<String, EntityId>,
    edges: BTreeMap<EdgeId, Edge>,
    outgoing: HashMap<EntityId, Vec<EdgeId>>,
    incoming: HashMap<EntityId, Vec<EdgeId>>,
    next_entity: u64,
    next_edge: u64,
    strict: bool,
}

impl Default for Graph {
    fn default() -> Self {
        Graph::new(true)
    }
}

fn valid_entity_name(name: &str) -> bool {
    !name.is_empty() && name.trim() == name && !name.chars().any(char::is_control)
}

impl Graph {
    /// `strict` requires watches/sets properties to exist when the edge is
    /// added; lax mode only logs a warning.
    pub fn new(strict: bool) -> Self {
        Graph {
            kinds: KindRegistry::builtin(),
            entities: IndexMap::new(),
            names: HashMap::new(),
            edges: BTreeMap::new(),
            outgoing: HashMap::new(),
            incoming: HashMap::new(),
            next_entity: 0,
            next_edge: 0,
            strict,
        }
    }

    pub fn is_strict(&self) -> bool {
        self.strict
    }

    pub fn kinds(&self) -> &KindRegistry {
        &self.kinds
    }

    pub fn register_kind(&mut self, schema: KindSchema) -> Result<(), GraphError> {
        self.kinds.register(schema)
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    /// Entities in creation order.
    pub fn entities(&self) -> impl Iterator<Item = &Entity> {
        self.entities.values()
    }

    /// Edges in ordinal order.
    pub fn edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.values()
    }

    pub fn edge(&self, id: EdgeId) -> Option<&Edge> {
        self.edges.get(&id)
    }

    pub fn id_of(&self, name: &str) -> Option<EntityId> {
        self.names.get(name).copied()
    }

    pub fn entity(&self, id: EntityId) -> Option<&Entity> {
        self.entities.get(&id)
    }

    pub fn entity_by_name(&self, name: &str) -> Option<&Entity> {
        self.id_of(name).and_then(|id| self.entity(id))
    }

    pub(crate) fn resolve(&self, name: &str) -> Result<EntityId, GraphError> {
        self.id_of(name)
            .ok_or_else(|| GraphError::UnknownEntity(name.to_string()))
    }

    fn get(&self, id: EntityId) -> &Entity {
        &self.entities[&id]
    }

    pub fn name_of(&self, id: EntityId) -> &str {
        &self.get(id).name
    }

    pub fn role_of(&self, id: EntityId) -> Role {
        self.kinds.role(&self.get(id).kind)
    }

    pub fn emission_property_of(&self, id: EntityId) -> Option<&'static str> {
        self.kinds.emission_property(&self.get(id).kind)
    }

    pub fn create_entity(
        &mut self,
        name: &str,
        kind: &str,
        props: Vec<PropertyDecl>,
    ) -> Result<EntityId, GraphError> {
        if !valid_entity_name(name) {
            return Err(GraphError::InvalidName(name.to_string()));
        }
        if self.names.contains_key(name) {
            return Err(GraphError::DuplicateName(name.to_string()));
        }
        if !self.kinds.contains(kind) {
            return Err(GraphError::UnknownKind(kind.to_string()));
        }
        let violation = |prop: &str, detail: String| GraphError::SchemaViolation {
            entity: name.to_string(),
            prop: prop.to_string(),
            detail,
        };

        let mut properties = BTreeMap::new();
        for decl in props {
            if !is_identifier(&decl.name) {
                return Err(GraphError::InvalidName(decl.name));
            }
            decl.value
                .validate()
                .map_err(|e| violation(&decl.name, e.to_string()))?;
            if !decl.ty.admits(&decl.value) {
                return Err(violation(
                    &decl.name,
                    format!("declared {} but value is {}", decl.ty, decl.value.tag()),
                ));
            }
            if properties.contains_key(&decl.name) {
                return Err(GraphError::DuplicateProperty {
                    entity: name.to_string(),
                    prop: decl.name,
                });
            }
            properties.insert(
                decl.name.clone(),
                Property {
                    name: decl.name,
                    declared_type: decl.ty,
                    value: decl.value,
                    version: 0,
                },
            );
        }

        for required in self.kinds.schema_properties(kind) {
            match properties.get(&required.name) {
                Some(p) => {
                    if required.ty != ValueType::Any && p.declared_type != required.ty {
                        return Err(violation(
                            &required.name,
                            format!(
                                "{kind} requires {}, declared {}",
                                required.ty, p.declared_type
                            ),
                        ));
                    }
                }
                None => {
                    properties.insert(
                        required.name.clone(),
                        Property {
                            name: required.name.clone(),
                            declared_type: required.ty,
                            value: required.fill_value(),
                            version: 0,
                        },
                    );
                }
            }
        }

        let id = EntityId(self.next_entity);
        self.next_entity += 1;
        self.names.insert(name.to_string(), id);
        self.entities.insert(
            id,
            Entity {
                id,
                name: name.to_string(),
                kind: kind.to_string(),
                properties,
            },
        );
        Ok(id)
    }

    /// Adds a property to an existing entity.
    pub fn declare_property(&mut self, entity: &str, decl: PropertyDecl) -> Result<(), GraphError> {
        let id = self.resolve(entity)?;
        if !is_identifier(&decl.name) {
            return Err(GraphError::InvalidName(decl.name));
        }
        decl.value.validate().map_err(|source| GraphError::Type {
            entity: entity.to_string(),
            prop: decl.name.clone(),
            source,
        })?;
        if !decl.ty.admits(&decl.value) {
            return Err(GraphError::Type {
                entity: entity.to_string(),
                prop: decl.name.clone(),
                source: ValueError::TypeMismatch {
                    expected: decl.ty,
                    found: decl.value.tag(),
                },
            });
        }
        let e = self.entities.get_mut(&id).expect("resolved");
        if e.properties.contains_key(&decl.name) {
            return Err(GraphError::DuplicateProperty {
                entity: entity.to_string(),
                prop: decl.name,
            });
        }
        e.properties.insert(
            decl.name.clone(),
            Property {
                name: decl.name,
                declared_type: decl.ty,
                value: decl.value,
                version: 0,
            },
        );
        Ok(())
    }

    /// Removes an entity and every edge touching it. Returns the removed edges.
    pub fn remove_entity(&mut self, name: &str) -> Result<Vec<Edge>, GraphError> {
        let id = self.resolve(name)?;
        let mut touching: Vec<EdgeId> = self
            .outgoing
            .get(&id)
            .into_iter()
            .chain(self.incoming.get(&id))
            .flatten()
            .copied()
            .collect();
        touching.sort();
        touching.dedup();
        let removed = touching
            .into_iter()
            .filter_map(|e| self.remove_edge(e).ok())
            .collect();
        self.entities.shift_remove(&id);
        self.names.remove(name);
        self.outgoing.remove(&id);
        self.incoming.remove(&id);
        Ok(removed)
    }

    pub fn add_edge(&mut self, from: &str, to: &str, label: &str) -> Result<EdgeId, GraphError> {
        let label: EdgeLabel = label.parse()?;
        self.add_edge_labeled(from, to, label)
    }

    pub fn add_edge_labeled(
        &mut self,
        from: &str,
        to: &str,
        label: EdgeLabel,
    ) -> Result<EdgeId, GraphError> {
        let from_id = self.resolve(from)?;
        let to_id = self.resolve(to)?;
        if label == EdgeLabel::IsA {
            return Err(GraphError::KindChangeForbidden(from.to_string()));
        }
        if let Some(prop) = label.property() {
            if self.get(to_id).property(prop).is_none() {
                if self.strict {
                    return Err(GraphError::DanglingProperty {
                        entity: to.to_string(),
                        prop: prop.to_string(),
                        label: label.to_string(),
                    });
                }
                tracing::warn!(%from, %to, %label, "edge refers to a missing property");
            }
        }
        let duplicate = self
            .outgoing
            .get(&from_id)
            .into_iter()
            .flatten()
            .any(|e| self.edges[e].to == to_id && self.edges[e].label == label);
        if duplicate {
            return Err(GraphError::DuplicateEdge {
                from: from.to_string(),
                to: to.to_string(),
                label: label.to_string(),
            });
        }
        let ordinal = self.next_edge;
        self.next_edge += 1;
        let id = EdgeId(ordinal);
        self.edges.insert(
            id,
            Edge {
                id,
                from: from_id,
                to: to_id,
                label,
                ordinal,
            },
        );
        self.outgoing.entry(from_id).or_default().push(id);
        self.incoming.entry(to_id).or_default().push(id);
        Ok(id)
    }

    pub fn remove_edge(&mut self, id: EdgeId) -> Result<Edge, GraphError> {
        let edge = self.edges.remove(&id).ok_or(GraphError::UnknownEdge(id.0))?;
        if let Some(v) = self.outgoing.get_mut(&edge.from) {
            v.retain(|e| *e != id);
        }
        if let Some(v) = self.incoming.get_mut(&edge.to) {
            v.retain(|e| *e != id);
        }
        Ok(edge)
    }

    pub fn kind_chain(&self, name: &str) -> Result<Vec<String>, GraphError> {
        let id = self.resolve(name)?;
        Ok(self.kinds.chain(&self.get(id).kind))
    }

    /// Entities holding a `watches prop` edge to `entity`, in ordinal order.
    pub fn watchers_of(&self, entity: EntityId, prop: &str) -> Vec<EntityId> {
        self.incoming
            .get(&entity)
            .into_iter()
            .flatten()
            .map(|e| &self.edges[e])
            .filter(|e| matches!(&e.label, EdgeLabel::Watches(p) if p == prop))
            .map(|e| e.from)
            .collect()
    }

    /// Targets of outgoing Sets edges, in ordinal order.
    pub fn set_targets_of(&self, entity: EntityId) -> Vec<(EntityId, String)> {
        self.outgoing
            .get(&entity)
            .into_iter()
            .flatten()
            .map(|e| &self.edges[e])
            .filter_map(|e| match &e.label {
                EdgeLabel::Sets(p) => Some((e.to, p.clone())),
                _ => None,
            })
            .collect()
    }

    /// Targets of outgoing `messages` edges, in ordinal order.
    pub fn message_targets_of(&self, entity: EntityId) -> Vec<EntityId> {
        self.outgoing
            .get(&entity)
            .into_iter()
            .flatten()
            .map(|e| &self.edges[e])
            .filter(|e| e.label == EdgeLabel::Messages)
            .map(|e| e.to)
            .collect()
    }

    /// Name-keyed convenience wrapper over [`Graph::watchers_of`].
    pub fn watchers_named(&self, entity: &str, prop: &str) -> Result<Vec<String>, GraphError> {
        let id = self.resolve(entity)?;
        Ok(self
            .watchers_of(id, prop)
            .into_iter()
            .map(|w| self.name_of(w).to_string())
            .collect())
    }

    pub fn set_targets_named(&self, entity: &str) -> Result<Vec<(String, String)>, GraphError> {
        let id = self.resolve(entity)?;
        Ok(self
            .set_targets_of(id)
            .into_iter()
            .map(|(t, p)| (self.name_of(t).to_string(), p))
            .collect())
    }

    /// Checks that `value` may be assigned to `entity.prop` without mutating.
    pub fn check_assignment(
        &self,
        entity: EntityId,
        prop: &str,
        value: &Value,
    ) -> Result<&Property, GraphError> {
        let e = self.get(entity);
        let p = e.property(prop).ok_or_else(|| GraphError::UnknownProperty {
            entity: e.name.clone(),
            prop: prop.to_string(),
        })?;
        let type_err = |source| GraphError::Type {
            entity: e.name.clone(),
            prop: prop.to_string(),
            source,
        };
        value.validate().map_err(type_err)?;
        if !p.declared_type.admits(value) {
            return Err(type_err(ValueError::TypeMismatch {
                expected: p.declared_type,
                found: value.tag(),
            }));
        }
        Ok(p)
    }

    /// Writes a value and version directly. Callers have already checked the
    /// assignment.
    pub(crate) fn write(&mut self, entity: EntityId, prop: &str, value: Value, version: u64) {
        let p = self
            .entities
            .get_mut(&entity)
            .and_then(|e| e.properties.get_mut(prop))
            .expect("checked assignment");
        p.value = value;
        p.version = version;
    }

    /// Builder sugar: one `sets prop` edge from `source` to each target.
    ///
    /// Targets lacking `prop` get it declared as `any`/null first. All-or-nothing.
    pub fn sets(
        &mut self,
        source: &str,
        prop: &str,
        targets: &[&str],
    ) -> Result<Vec<EdgeId>, GraphError> {
        self.connect_all(targets, prop, |g, target| {
            g.add_edge_labeled(source, target, EdgeLabel::sets(prop))
        })
    }

    /// Builder sugar: one `watches prop` edge from `watcher` to each target.
    pub fn watch(
        &mut self,
        watcher: &str,
        prop: &str,
        targets: &[&str],
    ) -> Result<Vec<EdgeId>, GraphError> {
        self.resolve(watcher)?;
        self.connect_all(targets, prop, |g, target| {
            g.add_edge_labeled(watcher, target, EdgeLabel::watches(prop))
        })
    }

    fn connect_all(
        &mut self,
        targets: &[&str],
        prop: &str,
        mut connect: impl FnMut(&mut Graph, &str) -> Result<EdgeId, GraphError>,
    ) -> Result<Vec<EdgeId>, GraphError> {
        if !is_identifier(prop) {
            return Err(GraphError::InvalidName(prop.to_string()));
        }
        let snapshot = self.clone();
        let result = targets
            .iter()
            .map(|target| {
                let id = self.resolve(target)?;
                if self.get(id).property(prop).is_none() {
                    self.declare_property(target, PropertyDecl::new(prop, ValueType::Any, Value::Null))?;
                }
                connect(self, target)
            })
            .collect::<Result<Vec<_>, _>>();
        if result.is_err() {
            *self = snapshot;
        }
        result
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kind::*;
    use crate::value::Code;

    fn stub_code() -> Value {
        Value::Code(Code::builtin("identity"))
    }

    fn fig3() -> Graph {
        let mut g = Graph::default();
        g.create_entity(
            "Training Data",
            ENTITY,
            vec![PropertyDecl::new("data", ValueType::Array, Value::link("file:train.v0"))],
        )
        .unwrap();
        g.create_entity(
            "CLIPAgent",
            AGENT_ENTITY,
            vec![PropertyDecl::new(props::SOURCE_CODE, ValueType::Code, stub_code())],
        )
        .unwrap();
        g.create_entity("TrainDataGallery", GALLERY_ENTITY, vec![]).unwrap();
        g.create_entity(
            "Prompt",
            ENTITY,
            vec![PropertyDecl::new("word", ValueType::String, Value::Null)],
        )
        .unwrap();
        g
    }

    #[test]
    fn create_entity_with_link_valued_array() {
        let g = fig3();
        let td = g.entity_by_name("Training Data").unwrap();
        let data = td.property("data").unwrap();
        assert_eq!(data.declared_type, ValueType::Array);
        assert_eq!(data.value, Value::link("file:train.v0"));
        assert_eq!(data.version, 0);
        assert_eq!(g.kind_chain("Training Data").unwrap(), vec![ENTITY]);
    }

    #[test]
    fn bare_entity() {
        let mut g = Graph::default();
        g.create_entity("E", ENTITY, vec![]).unwrap();
        assert_eq!(g.kind_chain("E").unwrap(), vec!["Entity"]);
        assert!(g.entity_by_name("E").unwrap().properties.is_empty());
    }

    #[test]
    fn agent_schema_fill() {
        let g = fig3();
        let a = g.entity_by_name("CLIPAgent").unwrap();
        assert_eq!(a.value("input"), Some(&Value::Null));
        assert_eq!(a.value("output"), Some(&Value::Null));
        assert_eq!(a.value("status"), Some(&Value::string("idle")));
        assert_eq!(a.value("requirements"), Some(&Value::Array(vec![])));
        assert_eq!(a.value("source code"), Some(&stub_code()));
        assert!(a.properties.values().all(|p| p.version == 0));
    }

    #[test]
    fn create_entity_errors() {
        let mut g = fig3();
        assert_eq!(
            g.create_entity("Prompt", ENTITY, vec![]).unwrap_err(),
            GraphError::DuplicateName("Prompt".into())
        );
        assert_eq!(
            g.create_entity("X", "Widget", vec![]).unwrap_err(),
            GraphError::UnknownKind("Widget".into())
        );
        let err = g
            .create_entity(
                "A2",
                AGENT_ENTITY,
                vec![PropertyDecl::new(props::SOURCE_CODE, ValueType::String, "print(1)")],
            )
            .unwrap_err();
        assert!(matches!(err, GraphError::SchemaViolation { .. }), "{err:?}");
        let err = g
            .create_entity("N", ENTITY, vec![PropertyDecl::new("n", ValueType::Number, "x")])
            .unwrap_err();
        assert!(matches!(err, GraphError::SchemaViolation { .. }));
        assert!(g.create_entity("", ENTITY, vec![]).is_err());
        // Failed creations leave nothing behind.
        assert!(g.entity_by_name("A2").is_none());
        assert!(g.entity_by_name("N").is_none());
    }

    #[test]
    fn schema_any_may_be_narrowed() {
        let mut g = Graph::default();
        g.create_entity(
            "A",
            AGENT_ENTITY,
            vec![PropertyDecl::new("input", ValueType::String, Value::Null)],
        )
        .unwrap();
        assert_eq!(
            g.entity_by_name("A").unwrap().property("input").unwrap().declared_type,
            ValueType::String
        );
    }

    #[test]
    fn add_edge_examples() {
        let mut g = fig3();
        g.add_edge("CLIPAgent", "Training Data", "sets data").unwrap();
        g.add_edge("TrainDataGallery", "Training Data", "watches data").unwrap();
        assert_eq!(
            g.add_edge("TrainDataGallery", "Training Data", "watchesdata").unwrap_err(),
            GraphError::BadLabelGrammar("watchesdata".into())
        );
    }

    #[test]
    fn add_edge_errors() {
        let mut g = fig3();
        assert_eq!(
            g.add_edge("Nope", "Prompt", "watches word").unwrap_err(),
            GraphError::UnknownEntity("Nope".into())
        );
        assert!(matches!(
            g.add_edge("CLIPAgent", "Prompt", "watches wrod").unwrap_err(),
            GraphError::DanglingProperty { .. }
        ));
        g.add_edge("CLIPAgent", "Prompt", "watches word").unwrap();
        assert!(matches!(
            g.add_edge("CLIPAgent", "Prompt", "watches word").unwrap_err(),
            GraphError::DuplicateEdge { .. }
        ));
        assert_eq!(
            g.add_edge("CLIPAgent", "Prompt", "is a").unwrap_err(),
            GraphError::KindChangeForbidden("CLIPAgent".into())
        );
    }

    #[test]
    fn lax_mode_allows_dangling_properties() {
        let mut g = Graph::new(false);
        g.create_entity("A", ENTITY, vec![]).unwrap();
        g.create_entity("B", ENTITY, vec![]).unwrap();
        g.add_edge("A", "B", "watches ghost").unwrap();
    }

    #[test]
    fn kind_chain_through_custom_kind() {
        let mut g = Graph::default();
        g.register_kind(KindSchema {
            name: "C".into(),
            parent: Some(GALLERY_ENTITY.into()),
            properties: vec![],
        })
        .unwrap();
        g.create_entity("c", "C", vec![]).unwrap();
        assert_eq!(
            g.kind_chain("c").unwrap(),
            vec!["C", GALLERY_ENTITY, DISPLAY_ENTITY, ENTITY]
        );
        g.create_entity("gal", GALLERY_ENTITY, vec![]).unwrap();
        assert_eq!(
            g.kind_chain("gal").unwrap(),
            vec![GALLERY_ENTITY, DISPLAY_ENTITY, ENTITY]
        );
    }

    #[test]
    fn watchers_in_ordinal_order() {
        let mut g = fig3();
        g.create_entity("A", GALLERY_ENTITY, vec![]).unwrap();
        g.create_entity("B", GALLERY_ENTITY, vec![]).unwrap();
        g.add_edge("B", "Prompt", "watches word").unwrap();
        g.add_edge("A", "Prompt", "watches word").unwrap();
        assert_eq!(g.watchers_named("Prompt", "word").unwrap(), vec!["B", "A"]);
        assert!(g.watchers_named("Prompt", "nosuch").unwrap().is_empty());
        // Unrelated mutation does not disturb the answer.
        g.create_entity("Z", ENTITY, vec![]).unwrap();
        g.add_edge("CLIPAgent", "Training Data", "sets data").unwrap();
        assert_eq!(g.watchers_named("Prompt", "word").unwrap(), vec!["B", "A"]);
    }

    #[test]
    fn set_targets() {
        let mut g = fig3();
        g.add_edge("CLIPAgent", "Training Data", "sets data").unwrap();
        assert_eq!(
            g.set_targets_named("CLIPAgent").unwrap(),
            vec![("Training Data".to_string(), "data".to_string())]
        );
        assert!(g.set_targets_named("Prompt").unwrap().is_empty());

        g.create_entity("in", INPUT_ENTITY, vec![]).unwrap();
        g.create_entity("t1", ENTITY, vec![PropertyDecl::new("x", ValueType::Any, Value::Null)])
            .unwrap();
        g.add_edge("in", "t1", "sets x").unwrap();
        g.add_edge("in", "Prompt", "sets word").unwrap();
        assert_eq!(
            g.set_targets_named("in").unwrap(),
            vec![("t1".into(), "x".into()), ("Prompt".into(), "word".into())]
        );
    }

    #[test]
    fn builder_sugar() {
        let mut g = fig3();
        g.create_entity("t1", ENTITY, vec![]).unwrap();
        g.create_entity("t2", ENTITY, vec![]).unwrap();
        assert!(g.sets("CLIPAgent", "data", &[]).unwrap().is_empty());
        let ids = g.sets("CLIPAgent", "data", &["t1", "t2"]).unwrap();
        assert_eq!(ids.len(), 2);
        let ords: Vec<u64> = ids.iter().map(|id| g.edge(*id).unwrap().ordinal).collect();
        assert_eq!(ords[1], ords[0] + 1);
        let w = g.watch("CLIPAgent", "word", &["Prompt"]).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(g.edge(w[0]).unwrap().label, EdgeLabel::watches("word"));
    }

    #[test]
    fn builder_is_all_or_nothing() {
        let mut g = fig3();
        g.create_entity("t1", ENTITY, vec![]).unwrap();
        let before = g.edges().count();
        assert!(g.sets("CLIPAgent", "data", &["t1", "missing"]).is_err());
        assert_eq!(g.edges().count(), before);
        assert!(g.entity_by_name("t1").unwrap().property("data").is_none());
    }

    #[test]
    fn remove_entity_drops_incident_edges() {
        let mut g = fig3();
        g.add_edge("CLIPAgent", "Training Data", "sets data").unwrap();
        g.add_edge("TrainDataGallery", "Training Data", "watches data").unwrap();
        let removed = g.remove_entity("CLIPAgent").unwrap();
        assert_eq!(removed.len(), 1);
        assert_eq!(g.edges().count(), 1);
        assert!(g.entity_by_name("CLIPAgent").is_none());
        let td = g.id_of("Training Data").unwrap();
        assert_eq!(g.watchers_of(td, "data").len(), 1);
    }

    #[test]
    fn check_assignment_types() {
        let g = fig3();
        let prompt = g.id_of("Prompt").unwrap();
        assert!(g.check_assignment(prompt, "word", &Value::string("bulldozer")).is_ok());
        assert!(matches!(
            g.check_assignment(prompt, "word", &Value::Number(42.0)),
            Err(GraphError::Type { .. })
        ));
        assert!(matches!(
            g.check_assignment(prompt, "nosuch", &Value::Null),
            Err(GraphError::UnknownProperty { .. })
        ));
    }
}

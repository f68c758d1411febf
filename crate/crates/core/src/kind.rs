//! Kind schemas and the "is a" hierarchy.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::GraphError;
use crate::label::is_identifier;
use crate::value::{Value, ValueType};

pub const ENTITY: &str = "Entity";
pub const AGENT_ENTITY: &str = "AgentEntity";
pub const DISPLAY_ENTITY: &str = "DisplayEntity";
pub const GALLERY_ENTITY: &str = "GalleryEntity";
pub const GRAPH_ENTITY: &str = "GraphEntity";
pub const STATUS_ENTITY: &str = "StatusEntity";
pub const LOG_ENTITY: &str = "LogEntity";
pub const CODE_EDITOR_ENTITY: &str = "CodeEditorEntity";
pub const INPUT_ENTITY: &str = "InputEntity";
pub const BUTTON_ENTITY: &str = "ButtonEntity";

/// Well-known property names.
pub mod props {
    pub const SOURCE_CODE: &str = "source code";
    pub const INPUT: &str = "input";
    pub const OUTPUT: &str = "output";
    pub const REQUIREMENTS: &str = "requirements";
    pub const STATUS: &str = "status";
    pub const VALUE: &str = "value";
    pub const LINES: &str = "lines";
    pub const MESSAGE: &str = "message";
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaProperty {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: ValueType,
    /// Fill value when the property is not declared; `null` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<Value>,
}

impl SchemaProperty {
    pub fn new(name: &str, ty: ValueType) -> Self {
        SchemaProperty {
            name: name.to_string(),
            ty,
            default: None,
        }
    }

    fn with_default(mut self, v: Value) -> Self {
        self.default = Some(v);
        self
    }

    pub fn fill_value(&self) -> Value {
        self.default.clone().unwrap_or(Value::Null)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KindSchema {
    pub name: String,
    /// `None` only for the root kind `Entity`.
    pub parent: Option<String>,
    #[serde(default)]
    pub properties: Vec<SchemaProperty>,
}

/// Which kind-level role an entity plays during propagation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Agent,
    Input,
    Display,
    Button,
    Plain,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KindRegistry {
    kinds: IndexMap<String, KindSchema>,
}

impl Default for KindRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl KindRegistry {
    pub fn builtin() -> Self {
        use ValueType as T;
        let mut kinds = IndexMap::new();
        let mut add = |name: &str, parent: Option<&str>, properties: Vec<SchemaProperty>| {
            kinds.insert(
                name.to_string(),
                KindSchema {
                    name: name.to_string(),
                    parent: parent.map(str::to_string),
                    properties,
                },
            );
        };
        add(ENTITY, None, vec![]);
        add(
            AGENT_ENTITY,
            Some(ENTITY),
            vec![
                SchemaProperty::new(props::SOURCE_CODE, T::Code),
                SchemaProperty::new(props::INPUT, T::Any),
                SchemaProperty::new(props::OUTPUT, T::Any),
                SchemaProperty::new(props::REQUIREMENTS, T::Array)
                    .with_default(Value::Array(vec![])),
                SchemaProperty::new(props::STATUS, T::String).with_default(Value::string("idle")),
            ],
        );
        add(DISPLAY_ENTITY, Some(ENTITY), vec![]);
        add(
            GALLERY_ENTITY,
            Some(DISPLAY_ENTITY),
            vec![
                SchemaProperty::new("background", T::String),
                SchemaProperty::new("border", T::String),
            ],
        );
        add(
            GRAPH_ENTITY,
            Some(DISPLAY_ENTITY),
            vec![SchemaProperty::new("title", T::String)],
        );
        add(STATUS_ENTITY, Some(DISPLAY_ENTITY), vec![]);
        add(
            LOG_ENTITY,
            Some(DISPLAY_ENTITY),
            vec![SchemaProperty::new(props::LINES, T::Array).with_default(Value::Array(vec![]))],
        );
        add(CODE_EDITOR_ENTITY, Some(DISPLAY_ENTITY), vec![]);
        add(
            INPUT_ENTITY,
            Some(ENTITY),
            vec![
                SchemaProperty::new("label", T::String),
                SchemaProperty::new(props::VALUE, T::Any),
            ],
        );
        add(
            BUTTON_ENTITY,
            Some(ENTITY),
            vec![
                SchemaProperty::new("label", T::String),
                SchemaProperty::new(props::MESSAGE, T::String),
            ],
        );
        KindRegistry { kinds }
    }

    pub fn is_builtin(name: &str) -> bool {
        matches!(
            name,
            ENTITY
                | AGENT_ENTITY
                | DISPLAY_ENTITY
                | GALLERY_ENTITY
                | GRAPH_ENTITY
                | STATUS_ENTITY
                | LOG_ENTITY
                | CODE_EDITOR_ENTITY
                | INPUT_ENTITY
                | BUTTON_ENTITY
        )
    }

    pub fn get(&self, name: &str) -> Option<&KindSchema> {
        self.kinds.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.kinds.contains_key(name)
    }

    /// Registers a custom kind that "is a" `parent`.
    pub fn register(&mut self, schema: KindSchema) -> Result<(), GraphError> {
        if !is_identifier(&schema.name) {
            return Err(GraphError::InvalidName(schema.name));
        }
        if self.kinds.contains_key(&schema.name) {
            return Err(GraphError::DuplicateKind(schema.name));
        }
        let parent = schema
            .parent
            .as_deref()
            .ok_or_else(|| GraphError::UnknownKind(String::new()))?;
        if !self.kinds.contains_key(parent) {
            return Err(GraphError::UnknownKind(parent.to_string()));
        }
        for p in &schema.properties {
            if !is_identifier(&p.name) {
                return Err(GraphError::InvalidName(p.name.clone()));
            }
        }
        self.kinds.insert(schema.name.clone(), schema);
        Ok(())
    }

    /// Custom kinds in registration order.
    pub fn custom(&self) -> impl Iterator<Item = &KindSchema> {
        self.kinds.values().filter(|k| !Self::is_builtin(&k.name))
    }

    /// `kind` up to `Entity`, inclusive. Empty if `kind` is unknown.
    pub fn chain(&self, kind: &str) -> Vec<String> {
        let mut out = Vec::new();
        let mut cursor = self.kinds.get(kind);
        while let Some(k) = cursor {
            out.push(k.name.clone());
            cursor = k.parent.as_deref().and_then(|p| self.kinds.get(p));
        }
        out
    }

    pub fn is_a(&self, kind: &str, ancestor: &str) -> bool {
        let mut cursor = self.kinds.get(kind);
        while let Some(k) = cursor {
            if k.name == ancestor {
                return true;
            }
            cursor = k.parent.as_deref().and_then(|p| self.kinds.get(p));
        }
        false
    }

    /// Required properties of `kind`, most-derived declaration first.
    pub fn schema_properties(&self, kind: &str) -> Vec<&SchemaProperty> {
        let mut seen = std::collections::HashSet::new();
        let mut out = Vec::new();
        let mut cursor = self.kinds.get(kind);
        while let Some(k) = cursor {
            for p in &k.properties {
                if seen.insert(p.name.as_str()) {
                    out.push(p);
                }
            }
            cursor = k.parent.as_deref().and_then(|p| self.kinds.get(p));
        }
        out
    }

    pub fn role(&self, kind: &str) -> Role {
        if self.is_a(kind, AGENT_ENTITY) {
            Role::Agent
        } else if self.is_a(kind, INPUT_ENTITY) {
            Role::Input
        } else if self.is_a(kind, DISPLAY_ENTITY) {
            Role::Display
        } else if self.is_a(kind, BUTTON_ENTITY) {
            Role::Button
        } else {
            Role::Plain
        }
    }

    /// The property whose change fires outgoing Sets edges.
    pub fn emission_property(&self, kind: &str) -> Option<&'static str> {
        match self.role(kind) {
            Role::Agent => Some(props::OUTPUT),
            Role::Input => Some(props::VALUE),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_chains() {
        let k = KindRegistry::builtin();
        assert_eq!(k.chain(GALLERY_ENTITY), vec![GALLERY_ENTITY, DISPLAY_ENTITY, ENTITY]);
        assert_eq!(k.chain(ENTITY), vec![ENTITY]);
        assert!(k.chain("Nope").is_empty());
    }

    #[test]
    fn custom_kind_extends_builtin() {
        let mut k = KindRegistry::builtin();
        k.register(KindSchema {
            name: "FramedGallery".into(),
            parent: Some(GALLERY_ENTITY.into()),
            properties: vec![SchemaProperty::new("frame", ValueType::Number)],
        })
        .unwrap();
        assert_eq!(
            k.chain("FramedGallery"),
            vec!["FramedGallery", GALLERY_ENTITY, DISPLAY_ENTITY, ENTITY]
        );
        let names: Vec<_> = k
            .schema_properties("FramedGallery")
            .iter()
            .map(|p| p.name.as_str())
            .collect();
        assert_eq!(names, vec!["frame", "background", "border"]);
        assert_eq!(k.role("FramedGallery"), Role::Display);
        assert_eq!(k.custom().count(), 1);
    }

    #[test]
    fn custom_kind_needs_known_parent() {
        let mut k = KindRegistry::builtin();
        let err = k
            .register(KindSchema {
                name: "X".into(),
                parent: Some("Missing".into()),
                properties: vec![],
            })
            .unwrap_err();
        assert_eq!(err, GraphError::UnknownKind("Missing".into()));
        assert!(k
            .register(KindSchema {
                name: ENTITY.into(),
                parent: Some(ENTITY.into()),
                properties: vec![]
            })
            .is_err());
    }

    #[test]
    fn emission_properties() {
        let k = KindRegistry::builtin();
        assert_eq!(k.emission_property(AGENT_ENTITY), Some("output"));
        assert_eq!(k.emission_property(INPUT_ENTITY), Some("value"));
        assert_eq!(k.emission_property(GALLERY_ENTITY), None);
        assert_eq!(k.emission_property(ENTITY), None);
    }
}

use thiserror::Error;

use crate::value::ValueType;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValueError {
    #[error("unknown value type `{0}`")]
    UnknownType(String),
    #[error("invalid value: {0}")]
    Invalid(String),
    #[error("expected {expected}, found {found}")]
    TypeMismatch {
        expected: ValueType,
        found: ValueType,
    },
}

/// Structural errors raised by the graph and program loader.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("entity name `{0}` is already in use")]
    DuplicateName(String),
    #[error("invalid name `{0}`")]
    InvalidName(String),
    #[error("unknown kind `{0}`")]
    UnknownKind(String),
    #[error("kind `{0}` is already registered")]
    DuplicateKind(String),
    #[error("schema violation on {entity}.{prop}: {detail}")]
    SchemaViolation {
        entity: String,
        prop: String,
        detail: String,
    },
    #[error("unknown entity `{0}`")]
    UnknownEntity(String),
    #[error("unknown property {entity}.{prop}")]
    UnknownProperty { entity: String, prop: String },
    #[error("property {entity}.{prop} already exists")]
    DuplicateProperty { entity: String, prop: String },
    #[error("bad edge label `{0}`")]
    BadLabelGrammar(String),
    #[error("edge `{label}` refers to missing property {entity}.{prop}")]
    DanglingProperty {
        entity: String,
        prop: String,
        label: String,
    },
    #[error("duplicate edge {from} -[{label}]-> {to}")]
    DuplicateEdge {
        from: String,
        to: String,
        label: String,
    },
    #[error("unknown edge {0}")]
    UnknownEdge(u64),
    #[error("kind of `{0}` cannot change after creation")]
    KindChangeForbidden(String),
    #[error("type error on {entity}.{prop}: {source}")]
    Type {
        entity: String,
        prop: String,
        #[source]
        source: ValueError,
    },
    #[error("invalid program at {locus}: {source}")]
    Validation {
        locus: String,
        #[source]
        source: Box<GraphError>,
    },
}

impl GraphError {
    pub(crate) fn at(self, locus: impl Into<String>) -> GraphError {
        GraphError::Validation {
            locus: locus.into(),
            source: Box::new(self),
        }
    }

    /// Stable machine-readable code used by the HTTP API.
    pub fn code(&self) -> &'static str {
        match self {
            GraphError::DuplicateName(_) => "duplicate_name",
            GraphError::InvalidName(_) => "invalid_name",
            GraphError::UnknownKind(_) => "unknown_kind",
            GraphError::DuplicateKind(_) => "duplicate_kind",
            GraphError::SchemaViolation { .. } => "schema_violation",
            GraphError::UnknownEntity(_) => "unknown_entity",
            GraphError::UnknownProperty { .. } => "unknown_property",
            GraphError::DuplicateProperty { .. } => "duplicate_property",
            GraphError::BadLabelGrammar(_) => "bad_label_grammar",
            GraphError::DanglingProperty { .. } => "dangling_property",
            GraphError::DuplicateEdge { .. } => "duplicate_edge",
            GraphError::UnknownEdge(_) => "unknown_edge",
            GraphError::KindChangeForbidden(_) => "kind_change_forbidden",
            GraphError::Type { .. } => "type_error",
            GraphError::Validation { .. } => "validation_error",
        }
    }
}

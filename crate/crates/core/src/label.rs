//! Edge labels and their string grammar:
//! `"is a" | "watches " prop | "sets " prop | "messages"`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::GraphError;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EdgeLabel {
    IsA,
    Watches(String),
    Sets(String),
    Messages,
}

impl EdgeLabel {
    pub fn watches(prop: impl Into<String>) -> Self {
        EdgeLabel::Watches(prop.into())
    }

    pub fn sets(prop: impl Into<String>) -> Self {
        EdgeLabel::Sets(prop.into())
    }

    /// The property named by a watches/sets label.
    pub fn property(&self) -> Option<&str> {
        match self {
            EdgeLabel::Watches(p) | EdgeLabel::Sets(p) => Some(p),
            _ => None,
        }
    }
}

/// Property and entity names: letters, digits, underscore and inner spaces.
pub fn is_identifier(s: &str) -> bool {
    !s.is_empty()
        && !s.starts_with(' ')
        && !s.ends_with(' ')
        && s.chars().all(|c| c.is_alphanumeric() || c == '_' || c == ' ')
}

impl fmt::Display for EdgeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EdgeLabel::IsA => f.write_str("is a"),
            EdgeLabel::Watches(p) => write!(f, "watches {p}"),
            EdgeLabel::Sets(p) => write!(f, "sets {p}"),
            EdgeLabel::Messages => f.write_str("messages"),
        }
    }
}

impl FromStr for EdgeLabel {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || GraphError::BadLabelGrammar(s.to_string());
        match s {
            "is a" => Ok(EdgeLabel::IsA),
            "messages" => Ok(EdgeLabel::Messages),
            _ => {
                let (ctor, prop): (fn(String) -> EdgeLabel, &str) =
                    if let Some(p) = s.strip_prefix("watches ") {
                        (EdgeLabel::Watches, p)
                    } else if let Some(p) = s.strip_prefix("sets ") {
                        (EdgeLabel::Sets, p)
                    } else {
                        return Err(bad());
                    };
                if is_identifier(prop) {
                    Ok(ctor(prop.to_string()))
                } else {
                    Err(bad())
                }
            }
        }
    }
}

impl Serialize for EdgeLabel {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for EdgeLabel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

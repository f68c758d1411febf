//! The primitive type system: value tags, tagged values, and their canonical
//! JSON encoding.
//!
//! Encoding rules (shared by program documents, the HTTP API, the event log
//! and the agent subprocess contract):
//!
//! | tag       | JSON                                              |
//! |-----------|---------------------------------------------------|
//! | `string`  | string                                            |
//! | `number`  | number (integral doubles print without fraction)  |
//! | `boolean` | `true` / `false`                                  |
//! | `array`   | array of values                                   |
//! | `record`  | object of values                                  |
//! | `link`    | `{"link": s}`                                     |
//! | `tensor`  | `{"shape": [..], "data": [..]}`                   |
//! | `code`    | `{"language": s, "entrypoint": s, "text": s}`     |
//! | `null`    | `null`                                            |
//!
//! Objects are decoded as link/tensor/code when their key set matches one of
//! those shapes exactly; every other object is a record.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{Map, Number, Value as Json};

use crate::error::ValueError;

/// Largest magnitude at which every integer is exactly representable as f64.
const MAX_EXACT_INT: f64 = 9_007_199_254_740_992.0;

/// Declared type of a property.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ValueType {
    String,
    Number,
    Boolean,
    Array,
    Record,
    Link,
    Tensor,
    Code,
    Null,
    /// Declaration-only wildcard. Never the tag of a runtime value.
    Any,
}

impl ValueType {
    pub const ALL: [ValueType; 10] = [
        ValueType::String,
        ValueType::Number,
        ValueType::Boolean,
        ValueType::Array,
        ValueType::Record,
        ValueType::Link,
        ValueType::Tensor,
        ValueType::Code,
        ValueType::Null,
        ValueType::Any,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ValueType::String => "string",
            ValueType::Number => "number",
            ValueType::Boolean => "boolean",
            ValueType::Array => "array",
            ValueType::Record => "record",
            ValueType::Link => "link",
            ValueType::Tensor => "tensor",
            ValueType::Code => "code",
            ValueType::Null => "null",
            ValueType::Any => "any",
        }
    }

    /// Whether a property declared with this type may hold `value`.
    ///
    /// `null` fits every declaration, and so does a link: a link names where
    /// a value of the declared type is stored.
    pub fn admits(self, value: &Value) -> bool {
        match (self, value) {
            (ValueType::Any, _) | (_, Value::Null) | (_, Value::Link(_)) => true,
            (declared, v) => v.tag() == declared,
        }
    }
}

impl fmt::Display for ValueType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ValueType {
    type Err = ValueError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ValueType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| ValueError::UnknownType(s.to_string()))
    }
}

impl Serialize for ValueType {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for ValueType {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Dense n-dimensional array of doubles. Empty shape is a scalar.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<u64>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<u64>, data: Vec<f64>) -> Result<Self, ValueError> {
        let t = Tensor { shape, data };
        t.validate()?;
        Ok(t)
    }

    fn validate(&self) -> Result<(), ValueError> {
        let expected = self
            .shape
            .iter()
            .try_fold(1u64, |acc, d| acc.checked_mul(*d))
            .ok_or_else(|| ValueError::Invalid("tensor shape overflows".into()))?;
        if expected != self.data.len() as u64 {
            return Err(ValueError::Invalid(format!(
                "tensor shape {:?} needs {} elements, got {}",
                self.shape,
                expected,
                self.data.len()
            )));
        }
        if let Some(bad) = self.data.iter().find(|x| !x.is_finite()) {
            return Err(ValueError::Invalid(format!("tensor element {bad} is not finite")));
        }
        Ok(())
    }
}

/// Graph-resident source code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Code {
    pub language: String,
    pub entrypoint: String,
    pub text: String,
}

impl Code {
    pub fn new(
        language: impl Into<String>,
        entrypoint: impl Into<String>,
        text: impl Into<String>,
    ) -> Result<Self, ValueError> {
        let c = Code {
            language: language.into(),
            entrypoint: entrypoint.into(),
            text: text.into(),
        };
        c.validate()?;
        Ok(c)
    }

    /// A named built-in function such as `"uppercase"` or `"sleep:2"`.
    pub fn builtin(function: impl Into<String>) -> Self {
        Code {
            language: "builtin".into(),
            entrypoint: "main".into(),
            text: function.into(),
        }
    }

    fn validate(&self) -> Result<(), ValueError> {
        if self.language.is_empty() {
            return Err(ValueError::Invalid("code language is empty".into()));
        }
        if self.text.is_empty() {
            return Err(ValueError::Invalid("code text is empty".into()));
        }
        Ok(())
    }
}

/// A runtime value. The tag is never [`ValueType::Any`].
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Value {
    #[default]
    Null,
    String(String),
    Number(f64),
    Boolean(bool),
    Array(Vec<Value>),
    Record(BTreeMap<String, Value>),
    Link(String),
    Tensor(Tensor),
    Code(Code),
}

impl Value {
    pub fn tag(&self) -> ValueType {
        match self {
            Value::Null => ValueType::Null,
            Value::String(_) => ValueType::String,
            Value::Number(_) => ValueType::Number,
            Value::Boolean(_) => ValueType::Boolean,
            Value::Array(_) => ValueType::Array,
            Value::Record(_) => ValueType::Record,
            Value::Link(_) => ValueType::Link,
            Value::Tensor(_) => ValueType::Tensor,
            Value::Code(_) => ValueType::Code,
        }
    }

    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::String(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_code(&self) -> Option<&Code> {
        match self {
            Value::Code(c) => Some(c),
            _ => None,
        }
    }

    pub fn as_array(&self) -> Option<&[Value]> {
        match self {
            Value::Array(a) => Some(a),
            _ => None,
        }
    }

    pub fn link(locator: impl Into<String>) -> Self {
        Value::Link(locator.into())
    }

    pub fn string(s: impl Into<String>) -> Self {
        Value::String(s.into())
    }

    /// Checks the payload invariants recursively.
    pub fn validate(&self) -> Result<(), ValueError> {
        match self {
            Value::Number(n) if !n.is_finite() => {
                Err(ValueError::Invalid(format!("number {n} is not finite")))
            }
            Value::Link(l) if l.is_empty() => Err(ValueError::Invalid("empty link locator".into())),
            Value::Tensor(t) => t.validate(),
            Value::Code(c) => c.validate(),
            Value::Array(items) => items.iter().try_for_each(Value::validate),
            Value::Record(fields) => fields.values().try_for_each(Value::validate),
            _ => Ok(()),
        }
    }

    pub fn to_json(&self) -> Json {
        match self {
            Value::Null => Json::Null,
            Value::String(s) => Json::String(s.clone()),
            Value::Number(n) => number_to_json(*n),
            Value::Boolean(b) => Json::Bool(*b),
            Value::Array(items) => Json::Array(items.iter().map(Value::to_json).collect()),
            Value::Record(fields) => Json::Object(
                fields
                    .iter()
                    .map(|(k, v)| (k.clone(), v.to_json()))
                    .collect(),
            ),
            Value::Link(l) => {
                let mut m = Map::new();
                m.insert("link".into(), Json::String(l.clone()));
                Json::Object(m)
            }
            Value::Tensor(t) => {
                let mut m = Map::new();
                m.insert(
                    "data".into(),
                    Json::Array(t.data.iter().map(|x| number_to_json(*x)).collect()),
                );
                m.insert(
                    "shape".into(),
                    Json::Array(t.shape.iter().map(|d| Json::from(*d)).collect()),
                );
                Json::Object(m)
            }
            Value::Code(c) => {
                let mut m = Map::new();
                m.insert("entrypoint".into(), Json::String(c.entrypoint.clone()));
                m.insert("language".into(), Json::String(c.language.clone()));
                m.insert("text".into(), Json::String(c.text.clone()));
                Json::Object(m)
            }
        }
    }

    /// Decodes without a declared type, using the object-shape rules.
    pub fn from_json(json: &Json) -> Result<Value, ValueError> {
        let v = match json {
            Json::Null => Value::Null,
            Json::Bool(b) => Value::Boolean(*b),
            Json::Number(n) => Value::Number(
                n.as_f64()
                    .ok_or_else(|| ValueError::Invalid(format!("number {n} out of range")))?,
            ),
            Json::String(s) => Value::String(s.clone()),
            Json::Array(items) => {
                Value::Array(items.iter().map(Value::from_json).collect::<Result<_, _>>()?)
            }
            Json::Object(m) => {
                if let Some(special) = decode_special(m)? {
                    special
                } else {
                    Value::Record(decode_record(m)?)
                }
            }
        };
        v.validate()?;
        Ok(v)
    }

    /// Decodes against a declared type, rejecting payloads the declaration
    /// does not admit.
    pub fn from_json_typed(json: &Json, declared: ValueType) -> Result<Value, ValueError> {
        let v = match (declared, json) {
            // A record whose keys happen to look like a tensor or code value
            // stays a record when the declaration says so.
            (ValueType::Record, Json::Object(m)) => match decode_special(m)? {
                Some(link @ Value::Link(_)) => link,
                _ => Value::Record(decode_record(m)?),
            },
            _ => Value::from_json(json)?,
        };
        if !declared.admits(&v) {
            return Err(ValueError::TypeMismatch {
                expected: declared,
                found: v.tag(),
            });
        }
        v.validate()?;
        Ok(v)
    }

    /// Canonical single-line encoding (sorted keys, integral numbers without
    /// fraction).
    pub fn to_canonical_string(&self) -> String {
        canonical_string(&self.to_json())
    }
}

fn decode_record(m: &Map<String, Json>) -> Result<BTreeMap<String, Value>, ValueError> {
    m.iter()
        .map(|(k, v)| Ok((k.clone(), Value::from_json(v)?)))
        .collect()
}

fn has_exact_keys(m: &Map<String, Json>, keys: &[&str]) -> bool {
    m.len() == keys.len() && keys.iter().all(|k| m.contains_key(*k))
}

fn decode_special(m: &Map<String, Json>) -> Result<Option<Value>, ValueError> {
    if has_exact_keys(m, &["link"]) {
        if let Some(Json::String(l)) = m.get("link") {
            return Ok(Some(Value::Link(l.clone())));
        }
    }
    if has_exact_keys(m, &["shape", "data"]) {
        if let (Some(Json::Array(shape)), Some(Json::Array(data))) = (m.get("shape"), m.get("data"))
        {
            let shape: Option<Vec<u64>> = shape.iter().map(Json::as_u64).collect();
            let data: Option<Vec<f64>> = data.iter().map(Json::as_f64).collect();
            if let (Some(shape), Some(data)) = (shape, data) {
                return Tensor::new(shape, data).map(|t| Some(Value::Tensor(t)));
            }
        }
    }
    if has_exact_keys(m, &["language", "entrypoint", "text"]) {
        if let (Some(Json::String(l)), Some(Json::String(e)), Some(Json::String(t))) =
            (m.get("language"), m.get("entrypoint"), m.get("text"))
        {
            return Code::new(l.clone(), e.clone(), t.clone()).map(|c| Some(Value::Code(c)));
        }
    }
    Ok(None)
}

fn number_to_json(n: f64) -> Json {
    if n.fract() == 0.0 && n.abs() < MAX_EXACT_INT && !(n == 0.0 && n.is_sign_negative()) {
        Json::Number(Number::from(n as i64))
    } else {
        Number::from_f64(n).map(Json::Number).unwrap_or(Json::Null)
    }
}

/// Re-encodes any JSON document with sorted object keys and no whitespace.
pub fn canonical_string(json: &Json) -> String {
    fn sort(json: &Json) -> Json {
        match json {
            Json::Object(m) => {
                let sorted: BTreeMap<&String, Json> = m.iter().map(|(k, v)| (k, sort(v))).collect();
                Json::Object(sorted.into_iter().map(|(k, v)| (k.clone(), v)).collect())
            }
            Json::Array(items) => Json::Array(items.iter().map(sort).collect()),
            other => other.clone(),
        }
    }
    sort(json).to_string()
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Value {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let json = Json::deserialize(d)?;
        Value::from_json(&json).map_err(serde::de::Error::custom)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::String(s.to_string())
    }
}

impl From<String> for Value {
    fn from(s: String) -> Self {
        Value::String(s)
    }
}

impl From<f64> for Value {
    fn from(n: f64) -> Self {
        Value::Number(n)
    }
}

impl From<bool> for Value {
    fn from(b: bool) -> Self {
        Value::Boolean(b)
    }
}

impl From<Code> for Value {
    fn from(c: Code) -> Self {
        Value::Code(c)
    }
}

impl From<Vec<Value>> for Value {
    fn from(items: Vec<Value>) -> Self {
        Value::Array(items)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn type_tags_round_trip() {
        for t in ValueType::ALL {
            assert_eq!(t.as_str().parse::<ValueType>().unwrap(), t);
        }
        assert!("integer".parse::<ValueType>().is_err());
    }

    #[test]
    fn object_shapes_decode_to_special_values() {
        assert_eq!(
            Value::from_json(&json!({"link": "file:train.v0"})).unwrap(),
            Value::link("file:train.v0")
        );
        let t = Value::from_json(&json!({"shape": [2, 2], "data": [1, 2, 3, 4.5]})).unwrap();
        assert_eq!(t.tag(), ValueType::Tensor);
        let c = Value::from_json(&json!({"language": "sh", "entrypoint": "", "text": "cat"}))
            .unwrap();
        assert_eq!(c.tag(), ValueType::Code);
        let r = Value::from_json(&json!({"src": "a.png", "label": "x", "positive": true})).unwrap();
        assert_eq!(r.tag(), ValueType::Record);
    }

    #[test]
    fn tensor_shape_must_match_data() {
        assert!(Tensor::new(vec![2, 3], vec![0.0; 5]).is_err());
        assert!(Tensor::new(vec![], vec![1.0]).is_ok());
        assert!(Tensor::new(vec![], vec![]).is_err());
        assert!(Value::from_json(&json!({"shape": [3], "data": [1, 2]})).is_err());
    }

    #[test]
    fn code_requires_language_and_text() {
        assert!(Code::new("", "main", "x").is_err());
        assert!(Code::new("sh", "main", "").is_err());
        assert!(Value::from_json(&json!({"language": "sh", "entrypoint": "m", "text": ""})).is_err());
    }

    #[test]
    fn empty_link_rejected() {
        assert!(Value::from_json(&json!({"link": ""})).is_err());
    }

    #[test]
    fn admits_null_and_links_everywhere() {
        assert!(ValueType::Array.admits(&Value::link("file:x")));
        assert!(ValueType::String.admits(&Value::Null));
        assert!(!ValueType::String.admits(&Value::Number(42.0)));
        assert!(ValueType::Any.admits(&Value::Number(42.0)));
        assert!(!ValueType::Link.admits(&Value::string("x")));
    }

    #[test]
    fn typed_decode_rejects_mismatch() {
        let err = Value::from_json_typed(&json!(42), ValueType::String).unwrap_err();
        assert!(matches!(err, ValueError::TypeMismatch { .. }));
        let rec = Value::from_json_typed(
            &json!({"language": "a", "entrypoint": "b", "text": "c"}),
            ValueType::Record,
        )
        .unwrap();
        assert_eq!(rec.tag(), ValueType::Record);
    }

    #[test]
    fn canonical_numbers() {
        assert_eq!(Value::Number(1.0).to_canonical_string(), "1");
        assert_eq!(Value::Number(-2.5).to_canonical_string(), "-2.5");
        assert_eq!(Value::Number(1e300).to_canonical_string(), "1e+300");
        assert_eq!(Value::Number(-0.0).to_canonical_string(), "-0.0");
    }

    #[test]
    fn canonical_keys_sorted() {
        let v = Value::from_json(&json!({"b": 1, "a": [true, null]})).unwrap();
        assert_eq!(v.to_canonical_string(), r#"{"a":[true,null],"b":1}"#);
    }

    #[test]
    fn non_finite_numbers_rejected() {
        assert!(Value::Number(f64::NAN).validate().is_err());
        assert!(Value::Array(vec![Value::Number(f64::INFINITY)]).validate().is_err());
    }
}

//! Named pure functions, addressed by `{"language":"builtin","text":name}`.
//!
//! | name          | input                          | output                              |
//! |---------------|--------------------------------|-------------------------------------|
//! | `identity`    | any                            | the input                           |
//! | `uppercase`   | string (or array of strings)   | uppercased                          |
//! | `sum`         | array of numbers               | their sum                           |
//! | `const:<doc>` | ignored                        | the JSON document `<doc>`           |
//! | `sleep:<s>`   | any                            | the input, after `s` seconds        |
//! | `fail:<msg>`  | ignored                        | failure with `msg`                  |
//! | `label`       | `{"word":w,"images":[src..]}`  | `[{"src","label":w,"positive"}..]`  |
//! | `fetch`       | link or string locator         | `{"source":loc,"images":[..]}`      |

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use async_trait::async_trait;
use beestar_core::{Code, Value};

use crate::executor::{CancelToken, ExecutionResult, Executor, Mode, Outcome};

pub const LANGUAGE: &str = "builtin";

#[derive(Debug, Default, Clone, Copy)]
pub struct BuiltinExecutor;

fn uppercase(v: &Value) -> Result<Value, String> {
    match v {
        Value::String(s) => Ok(Value::String(s.to_uppercase())),
        Value::Array(items) => items.iter().map(uppercase).collect::<Result<_, _>>().map(Value::Array),
        other => Err(format!("uppercase expects a string, got {}", other.tag())),
    }
}

fn sum(v: &Value) -> Result<Value, String> {
    let items = v.as_array().ok_or("sum expects an array of numbers")?;
    items
        .iter()
        .map(|i| match i {
            Value::Number(n) => Ok(*n),
            other => Err(format!("sum: non-number element {}", other.tag())),
        })
        .sum::<Result<f64, String>>()
        .map(Value::Number)
}

fn label(v: &Value) -> Result<Value, String> {
    let Value::Record(fields) = v else {
        return Err("label expects {\"word\", \"images\"}".into());
    };
    let word = fields
        .get("word")
        .and_then(Value::as_str)
        .ok_or("label: missing string `word`")?;
    let images = fields
        .get("images")
        .and_then(Value::as_array)
        .ok_or("label: missing array `images`")?;
    images
        .iter()
        .map(|img| {
            let src = match img {
                Value::String(s) | Value::Link(s) => s.clone(),
                other => return Err(format!("label: image must be a locator, got {}", other.tag())),
            };
            let mut item = BTreeMap::new();
            item.insert("positive".to_string(), Value::Boolean(src.contains(word)));
            item.insert("label".to_string(), Value::String(word.to_string()));
            item.insert("src".to_string(), Value::String(src));
            Ok(Value::Record(item))
        })
        .collect::<Result<_, _>>()
        .map(Value::Array)
}

fn fetch(v: &Value) -> Result<Value, String> {
    let loc = match v {
        Value::Link(l) | Value::String(l) => l.clone(),
        other => return Err(format!("fetch expects a locator, got {}", other.tag())),
    };
    let base = loc.trim_end_matches('/');
    let images = (0..3).map(|i| Value::String(format!("{base}/{i}.jpg"))).collect();
    let mut out = BTreeMap::new();
    out.insert("source".to_string(), Value::String(loc.clone()));
    out.insert("images".to_string(), Value::Array(images));
    Ok(Value::Record(out))
}

enum Step {
    Done(Result<Value, String>),
    Sleep(Duration),
}

fn evaluate(name: &str, input: &Value) -> Step {
    if let Some(doc) = name.strip_prefix("const:") {
        return Step::Done(
            serde_json::from_str(doc)
                .map_err(|e| format!("const: {e}"))
                .and_then(|j| Value::from_json(&j).map_err(|e| e.to_string())),
        );
    }
    if let Some(secs) = name.strip_prefix("sleep:") {
        return match secs.parse::<f64>() {
            Ok(s) if s.is_finite() && s >= 0.0 => Step::Sleep(Duration::from_secs_f64(s)),
            _ => Step::Done(Err(format!("sleep: bad duration `{secs}`"))),
        };
    }
    if let Some(msg) = name.strip_prefix("fail:") {
        return Step::Done(Err(msg.to_string()));
    }
    Step::Done(match name {
        "identity" => Ok(input.clone()),
        "uppercase" => uppercase(input),
        "sum" => sum(input),
        "label" => label(input),
        "fetch" => fetch(input),
        other => Err(format!("unknown builtin `{other}`")),
    })
}

#[async_trait]
impl Executor for BuiltinExecutor {
    async fn run(&self, code: &Code, input: &Value, mode: Mode, mut cancel: CancelToken) -> ExecutionResult {
        let start = Instant::now();
        let name = code.text.trim();
        let mut log_lines = Vec::new();
        if mode == Mode::Debug {
            log_lines.push(format!("DEBUG enter {name} input={}", input.to_canonical_string()));
        }
        let outcome = if code.language != LANGUAGE {
            Outcome::Failed(format!("builtin executor cannot run `{}` code", code.language))
        } else {
            match evaluate(name, input) {
                Step::Done(Ok(v)) => Outcome::Output(v),
                Step::Done(Err(e)) => Outcome::Failed(e),
                Step::Sleep(d) => tokio::select! {
                    _ = tokio::time::sleep(d) => Outcome::Output(input.clone()),
                    _ = cancel.cancelled() => Outcome::Cancelled,
                },
            }
        };
        if mode == Mode::Debug {
            let how = match &outcome {
                Outcome::Output(v) => format!("output={}", v.to_canonical_string()),
                Outcome::Failed(e) => format!("failed={e}"),
                Outcome::Cancelled => "cancelled".to_string(),
            };
            log_lines.push(format!("DEBUG exit {name} {how}"));
        }
        let exit_status = match outcome {
            Outcome::Output(_) => 0,
            Outcome::Failed(_) => 1,
            Outcome::Cancelled => 130,
        };
        ExecutionResult {
            outcome,
            duration: start.elapsed(),
            log_lines,
            exit_status,
        }
    }
}

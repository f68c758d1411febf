//! A thin HTTP client for the server's routes.

use std::time::Duration;

use beestar_core::protocol::AgentReply;
use beestar_core::{EntityView, ProgramSpec};
use bytes::{Buf, BytesMut};
use futures_util::{Stream, StreamExt};
use reqwest::{Method, StatusCode};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value as Json};
use thiserror::Error;

use crate::journal::StreamEvent;
use crate::registry::AgentEndpoint;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("{code}: {detail}")]
    Api {
        status: StatusCode,
        code: String,
        detail: String,
    },
    #[error("cannot reach server: {0}")]
    Transport(#[from] reqwest::Error),
    #[error("unexpected response: {0}")]
    Decode(String),
}

impl ClientError {
    pub fn code(&self) -> Option<&str> {
        match self {
            ClientError::Api { code, .. } => Some(code),
            _ => None,
        }
    }

    /// True for failures of the request itself rather than of the server's answer.
    pub fn is_transport(&self) -> bool {
        matches!(self, ClientError::Transport(_))
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
pub struct EntitySummary {
    pub name: String,
    pub kind: String,
    pub kind_chain: Vec<String>,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
pub struct TriggerSummary {
    pub agent: String,
    pub hop: u32,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
pub struct WaveSummary {
    pub wave: u64,
    pub status: String,
    pub chain: u64,
    pub hop: u32,
    pub events: usize,
    pub notifications: usize,
    pub triggers: Vec<TriggerSummary>,
}

/// One line read from the event stream.
#[derive(Debug, Clone, PartialEq)]
pub enum StreamLine {
    Event(StreamEvent),
    Heartbeat,
}

#[derive(Debug, Clone)]
pub struct ApiClient {
    base: String,
    http: reqwest::Client,
}

/// Accepts `host:port` or a full `http://` URL.
pub fn normalize_base(addr: &str) -> String {
    let trimmed = addr.trim_end_matches('/');
    if trimmed.starts_with("http://") || trimmed.starts_with("https://") {
        trimmed.to_string()
    } else {
        format!("http://{trimmed}")
    }
}

fn segment(s: &str) -> String {
    // Entity and property names may contain spaces.
    let mut out = String::with_capacity(s.len());
    for b in s.bytes() {
        match b {
            b'A'..=b'Z' | b'a'..=b'z' | b'0'..=b'9' | b'-' | b'_' | b'.' | b'~' => out.push(b as char),
            _ => out.push_str(&format!("%{b:02X}")),
        }
    }
    out
}

impl ApiClient {
    pub fn new(addr: &str) -> Self {
        let http = reqwest::Client::builder()
            .no_proxy()
            .connect_timeout(Duration::from_secs(5))
            .build()
            .expect("http client builds");
        ApiClient {
            base: normalize_base(addr),
            http,
        }
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    async fn call<T: DeserializeOwned>(&self, method: Method, path: &str, body: Option<Json>) -> Result<T, ClientError> {
        let mut req = self
            .http
            .request(method, format!("{}{}", self.base, path))
            .timeout(Duration::from_secs(30));
        if let Some(b) = body {
            req = req.json(&b);
        }
        let resp = req.send().await?;
        let status = resp.status();
        let bytes = resp.bytes().await?;
        if !status.is_success() {
            let err: Json = serde_json::from_slice(&bytes).unwrap_or(Json::Null);
            return Err(ClientError::Api {
                status,
                code: err["error"].as_str().unwrap_or("http_error").to_string(),
                detail: err["detail"]
                    .as_str()
                    .map(str::to_string)
                    .unwrap_or_else(|| String::from_utf8_lossy(&bytes).into_owned()),
            });
        }
        serde_json::from_slice(&bytes).map_err(|e| ClientError::Decode(e.to_string()))
    }

    pub async fn health(&self) -> Result<(), ClientError> {
        let resp = self
            .http
            .get(format!("{}/health", self.base))
            .timeout(Duration::from_secs(2))
            .send()
            .await?;
        resp.error_for_status()?;
        Ok(())
    }

    pub async fn graph(&self) -> Result<ProgramSpec, ClientError> {
        self.call(Method::GET, "/graph", None).await
    }

    pub async fn load(&self, doc: &ProgramSpec) -> Result<Json, ClientError> {
        self.call(Method::POST, "/graph", Some(doc.to_json())).await
    }

    pub async fn entities(&self) -> Result<Vec<EntitySummary>, ClientError> {
        self.call(Method::GET, "/entities", None).await
    }

    pub async fn entity(&self, name: &str) -> Result<EntityView, ClientError> {
        self.call(Method::GET, &format!("/entities/{}", segment(name)), None)
            .await
    }

    pub async fn create_entity(&self, spec: &beestar_core::EntitySpec) -> Result<EntityView, ClientError> {
        let body = serde_json::to_value(spec).map_err(|e| ClientError::Decode(e.to_string()))?;
        self.call(Method::POST, "/entities", Some(body)).await
    }

    pub async fn delete_entity(&self, name: &str) -> Result<Json, ClientError> {
        self.call(Method::DELETE, &format!("/entities/{}", segment(name)), None)
            .await
    }

    pub async fn add_edge(&self, from: &str, to: &str, label: &str) -> Result<u64, ClientError> {
        let r: Json = self
            .call(
                Method::POST,
                "/edges",
                Some(json!({"from": from, "to": to, "label": label})),
            )
            .await?;
        r["id"]
            .as_u64()
            .ok_or_else(|| ClientError::Decode("missing edge id".into()))
    }

    pub async fn remove_edge(&self, id: u64) -> Result<Json, ClientError> {
        self.call(Method::DELETE, &format!("/edges/{id}"), None).await
    }

    /// PUTs `value` (a JSON document) with a wire cause such as `external`.
    pub async fn set(&self, entity: &str, prop: &str, value: Json, cause: &str) -> Result<WaveSummary, ClientError> {
        self.call(
            Method::PUT,
            &format!("/entities/{}/properties/{}", segment(entity), segment(prop)),
            Some(json!({"value": value, "cause": cause})),
        )
        .await
    }

    pub async fn message(&self, agent: &str, verb: &str) -> Result<AgentReply, ClientError> {
        self.call(
            Method::POST,
            &format!("/agents/{}/message", segment(agent)),
            Some(json!({"verb": verb})),
        )
        .await
    }

    pub async fn register(&self, agent: &str, endpoint: &str) -> Result<AgentEndpoint, ClientError> {
        self.call(
            Method::POST,
            &format!("/agents/{}/register", segment(agent)),
            Some(json!({"endpoint": endpoint})),
        )
        .await
    }

    pub async fn agents(&self) -> Result<Vec<AgentEndpoint>, ClientError> {
        self.call(Method::GET, "/agents", None).await
    }

    /// Opens the event stream from `since`; yields parsed lines until the
    /// server closes it.
    pub async fn events(
        &self,
        since: u64,
    ) -> Result<impl Stream<Item = Result<StreamLine, ClientError>> + Unpin, ClientError> {
        let resp = self
            .http
            .get(format!("{}/events?since={since}", self.base))
            .send()
            .await?
            .error_for_status()?;
        let bytes = resp.bytes_stream();
        let lines = futures_util::stream::unfold(
            (bytes, BytesMut::new()),
            |(mut bytes, mut buf)| async move {
                loop {
                    if let Some(pos) = buf.iter().position(|b| *b == b'\n') {
                        let line = buf.split_to(pos + 1);
                        let text = &line[..pos];
                        return Some((parse_line(text), (bytes, buf)));
                    }
                    match bytes.next().await {
                        Some(Ok(chunk)) => buf.extend_from_slice(chunk.chunk()),
                        Some(Err(e)) => return Some((Err(e.into()), (bytes, buf))),
                        None => return None,
                    }
                }
            },
        );
        Ok(Box::pin(lines))
    }
}

fn parse_line(text: &[u8]) -> Result<StreamLine, ClientError> {
    let json: Json = serde_json::from_slice(text).map_err(|e| ClientError::Decode(e.to_string()))?;
    if json["kind"] == "heartbeat" {
        return Ok(StreamLine::Heartbeat);
    }
    serde_json::from_value(json)
        .map(StreamLine::Event)
        .map_err(|e| ClientError::Decode(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bases_and_segments() {
        assert_eq!(normalize_base("127.0.0.1:7311"), "http://127.0.0.1:7311");
        assert_eq!(normalize_base("http://h:1/"), "http://h:1");
        assert_eq!(segment("Training Data"), "Training%20Data");
        assert_eq!(segment("source code"), "source%20code");
    }

    #[test]
    fn heartbeat_lines_parse() {
        assert_eq!(parse_line(br#"{"kind":"heartbeat"}"#).unwrap(), StreamLine::Heartbeat);
        assert!(matches!(
            parse_line(br#"{"seq":1,"kind":"graph_changed","payload":{}}"#).unwrap(),
            StreamLine::Event(_)
        ));
    }
}

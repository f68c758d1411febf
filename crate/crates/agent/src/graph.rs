//! How a runtime reads and writes the graph: over HTTP, or directly
//! against an in-process interface.

use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use beestar_core::{Cause, EntityView, Interface, ProgramSpec, Value};
use beestar_server::{ApiClient, ClientError};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WireCause {
    External,
    AgentRun,
    AgentStatus,
}

impl WireCause {
    pub fn as_str(self) -> &'static str {
        match self {
            WireCause::External => "external",
            WireCause::AgentRun => "agent-run",
            WireCause::AgentStatus => "agent-status",
        }
    }
}

#[derive(Debug, Error)]
pub enum GraphClientError {
    /// The graph refused the request.
    #[error("{code}: {detail}")]
    Rejected { code: String, detail: String },
    /// The graph could not be reached.
    #[error("graph unavailable: {0}")]
    Unavailable(String),
}

impl GraphClientError {
    pub fn code(&self) -> &str {
        match self {
            GraphClientError::Rejected { code, .. } => code,
            GraphClientError::Unavailable(_) => "unavailable",
        }
    }
}

#[async_trait]
pub trait GraphClient: Send + Sync {
    async fn view(&self, entity: &str) -> Result<EntityView, GraphClientError>;
    async fn program(&self) -> Result<ProgramSpec, GraphClientError>;
    async fn set(&self, entity: &str, prop: &str, value: Value, cause: WireCause) -> Result<(), GraphClientError>;
}

/// Talks to a graph server, retrying transport failures a few times.
#[derive(Clone)]
pub struct HttpGraph {
    pub client: ApiClient,
    pub attempts: u32,
    pub backoff: Duration,
}

impl HttpGraph {
    pub fn new(client: ApiClient) -> Self {
        HttpGraph {
            client,
            attempts: 3,
            backoff: Duration::from_millis(200),
        }
    }

    async fn retry<T, F, Fut>(&self, mut f: F) -> Result<T, GraphClientError>
    where
        F: FnMut() -> Fut + Send,
        Fut: std::future::Future<Output = Result<T, ClientError>> + Send,
        T: Send,
    {
        let mut last = None;
        for attempt in 0..self.attempts.max(1) {
            if attempt > 0 {
                tokio::time::sleep(self.backoff * attempt).await;
            }
            match f().await {
                Ok(v) => return Ok(v),
                Err(ClientError::Api { code, detail, .. }) => {
                    return Err(GraphClientError::Rejected { code, detail })
                }
                Err(e) => last = Some(e.to_string()),
            }
        }
        Err(GraphClientError::Unavailable(last.unwrap_or_default()))
    }
}

#[async_trait]
impl GraphClient for HttpGraph {
    async fn view(&self, entity: &str) -> Result<EntityView, GraphClientError> {
        self.retry(|| self.client.entity(entity)).await
    }

    async fn program(&self) -> Result<ProgramSpec, GraphClientError> {
        self.retry(|| self.client.graph()).await
    }

    async fn set(&self, entity: &str, prop: &str, value: Value, cause: WireCause) -> Result<(), GraphClientError> {
        let json = value.to_json();
        self.retry(|| self.client.set(entity, prop, json.clone(), cause.as_str()))
            .await
            .map(|_| ())
    }
}

/// Direct access to an interface in the same process.
#[derive(Clone)]
pub struct LocalGraph(pub Arc<Interface>);

fn rejected(code: &str, e: impl ToString) -> GraphClientError {
    GraphClientError::Rejected {
        code: code.to_string(),
        detail: e.to_string(),
    }
}

#[async_trait]
impl GraphClient for LocalGraph {
    async fn view(&self, entity: &str) -> Result<EntityView, GraphClientError> {
        self.0.entity_view(entity).map_err(|e| rejected(e.code(), e))
    }

    async fn program(&self) -> Result<ProgramSpec, GraphClientError> {
        Ok(self.0.export_program())
    }

    async fn set(&self, entity: &str, prop: &str, value: Value, cause: WireCause) -> Result<(), GraphClientError> {
        let result = match cause {
            WireCause::AgentRun if prop == beestar_core::kind::props::OUTPUT => {
                self.0.apply_agent_output(entity, value)
            }
            _ => self.0.set_property(
                entity,
                prop,
                value,
                Cause::from_wire(cause.as_str(), entity).expect("wire causes parse"),
            ),
        };
        result.map(|_| ()).map_err(|e| rejected(e.code(), e))
    }
}

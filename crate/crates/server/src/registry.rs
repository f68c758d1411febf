//! Where each agent runtime listens, and forwarding of messages to it.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use beestar_core::protocol::{read_frame, write_frame, AgentMessage, AgentReply, ProtocolError, Verb};
use parking_lot::RwLock;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::net::TcpStream;
use tokio::time::timeout;

const CONNECT_TIMEOUT: Duration = Duration::from_secs(2);
const REPLY_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentEndpoint {
    pub name: String,
    pub endpoint: String,
    /// Milliseconds since the Unix epoch.
    pub registered_at: u64,
    pub last_seen: u64,
}

#[derive(Debug, Error)]
pub enum ForwardError {
    #[error("agent `{0}` has no registered endpoint")]
    NotRegistered(String),
    #[error("agent `{agent}` unreachable at {endpoint}: {detail}")]
    Unreachable {
        agent: String,
        endpoint: String,
        detail: String,
    },
}

#[derive(Default)]
pub struct AgentRegistry {
    agents: RwLock<BTreeMap<String, AgentEndpoint>>,
    next_id: AtomicU64,
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

impl AgentRegistry {
    pub fn register(&self, name: &str, endpoint: &str) -> AgentEndpoint {
        let now = now_ms();
        let entry = AgentEndpoint {
            name: name.to_string(),
            endpoint: endpoint.to_string(),
            registered_at: now,
            last_seen: now,
        };
        self.agents.write().insert(name.to_string(), entry.clone());
        entry
    }

    pub fn unregister(&self, name: &str) -> bool {
        self.agents.write().remove(name).is_some()
    }

    pub fn get(&self, name: &str) -> Option<AgentEndpoint> {
        self.agents.read().get(name).cloned()
    }

    pub fn list(&self) -> Vec<AgentEndpoint> {
        self.agents.read().values().cloned().collect()
    }

    /// Sends one verb to a registered agent and waits for its reply.
    pub async fn send(&self, agent: &str, verb: Verb) -> Result<AgentReply, ForwardError> {
        let endpoint = self
            .get(agent)
            .ok_or_else(|| ForwardError::NotRegistered(agent.to_string()))?
            .endpoint;
        let id = self.next_id.fetch_add(1, Ordering::Relaxed) + 1;
        let unreachable = |detail: String| ForwardError::Unreachable {
            agent: agent.to_string(),
            endpoint: endpoint.clone(),
            detail,
        };
        let reply = async {
            let mut stream = timeout(CONNECT_TIMEOUT, TcpStream::connect(&endpoint))
                .await
                .map_err(|_| "connect timed out".to_string())?
                .map_err(|e| e.to_string())?;
            write_frame(&mut stream, &AgentMessage { id, verb })
                .await
                .map_err(|e| e.to_string())?;
            let body = timeout(REPLY_TIMEOUT, read_frame(&mut stream))
                .await
                .map_err(|_| "reply timed out".to_string())?
                .map_err(|e: ProtocolError| e.to_string())?
                .ok_or_else(|| "connection closed before reply".to_string())?;
            serde_json::from_slice::<AgentReply>(&body).map_err(|e| e.to_string())
        }
        .await
        .map_err(unreachable)?;
        if let Some(entry) = self.agents.write().get_mut(agent) {
            entry.last_seen = now_ms();
        }
        Ok(reply)
    }
}

//! The agent process: registers with the graph server, serves framed
//! messages over TCP and watches the server's liveness.

use std::future::Future;
use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use beestar_core::kind::AGENT_ENTITY;
use beestar_core::protocol::{read_frame, write_frame, AgentMessage, AgentReply, ProtocolError};
use beestar_server::ApiClient;
use thiserror::Error;
use tokio::net::{TcpListener, TcpStream};

use crate::executor::{DispatchExecutor, Executor};
use crate::graph::{GraphClient, HttpGraph};
use crate::runtime::AgentRuntime;

/// Address the agent listens on, e.g. `0.0.0.0:7400`.
pub const ENV_AGENT_BIND: &str = "BEESTAR_AGENT_BIND";
/// Endpoint announced to the server when it differs from the bind address.
pub const ENV_AGENT_ADVERTISE: &str = "BEESTAR_AGENT_ADVERTISE";

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("registration failed: {0}")]
    Registration(String),
    #[error("lost connection to graph server: {0}")]
    LostConnection(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct AgentOptions {
    pub server: String,
    pub name: String,
    pub bind: SocketAddr,
    /// Endpoint announced to the server; defaults to the bound address.
    pub advertise: Option<String>,
    pub liveness_interval: Duration,
    /// Consecutive failed health checks before giving up.
    pub max_failures: u32,
}

impl AgentOptions {
    pub fn new(server: &str, name: &str) -> Self {
        AgentOptions {
            server: server.to_string(),
            name: name.to_string(),
            bind: SocketAddr::from(([127, 0, 0, 1], 0)),
            advertise: None,
            liveness_interval: Duration::from_secs(2),
            max_failures: 5,
        }
    }

    /// Applies the bind and advertise environment variables, if set.
    pub fn with_env(mut self) -> Result<Self, AgentError> {
        if let Ok(bind) = std::env::var(ENV_AGENT_BIND) {
            self.bind = bind
                .parse()
                .map_err(|e| AgentError::Registration(format!("{ENV_AGENT_BIND}=`{bind}`: {e}")))?;
        }
        if let Ok(adv) = std::env::var(ENV_AGENT_ADVERTISE) {
            self.advertise = Some(adv);
        }
        Ok(self)
    }
}

/// Answers framed requests on one connection until the peer hangs up.
pub async fn serve_connection(mut sock: TcpStream, rt: Arc<AgentRuntime>) -> Result<(), ProtocolError> {
    while let Some(body) = read_frame(&mut sock).await? {
        let reply = match AgentMessage::parse(&body) {
            Ok(msg) => rt.handle(msg.verb, msg.id).await,
            Err(e) => AgentReply::error(e.request_id().unwrap_or(0), e.to_string()),
        };
        write_frame(&mut sock, &reply).await?;
    }
    Ok(())
}

/// Accepts connections forever, one task per connection.
pub async fn serve_messages(listener: TcpListener, rt: Arc<AgentRuntime>) -> std::io::Result<()> {
    loop {
        let (sock, _) = listener.accept().await?;
        let rt = Arc::clone(&rt);
        tokio::spawn(async move {
            if let Err(e) = serve_connection(sock, rt).await {
                tracing::debug!("agent connection closed: {e}");
            }
        });
    }
}

async fn liveness(client: ApiClient, interval: Duration, max_failures: u32) -> AgentError {
    let mut failures = 0;
    loop {
        tokio::time::sleep(interval).await;
        match client.health().await {
            Ok(()) => failures = 0,
            Err(e) => {
                failures += 1;
                tracing::warn!("health check failed ({failures}/{max_failures}): {e}");
                if failures >= max_failures {
                    return AgentError::LostConnection(e.to_string());
                }
            }
        }
    }
}

/// Runs an agent until `shutdown` resolves or the server is lost.
pub async fn run_agent(
    opts: AgentOptions,
    executor: Arc<dyn Executor>,
    shutdown: impl Future<Output = ()>,
) -> Result<(), AgentError> {
    let client = ApiClient::new(&opts.server);
    let graph = HttpGraph::new(client.clone());
    let view = graph
        .view(&opts.name)
        .await
        .map_err(|e| AgentError::Registration(format!("`{}`: {e}", opts.name)))?;
    if !view.is_a(AGENT_ENTITY) {
        return Err(AgentError::Registration(format!("`{}` is not an agent", opts.name)));
    }
    let listener = TcpListener::bind(opts.bind).await?;
    let endpoint = match &opts.advertise {
        Some(a) => a.clone(),
        None => listener.local_addr()?.to_string(),
    };
    let rt = AgentRuntime::new(&opts.name, Arc::new(graph), executor);
    rt.reset().await;
    client
        .register(&opts.name, &endpoint)
        .await
        .map_err(|e| AgentError::Registration(e.to_string()))?;
    tracing::info!(agent = %opts.name, %endpoint, "registered");

    let result = tokio::select! {
        r = serve_messages(listener, Arc::clone(&rt)) => r.map_err(AgentError::from),
        e = liveness(client, opts.liveness_interval, opts.max_failures) => Err(e),
        _ = shutdown => Ok(()),
    };
    rt.stop().await;
    result
}

/// Resolves on SIGTERM or SIGINT.
pub async fn termination_signal() {
    #[cfg(unix)]
    {
        use tokio::signal::unix::{signal, SignalKind};
        match signal(SignalKind::terminate()) {
            Ok(mut term) => {
                tokio::select! {
                    _ = term.recv() => {}
                    _ = tokio::signal::ctrl_c() => {}
                }
            }
            Err(_) => {
                let _ = tokio::signal::ctrl_c().await;
            }
        }
    }
    #[cfg(not(unix))]
    {
        let _ = tokio::signal::ctrl_c().await;
    }
}

/// The agent process entry point: default executors, exits on signal.
pub async fn agent_main(opts: AgentOptions) -> Result<(), AgentError> {
    run_agent(opts, Arc::new(DispatchExecutor::default()), termination_signal()).await
}

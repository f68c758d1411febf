//! HTTP face of a graph: entity/edge/property routes, agent message
//! forwarding, and a replayable newline-delimited event stream.

pub mod client;
pub mod journal;
pub mod registry;
pub mod routes;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use beestar_core::protocol::Verb;
use beestar_core::Interface;
use tokio::net::TcpListener;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

pub use client::{ApiClient, ClientError, StreamLine, WaveSummary};
pub use journal::{Journal, StreamEvent, StreamKind};
pub use registry::{AgentEndpoint, AgentRegistry};
pub use routes::router;

pub const DEFAULT_PORT: u16 = 7311;

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub heartbeat: Duration,
    /// How many stream lines a live reader may trail before being dropped.
    pub stream_capacity: usize,
    /// Static dashboard assets served for any path not matched by a route.
    pub ui_dir: Option<PathBuf>,
    /// Forward play triggers to registered agent endpoints.
    pub dispatch_triggers: bool,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            heartbeat: Duration::from_secs(15),
            stream_capacity: 4096,
            ui_dir: None,
            dispatch_triggers: true,
        }
    }
}

#[derive(Clone)]
pub struct AppState {
    pub engine: Arc<Interface>,
    pub journal: Arc<Journal>,
    pub agents: Arc<AgentRegistry>,
    pub config: Arc<ServerConfig>,
}

impl AppState {
    pub fn new(engine: Arc<Interface>, config: ServerConfig) -> Self {
        let journal = Journal::new(config.stream_capacity);
        journal.attach(&engine);
        AppState {
            engine,
            journal,
            agents: Arc::new(AgentRegistry::default()),
            config: Arc::new(config),
        }
    }
}

/// Sends `play` to each triggered agent that has a registered endpoint.
pub fn spawn_trigger_dispatch(state: &AppState) -> JoinHandle<()> {
    let mut triggers = state.engine.subscribe_triggers();
    let agents = Arc::clone(&state.agents);
    tokio::spawn(async move {
        while let Some(t) = triggers.recv().await {
            if agents.get(&t.agent).is_none() {
                tracing::debug!(agent = %t.agent, "trigger for unregistered agent dropped");
                continue;
            }
            let agents = Arc::clone(&agents);
            tokio::spawn(async move {
                if let Err(e) = agents.send(&t.agent, Verb::Play).await {
                    tracing::warn!("play for {} failed: {e}", t.agent);
                }
            });
        }
    })
}

/// A server bound and running in the background.
pub struct RunningServer {
    pub addr: SocketAddr,
    pub state: AppState,
    shutdown: Option<oneshot::Sender<()>>,
    handle: JoinHandle<std::io::Result<()>>,
    dispatch: Option<JoinHandle<()>>,
}

impl RunningServer {
    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn client(&self) -> ApiClient {
        ApiClient::new(&self.url())
    }

    /// Stops accepting requests. Open event streams are dropped with the task.
    pub async fn stop(mut self) -> std::io::Result<()> {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(d) = self.dispatch.take() {
            d.abort();
        }
        self.handle.abort();
        match self.handle.await {
            Ok(r) => r,
            Err(e) if e.is_cancelled() => Ok(()),
            Err(e) => Err(std::io::Error::other(e)),
        }
    }

    /// Runs until the server task ends.
    pub async fn wait(self) -> std::io::Result<()> {
        self.handle.await.map_err(std::io::Error::other)?
    }
}

pub async fn start(addr: SocketAddr, state: AppState) -> std::io::Result<RunningServer> {
    let listener = TcpListener::bind(addr).await?;
    let addr = listener.local_addr()?;
    let dispatch = state
        .config
        .dispatch_triggers
        .then(|| spawn_trigger_dispatch(&state));
    let (tx, rx) = oneshot::channel::<()>();
    let app = router(state.clone());
    let handle = tokio::spawn(async move {
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = rx.await;
            })
            .await
    });
    Ok(RunningServer {
        addr,
        state,
        shutdown: Some(tx),
        handle,
        dispatch,
    })
}

/// Starts a server for `engine` on an ephemeral loopback port.
pub async fn start_local(engine: Arc<Interface>, config: ServerConfig) -> std::io::Result<RunningServer> {
    start(
        SocketAddr::from(([127, 0, 0, 1], 0)),
        AppState::new(engine, config),
    )
    .await
}

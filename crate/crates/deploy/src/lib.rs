//! Launches agent runtimes against a graph server: as local child
//! processes, as in-process tasks, or as container manifests.

pub mod manifest;

use std::fmt;
use std::path::PathBuf;
use std::process::Stdio;
use std::str::FromStr;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use beestar_agent::{run_agent, AgentOptions, DispatchExecutor};
use beestar_core::kind::{props, AGENT_ENTITY};
use beestar_core::{Value, ENV_AGENT, ENV_SERVER};
use beestar_server::{AgentEndpoint, ApiClient, ClientError};
use thiserror::Error;
use tokio::process::{Child, Command};
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

pub use manifest::{render, Manifest, ManifestConfig};

/// Overrides the command used to start a local agent process.
pub const ENV_AGENT_BIN: &str = "BEESTAR_AGENT_BIN";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DeploymentTarget {
    Local,
    Simulated,
    Container,
}

impl DeploymentTarget {
    pub fn as_str(self) -> &'static str {
        match self {
            DeploymentTarget::Local => "local",
            DeploymentTarget::Simulated => "simulated",
            DeploymentTarget::Container => "container",
        }
    }
}

impl fmt::Display for DeploymentTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DeploymentTarget {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "local" => Ok(DeploymentTarget::Local),
            "simulated" => Ok(DeploymentTarget::Simulated),
            "container" => Ok(DeploymentTarget::Container),
            other => Err(format!("unknown target `{other}` (local, simulated, container)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Liveness {
    Running,
    Exited(i32),
    Unknown,
}

impl fmt::Display for Liveness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Liveness::Running => f.write_str("running"),
            Liveness::Exited(c) => write!(f, "exited({c})"),
            Liveness::Unknown => f.write_str("unknown"),
        }
    }
}

#[derive(Debug, Error)]
pub enum DeployError {
    #[error("unknown agent `{0}`")]
    UnknownAgent(String),
    #[error("cannot start agent `{agent}`: {detail}")]
    SpawnFailure { agent: String, detail: String },
    #[error("agent `{agent}` did not register within {timeout:?}")]
    RegistrationTimeout { agent: String, timeout: Duration },
    #[error("graph server: {0}")]
    Server(#[from] ClientError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl DeployError {
    /// Whether the caller asked for something invalid, as opposed to a
    /// runtime failure.
    pub fn is_user_error(&self) -> bool {
        matches!(self, DeployError::UnknownAgent(_))
    }
}

#[derive(Debug, Clone)]
pub struct DeployConfig {
    /// Graph server address handed to every agent.
    pub server: String,
    /// argv prefix for a local agent process.
    pub agent_command: Vec<String>,
    pub registration_timeout: Duration,
    /// Time between the polite signal and the forced kill on stop.
    pub stop_grace: Duration,
    pub manifest: ManifestConfig,
    /// Where container manifests are written.
    pub manifest_dir: PathBuf,
}

impl DeployConfig {
    pub fn new(server: &str) -> Self {
        DeployConfig {
            server: server.to_string(),
            agent_command: default_agent_command(),
            registration_timeout: Duration::from_secs(10),
            stop_grace: Duration::from_secs(2),
            manifest: ManifestConfig::default(),
            manifest_dir: PathBuf::from("manifests"),
        }
    }
}

/// `$BEESTAR_AGENT_BIN` if set, else this executable's `agent` subcommand.
pub fn default_agent_command() -> Vec<String> {
    if let Ok(bin) = std::env::var(ENV_AGENT_BIN) {
        return vec![bin];
    }
    let exe = std::env::current_exe()
        .map(|p| p.to_string_lossy().into_owned())
        .unwrap_or_else(|_| "beestar".into());
    vec![exe, "agent".into()]
}

enum Backend {
    Process {
        child: Mutex<Option<Child>>,
        exit: Mutex<Option<i32>>,
    },
    Task {
        shutdown: Mutex<Option<oneshot::Sender<()>>>,
        join: Mutex<Option<JoinHandle<Result<(), beestar_agent::AgentError>>>>,
        exit: Mutex<Option<i32>>,
    },
    Manifest {
        path: PathBuf,
    },
}

/// One deployed agent. Dropping a handle kills a local process.
#[derive(Clone)]
pub struct AgentHandle {
    pub agent: String,
    pub target: DeploymentTarget,
    pub endpoint: Option<String>,
    client: ApiClient,
    grace: Duration,
    backend: Arc<Backend>,
}

impl fmt::Debug for AgentHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AgentHandle")
            .field("agent", &self.agent)
            .field("target", &self.target)
            .field("endpoint", &self.endpoint)
            .finish()
    }
}

#[cfg(unix)]
fn exit_code(status: std::process::ExitStatus) -> i32 {
    use std::os::unix::process::ExitStatusExt;
    status
        .code()
        .or_else(|| status.signal().map(|s| 128 + s))
        .unwrap_or(-1)
}

#[cfg(unix)]
fn signal(pid: u32, sig: i32) {
    // SAFETY: plain syscall on a pid we spawned and have not reaped.
    unsafe {
        libc::kill(pid as i32, sig);
    }
}

impl AgentHandle {
    /// Liveness by a non-blocking probe.
    pub fn status(&self) -> Liveness {
        match &*self.backend {
            Backend::Process { child, exit } => {
                if let Some(c) = *exit.lock().unwrap() {
                    return Liveness::Exited(c);
                }
                let mut guard = child.lock().unwrap();
                let Some(c) = guard.as_mut() else {
                    return Liveness::Unknown;
                };
                match c.try_wait() {
                    Ok(Some(s)) => {
                        let code = exit_code(s);
                        *exit.lock().unwrap() = Some(code);
                        Liveness::Exited(code)
                    }
                    Ok(None) => Liveness::Running,
                    Err(_) => Liveness::Unknown,
                }
            }
            Backend::Task { join, exit, .. } => {
                if let Some(c) = *exit.lock().unwrap() {
                    return Liveness::Exited(c);
                }
                match join.lock().unwrap().as_ref() {
                    Some(j) if j.is_finished() => Liveness::Exited(1),
                    Some(_) => Liveness::Running,
                    None => Liveness::Unknown,
                }
            }
            Backend::Manifest { .. } => Liveness::Unknown,
        }
    }

    /// Process id of a local agent that has not been stopped.
    pub fn pid(&self) -> Option<u32> {
        match &*self.backend {
            Backend::Process { child, .. } => child.lock().unwrap().as_ref().and_then(Child::id),
            _ => None,
        }
    }

    pub fn manifest_path(&self) -> Option<&PathBuf> {
        match &*self.backend {
            Backend::Manifest { path } => Some(path),
            _ => None,
        }
    }

    /// Sends the agent `stop`, then ends it. Idempotent.
    pub async fn stop(&self) -> Liveness {
        match &*self.backend {
            Backend::Process { child, exit } => {
                if let Some(c) = *exit.lock().unwrap() {
                    return Liveness::Exited(c);
                }
                let Some(mut c) = child.lock().unwrap().take() else {
                    return self.status();
                };
                if let Ok(None) = c.try_wait() {
                    let _ = self.client.message(&self.agent, "stop").await;
                }
                if let Some(pid) = c.id() {
                    signal(pid, libc::SIGTERM);
                }
                let code = match tokio::time::timeout(self.grace, c.wait()).await {
                    Ok(Ok(s)) => exit_code(s),
                    _ => {
                        let _ = c.kill().await;
                        c.wait().await.map(exit_code).unwrap_or(128 + libc::SIGKILL)
                    }
                };
                *exit.lock().unwrap() = Some(code);
                Liveness::Exited(code)
            }
            Backend::Task { shutdown, join, exit } => {
                if let Some(c) = *exit.lock().unwrap() {
                    return Liveness::Exited(c);
                }
                let tx = shutdown.lock().unwrap().take();
                let j = join.lock().unwrap().take();
                let Some(j) = j else {
                    return self.status();
                };
                if let Some(tx) = tx {
                    let _ = tx.send(());
                }
                let code = match tokio::time::timeout(self.grace, j).await {
                    Ok(Ok(Ok(()))) => 0,
                    Ok(_) => 1,
                    Err(_) => 1,
                };
                *exit.lock().unwrap() = Some(code);
                Liveness::Exited(code)
            }
            Backend::Manifest { .. } => Liveness::Unknown,
        }
    }
}

pub struct Deployer {
    pub config: DeployConfig,
    client: ApiClient,
}

impl Deployer {
    pub fn new(config: DeployConfig) -> Self {
        let client = ApiClient::new(&config.server);
        Deployer { config, client }
    }

    pub fn client(&self) -> &ApiClient {
        &self.client
    }

    async fn require_agent(&self, agent: &str) -> Result<beestar_core::EntityView, DeployError> {
        match self.client.entity(agent).await {
            Ok(view) if view.is_a(AGENT_ENTITY) => Ok(view),
            Ok(_) => Err(DeployError::UnknownAgent(agent.to_string())),
            Err(e) if e.code() == Some("unknown_entity") => Err(DeployError::UnknownAgent(agent.to_string())),
            Err(e) => Err(e.into()),
        }
    }

    /// Renders the container manifest from the agent's requirements.
    pub async fn generate_manifest(&self, agent: &str) -> Result<Manifest, DeployError> {
        let view = self.require_agent(agent).await?;
        let requirements = view
            .value(props::REQUIREMENTS)
            .and_then(Value::as_array)
            .unwrap_or_default()
            .iter()
            .filter_map(|v| v.as_str().map(str::to_string))
            .collect::<Vec<_>>();
        Ok(render(agent, &requirements, &self.config.manifest))
    }

    pub async fn deploy(&self, agent: &str, target: DeploymentTarget) -> Result<AgentHandle, DeployError> {
        self.require_agent(agent).await?;
        let handle = |endpoint, backend| AgentHandle {
            agent: agent.to_string(),
            target,
            endpoint,
            client: self.client.clone(),
            grace: self.config.stop_grace,
            backend: Arc::new(backend),
        };
        match target {
            DeploymentTarget::Container => {
                let m = self.generate_manifest(agent).await?;
                let path = m.write_to(&self.config.manifest_dir)?;
                Ok(handle(None, Backend::Manifest { path }))
            }
            DeploymentTarget::Local => {
                let previous = self.registration(agent).await?;
                let (program, args) = self
                    .config
                    .agent_command
                    .split_first()
                    .ok_or_else(|| DeployError::SpawnFailure {
                        agent: agent.to_string(),
                        detail: "empty agent command".into(),
                    })?;
                let child = Command::new(program)
                    .args(args)
                    .env(ENV_SERVER, &self.config.server)
                    .env(ENV_AGENT, agent)
                    .stdin(Stdio::null())
                    .kill_on_drop(true)
                    .spawn()
                    .map_err(|e| DeployError::SpawnFailure {
                        agent: agent.to_string(),
                        detail: format!("{program}: {e}"),
                    })?;
                let h = handle(
                    None,
                    Backend::Process {
                        child: Mutex::new(Some(child)),
                        exit: Mutex::new(None),
                    },
                );
                match self.await_registration(&h, previous).await {
                    Ok(ep) => Ok(AgentHandle {
                        endpoint: Some(ep),
                        ..h
                    }),
                    Err(e) => {
                        h.stop().await;
                        Err(e)
                    }
                }
            }
            DeploymentTarget::Simulated => {
                let previous = self.registration(agent).await?;
                let (tx, rx) = oneshot::channel::<()>();
                let opts = AgentOptions::new(&self.config.server, agent);
                let join = tokio::spawn(run_agent(
                    opts,
                    Arc::new(DispatchExecutor::default()),
                    async move {
                        let _ = rx.await;
                    },
                ));
                let h = handle(
                    None,
                    Backend::Task {
                        shutdown: Mutex::new(Some(tx)),
                        join: Mutex::new(Some(join)),
                        exit: Mutex::new(None),
                    },
                );
                match self.await_registration(&h, previous).await {
                    Ok(ep) => Ok(AgentHandle {
                        endpoint: Some(ep),
                        ..h
                    }),
                    Err(e) => {
                        h.stop().await;
                        Err(e)
                    }
                }
            }
        }
    }

    async fn registration(&self, agent: &str) -> Result<Option<AgentEndpoint>, DeployError> {
        Ok(self.client.agents().await?.into_iter().find(|a| a.name == agent))
    }

    /// Waits until the agent registers anew; fails early if it exits.
    async fn await_registration(
        &self,
        h: &AgentHandle,
        previous: Option<AgentEndpoint>,
    ) -> Result<String, DeployError> {
        let deadline = Instant::now() + self.config.registration_timeout;
        loop {
            if let Some(now) = self.registration(&h.agent).await? {
                if Some(&now) != previous.as_ref() {
                    return Ok(now.endpoint);
                }
            }
            if let Liveness::Exited(code) = h.status() {
                return Err(DeployError::SpawnFailure {
                    agent: h.agent.clone(),
                    detail: format!("exited with status {code} before registering"),
                });
            }
            if Instant::now() >= deadline {
                return Err(DeployError::RegistrationTimeout {
                    agent: h.agent.clone(),
                    timeout: self.config.registration_timeout,
                });
            }
            tokio::time::sleep(Duration::from_millis(25)).await;
        }
    }
}

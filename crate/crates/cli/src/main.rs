//! `beestar`: serve a graph, run programs against it, poke properties,
//! message agents and tail the event stream.
//!
//! Exit status: 0 on success, 1 for user errors (bad arguments, unknown
//! names, rejected writes), 2 when the server or an agent fails.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, Context};
use beestar_agent::{agent_main, AgentError, AgentOptions};
use beestar_core::kind::AGENT_ENTITY;
use beestar_core::{EngineConfig, Interface, ProgramSpec, ENV_AGENT, ENV_SERVER};
use beestar_deploy::{AgentHandle, DeployConfig, DeployError, Deployer, DeploymentTarget};
use beestar_server::{ApiClient, ClientError, ServerConfig, StreamLine, DEFAULT_PORT};
use clap::{Parser, Subcommand};
use futures_util::StreamExt;

#[derive(Parser)]
#[command(name = "beestar", version, about = "Reactive graph blackboard for agents and widgets")]
struct Cli {
    /// Graph server address.
    #[arg(long, global = true, env = ENV_SERVER, default_value_t = format!("http://127.0.0.1:{DEFAULT_PORT}"))]
    server: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Start the graph server.
    Serve {
        #[arg(long, default_value_t = DEFAULT_PORT)]
        port: u16,
        /// Interface to bind; use 0.0.0.0 to expose beyond this machine.
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Program document to load at startup.
        #[arg(long)]
        load: Option<PathBuf>,
        /// Append every committed change to this file.
        #[arg(long)]
        event_log: Option<PathBuf>,
        /// Accept programs with unknown properties and kinds.
        #[arg(long)]
        lax: bool,
        #[arg(long, default_value_t = beestar_core::propagation::DEFAULT_MAX_CHAIN_DEPTH)]
        max_chain_depth: u32,
        /// Directory of dashboard assets to serve.
        #[arg(long)]
        ui: Option<PathBuf>,
    },
    /// Load a program and deploy every agent in it.
    Run {
        program: PathBuf,
        #[arg(long, default_value = "local", value_parser = parse_target)]
        target: DeploymentTarget,
        /// Also start a server on this port instead of using --server.
        #[arg(long)]
        serve: Option<u16>,
        /// Where container manifests are written.
        #[arg(long, default_value = "manifests")]
        manifest_dir: PathBuf,
    },
    /// Set a property; the value is a JSON document.
    Set {
        entity: String,
        prop: String,
        value: String,
        #[arg(long, default_value = "external")]
        cause: String,
    },
    /// Send play, stop or debug to an agent.
    Msg { agent: String, verb: String },
    /// List entities with their kinds.
    Ls,
    /// Print one entity.
    Show { entity: String },
    /// Stream committed events, one JSON line each.
    Watch {
        #[arg(long, default_value_t = 0)]
        since: u64,
    },
    /// Write the current program document to a file.
    Export { file: PathBuf },
    /// Print an agent's container manifest.
    Manifest { agent: String },
    /// Run an agent runtime in the foreground.
    Agent {
        #[arg(long, env = ENV_AGENT)]
        name: String,
        #[arg(long, env = beestar_agent::service::ENV_AGENT_BIND)]
        bind: Option<SocketAddr>,
        #[arg(long, env = beestar_agent::service::ENV_AGENT_ADVERTISE)]
        advertise: Option<String>,
    },
}

fn parse_target(s: &str) -> Result<DeploymentTarget, String> {
    s.parse()
}

/// A failure tagged with the exit status it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    fn user(error: impl Into<anyhow::Error>) -> Self {
        Failure {
            code: 1,
            error: error.into(),
        }
    }

    fn system(error: impl Into<anyhow::Error>) -> Self {
        Failure {
            code: 2,
            error: error.into(),
        }
    }
}

impl From<ClientError> for Failure {
    fn from(e: ClientError) -> Self {
        let user = match &e {
            ClientError::Api { status, .. } => {
                let s = status.as_u16();
                (400..500).contains(&s)
            }
            _ => false,
        };
        if user {
            Failure::user(e)
        } else {
            Failure::system(e)
        }
    }
}

impl From<DeployError> for Failure {
    fn from(e: DeployError) -> Self {
        if e.is_user_error() {
            Failure::user(e)
        } else {
            Failure::system(e)
        }
    }
}

type CmdResult = Result<(), Failure>;

fn print_json(v: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("json prints"));
}

fn read_program(path: &PathBuf) -> Result<ProgramSpec, Failure> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(Failure::user)?;
    ProgramSpec::from_json_str(&text)
        .with_context(|| format!("parsing {}", path.display()))
        .map_err(Failure::user)
}

async fn serve(
    port: u16,
    host: String,
    load: Option<PathBuf>,
    event_log: Option<PathBuf>,
    lax: bool,
    max_chain_depth: u32,
    ui: Option<PathBuf>,
) -> CmdResult {
    let engine = Interface::new(EngineConfig {
        strict: !lax,
        max_chain_depth,
        event_log,
    })
    .map_err(Failure::user)?;
    if let Some(path) = load {
        let doc = read_program(&path)?;
        engine.load_program(&doc).map_err(Failure::user)?;
    }
    if let Some(dir) = &ui {
        if !dir.is_dir() {
            return Err(Failure::user(anyhow!("--ui {} is not a directory", dir.display())));
        }
    }
    let addr: SocketAddr = format!("{host}:{port}")
        .parse()
        .with_context(|| format!("bad address {host}:{port}"))
        .map_err(Failure::user)?;
    let config = ServerConfig {
        ui_dir: ui,
        ..ServerConfig::default()
    };
    let server = beestar_server::start(addr, beestar_server::AppState::new(Arc::new(engine), config))
        .await
        .map_err(Failure::system)?;
    println!("serving on {}", server.url());
    beestar_agent::termination_signal().await;
    server.stop().await.map_err(Failure::system)
}

async fn run(
    server_addr: String,
    program: PathBuf,
    target: DeploymentTarget,
    serve_port: Option<u16>,
    manifest_dir: PathBuf,
) -> CmdResult {
    let doc = read_program(&program)?;
    let local_server = match serve_port {
        Some(port) => {
            let addr = SocketAddr::from(([127, 0, 0, 1], port));
            let state = beestar_server::AppState::new(Arc::new(Interface::in_memory()), ServerConfig::default());
            Some(beestar_server::start(addr, state).await.map_err(Failure::system)?)
        }
        None => None,
    };
    let server_addr = local_server.as_ref().map_or(server_addr, |s| s.url());
    let client = ApiClient::new(&server_addr);
    client.load(&doc).await?;

    let mut config = DeployConfig::new(&server_addr);
    config.manifest_dir = manifest_dir;
    let deployer = Deployer::new(config);
    let agents: Vec<String> = client
        .entities()
        .await?
        .into_iter()
        .filter(|e| e.kind_chain.iter().any(|k| k == AGENT_ENTITY))
        .map(|e| e.name)
        .collect();

    let mut handles: Vec<AgentHandle> = Vec::new();
    for agent in &agents {
        match deployer.deploy(agent, target).await {
            Ok(h) => handles.push(h),
            Err(e) => {
                for h in &handles {
                    h.stop().await;
                }
                return Err(e.into());
            }
        }
    }
    print_summary(&client).await?;
    for h in &handles {
        match (h.manifest_path(), &h.endpoint) {
            (Some(path), _) => println!("agent {} ({}): {}", h.agent, h.target, path.display()),
            (None, Some(ep)) => println!("agent {} ({}): {}", h.agent, h.target, ep),
            (None, None) => println!("agent {} ({})", h.agent, h.target),
        }
    }
    println!("dashboard: {}/", client.base());
    if target == DeploymentTarget::Container && local_server.is_none() {
        return Ok(());
    }
    beestar_agent::termination_signal().await;
    for h in &handles {
        h.stop().await;
    }
    if let Some(s) = local_server {
        s.stop().await.map_err(Failure::system)?;
    }
    Ok(())
}

async fn print_summary(client: &ApiClient) -> CmdResult {
    for e in client.entities().await? {
        println!("{}\t{}", e.name, e.kind_chain.join(" < "));
    }
    Ok(())
}

async fn set(client: &ApiClient, entity: &str, prop: &str, value: &str, cause: &str) -> CmdResult {
    let json: serde_json::Value = serde_json::from_str(value)
        .with_context(|| format!("value `{value}` is not a JSON document (quote strings: '\"text\"')"))
        .map_err(Failure::user)?;
    let summary = client.set(entity, prop, json, cause).await?;
    let triggers: Vec<String> = summary.triggers.iter().map(|t| t.agent.clone()).collect();
    println!(
        "wave {} {}: {} events, {} notifications, triggers [{}]",
        summary.wave,
        summary.status,
        summary.events,
        summary.notifications,
        triggers.join(", ")
    );
    Ok(())
}

async fn msg(client: &ApiClient, agent: &str, verb: &str) -> CmdResult {
    if verb.parse::<beestar_core::protocol::Verb>().is_err() {
        return Err(Failure::user(anyhow!("unknown verb `{verb}` (play, stop, debug)")));
    }
    let reply = client.message(agent, verb).await?;
    println!("{}", reply.detail);
    match reply.status {
        beestar_core::protocol::ReplyStatus::Ok => Ok(()),
        beestar_core::protocol::ReplyStatus::Error => Err(Failure::system(anyhow!("agent error: {}", reply.detail))),
    }
}

async fn watch(client: &ApiClient, since: u64) -> CmdResult {
    let mut lines = client.events(since).await?;
    while let Some(line) = lines.next().await {
        match line? {
            StreamLine::Event(e) => print!("{}", e.to_line()),
            StreamLine::Heartbeat => {}
        }
    }
    Ok(())
}

async fn dispatch(cli: Cli) -> CmdResult {
    let client = ApiClient::new(&cli.server);
    match cli.command {
        Command::Serve {
            port,
            host,
            load,
            event_log,
            lax,
            max_chain_depth,
            ui,
        } => serve(port, host, load, event_log, lax, max_chain_depth, ui).await,
        Command::Run {
            program,
            target,
            serve,
            manifest_dir,
        } => run(cli.server, program, target, serve, manifest_dir).await,
        Command::Set {
            entity,
            prop,
            value,
            cause,
        } => set(&client, &entity, &prop, &value, &cause).await,
        Command::Msg { agent, verb } => msg(&client, &agent, &verb).await,
        Command::Ls => print_summary(&client).await,
        Command::Show { entity } => {
            let view = client.entity(&entity).await?;
            print_json(&serde_json::to_value(&view).expect("views serialize"));
            Ok(())
        }
        Command::Watch { since } => watch(&client, since).await,
        Command::Export { file } => {
            let doc = client.graph().await?;
            std::fs::write(&file, doc.to_canonical_string() + "\n")
                .with_context(|| format!("writing {}", file.display()))
                .map_err(Failure::user)
        }
        Command::Manifest { agent } => {
            let m = Deployer::new(DeployConfig::new(&cli.server)).generate_manifest(&agent).await?;
            print!("{}", m.text);
            Ok(())
        }
        Command::Agent { name, bind, advertise } => {
            let mut opts = AgentOptions::new(&cli.server, &name);
            if let Some(b) = bind {
                opts.bind = b;
            }
            opts.advertise = advertise;
            agent_main(opts).await.map_err(|e| match e {
                AgentError::Registration(_) => Failure::user(e),
                _ => Failure::system(e),
            })
        }
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()),
        )
        .init();
    let cli = Cli::parse();
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .expect("tokio runtime");
    match rt.block_on(dispatch(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

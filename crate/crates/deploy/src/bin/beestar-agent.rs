//! Standalone agent runtime. Reads the server address and agent name from
//! `BEESTAR_SERVER` and `BEESTAR_AGENT`, or from the first two arguments.

use std::process::ExitCode;

use beestar_agent::{agent_main, AgentError, AgentOptions};
use beestar_core::{ENV_AGENT, ENV_SERVER};

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .init();
    let mut args = std::env::args().skip(1);
    let server = args.next().or_else(|| std::env::var(ENV_SERVER).ok());
    let name = args.next().or_else(|| std::env::var(ENV_AGENT).ok());
    let (Some(server), Some(name)) = (server, name) else {
        eprintln!("usage: beestar-agent <server> <agent>  (or set {ENV_SERVER} and {ENV_AGENT})");
        return ExitCode::from(1);
    };
    let opts = match AgentOptions::new(&server, &name).with_env() {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let rt = tokio::runtime::Runtime::new().expect("tokio runtime");
    match rt.block_on(agent_main(opts)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ AgentError::Registration(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

//! Container manifest rendering.
//!
//! The output is a single-container pod description in YAML. The container
//! starts from a base image, installs each requirement in order, then runs
//! the agent runtime with the server address and agent name in its
//! environment.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use beestar_core::{ENV_AGENT, ENV_SERVER};

use beestar_agent::service::{ENV_AGENT_ADVERTISE, ENV_AGENT_BIND};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestConfig {
    pub base_image: String,
    /// Install command; each requirement is appended as one argument.
    pub install: String,
    /// Command that starts the agent runtime inside the container.
    pub launch: String,
    pub server: String,
    pub port: u16,
}

impl Default for ManifestConfig {
    fn default() -> Self {
        ManifestConfig {
            base_image: "python:3.11-slim".into(),
            install: "pip install".into(),
            launch: "beestar agent".into(),
            server: format!("http://beestar:{}", beestar_server::DEFAULT_PORT),
            port: 7400,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub agent: String,
    pub text: String,
}

impl Manifest {
    pub fn file_name(&self) -> String {
        format!("{}.yaml", slug(&self.agent))
    }

    pub fn write_to(&self, dir: &Path) -> std::io::Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(self.file_name());
        std::fs::write(&path, &self.text)?;
        Ok(path)
    }

    /// The install lines in the order they run.
    pub fn install_lines(&self) -> Vec<&str> {
        self.text
            .lines()
            .map(str::trim)
            .filter(|l| l.starts_with("pip install") || l.starts_with("install "))
            .collect()
    }
}

/// A DNS-label-safe name: lowercase alphanumerics and dashes.
pub fn slug(name: &str) -> String {
    let mut out = String::new();
    for c in name.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.ends_with('-') {
            out.push('-');
        }
    }
    let out = out.trim_matches('-');
    if out.is_empty() {
        "agent".into()
    } else {
        out.chars().take(63).collect()
    }
}

/// Quotes a word for `sh` only when it contains unsafe characters.
pub fn shell_quote(word: &str) -> String {
    let safe = !word.is_empty()
        && word
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || "._-+=:/@,%".contains(c));
    if safe {
        word.to_string()
    } else {
        format!("'{}'", word.replace('\'', r"'\''"))
    }
}

/// A YAML double-quoted scalar.
fn quoted(s: &str) -> String {
    serde_json::to_string(s).expect("strings serialize")
}

pub fn render(agent: &str, requirements: &[String], config: &ManifestConfig) -> Manifest {
    let name = slug(agent);
    let mut t = String::new();
    let _ = writeln!(t, "apiVersion: v1");
    let _ = writeln!(t, "kind: Pod");
    let _ = writeln!(t, "metadata:");
    let _ = writeln!(t, "  name: beestar-{name}");
    let _ = writeln!(t, "  labels:");
    let _ = writeln!(t, "    app: beestar");
    let _ = writeln!(t, "    beestar-agent: {name}");
    let _ = writeln!(t, "spec:");
    let _ = writeln!(t, "  restartPolicy: Never");
    let _ = writeln!(t, "  containers:");
    let _ = writeln!(t, "    - name: agent");
    let _ = writeln!(t, "      image: {}", quoted(&config.base_image));
    let _ = writeln!(t, "      command:");
    let _ = writeln!(t, "        - sh");
    let _ = writeln!(t, "        - -c");
    let _ = writeln!(t, "        - |");
    let _ = writeln!(t, "          set -e");
    for req in requirements {
        let _ = writeln!(t, "          {} {}", config.install, shell_quote(req));
    }
    let _ = writeln!(t, "          exec {}", config.launch);
    let _ = writeln!(t, "      env:");
    let env = [
        (ENV_SERVER, config.server.clone()),
        (ENV_AGENT, agent.to_string()),
        (ENV_AGENT_BIND, format!("0.0.0.0:{}", config.port)),
    ];
    for (k, v) in env {
        let _ = writeln!(t, "        - name: {k}");
        let _ = writeln!(t, "          value: {}", quoted(&v));
    }
    let _ = writeln!(t, "        - name: POD_IP");
    let _ = writeln!(t, "          valueFrom:");
    let _ = writeln!(t, "            fieldRef:");
    let _ = writeln!(t, "              fieldPath: status.podIP");
    let _ = writeln!(t, "        - name: {ENV_AGENT_ADVERTISE}");
    let _ = writeln!(t, "          value: {}", quoted(&format!("$(POD_IP):{}", config.port)));
    let _ = writeln!(t, "      ports:");
    let _ = writeln!(t, "        - containerPort: {}", config.port);
    let _ = writeln!(t, "          protocol: TCP");
    Manifest {
        agent: agent.to_string(),
        text: t,
    }
}

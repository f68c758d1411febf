//! Runs code in a child process.
//!
//! The input is written to the child's stdin as one canonical JSON
//! document; stdout must hold exactly one JSON document, the output.
//! Stderr lines become log lines. Exit status 0 means success.

use std::collections::HashMap;
use std::process::Stdio;
use std::time::{Duration, Instant};

use async_trait::async_trait;
use beestar_core::{Code, Value, ENV_DEBUG};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::process::{Child, Command};

use crate::executor::{CancelToken, ExecutionResult, Executor, Mode, Outcome};

/// Placeholder in a command template replaced by the code text.
pub const TEXT_PLACEHOLDER: &str = "{text}";

pub const DEFAULT_GRACE: Duration = Duration::from_secs(1);

#[derive(Debug, Clone)]
pub struct SubprocessExecutor {
    /// language -> argv template
    pub templates: HashMap<String, Vec<String>>,
    /// Time between the polite signal and the forced kill on cancel.
    pub grace: Duration,
}

fn argv(parts: &[&str]) -> Vec<String> {
    parts.iter().map(|s| s.to_string()).collect()
}

impl Default for SubprocessExecutor {
    fn default() -> Self {
        let mut templates = HashMap::new();
        templates.insert("sh".into(), argv(&["sh", "-c", TEXT_PLACEHOLDER]));
        templates.insert("shell".into(), argv(&["sh", "-c", TEXT_PLACEHOLDER]));
        templates.insert("bash".into(), argv(&["bash", "-c", TEXT_PLACEHOLDER]));
        templates.insert("python".into(), argv(&["python3", "-c", TEXT_PLACEHOLDER]));
        templates.insert("julia".into(), argv(&["julia", "-e", TEXT_PLACEHOLDER]));
        templates.insert("javascript".into(), argv(&["node", "-e", TEXT_PLACEHOLDER]));
        SubprocessExecutor {
            templates,
            grace: DEFAULT_GRACE,
        }
    }
}

impl SubprocessExecutor {
    pub fn command_for(&self, code: &Code) -> Option<Vec<String>> {
        let template = self.templates.get(&code.language)?;
        Some(
            template
                .iter()
                .map(|part| part.replace(TEXT_PLACEHOLDER, &code.text))
                .collect(),
        )
    }
}

#[cfg(unix)]
fn signal_group(child: &Child, sig: i32) {
    if let Some(pid) = child.id() {
        // The child leads its own process group, so this reaches grandchildren too.
        unsafe {
            libc::kill(-(pid as i32), sig);
        }
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

#[async_trait]
impl Executor for SubprocessExecutor {
    async fn run(&self, code: &Code, input: &Value, mode: Mode, mut cancel: CancelToken) -> ExecutionResult {
        let start = Instant::now();
        let mut log_lines = Vec::new();
        let finish = |outcome, log_lines, exit_status| ExecutionResult {
            outcome,
            duration: start.elapsed(),
            log_lines,
            exit_status,
        };
        let Some(cmd) = self.command_for(code) else {
            return finish(
                Outcome::Failed(format!("no command template for language `{}`", code.language)),
                log_lines,
                -1,
            );
        };
        if mode == Mode::Debug {
            log_lines.push(format!("DEBUG enter {}", cmd[0]));
        }

        let mut command = Command::new(&cmd[0]);
        command
            .args(&cmd[1..])
            .env("BEESTAR_ENTRYPOINT", &code.entrypoint)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .kill_on_drop(true)
            .process_group(0);
        if mode == Mode::Debug {
            command.env(ENV_DEBUG, "1");
        } else {
            command.env_remove(ENV_DEBUG);
        }
        let mut child = match command.spawn() {
            Ok(c) => c,
            Err(e) => {
                return finish(
                    Outcome::Failed(format!("cannot start `{}`: {e}", cmd[0])),
                    log_lines,
                    -1,
                )
            }
        };

        let doc = input.to_canonical_string();
        let mut stdin = child.stdin.take().expect("stdin piped");
        let writer = tokio::spawn(async move {
            // A child that never reads its input is not an error.
            let _ = stdin.write_all(doc.as_bytes()).await;
            let _ = stdin.shutdown().await;
        });
        let mut stdout = child.stdout.take().expect("stdout piped");
        let out_task = tokio::spawn(async move {
            let mut buf = Vec::new();
            let _ = stdout.read_to_end(&mut buf).await;
            buf
        });
        let mut stderr = child.stderr.take().expect("stderr piped");
        let err_task = tokio::spawn(async move {
            let mut buf = Vec::new();
            let _ = stderr.read_to_end(&mut buf).await;
            buf
        });

        let status = tokio::select! {
            s = child.wait() => Some(s),
            _ = cancel.cancelled() => None,
        };
        let status = match status {
            Some(Ok(s)) => s,
            Some(Err(e)) => return finish(Outcome::Failed(format!("wait failed: {e}")), log_lines, -1),
            None => {
                signal_group(&child, libc::SIGTERM);
                let code = match tokio::time::timeout(self.grace, child.wait()).await {
                    Ok(Ok(s)) => exit_code(s),
                    _ => {
                        signal_group(&child, libc::SIGKILL);
                        let _ = child.kill().await;
                        128 + libc::SIGKILL
                    }
                };
                writer.abort();
                out_task.abort();
                err_task.abort();
                if mode == Mode::Debug {
                    log_lines.push(format!("DEBUG exit cancelled status={code}"));
                }
                return finish(Outcome::Cancelled, log_lines, code);
            }
        };
        let _ = writer.await;
        let stdout = out_task.await.unwrap_or_default();
        let stderr = err_task.await.unwrap_or_default();
        log_lines.extend(String::from_utf8_lossy(&stderr).lines().map(str::to_string));
        let code = exit_code(status);
        if mode == Mode::Debug {
            log_lines.push(format!("DEBUG exit status={code}"));
        }
        if code != 0 {
            return finish(Outcome::Failed(format!("exit status {code}")), log_lines, code);
        }
        let outcome = serde_json::from_slice::<serde_json::Value>(&stdout)
            .map_err(|e| format!("stdout is not one JSON document: {e}"))
            .and_then(|j| Value::from_json(&j).map_err(|e| e.to_string()))
            .map_or_else(Outcome::Failed, Outcome::Output);
        finish(outcome, log_lines, code)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sh(text: &str) -> Code {
        Code::new("sh", "main", text).unwrap()
    }

    async fn run(code: &Code, input: Value, mode: Mode) -> ExecutionResult {
        SubprocessExecutor::default()
            .run(code, &input, mode, CancelToken::never())
            .await
    }

    #[tokio::test]
    async fn echo_round_trips_the_document() {
        let input = Value::from_json(&serde_json::json!({"x": 1})).unwrap();
        let r = run(&sh("cat"), input.clone(), Mode::Normal).await;
        assert_eq!(r.output(), Some(&input));
        assert_eq!(r.exit_status, 0);
    }

    #[tokio::test]
    async fn uppercase_script() {
        let r = run(&sh("tr '[:lower:]' '[:upper:]'"), "bulldozer".into(), Mode::Normal).await;
        assert_eq!(r.output(), Some(&Value::from("BULLDOZER")));
    }

    #[tokio::test]
    async fn nonzero_exit_fails_and_stderr_is_logged() {
        let r = run(&sh("echo oops >&2; exit 3"), Value::Null, Mode::Normal).await;
        assert_eq!(r.outcome, Outcome::Failed("exit status 3".into()));
        assert_eq!(r.log_lines, vec!["oops"]);
        assert_eq!(r.exit_status, 3);
    }

    #[tokio::test]
    async fn bad_stdout_fails() {
        let r = run(&sh("echo not json"), Value::Null, Mode::Normal).await;
        assert!(matches!(r.outcome, Outcome::Failed(_)));
    }

    #[tokio::test]
    async fn debug_sets_environment_flag() {
        let code = sh(&format!("echo \"\\\"${ENV_DEBUG}\\\"\""));
        let normal = run(&code, Value::Null, Mode::Normal).await;
        assert_eq!(normal.output(), Some(&Value::from("")));
        let debug = run(&code, Value::Null, Mode::Debug).await;
        assert_eq!(debug.output(), Some(&Value::from("1")));
        assert!(debug.log_lines.first().unwrap().starts_with("DEBUG enter"));
        assert!(debug.log_lines.last().unwrap().starts_with("DEBUG exit"));
    }

    #[tokio::test]
    async fn stdin_is_not_inherited() {
        // With stdin piped and closed after the document, a reader hits EOF.
        let r = run(&sh("cat > /dev/null; echo 1"), "x".into(), Mode::Normal).await;
        assert_eq!(r.output(), Some(&Value::from(1.0)));
    }

    #[tokio::test]
    async fn unknown_language_fails() {
        let r = run(&Code::new("cobol", "main", "x").unwrap(), Value::Null, Mode::Normal).await;
        assert!(matches!(r.outcome, Outcome::Failed(m) if m.contains("cobol")));
    }

    #[tokio::test]
    async fn cancel_terminates_the_child_quickly() {
        let (handle, token) = crate::executor::cancel_pair();
        let started = Instant::now();
        let task = tokio::spawn(async move {
            SubprocessExecutor::default()
                .run(&sh("sleep 30"), &Value::Null, Mode::Normal, token)
                .await
        });
        tokio::time::sleep(Duration::from_millis(100)).await;
        handle.cancel();
        let r = task.await.unwrap();
        assert_eq!(r.outcome, Outcome::Cancelled);
        assert!(started.elapsed() < Duration::from_secs(2));
    }

    #[tokio::test]
    async fn cancel_kills_a_child_ignoring_sigterm() {
        let exec = SubprocessExecutor {
            grace: Duration::from_millis(200),
            ..SubprocessExecutor::default()
        };
        let (handle, token) = crate::executor::cancel_pair();
        let task = tokio::spawn(async move {
            exec.run(&sh("trap '' TERM; sleep 30"), &Value::Null, Mode::Normal, token)
                .await
        });
        tokio::time::sleep(Duration::from_millis(100)).await;
        handle.cancel();
        let r = tokio::time::timeout(Duration::from_secs(2), task).await.unwrap().unwrap();
        assert_eq!(r.outcome, Outcome::Cancelled);
        assert_eq!(r.exit_status, 128 + libc::SIGKILL);
    }
}

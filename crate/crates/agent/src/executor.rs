//! The executor abstraction: run a code value against an input value.

use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use beestar_core::{Code, Value};
use tokio::sync::watch;

use crate::builtin::BuiltinExecutor;
use crate::subprocess::SubprocessExecutor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Normal,
    /// Executor-defined verbose tracing.
    Debug,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Output(Value),
    Failed(String),
    Cancelled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionResult {
    pub outcome: Outcome,
    pub duration: Duration,
    pub log_lines: Vec<String>,
    pub exit_status: i32,
}

impl ExecutionResult {
    pub fn output(&self) -> Option<&Value> {
        match &self.outcome {
            Outcome::Output(v) => Some(v),
            _ => None,
        }
    }
}

/// The receiving half of a cancellation signal.
#[derive(Debug, Clone)]
pub struct CancelToken(watch::Receiver<bool>);

/// The sending half; cancelling is idempotent.
#[derive(Debug)]
pub struct CancelHandle(watch::Sender<bool>);

pub fn cancel_pair() -> (CancelHandle, CancelToken) {
    let (tx, rx) = watch::channel(false);
    (CancelHandle(tx), CancelToken(rx))
}

impl CancelHandle {
    pub fn cancel(&self) {
        let _ = self.0.send(true);
    }
}

impl CancelToken {
    /// A token that is never cancelled.
    pub fn never() -> CancelToken {
        let (_, rx) = watch::channel(false);
        CancelToken(rx)
    }

    pub fn is_cancelled(&self) -> bool {
        *self.0.borrow()
    }

    /// Resolves once cancelled; pends forever if the handle is dropped first.
    pub async fn cancelled(&mut self) {
        while !*self.0.borrow_and_update() {
            if self.0.changed().await.is_err() {
                std::future::pending::<()>().await;
            }
        }
    }
}

#[async_trait]
pub trait Executor: Send + Sync {
    async fn run(&self, code: &Code, input: &Value, mode: Mode, cancel: CancelToken) -> ExecutionResult;
}

/// Sends `builtin` code to the builtin table and everything else to a
/// child process.
#[derive(Clone)]
pub struct DispatchExecutor {
    pub builtin: Arc<BuiltinExecutor>,
    pub subprocess: Arc<SubprocessExecutor>,
}

impl Default for DispatchExecutor {
    fn default() -> Self {
        DispatchExecutor {
            builtin: Arc::new(BuiltinExecutor),
            subprocess: Arc::new(SubprocessExecutor::default()),
        }
    }
}

#[async_trait]
impl Executor for DispatchExecutor {
    async fn run(&self, code: &Code, input: &Value, mode: Mode, cancel: CancelToken) -> ExecutionResult {
        if code.language == crate::builtin::LANGUAGE {
            self.builtin.run(code, input, mode, cancel).await
        } else {
            self.subprocess.run(code, input, mode, cancel).await
        }
    }
}

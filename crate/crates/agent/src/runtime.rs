//! The agent lifecycle: idle / running / stopping / error, with at most one
//! execution in flight and at most one coalesced pending trigger.

use std::sync::{Arc, Mutex, MutexGuard};
use std::time::Duration;

use beestar_core::kind::{props, LOG_ENTITY};
use beestar_core::protocol::{AgentReply, Verb};
use beestar_core::{Code, Value};
use tokio::sync::watch;

use crate::executor::{cancel_pair, CancelHandle, CancelToken, ExecutionResult, Executor, Mode, Outcome};
use crate::graph::{GraphClient, GraphClientError, WireCause};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgentState {
    Idle,
    Running,
    Stopping,
    Error,
}

impl AgentState {
    pub fn as_str(self) -> &'static str {
        match self {
            AgentState::Idle => "idle",
            AgentState::Running => "running",
            AgentState::Stopping => "stopping",
            AgentState::Error => "error",
        }
    }
}

/// How long `stop` waits for a cancelled run to wind down before replying.
const STOP_WAIT: Duration = Duration::from_secs(3);

struct Inner {
    state: AgentState,
    pending: Option<Mode>,
    cancel: Option<CancelHandle>,
    last: Option<ExecutionResult>,
    executions: u64,
}

pub struct AgentRuntime {
    name: String,
    graph: Arc<dyn GraphClient>,
    executor: Arc<dyn Executor>,
    inner: Mutex<Inner>,
    /// Serializes graph writes made on behalf of this agent so status and
    /// output events land in a deterministic order.
    writes: tokio::sync::Mutex<()>,
    state_tx: watch::Sender<AgentState>,
}

impl AgentRuntime {
    pub fn new(name: &str, graph: Arc<dyn GraphClient>, executor: Arc<dyn Executor>) -> Arc<Self> {
        let (state_tx, _) = watch::channel(AgentState::Idle);
        Arc::new(AgentRuntime {
            name: name.to_string(),
            graph,
            executor,
            inner: Mutex::new(Inner {
                state: AgentState::Idle,
                pending: None,
                cancel: None,
                last: None,
                executions: 0,
            }),
            writes: tokio::sync::Mutex::new(()),
            state_tx,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        self.inner.lock().expect("runtime state lock poisoned")
    }

    pub fn state(&self) -> AgentState {
        self.lock().state
    }

    /// Executor invocations so far.
    pub fn executions(&self) -> u64 {
        self.lock().executions
    }

    pub fn last_result(&self) -> Option<ExecutionResult> {
        self.lock().last.clone()
    }

    pub fn subscribe_state(&self) -> watch::Receiver<AgentState> {
        self.state_tx.subscribe()
    }

    fn set_state(&self, inner: &mut Inner, state: AgentState) {
        inner.state = state;
        self.state_tx.send_replace(state);
    }

    async fn write_status(&self, status: &str) {
        if let Err(e) = self
            .graph
            .set(&self.name, props::STATUS, Value::from(status), WireCause::AgentStatus)
            .await
        {
            tracing::warn!(agent = %self.name, "status write failed: {e}");
        }
    }

    /// Publishes `idle` and drops any pending trigger; used at startup.
    pub async fn reset(&self) {
        let _w = self.writes.lock().await;
        {
            let mut g = self.lock();
            g.pending = None;
            self.set_state(&mut g, AgentState::Idle);
        }
        self.write_status(AgentState::Idle.as_str()).await;
    }

    pub async fn handle(self: &Arc<Self>, verb: Verb, id: u64) -> AgentReply {
        match verb {
            Verb::Play => AgentReply::ok(id, self.play(Mode::Normal)),
            Verb::Debug => AgentReply::ok(id, self.play(Mode::Debug)),
            Verb::Stop => AgentReply::ok(id, self.stop().await),
        }
    }

    /// Starts a run, or marks one pending (newest wins) if busy.
    pub fn play(self: &Arc<Self>, mode: Mode) -> &'static str {
        let mut g = self.lock();
        match g.state {
            AgentState::Running | AgentState::Stopping => {
                g.pending = Some(mode);
                "queued"
            }
            AgentState::Idle | AgentState::Error => {
                let (handle, token) = cancel_pair();
                g.cancel = Some(handle);
                self.set_state(&mut g, AgentState::Running);
                drop(g);
                let rt = Arc::clone(self);
                tokio::spawn(async move { rt.work(mode, token).await });
                "started"
            }
        }
    }

    /// Cancels the current run, if any, and waits for it to wind down.
    pub async fn stop(self: &Arc<Self>) -> &'static str {
        let handle = {
            let mut g = self.lock();
            if g.state != AgentState::Running {
                return "idle";
            }
            g.pending = None;
            self.set_state(&mut g, AgentState::Stopping);
            g.cancel.take()
        };
        {
            let _w = self.writes.lock().await;
            self.write_status(AgentState::Stopping.as_str()).await;
        }
        if let Some(h) = handle {
            h.cancel();
        }
        let mut rx = self.subscribe_state();
        let settled = tokio::time::timeout(
            STOP_WAIT,
            rx.wait_for(|s| *s != AgentState::Stopping),
        )
        .await;
        if settled.is_ok() {
            "stopped"
        } else {
            "stopping"
        }
    }

    /// Sets this agent's own source code; the next run uses it.
    pub async fn self_modify(&self, code: Code) -> Result<(), GraphClientError> {
        let _w = self.writes.lock().await;
        self.graph
            .set(&self.name, props::SOURCE_CODE, Value::Code(code), WireCause::External)
            .await
    }

    async fn work(self: Arc<Self>, mut mode: Mode, mut token: CancelToken) {
        loop {
            let result = self.run_once(mode, token).await;
            let _w = self.writes.lock().await;
            let (next, status) = {
                let mut g = self.lock();
                let failed = match &result.outcome {
                    Outcome::Failed(e) => Some(e.clone()),
                    _ => None,
                };
                g.last = Some(result);
                if let Some(m) = g.pending.take() {
                    let (handle, t) = cancel_pair();
                    g.cancel = Some(handle);
                    self.set_state(&mut g, AgentState::Running);
                    (Some((m, t)), None)
                } else {
                    g.cancel = None;
                    match failed {
                        Some(e) => {
                            self.set_state(&mut g, AgentState::Error);
                            (None, Some(format!("error: {e}")))
                        }
                        None => {
                            self.set_state(&mut g, AgentState::Idle);
                            (None, Some(AgentState::Idle.as_str().to_string()))
                        }
                    }
                }
            };
            if let Some(s) = status {
                self.write_status(&s).await;
            }
            match next {
                Some((m, t)) => {
                    mode = m;
                    token = t;
                }
                None => return,
            }
        }
    }

    async fn run_once(&self, mode: Mode, token: CancelToken) -> ExecutionResult {
        {
            let _w = self.writes.lock().await;
            self.write_status(AgentState::Running.as_str()).await;
        }
        let failed = |msg: String| ExecutionResult {
            outcome: Outcome::Failed(msg),
            duration: Duration::ZERO,
            log_lines: vec![],
            exit_status: -1,
        };
        // Input is read at run start so a coalesced run sees the latest value.
        let view = match self.graph.view(&self.name).await {
            Ok(v) => v,
            Err(e) => return failed(format!("cannot read agent entity: {e}")),
        };
        let Some(code) = view.value(props::SOURCE_CODE).and_then(Value::as_code).cloned() else {
            return failed("missing source code".into());
        };
        let input = view.value(props::INPUT).cloned().unwrap_or(Value::Null);
        self.lock().executions += 1;
        let mut result = self.executor.run(&code, &input, mode, token).await;

        if let Outcome::Output(v) = &result.outcome {
            let _w = self.writes.lock().await;
            if self.lock().state == AgentState::Stopping {
                result.outcome = Outcome::Cancelled;
            } else if let Err(e) = self
                .graph
                .set(&self.name, props::OUTPUT, v.clone(), WireCause::AgentRun)
                .await
            {
                result.outcome = Outcome::Failed(format!("output rejected: {e}"));
            }
        }
        if !result.log_lines.is_empty() {
            self.append_logs(&result.log_lines).await;
        }
        result
    }

    /// Appends log lines to every log entity watching this agent.
    async fn append_logs(&self, lines: &[String]) {
        let Ok(program) = self.graph.program().await else {
            return;
        };
        let watchers = program
            .edges
            .iter()
            .filter(|e| e.to == self.name && e.label.starts_with("watches "))
            .map(|e| e.from.clone());
        let mut seen = std::collections::BTreeSet::new();
        for w in watchers {
            if !seen.insert(w.clone()) {
                continue;
            }
            let Ok(view) = self.graph.view(&w).await else {
                continue;
            };
            if !view.is_a(LOG_ENTITY) {
                continue;
            }
            let mut all = view
                .value(props::LINES)
                .and_then(Value::as_array)
                .map(<[Value]>::to_vec)
                .unwrap_or_default();
            all.extend(lines.iter().map(|l| Value::from(format!("{}: {l}", self.name))));
            let _w = self.writes.lock().await;
            if let Err(e) = self
                .graph
                .set(&w, props::LINES, Value::Array(all), WireCause::External)
                .await
            {
                tracing::warn!(agent = %self.name, log = %w, "log append failed: {e}");
            }
        }
    }
}

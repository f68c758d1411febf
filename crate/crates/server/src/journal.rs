//! The server's stream journal: every committed change as a numbered line.

use std::sync::Arc;

use beestar_core::propagation::{FeedItem, GraphDelta};
use beestar_core::value::canonical_string;
use beestar_core::{Cause, ChangeEvent, Interface};
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value as Json};
use tokio::sync::broadcast;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StreamKind {
    PropertyChanged,
    AgentStatus,
    GraphChanged,
}

/// One line of the event stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamEvent {
    pub seq: u64,
    pub kind: StreamKind,
    pub payload: Json,
}

impl StreamEvent {
    pub fn to_line(&self) -> String {
        let mut s = canonical_string(&serde_json::to_value(self).expect("stream events serialize"));
        s.push('\n');
        s
    }

    /// The change event carried by a `property_changed` line.
    pub fn change(&self) -> Option<ChangeEvent> {
        match self.kind {
            StreamKind::PropertyChanged => serde_json::from_value(self.payload.clone()).ok(),
            _ => None,
        }
    }
}

pub const HEARTBEAT_LINE: &str = "{\"kind\":\"heartbeat\"}\n";

/// A journal entry ready to send.
#[derive(Debug)]
pub struct Line {
    pub seq: u64,
    pub text: String,
}

struct Inner {
    lines: Vec<Arc<Line>>,
}

pub struct Journal {
    inner: Mutex<Inner>,
    tx: broadcast::Sender<Arc<Line>>,
}

impl Journal {
    /// `capacity` bounds how far a live reader may fall behind before it
    /// is disconnected.
    pub fn new(capacity: usize) -> Arc<Journal> {
        let (tx, _) = broadcast::channel(capacity.max(1));
        Arc::new(Journal {
            inner: Mutex::new(Inner { lines: Vec::new() }),
            tx,
        })
    }

    /// Records every commit of `engine` from now on.
    pub fn attach(self: &Arc<Self>, engine: &Interface) {
        let journal = Arc::clone(self);
        engine.observe(move |item| journal.record(item));
    }

    fn record(&self, item: &FeedItem) {
        let mut inner = self.inner.lock();
        let mut push = |kind, payload| {
            let ev = StreamEvent {
                seq: inner.lines.len() as u64 + 1,
                kind,
                payload,
            };
            let line = Arc::new(Line {
                seq: ev.seq,
                text: ev.to_line(),
            });
            inner.lines.push(Arc::clone(&line));
            // No receivers is fine; lagging receivers find out on their next recv.
            let _ = self.tx.send(line);
        };
        match item {
            FeedItem::Event(ev) => {
                push(
                    StreamKind::PropertyChanged,
                    serde_json::to_value(ev).expect("events serialize"),
                );
                if let Cause::AgentStatus { agent } = &ev.cause {
                    push(
                        StreamKind::AgentStatus,
                        json!({
                            "agent": agent,
                            "prop": ev.prop,
                            "status": ev.new.to_json(),
                            "version": ev.version,
                        }),
                    );
                }
            }
            FeedItem::Structure(delta) => push(StreamKind::GraphChanged, delta_json(delta)),
        }
    }

    pub fn head(&self) -> u64 {
        self.inner.lock().lines.len() as u64
    }

    /// Lines after `since` plus a receiver for everything later, taken
    /// under one lock so nothing is missed or repeated. A cursor beyond
    /// the head is clamped to it; the clamped cursor is returned first.
    pub fn open(&self, since: u64) -> (u64, Vec<Arc<Line>>, broadcast::Receiver<Arc<Line>>) {
        let inner = self.inner.lock();
        let start = (since as usize).min(inner.lines.len());
        let backlog = inner.lines[start..].to_vec();
        (start as u64, backlog, self.tx.subscribe())
    }
}

fn delta_json(delta: &GraphDelta) -> Json {
    serde_json::to_value(delta).expect("deltas serialize")
}

#[cfg(test)]
mod tests {
    use super::*;
    use beestar_core::{PropertyDecl, Value, ValueType};

    #[test]
    fn numbering_is_dense_and_status_lines_follow_their_change() {
        let app = Interface::in_memory();
        let j = Journal::new(16);
        j.attach(&app);
        app.agent_entity("a", beestar_core::Code::builtin("identity"))
            .unwrap();
        app.set_property(
            "a",
            "status",
            Value::from("running"),
            Cause::AgentStatus { agent: "a".into() },
        )
        .unwrap();
        let (_, lines, _) = j.open(0);
        let kinds: Vec<StreamKind> = lines
            .iter()
            .map(|l| serde_json::from_str::<StreamEvent>(&l.text).unwrap().kind)
            .collect();
        assert_eq!(
            kinds,
            vec![
                StreamKind::GraphChanged,
                StreamKind::PropertyChanged,
                StreamKind::AgentStatus
            ]
        );
        assert_eq!(lines.iter().map(|l| l.seq).collect::<Vec<_>>(), vec![1, 2, 3]);
    }

    #[test]
    fn cursor_past_head_yields_no_backlog() {
        let app = Interface::in_memory();
        let j = Journal::new(4);
        j.attach(&app);
        app.create_entity("e", "Entity", vec![PropertyDecl::new("x", ValueType::Any, Value::Null)])
            .unwrap();
        assert_eq!(j.open(0).1.len(), 1);
        assert!(j.open(1).1.is_empty());
        let (cursor, backlog, _) = j.open(99);
        assert!(backlog.is_empty());
        assert_eq!(cursor, 1);
    }
}

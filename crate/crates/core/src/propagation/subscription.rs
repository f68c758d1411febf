use serde::{Deserialize, Serialize};
use tokio::sync::mpsc::{UnboundedReceiver, UnboundedSender};

use super::event::{ChangeEvent, GraphDelta, Notification, Trigger};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SubscriptionId(pub u64);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "scope", rename_all = "snake_case")]
pub enum Scope {
    All,
    Entity { entity: String },
    Property { entity: String, prop: String },
}

impl Scope {
    pub fn property(entity: &str, prop: &str) -> Scope {
        Scope::Property {
            entity: entity.into(),
            prop: prop.into(),
        }
    }

    pub fn entity(entity: &str) -> Scope {
        Scope::Entity {
            entity: entity.into(),
        }
    }

    fn matches(&self, entity: &str, prop: &str) -> bool {
        match self {
            Scope::All => true,
            Scope::Entity { entity: e } => e == entity,
            Scope::Property { entity: e, prop: p } => e == entity && p == prop,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SinkKind {
    /// Receives [`Notification`]s for display entities watching the scope.
    DisplayNotification,
    /// Receives every committed [`ChangeEvent`] in scope.
    EventStream,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Delivery {
    Event(ChangeEvent),
    Notification(Notification),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subscription {
    pub id: SubscriptionId,
    pub scope: Scope,
    pub sink: SinkKind,
}

/// Everything committed by the engine, in commit order.
#[derive(Debug, Clone, PartialEq)]
pub enum FeedItem {
    Event(ChangeEvent),
    Structure(GraphDelta),
}

struct Entry {
    sub: Subscription,
    tx: UnboundedSender<Delivery>,
}

/// Called synchronously, in commit order, for every feed item.
pub type Observer = Box<dyn Fn(&FeedItem) + Send + Sync>;

/// Fan-out of committed results. Sends never block; closed receivers are
/// pruned on the next send.
#[derive(Default)]
pub(crate) struct Hub {
    next_id: u64,
    subs: Vec<Entry>,
    feeds: Vec<UnboundedSender<FeedItem>>,
    triggers: Vec<UnboundedSender<Trigger>>,
    observers: Vec<Observer>,
}

impl Hub {
    pub fn subscribe(&mut self, scope: Scope, sink: SinkKind) -> (Subscription, UnboundedReceiver<Delivery>) {
        let (tx, rx) = tokio::sync::mpsc::unbounded_channel();
        let sub = Subscription {
            id: SubscriptionId(self.next_id),
            scope,
            sink,
        };
        self.next_id += 1;
        self.subs.push(Entry {
            sub: sub.clone(),
            tx,
        });
        (sub, rx)
    }

    pub fn unsubscribe(&mut self, id: SubscriptionId) -> bool {
        let before = self.subs.len();
        self.subs.retain(|e| e.sub.id != id);
        before != self.subs.len()
    }

    pub fn feed(&mut self) -> UnboundedReceiver<FeedItem> {
        let (tx, rx) = tokio::sync::mpsc::unbounded_channel();
        self.feeds.push(tx);
        rx
    }

    pub fn observe(&mut self, f: Observer) {
        self.observers.push(f);
    }

    pub fn trigger_feed(&mut self) -> UnboundedReceiver<Trigger> {
        let (tx, rx) = tokio::sync::mpsc::unbounded_channel();
        self.triggers.push(tx);
        rx
    }

    pub fn publish_event(&mut self, ev: &ChangeEvent) {
        if !self.observers.is_empty() {
            let item = FeedItem::Event(ev.clone());
            self.observers.iter().for_each(|f| f(&item));
        }
        self.feeds.retain(|f| f.send(FeedItem::Event(ev.clone())).is_ok());
        self.subs.retain(|e| {
            if e.sub.sink != SinkKind::EventStream || !e.sub.scope.matches(&ev.entity, &ev.prop) {
                return true;
            }
            e.tx.send(Delivery::Event(ev.clone())).is_ok()
        });
    }

    pub fn publish_notification(&mut self, n: &Notification) {
        self.subs.retain(|e| {
            let in_scope = e.sub.scope.matches(&n.entity, &n.prop)
                || matches!(&e.sub.scope, Scope::Entity { entity } if *entity == n.display);
            if e.sub.sink != SinkKind::DisplayNotification || !in_scope {
                return true;
            }
            e.tx.send(Delivery::Notification(n.clone())).is_ok()
        });
    }

    pub fn publish_trigger(&mut self, t: &Trigger) {
        self.triggers.retain(|tx| tx.send(t.clone()).is_ok());
    }

    pub fn publish_delta(&mut self, d: &GraphDelta) {
        if !self.observers.is_empty() {
            let item = FeedItem::Structure(d.clone());
            self.observers.iter().for_each(|f| f(&item));
        }
        self.feeds
            .retain(|f| f.send(FeedItem::Structure(d.clone())).is_ok());
    }
}

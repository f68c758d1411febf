//! Watches/sets propagation: waves, the event log, and subscriptions.

mod event;
mod interface;
mod subscription;
mod wave;

pub use event::{
    replay, Cause, ChainId, ChangeEvent, GraphDelta, Notification, Trigger, WaveId, WaveReport,
};
pub use interface::{EngineConfig, EngineError, Interface, DEFAULT_MAX_CHAIN_DEPTH};
pub use subscription::{Delivery, FeedItem, Observer, Scope, SinkKind, Subscription, SubscriptionId};

//! In-process publish/subscribe with hierarchical topics.
//!
//! A [`Bus`] dispatches every publish under one lock, so subscribers see the
//! messages of a given publisher and topic in publish order. Subscriptions are
//! queues: the subscriber drains its [`Subscription`] at its own pace, and
//! dropping the handle unsubscribes.

mod params;
mod topic;

use std::collections::BTreeMap;
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::{Arc, Mutex, Weak};

use thiserror::Error;

pub use params::{ParamValue, ParameterStore};
pub use topic::{match_pattern, PatternSegment, TopicPath, TopicPattern};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BusError {
    #[error("topic `{0}` is relative and was not resolved against a namespace")]
    UnresolvedRelativeTopic(String),
    #[error("malformed topic pattern `{0}`")]
    MalformedPattern(String),
    #[error("topic `{0}` is already absolute")]
    AlreadyAbsolute(String),
    #[error("empty topic `{0}`")]
    EmptyTopic(String),
    #[error("wildcard in concrete topic `{0}`")]
    WildcardInTopic(String),
    #[error("skill namespace `{0}` must be absolute")]
    RelativeNamespace(String),
    #[error("parameter `{name}`: {reason}")]
    BadParameter { name: String, reason: String },
}

/// A node grouping publishers and subscribers that may be twin-synchronized.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Skill {
    pub id: u8,
    pub name: String,
    namespace: TopicPath,
    publishes: Vec<TopicPath>,
    subscribes: Vec<TopicPattern>,
}

impl Skill {
    pub fn new(id: u8, name: impl Into<String>, namespace: &str) -> Result<Self, BusError> {
        let namespace = TopicPath::parse(namespace)?;
        if !namespace.is_absolute() {
            return Err(BusError::RelativeNamespace(namespace.to_string()));
        }
        Ok(Skill { id, name: name.into(), namespace, publishes: Vec::new(), subscribes: Vec::new() })
    }

    /// Declares a published topic; relative names resolve in the namespace.
    pub fn publishes(mut self, topic: &str) -> Result<Self, BusError> {
        let t = self.resolve(&TopicPath::parse(topic)?)?;
        self.publishes.push(t);
        Ok(self)
    }

    pub fn subscribes(mut self, pattern: &str) -> Result<Self, BusError> {
        let p = TopicPattern::parse(pattern)?.anchored(&self.namespace);
        self.subscribes.push(p);
        Ok(self)
    }

    pub fn namespace(&self) -> &TopicPath {
        &self.namespace
    }

    pub fn published_topics(&self) -> &[TopicPath] {
        &self.publishes
    }

    pub fn subscribed_patterns(&self) -> &[TopicPattern] {
        &self.subscribes
    }

    /// Concrete topics this skill subscribes to (wildcard-free patterns only).
    pub fn subscribed_topics(&self) -> impl Iterator<Item = TopicPath> + '_ {
        self.subscribes.iter().filter_map(|p| TopicPath::parse(&p.to_string()).ok())
    }

    /// Absolute topics pass through; relative ones are prefixed with the namespace.
    pub fn resolve(&self, topic: &TopicPath) -> Result<TopicPath, BusError> {
        if topic.is_absolute() {
            Ok(topic.clone())
        } else {
            resolve_relative(self, topic)
        }
    }
}

/// `skill.namespace ++ topic`. Rejects topics that are already absolute.
pub fn resolve_relative(skill: &Skill, topic: &TopicPath) -> Result<TopicPath, BusError> {
    topic.resolve_against(&skill.namespace)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BusMessage<M> {
    pub topic: TopicPath,
    pub publisher: u8,
    pub message: M,
}

struct Entry<M> {
    pattern: TopicPattern,
    subscriber: u8,
    tx: Sender<BusMessage<M>>,
}

struct Inner<M> {
    next_id: u64,
    entries: BTreeMap<u64, Entry<M>>,
}

/// Shared handle to one bus. Cloning shares the bus.
pub struct Bus<M> {
    inner: Arc<Mutex<Inner<M>>>,
}

impl<M> Clone for Bus<M> {
    fn clone(&self) -> Self {
        Bus { inner: Arc::clone(&self.inner) }
    }
}

impl<M: Clone> Default for Bus<M> {
    fn default() -> Self {
        Self::new()
    }
}

impl<M: Clone> Bus<M> {
    pub fn new() -> Self {
        Bus { inner: Arc::new(Mutex::new(Inner { next_id: 0, entries: BTreeMap::new() })) }
    }

    /// Delivers to every matching subscription and returns how many got it.
    pub fn publish(&self, topic: &TopicPath, message: M, publisher: &Skill) -> Result<usize, BusError> {
        if !topic.is_absolute() {
            return Err(BusError::UnresolvedRelativeTopic(topic.to_string()));
        }
        let mut inner = self.inner.lock().expect("bus lock poisoned");
        let mut delivered = 0;
        let mut dead = Vec::new();
        for (id, entry) in &inner.entries {
            if !entry.pattern.matches(topic) {
                continue;
            }
            let msg = BusMessage { topic: topic.clone(), publisher: publisher.id, message: message.clone() };
            match entry.tx.send(msg) {
                Ok(()) => delivered += 1,
                Err(_) => dead.push(*id),
            }
        }
        for id in dead {
            inner.entries.remove(&id);
        }
        Ok(delivered)
    }

    pub fn subscribe(&self, pattern: &TopicPattern, subscriber: &Skill) -> Result<Subscription<M>, BusError> {
        if !pattern.is_absolute() {
            return Err(BusError::UnresolvedRelativeTopic(pattern.to_string()));
        }
        let (tx, rx) = mpsc::channel();
        let mut inner = self.inner.lock().expect("bus lock poisoned");
        let id = inner.next_id;
        inner.next_id += 1;
        inner.entries.insert(id, Entry { pattern: pattern.clone(), subscriber: subscriber.id, tx });
        Ok(Subscription { id, rx, bus: Arc::downgrade(&self.inner) })
    }

    pub fn subscriber_count(&self) -> usize {
        self.inner.lock().expect("bus lock poisoned").entries.len()
    }

    /// Skill ids with a live subscription, in subscription order.
    pub fn subscribers(&self) -> Vec<u8> {
        self.inner.lock().expect("bus lock poisoned").entries.values().map(|e| e.subscriber).collect()
    }
}

/// Receiving end of one subscription.
pub struct Subscription<M> {
    id: u64,
    rx: Receiver<BusMessage<M>>,
    bus: Weak<Mutex<Inner<M>>>,
}

impl<M> Subscription<M> {
    pub fn try_recv(&self) -> Option<BusMessage<M>> {
        self.rx.try_recv().ok()
    }

    pub fn drain(&self) -> Vec<BusMessage<M>> {
        std::iter::from_fn(|| self.try_recv()).collect()
    }

    /// Stops delivery; queued messages stay readable until the handle drops.
    pub fn unsubscribe(&self) {
        if let Some(inner) = self.bus.upgrade() {
            if let Ok(mut inner) = inner.lock() {
                inner.entries.remove(&self.id);
            }
        }
    }
}

impl<M> Drop for Subscription<M> {
    fn drop(&mut self) {
        self.unsubscribe();
    }
}

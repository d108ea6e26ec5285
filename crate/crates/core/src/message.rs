//! Messages and sender sets.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::graph::NodeId;

/// Identifier of a broadcast message. Totally ordered; the order is what the
/// smallest-id selection policy uses.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MessageId(pub u64);

impl fmt::Display for MessageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// A broadcast message: unique id plus an opaque payload. Two broadcasts of
/// the same id must carry the same payload; the scenario loader rejects
/// anything else.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Message {
    pub id: MessageId,
    pub payload: String,
}

impl Message {
    pub fn new(id: u64, payload: impl Into<String>) -> Self {
        Message {
            id: MessageId(id),
            payload: payload.into(),
        }
    }
}

/// Sender buffer of the parity-split algorithms.
///
/// `Bot` ("no arrival") is distinct from the empty set: an empty set means the
/// node itself invoked the broadcast and still owes a send to every neighbor,
/// while `Bot` means there is nothing to forward.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum SenderSet {
    Bot,
    Senders(BTreeSet<NodeId>),
}

impl SenderSet {
    pub fn empty() -> Self {
        SenderSet::Senders(BTreeSet::new())
    }

    pub fn is_bot(&self) -> bool {
        matches!(self, SenderSet::Bot)
    }

    /// Inserts a sender; inserting into `Bot` yields the singleton set.
    pub fn insert(&mut self, w: NodeId) {
        match self {
            SenderSet::Bot => *self = SenderSet::Senders(BTreeSet::from([w])),
            SenderSet::Senders(s) => {
                s.insert(w);
            }
        }
    }

    pub fn as_set(&self) -> Option<&BTreeSet<NodeId>> {
        match self {
            SenderSet::Bot => None,
            SenderSet::Senders(s) => Some(s),
        }
    }

    /// Canonical textual form, used for configuration digests.
    pub(crate) fn encode(&self, out: &mut String) {
        match self {
            SenderSet::Bot => out.push('_'),
            SenderSet::Senders(s) => {
                out.push('{');
                for w in s {
                    out.push_str(&w.index().to_string());
                    out.push(',');
                }
                out.push('}');
            }
        }
    }
}

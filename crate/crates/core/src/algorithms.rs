//! Per-node protocol handlers.
//!
//! Each handler is a pure state machine driven by the engine through four
//! hooks per round, in this order: `on_receive` for every arrival, then
//! `on_broadcast` for locally injected broadcasts, then `decide_sends` once,
//! then `end_of_round`. Handlers never see a global round counter, only
//! their own parity flag.
//!
//! * `synaf` — amnesiac flooding. Stateless across rounds: forwards every
//!   message received this round to the neighbors it did not arrive from.
//! * `naive` — the broken deferral variant: one accumulating sender set per
//!   message, flushed at the first available round. Kept because it
//!   reproducibly fails to terminate under some availability schemes.
//! * `synafi` — parity-split deferral. Senders are buffered per round
//!   parity; a blocked send is implicitly retried at the next available
//!   round of the same parity, which keeps concurrent senders on one side
//!   of the double cover and restores termination.
//! * `multi:*` — the multi-message table (`synafi` per message id) with at
//!   most `b` distinct messages transmitted per round, selected either by
//!   smallest id or by a fair round-robin queue.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use crate::graph::NodeId;
use crate::message::{Message, MessageId, SenderSet};

/// Which entry to transmit when more are sendable than capacity allows.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum SelectionPolicy {
    /// Always the sendable entries with the smallest message ids.
    SmallestId,
    /// FIFO over entry creation; a selected entry that stays alive
    /// re-enqueues at the tail, so every sendable entry is picked within a
    /// bounded number of selections.
    FairRoundRobin,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Algorithm {
    SynAf,
    NaiveDeferred,
    SynAfi,
    Multi(SelectionPolicy),
}

impl Algorithm {
    pub fn parse(name: &str) -> Option<Algorithm> {
        match name {
            "synaf" => Some(Algorithm::SynAf),
            "naive" => Some(Algorithm::NaiveDeferred),
            "synafi" => Some(Algorithm::SynAfi),
            "multi:smallest" => Some(Algorithm::Multi(SelectionPolicy::SmallestId)),
            "multi:fair" => Some(Algorithm::Multi(SelectionPolicy::FairRoundRobin)),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::SynAf => "synaf",
            Algorithm::NaiveDeferred => "naive",
            Algorithm::SynAfi => "synafi",
            Algorithm::Multi(SelectionPolicy::SmallestId) => "multi:smallest",
            Algorithm::Multi(SelectionPolicy::FairRoundRobin) => "multi:fair",
        }
    }

    /// Whether the per-round capacity limit applies. The single-message
    /// algorithms have no selection step, so capacity is meaningful only for
    /// the message-table variants.
    pub fn capacity_limited(&self) -> bool {
        matches!(self, Algorithm::Multi(_))
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One send decision: a message and the set of neighbors to send it to.
pub type Send = (Message, BTreeSet<NodeId>);

fn slot(parity: bool) -> usize {
    parity as usize
}

/// Per-node handler state for one of the algorithms.
#[derive(Clone, Debug)]
pub enum NodeHandler {
    SynAf(SynAfState),
    Naive(NaiveState),
    SynAfi(SynAfiState),
    Multi(MultiState),
}

impl NodeHandler {
    pub fn new(algo: Algorithm, initial_parity: bool, capacity: u32) -> NodeHandler {
        match algo {
            Algorithm::SynAf => NodeHandler::SynAf(SynAfState::default()),
            Algorithm::NaiveDeferred => NodeHandler::Naive(NaiveState::default()),
            Algorithm::SynAfi => NodeHandler::SynAfi(SynAfiState::new(initial_parity)),
            Algorithm::Multi(policy) => {
                NodeHandler::Multi(MultiState::new(initial_parity, policy, capacity))
            }
        }
    }

    pub fn on_receive(&mut self, from: NodeId, msg: &Message) {
        match self {
            NodeHandler::SynAf(s) => s.on_receive(from, msg),
            NodeHandler::Naive(s) => s.on_receive(from, msg),
            NodeHandler::SynAfi(s) => s.on_receive(from, msg),
            NodeHandler::Multi(s) => s.on_receive(from, msg),
        }
    }

    /// Injects a locally invoked broadcast. If the node already received the
    /// message in the slot the broadcast would claim, the receipt wins and
    /// the broadcast is dropped as already satisfied.
    pub fn on_broadcast(&mut self, msg: &Message) {
        match self {
            NodeHandler::SynAf(s) => s.on_broadcast(msg),
            NodeHandler::Naive(s) => s.on_broadcast(msg),
            NodeHandler::SynAfi(s) => s.on_broadcast(msg),
            NodeHandler::Multi(s) => s.on_broadcast(msg),
        }
    }

    pub fn decide_sends(&mut self, neighbors: &BTreeSet<NodeId>, available: bool) -> Vec<Send> {
        match self {
            NodeHandler::SynAf(s) => s.decide_sends(neighbors, available),
            NodeHandler::Naive(s) => s.decide_sends(neighbors, available),
            NodeHandler::SynAfi(s) => s.decide_sends(neighbors, available),
            NodeHandler::Multi(s) => s.decide_sends(neighbors, available),
        }
    }

    pub fn end_of_round(&mut self) {
        match self {
            NodeHandler::SynAf(s) => s.received.clear(),
            NodeHandler::Naive(_) => {}
            NodeHandler::SynAfi(s) => s.parity = !s.parity,
            NodeHandler::Multi(s) => s.parity = !s.parity,
        }
    }

    /// True when the node holds nothing that could cause a future event: no
    /// sendable table entry and no buffered sender set.
    pub fn is_quiescent(&self) -> bool {
        match self {
            NodeHandler::SynAf(s) => s.received.is_empty(),
            NodeHandler::Naive(s) => s.slots.is_empty(),
            NodeHandler::SynAfi(s) => s
                .entries
                .values()
                .all(|e| e.slots.iter().all(SenderSet::is_bot)),
            NodeHandler::Multi(s) => s
                .tbl
                .values()
                .all(|e| e.lists.iter().all(SenderSet::is_bot)),
        }
    }

    /// Current-parity sender sets, taken right before the availability check.
    /// Only the parity-split single-message algorithm exposes these; they are
    /// what the layered-graph originator sets must equal.
    pub fn parity_snapshots(&self) -> Vec<(MessageId, BTreeSet<NodeId>)> {
        match self {
            NodeHandler::SynAfi(s) => s
                .entries
                .iter()
                .filter_map(|(id, e)| e.slots[slot(s.parity)].as_set().map(|v| (*id, v.clone())))
                .collect(),
            _ => Vec::new(),
        }
    }

    /// Canonical textual encoding of the node state, for configuration
    /// digests in cycle detection.
    pub fn encode_state(&self, out: &mut String) {
        match self {
            NodeHandler::SynAf(s) => {
                out.push('A');
                for (id, (_, senders)) in &s.received {
                    out.push_str(&format!("{id}:"));
                    SenderSet::Senders(senders.clone()).encode(out);
                }
            }
            NodeHandler::Naive(s) => {
                out.push('N');
                for (id, (_, set)) in &s.slots {
                    out.push_str(&format!("{id}:"));
                    set.encode(out);
                }
            }
            NodeHandler::SynAfi(s) => {
                out.push('I');
                out.push(if s.parity { 't' } else { 'f' });
                for (id, e) in &s.entries {
                    out.push_str(&format!("{id}:"));
                    e.slots[0].encode(out);
                    e.slots[1].encode(out);
                }
            }
            NodeHandler::Multi(s) => {
                out.push('M');
                out.push(if s.parity { 't' } else { 'f' });
                for (id, e) in &s.tbl {
                    out.push_str(&format!("{id}:"));
                    e.lists[0].encode(out);
                    e.lists[1].encode(out);
                }
                out.push('|');
                for id in &s.queue {
                    out.push_str(&format!("{id},"));
                }
            }
        }
    }
}

/// Amnesiac flooding: per-round map from message id to the senders it
/// arrived from this round. Cleared at the end of every round.
#[derive(Clone, Debug, Default)]
pub struct SynAfState {
    received: BTreeMap<MessageId, (Message, BTreeSet<NodeId>)>,
}

impl SynAfState {
    fn on_receive(&mut self, from: NodeId, msg: &Message) {
        self.received
            .entry(msg.id)
            .or_insert_with(|| (msg.clone(), BTreeSet::new()))
            .1
            .insert(from);
    }

    fn on_broadcast(&mut self, msg: &Message) {
        // An empty sender set stands for "own broadcast": send to everyone.
        self.received
            .entry(msg.id)
            .or_insert_with(|| (msg.clone(), BTreeSet::new()));
    }

    fn decide_sends(&mut self, neighbors: &BTreeSet<NodeId>, available: bool) -> Vec<Send> {
        if !available {
            // Stateless: a blocked round simply drops the forwards.
            self.received.clear();
            return Vec::new();
        }
        let mut sends = Vec::new();
        for (msg, senders) in self.received.values() {
            if senders == neighbors {
                continue;
            }
            let to: BTreeSet<NodeId> = neighbors.difference(senders).copied().collect();
            if !to.is_empty() {
                sends.push((msg.clone(), to));
            }
        }
        self.received.clear();
        sends
    }
}

/// The deferred variant without the parity split: a single sender set per
/// message that keeps absorbing arrivals while the channel is blocked and is
/// flushed wholesale at the first available round. May never terminate.
#[derive(Clone, Debug, Default)]
pub struct NaiveState {
    slots: BTreeMap<MessageId, (Message, SenderSet)>,
}

impl NaiveState {
    fn on_receive(&mut self, from: NodeId, msg: &Message) {
        self.slots
            .entry(msg.id)
            .or_insert_with(|| (msg.clone(), SenderSet::Bot))
            .1
            .insert(from);
    }

    fn on_broadcast(&mut self, msg: &Message) {
        let entry = self
            .slots
            .entry(msg.id)
            .or_insert_with(|| (msg.clone(), SenderSet::Bot));
        if entry.1.is_bot() {
            entry.1 = SenderSet::empty();
        }
    }

    fn decide_sends(&mut self, neighbors: &BTreeSet<NodeId>, available: bool) -> Vec<Send> {
        if !available {
            return Vec::new();
        }
        let mut sends = Vec::new();
        for (msg, set) in self.slots.values() {
            let senders = set.as_set().expect("stored slots are never bot");
            let to: BTreeSet<NodeId> = neighbors.difference(senders).copied().collect();
            if !to.is_empty() {
                sends.push((msg.clone(), to));
            }
        }
        self.slots.clear();
        sends
    }
}

#[derive(Clone, Debug)]
struct ParityEntry {
    msg: Message,
    slots: [SenderSet; 2],
}

/// Parity-split deferral, one entry per message id. The two slots hold the
/// senders seen in odd and even local rounds; only the current-parity slot
/// is ever sent or reset, so a blocked send stays put until the next
/// available round of the same parity.
#[derive(Clone, Debug)]
pub struct SynAfiState {
    parity: bool,
    entries: BTreeMap<MessageId, ParityEntry>,
}

impl SynAfiState {
    fn new(parity: bool) -> Self {
        SynAfiState {
            parity,
            entries: BTreeMap::new(),
        }
    }

    fn on_receive(&mut self, from: NodeId, msg: &Message) {
        let p = slot(self.parity);
        self.entries
            .entry(msg.id)
            .or_insert_with(|| ParityEntry {
                msg: msg.clone(),
                slots: [SenderSet::Bot, SenderSet::Bot],
            })
            .slots[p]
            .insert(from);
    }

    fn on_broadcast(&mut self, msg: &Message) {
        let p = slot(self.parity);
        let entry = self.entries.entry(msg.id).or_insert_with(|| ParityEntry {
            msg: msg.clone(),
            slots: [SenderSet::Bot, SenderSet::Bot],
        });
        if entry.slots[p].is_bot() {
            entry.slots[p] = SenderSet::empty();
        }
    }

    fn decide_sends(&mut self, neighbors: &BTreeSet<NodeId>, available: bool) -> Vec<Send> {
        if !available {
            return Vec::new();
        }
        let p = slot(self.parity);
        let mut sends = Vec::new();
        for e in self.entries.values_mut() {
            let Some(senders) = e.slots[p].as_set() else {
                continue;
            };
            let to: BTreeSet<NodeId> = neighbors.difference(senders).copied().collect();
            if !to.is_empty() {
                sends.push((e.msg.clone(), to));
            }
            e.slots[p] = SenderSet::Bot;
        }
        self.entries
            .retain(|_, e| !e.slots.iter().all(SenderSet::is_bot));
        sends
    }
}

#[derive(Clone, Debug)]
struct TblEntry {
    msg: Message,
    lists: [SenderSet; 2],
}

/// The multi-message table: message id -> payload plus two parity-indexed
/// sender lists. At most `capacity` entries are transmitted per round.
#[derive(Clone, Debug)]
pub struct MultiState {
    parity: bool,
    policy: SelectionPolicy,
    capacity: u32,
    tbl: BTreeMap<MessageId, TblEntry>,
    /// Entry ids in creation order (ties within a round broken by id);
    /// drives the fair policy.
    queue: VecDeque<MessageId>,
    created_this_round: BTreeSet<MessageId>,
}

impl MultiState {
    fn new(parity: bool, policy: SelectionPolicy, capacity: u32) -> Self {
        MultiState {
            parity,
            policy,
            capacity,
            tbl: BTreeMap::new(),
            queue: VecDeque::new(),
            created_this_round: BTreeSet::new(),
        }
    }

    fn fresh_entry(&mut self, msg: &Message, lists: [SenderSet; 2]) {
        self.tbl.insert(
            msg.id,
            TblEntry {
                msg: msg.clone(),
                lists,
            },
        );
        self.created_this_round.insert(msg.id);
    }

    fn on_receive(&mut self, from: NodeId, msg: &Message) {
        if !self.tbl.contains_key(&msg.id) {
            self.fresh_entry(msg, [SenderSet::Bot, SenderSet::Bot]);
        }
        let p = slot(self.parity);
        self.tbl.get_mut(&msg.id).unwrap().lists[p].insert(from);
    }

    fn on_broadcast(&mut self, msg: &Message) {
        if !self.tbl.contains_key(&msg.id) {
            self.fresh_entry(msg, [SenderSet::empty(), SenderSet::empty()]);
            return;
        }
        let p = slot(self.parity);
        let entry = self.tbl.get_mut(&msg.id).unwrap();
        if entry.lists[p].is_bot() {
            entry.lists[p] = SenderSet::empty();
        }
    }

    fn remove_entry(&mut self, id: MessageId) {
        self.tbl.remove(&id);
        self.queue.retain(|&q| q != id);
    }

    fn decide_sends(&mut self, neighbors: &BTreeSet<NodeId>, available: bool) -> Vec<Send> {
        let p = slot(self.parity);

        for id in std::mem::take(&mut self.created_this_round) {
            self.queue.push_back(id);
        }

        // Cleaning: a full current-parity list means the message arrived
        // from every neighbor and nothing is owed; entries with both lists
        // at bot are dead.
        let mut dead = Vec::new();
        for (id, e) in self.tbl.iter_mut() {
            if e.lists[p].as_set() == Some(neighbors) {
                e.lists[p] = SenderSet::Bot;
            }
            if e.lists.iter().all(SenderSet::is_bot) {
                dead.push(*id);
            }
        }
        for id in dead {
            self.remove_entry(id);
        }

        if !available {
            return Vec::new();
        }

        let budget = self.capacity as usize;
        let selected: Vec<MessageId> = match self.policy {
            SelectionPolicy::SmallestId => self
                .tbl
                .iter()
                .filter(|(_, e)| !e.lists[p].is_bot())
                .map(|(id, _)| *id)
                .take(budget)
                .collect(),
            SelectionPolicy::FairRoundRobin => self
                .queue
                .iter()
                .copied()
                .filter(|id| !self.tbl[id].lists[p].is_bot())
                .take(budget)
                .collect(),
        };

        let mut sends = Vec::new();
        for id in selected {
            let e = self.tbl.get_mut(&id).unwrap();
            let senders = e.lists[p].as_set().unwrap();
            let to: BTreeSet<NodeId> = neighbors.difference(senders).copied().collect();
            if !to.is_empty() {
                sends.push((e.msg.clone(), to));
            }
            e.lists[p] = SenderSet::Bot;
            let other = &e.lists[1 - p];
            if other.is_bot() || other.as_set().is_some_and(|s| s.is_empty()) {
                self.remove_entry(id);
            } else if self.policy == SelectionPolicy::FairRoundRobin {
                self.queue.retain(|&q| q != id);
                self.queue.push_back(id);
            }
        }
        sends
    }
}

/// Duplicate-delivery suppression for the application layer. Returns whether
/// this receipt should be delivered: an unseen id is delivered and recorded,
/// a recorded id is suppressed and the record removed.
pub fn dedup_deliver(buffer: &mut BTreeSet<MessageId>, id: MessageId) -> bool {
    if buffer.insert(id) {
        true
    } else {
        buffer.remove(&id);
        false
    }
}

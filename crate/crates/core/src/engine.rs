//! Deterministic synchronous round executor.
//!
//! Each round runs four phases: deliver everything sent last round, inject
//! the broadcasts scheduled for this round, let every node decide its sends
//! under the availability scheme, and toggle parities. Broadcast injection
//! precedes the send decision so that an originator transmits in its own
//! broadcast round.
//!
//! The run stops at quiescence (nothing in flight, nothing buffered, nothing
//! scheduled), at the round limit, or when a configuration digest repeats —
//! after the last blocked round the system is autonomous, so a repeated
//! configuration at matching round parity proves non-termination.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use thiserror::Error;

use crate::algorithms::{dedup_deliver, Algorithm, NodeHandler};
use crate::graph::{Graph, NodeId};
use crate::message::{Message, MessageId};
use crate::scheme::AvailabilityScheme;
use crate::trace::{Event, EventKind, Outcome, Trace};

#[derive(Clone, Debug)]
pub struct Broadcast {
    pub node: NodeId,
    pub round: u32,
    pub message: Message,
}

#[derive(Clone, Debug)]
pub struct ScenarioConfig {
    pub graph: Graph,
    pub scheme: AvailabilityScheme,
    pub algorithm: Algorithm,
    /// Max distinct messages a node may transmit per round. Enforced by the
    /// message-table algorithms; the single-message algorithms have no
    /// selection step and ignore it.
    pub capacity: u32,
    pub broadcasts: Vec<Broadcast>,
    /// Defaults to `4*diam + 2*f + 10 + last broadcast round`, generous
    /// enough that hitting it indicates real non-termination.
    pub round_limit: Option<u32>,
    /// Per-node initial parity; nodes need not agree. Defaults to `true`.
    pub initial_parities: BTreeMap<NodeId, bool>,
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn new(graph: Graph, algorithm: Algorithm) -> Self {
        ScenarioConfig {
            graph,
            scheme: AvailabilityScheme::empty(),
            algorithm,
            capacity: 1,
            broadcasts: Vec::new(),
            round_limit: None,
            initial_parities: BTreeMap::new(),
            seed: 0,
        }
    }

    pub fn broadcast(mut self, node: NodeId, round: u32, message: Message) -> Self {
        self.broadcasts.push(Broadcast {
            node,
            round,
            message,
        });
        self
    }

    pub fn with_scheme(mut self, scheme: AvailabilityScheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn last_broadcast_round(&self) -> u32 {
        self.broadcasts.iter().map(|b| b.round).max().unwrap_or(0)
    }

    pub fn effective_round_limit(&self) -> u32 {
        self.round_limit.unwrap_or_else(|| {
            4 * self.graph.diameter()
                + 2 * self.scheme.fault_count() as u32
                + 10
                + self.last_broadcast_round()
        })
    }

    fn validate(&self) -> Result<(), EngineError> {
        if self.capacity == 0 {
            return Err(EngineError::ZeroCapacity);
        }
        if self.round_limit == Some(0) {
            return Err(EngineError::ZeroRoundLimit);
        }
        let n = self.graph.n();
        let check_node = |v: NodeId| -> Result<(), EngineError> {
            if v.index() < n {
                Ok(())
            } else {
                Err(EngineError::NodeOutOfRange(v))
            }
        };
        for (v, _) in self.scheme.blocked_pairs() {
            check_node(v)?;
        }
        for &v in self.initial_parities.keys() {
            check_node(v)?;
        }
        let mut payloads: BTreeMap<MessageId, &str> = BTreeMap::new();
        for b in &self.broadcasts {
            check_node(b.node)?;
            if b.round == 0 {
                return Err(EngineError::ZeroRound);
            }
            match payloads.get(&b.message.id) {
                Some(&p) if p != b.message.payload => {
                    return Err(EngineError::PayloadMismatch(b.message.id))
                }
                _ => {
                    payloads.insert(b.message.id, &b.message.payload);
                }
            }
        }
        // The designated originator — the earliest broadcast — must be able
        // to send in its broadcast round.
        if let Some(first) = self.broadcasts.iter().min_by_key(|b| (b.round, b.node)) {
            if !self.scheme.is_available(first.node, first.round) {
                return Err(EngineError::OriginatorBlocked {
                    node: first.node,
                    round: first.round,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("capacity must be >= 1")]
    ZeroCapacity,
    #[error("broadcast round must be >= 1")]
    ZeroRound,
    #[error("round limit must be >= 1")]
    ZeroRoundLimit,
    #[error("node {0:?} is not in the graph")]
    NodeOutOfRange(NodeId),
    #[error("message {0} is broadcast with two different payloads")]
    PayloadMismatch(MessageId),
    #[error("the designated originator {node:?} is blocked in its broadcast round {round}")]
    OriginatorBlocked { node: NodeId, round: u32 },
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    /// Record each node's current-parity sender set at the head of its send
    /// phase. Needed by the originator-set oracle check; off by default to
    /// keep plain runs lean.
    pub record_snapshots: bool,
    /// After reaching quiescence, step this many extra rounds and count the
    /// events they produce (a sound quiescence detector produces none).
    pub extra_quiescence_rounds: u32,
}

/// Current-parity sender sets keyed by `(message, node, round)`; a missing
/// key means the slot held no arrival.
pub type Snapshots = BTreeMap<(MessageId, NodeId, u32), BTreeSet<NodeId>>;

#[derive(Clone, Debug)]
pub struct RunArtifacts {
    pub trace: Trace,
    pub snapshots: Snapshots,
    pub post_quiescence_events: usize,
}

pub fn run_scenario(config: &ScenarioConfig) -> Result<Trace, EngineError> {
    run_with_artifacts(config, &RunOptions::default()).map(|a| a.trace)
}

pub fn run_with_artifacts(
    config: &ScenarioConfig,
    opts: &RunOptions,
) -> Result<RunArtifacts, EngineError> {
    config.validate()?;
    let g = &config.graph;

    let mut handlers: Vec<NodeHandler> = g
        .nodes()
        .map(|v| {
            let parity = config.initial_parities.get(&v).copied().unwrap_or(true);
            NodeHandler::new(config.algorithm, parity, config.capacity)
        })
        .collect();

    let mut schedule: BTreeMap<u32, Vec<(NodeId, Message)>> = BTreeMap::new();
    for b in &config.broadcasts {
        schedule
            .entry(b.round)
            .or_default()
            .push((b.node, b.message.clone()));
    }
    for injections in schedule.values_mut() {
        injections.sort_by_key(|(v, m)| (*v, m.id));
    }

    let messages: BTreeMap<MessageId, Message> = config
        .broadcasts
        .iter()
        .map(|b| (b.message.id, b.message.clone()))
        .collect();

    let mut in_flight: Vec<(NodeId, NodeId, MessageId)> = Vec::new();
    let mut received_first: HashMap<(NodeId, MessageId), u32> = HashMap::new();
    let mut dedup: Vec<BTreeSet<MessageId>> = vec![BTreeSet::new(); g.n()];
    let mut events: Vec<Event> = Vec::new();
    let mut snapshots: Snapshots = BTreeMap::new();
    let mut seen_digests: HashMap<String, u32> = HashMap::new();
    let mut violation: Option<(NodeId, MessageId, u32)> = None;
    let mut last_activity = 0u32;

    let round_limit = config.effective_round_limit();
    let autonomous_after = config
        .scheme
        .max_blocked_round()
        .max(config.last_broadcast_round());

    let mut outcome: Option<Outcome> = None;
    let mut quiescent_round = None;

    for round in 1..=round_limit {
        step_round(
            round,
            g,
            config,
            &mut handlers,
            &mut in_flight,
            &mut schedule,
            &messages,
            &mut received_first,
            &mut dedup,
            &mut events,
            &mut snapshots,
            &mut violation,
            &mut last_activity,
            opts.record_snapshots,
        );

        let pending_broadcasts = !schedule.is_empty();
        if in_flight.is_empty() && !pending_broadcasts && handlers.iter().all(|h| h.is_quiescent())
        {
            outcome = Some(Outcome::Terminated {
                last_activity_round: last_activity,
            });
            quiescent_round = Some(round);
            break;
        }

        if round > autonomous_after {
            let digest = configuration_digest(&handlers, &in_flight, round);
            if let Some(&first_round) = seen_digests.get(&digest) {
                outcome = Some(Outcome::CycleDetected {
                    first_round,
                    repeat_round: round,
                });
                break;
            }
            seen_digests.insert(digest, round);
        }
    }

    // A precondition violation marks the whole run regardless of how it ended.
    let outcome = match violation {
        Some((node, msg, round)) => Outcome::PreconditionViolated { node, msg, round },
        None => outcome.unwrap_or(Outcome::RoundLimitExceeded { round_limit }),
    };

    let mut post_quiescence_events = 0;
    if let (Some(q), true) = (quiescent_round, opts.extra_quiescence_rounds > 0) {
        let before = events.len();
        for round in q + 1..=q + opts.extra_quiescence_rounds {
            step_round(
                round,
                g,
                config,
                &mut handlers,
                &mut in_flight,
                &mut schedule,
                &messages,
                &mut received_first,
                &mut dedup,
                &mut events,
                &mut snapshots,
                &mut violation,
                &mut last_activity,
                false,
            );
        }
        post_quiescence_events = events.len() - before;
        events.truncate(before);
    }

    let mut trace = Trace { events, outcome };
    trace.canonicalize();
    Ok(RunArtifacts {
        trace,
        snapshots,
        post_quiescence_events,
    })
}

#[allow(clippy::too_many_arguments)]
fn step_round(
    round: u32,
    g: &Graph,
    config: &ScenarioConfig,
    handlers: &mut [NodeHandler],
    in_flight: &mut Vec<(NodeId, NodeId, MessageId)>,
    schedule: &mut BTreeMap<u32, Vec<(NodeId, Message)>>,
    messages: &BTreeMap<MessageId, Message>,
    received_first: &mut HashMap<(NodeId, MessageId), u32>,
    dedup: &mut [BTreeSet<MessageId>],
    events: &mut Vec<Event>,
    snapshots: &mut Snapshots,
    violation: &mut Option<(NodeId, MessageId, u32)>,
    last_activity: &mut u32,
    record_snapshots: bool,
) {
    let mut push = |events: &mut Vec<Event>, e: Event| {
        *last_activity = (*last_activity).max(e.round);
        events.push(e);
    };

    // Deliver everything sent last round.
    let mut arrivals = std::mem::take(in_flight);
    arrivals.sort_by_key(|&(from, to, msg)| (to, from, msg));
    for (from, to, msg_id) in arrivals {
        push(
            events,
            Event {
                round,
                kind: EventKind::Receive,
                node: to,
                peer: Some(from),
                msg: msg_id,
            },
        );
        if dedup_deliver(&mut dedup[to.index()], msg_id) {
            push(
                events,
                Event {
                    round,
                    kind: EventKind::Deliver,
                    node: to,
                    peer: None,
                    msg: msg_id,
                },
            );
        }
        handlers[to.index()].on_receive(from, &messages[&msg_id]);
        received_first.entry((to, msg_id)).or_insert(round);
    }

    // Inject scheduled broadcasts.
    for (node, message) in schedule.remove(&round).unwrap_or_default() {
        if violation.is_none() {
            if let Some(&r0) = received_first.get(&(node, message.id)) {
                if r0 < round {
                    *violation = Some((node, message.id, round));
                }
            }
        }
        push(
            events,
            Event {
                round,
                kind: EventKind::Broadcast,
                node,
                peer: None,
                msg: message.id,
            },
        );
        handlers[node.index()].on_broadcast(&message);
    }

    // Send phase.
    for v in g.nodes() {
        let available = config.scheme.is_available(v, round);
        if record_snapshots {
            for (id, set) in handlers[v.index()].parity_snapshots() {
                snapshots.insert((id, v, round), set);
            }
        }
        let sends = handlers[v.index()].decide_sends(g.neighbors(v), available);
        for (message, receivers) in sends {
            for w in receivers {
                push(
                    events,
                    Event {
                        round,
                        kind: EventKind::Send,
                        node: v,
                        peer: Some(w),
                        msg: message.id,
                    },
                );
                in_flight.push((v, w, message.id));
            }
        }
    }

    for h in handlers.iter_mut() {
        h.end_of_round();
    }
}

fn configuration_digest(
    handlers: &[NodeHandler],
    in_flight: &[(NodeId, NodeId, MessageId)],
    round: u32,
) -> String {
    let mut out = String::new();
    out.push(if round.is_multiple_of(2) { 'e' } else { 'o' });
    for (i, h) in handlers.iter().enumerate() {
        out.push_str(&format!(";{i}="));
        h.encode_state(&mut out);
    }
    out.push('|');
    let mut flight: Vec<_> = in_flight.to_vec();
    flight.sort();
    for (from, to, msg) in flight {
        out.push_str(&format!("{}>{}:{},", from.index(), to.index(), msg));
    }
    out
}

/// No send may occur in a round where the sender is blocked.
pub fn check_availability(trace: &Trace, scheme: &AvailabilityScheme) -> Result<(), String> {
    for e in trace.sends() {
        if !scheme.is_available(e.node, e.round) {
            return Err(format!(
                "send of {} in blocked round {} by node {:?}",
                e.msg, e.round, e.node
            ));
        }
    }
    Ok(())
}

/// Per (sender, receiver, round) at most `capacity` distinct message ids.
pub fn check_capacity(trace: &Trace, capacity: u32) -> Result<(), String> {
    let mut counts: BTreeMap<(NodeId, NodeId, u32), BTreeSet<MessageId>> = BTreeMap::new();
    for e in trace.sends() {
        let ids = counts
            .entry((e.node, e.peer.unwrap(), e.round))
            .or_default();
        ids.insert(e.msg);
        if ids.len() > capacity as usize {
            return Err(format!(
                "{} distinct messages from {:?} to {:?} in round {}",
                ids.len(),
                e.node,
                e.peer.unwrap(),
                e.round
            ));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scheme::AvailabilityScheme;

    fn msg(id: u64) -> Message {
        Message::new(id, "m")
    }

    fn single_source(graph: Graph, algo: Algorithm, source: &str) -> ScenarioConfig {
        let v = graph.node(source).unwrap();
        ScenarioConfig::new(graph, algo).broadcast(v, 1, msg(1))
    }

    #[test]
    fn k2_synaf_single_send() {
        let cfg = single_source(Graph::from_edge_list("a b").unwrap(), Algorithm::SynAf, "a");
        let t = run_scenario(&cfg).unwrap();
        assert_eq!(t.forward_count(MessageId(1)), 1);
        assert_eq!(
            t.outcome,
            Outcome::Terminated {
                last_activity_round: 2
            }
        );
        let b = cfg.graph.node("b").unwrap();
        assert_eq!(t.delivery_time(MessageId(1), b).unwrap(), 1);
        t.check_conservation().unwrap();
    }

    #[test]
    fn k3_synaf_six_sends_terminates_round_four() {
        let cfg = single_source(
            Graph::from_edge_list("a b\nb c\nc a").unwrap(),
            Algorithm::SynAf,
            "a",
        );
        let t = run_scenario(&cfg).unwrap();
        assert_eq!(t.forward_count(MessageId(1)), 6); // 2|E|
        for r in 1..=3 {
            assert_eq!(t.sends().filter(|e| e.round == r).count(), 2);
        }
        assert_eq!(t.termination_time(MessageId(1)).unwrap(), 3); // ecc + diam + 1
        assert_eq!(
            t.outcome,
            Outcome::Terminated {
                last_activity_round: 4
            }
        );
    }

    #[test]
    fn p3_synafi_deferred_send() {
        let g = Graph::from_edge_list("a b\nb c").unwrap();
        let b = g.node("b").unwrap();
        let c = g.node("c").unwrap();
        let scheme = AvailabilityScheme::new([(b, 2)]).unwrap();
        let cfg = single_source(g, Algorithm::SynAfi, "a").with_scheme(scheme);
        let t = run_scenario(&cfg).unwrap();
        assert_eq!(t.forward_count(MessageId(1)), 2); // |E|, bipartite
        let send_rounds: Vec<u32> = t.sends().map(|e| e.round).collect();
        assert_eq!(send_rounds, vec![1, 4]);
        assert_eq!(t.first_receive_round(MessageId(1), c), Some(5));
        assert_eq!(t.delivery_time(MessageId(1), c).unwrap(), 4); // diam + 2f
        check_availability(&t, &cfg.scheme).unwrap();
    }

    #[test]
    fn empty_broadcast_list_is_immediately_quiescent() {
        let cfg = ScenarioConfig::new(Graph::from_edge_list("a b").unwrap(), Algorithm::SynAf);
        let t = run_scenario(&cfg).unwrap();
        assert!(t.events.is_empty());
        assert_eq!(
            t.outcome,
            Outcome::Terminated {
                last_activity_round: 0
            }
        );
    }

    #[test]
    fn single_node_graph_terminates_with_zero_sends() {
        let cfg = single_source(Graph::single("a"), Algorithm::SynAfi, "a");
        let t = run_scenario(&cfg).unwrap();
        assert_eq!(t.sends().count(), 0);
        assert_eq!(
            t.outcome,
            Outcome::Terminated {
                last_activity_round: 1
            }
        );
    }

    #[test]
    fn determinism_byte_identical_traces() {
        let g = Graph::random_connected(6, 4, 11);
        let v = NodeId::from_index(0);
        let scheme = crate::scheme::random_scheme(&g, 2, 5, 3, Some((v, 1))).unwrap();
        let cfg = ScenarioConfig::new(g, Algorithm::SynAfi)
            .broadcast(v, 1, msg(1))
            .with_scheme(scheme);
        let a = run_scenario(&cfg).unwrap().to_jsonl(&cfg.graph);
        let b = run_scenario(&cfg).unwrap().to_jsonl(&cfg.graph);
        assert_eq!(a, b);
    }

    #[test]
    fn precondition_examples() {
        let g = Graph::from_edge_list("a b\nb c").unwrap();
        let (a, b, c) = (
            g.node("a").unwrap(),
            g.node("b").unwrap(),
            g.node("c").unwrap(),
        );

        // Simultaneous broadcasts are fine.
        let cfg = ScenarioConfig::new(g.clone(), Algorithm::SynAf)
            .broadcast(a, 1, msg(1))
            .broadcast(c, 1, msg(1));
        assert!(matches!(
            run_scenario(&cfg).unwrap().outcome,
            Outcome::Terminated { .. }
        ));

        // c broadcasts in round 2; the message only reaches c in round 3.
        let cfg = ScenarioConfig::new(g.clone(), Algorithm::SynAf)
            .broadcast(a, 1, msg(1))
            .broadcast(c, 2, msg(1));
        assert!(matches!(
            run_scenario(&cfg).unwrap().outcome,
            Outcome::Terminated { .. }
        ));

        // b already received the message in round 2.
        let cfg = ScenarioConfig::new(g, Algorithm::SynAf)
            .broadcast(a, 1, msg(1))
            .broadcast(b, 3, msg(1));
        assert_eq!(
            run_scenario(&cfg).unwrap().outcome,
            Outcome::PreconditionViolated {
                node: b,
                msg: MessageId(1),
                round: 3
            }
        );
    }

    #[test]
    fn naive_equals_synaf_without_blocking() {
        for (n, extra, seed) in [(4, 2, 1), (5, 3, 2), (6, 5, 3)] {
            let g = Graph::random_connected(n, extra, seed);
            let v = NodeId::from_index(0);
            let synaf = ScenarioConfig::new(g.clone(), Algorithm::SynAf).broadcast(v, 1, msg(1));
            let naive =
                ScenarioConfig::new(g.clone(), Algorithm::NaiveDeferred).broadcast(v, 1, msg(1));
            let ta = run_scenario(&synaf).unwrap();
            let tb = run_scenario(&naive).unwrap();
            assert_eq!(ta.to_jsonl(&g), tb.to_jsonl(&g));
        }
    }

    #[test]
    fn quiescence_is_sound() {
        let g = Graph::from_edge_list("a b\nb c\nc a\nc d").unwrap();
        let extra = 2 * g.diameter() + 2;
        let v = g.node("a").unwrap();
        let cfg = ScenarioConfig::new(g, Algorithm::SynAfi).broadcast(v, 1, msg(1));
        let arts = run_with_artifacts(
            &cfg,
            &RunOptions {
                record_snapshots: false,
                extra_quiescence_rounds: extra,
            },
        )
        .unwrap();
        assert!(matches!(arts.trace.outcome, Outcome::Terminated { .. }));
        assert_eq!(arts.post_quiescence_events, 0);
    }

    #[test]
    fn validation_rejects_bad_configs() {
        let g = Graph::from_edge_list("a b").unwrap();
        let a = g.node("a").unwrap();

        let mut cfg = ScenarioConfig::new(g.clone(), Algorithm::SynAf);
        cfg.capacity = 0;
        assert!(matches!(run_scenario(&cfg), Err(EngineError::ZeroCapacity)));

        let cfg = ScenarioConfig::new(g.clone(), Algorithm::SynAf).broadcast(a, 0, msg(1));
        assert!(matches!(run_scenario(&cfg), Err(EngineError::ZeroRound)));

        let mut cfg = ScenarioConfig::new(g.clone(), Algorithm::SynAf);
        cfg.round_limit = Some(0);
        assert!(matches!(
            run_scenario(&cfg),
            Err(EngineError::ZeroRoundLimit)
        ));

        let cfg = ScenarioConfig::new(g.clone(), Algorithm::SynAf)
            .broadcast(a, 1, Message::new(1, "x"))
            .broadcast(g.node("b").unwrap(), 1, Message::new(1, "y"));
        assert!(matches!(
            run_scenario(&cfg),
            Err(EngineError::PayloadMismatch(_))
        ));

        let scheme = AvailabilityScheme::new([(a, 1)]).unwrap();
        let cfg = ScenarioConfig::new(g, Algorithm::SynAfi)
            .broadcast(a, 1, msg(1))
            .with_scheme(scheme);
        assert!(matches!(
            run_scenario(&cfg),
            Err(EngineError::OriginatorBlocked { .. })
        ));
    }

    #[test]
    fn terminating_runs_detect_no_cycle() {
        for seed in 0..10 {
            let g = Graph::random_connected(5, 3, seed);
            let v = NodeId::from_index(0);
            let cfg = ScenarioConfig::new(g, Algorithm::SynAf).broadcast(v, 1, msg(1));
            assert!(matches!(
                run_scenario(&cfg).unwrap().outcome,
                Outcome::Terminated { .. }
            ));
        }
    }
}

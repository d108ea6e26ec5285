//! Post-hoc trace analytics: forward counts, delivery and termination times,
//! and verdicts against the exact guarantees of each algorithm class.
//!
//! The applicable guarantee depends on the algorithm, the fault count and
//! how many nodes broadcast a given id:
//!
//! * plain flooding, full availability, one origin — forwards exactly `|E|`
//!   (bipartite) or `2|E|`, delivery within the origin's eccentricity,
//!   termination within `ecc + diam + 1`;
//! * plain flooding, full availability, several origins — forwards capped at
//!   `2|E|`, delivery within `diam`, termination within `2*diam + 1`;
//! * parity-split deferral — same forward accounting, delivery within
//!   `diam + 2f`, termination within `2*diam + 2f + 1`;
//! * message-table variants — exact forward counts per id and delivery to
//!   every node, with no round bound asserted.
//!
//! A run whose outcome records a precondition violation is reported but
//! never asserted against.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use thiserror::Error;

use crate::algorithms::Algorithm;
use crate::engine::ScenarioConfig;
use crate::graph::NodeId;
use crate::message::MessageId;
use crate::trace::{EventKind, Outcome, Trace};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("trace did not terminate: {0:?}")]
    NotTerminated(Outcome),
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Verdict {
    Pass,
    Fail,
    Skipped,
}

#[derive(Clone, Debug)]
pub struct MessageReport {
    pub msg: MessageId,
    pub origins: BTreeSet<NodeId>,
    pub forwards: usize,
    /// Exact forward count required for this class, when one is.
    pub expected_forwards: Option<usize>,
    /// Upper forward bound for multi-origin broadcasts.
    pub forward_cap: Option<usize>,
    pub undelivered: Vec<NodeId>,
    pub delivery_max: u32,
    pub delivery_bound: Option<u32>,
    pub termination: u32,
    pub termination_bound: Option<u32>,
    /// Directed edges this id crossed more than twice.
    pub overused_edges: Vec<(NodeId, NodeId, usize)>,
    pub verdict: Verdict,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct BoundReport {
    pub outcome: Outcome,
    pub messages: Vec<MessageReport>,
    /// Ids left in each node's duplicate-suppression buffer at the end of
    /// the run (reported, never asserted).
    pub dedup_residue: BTreeMap<NodeId, BTreeSet<MessageId>>,
}

impl BoundReport {
    pub fn pass(&self) -> bool {
        self.messages.iter().all(|m| m.verdict != Verdict::Fail)
    }

    pub fn render(&self, g: &crate::graph::Graph) -> String {
        let mut out = String::new();
        match self.outcome {
            Outcome::Terminated {
                last_activity_round,
            } => writeln!(
                out,
                "outcome: terminated last_activity_round={last_activity_round}"
            ),
            o => writeln!(out, "outcome: {o:?}"),
        }
        .unwrap();
        for m in &self.messages {
            write!(out, "msg {}: forwards={}", m.msg, m.forwards).unwrap();
            if let Some(e) = m.expected_forwards {
                write!(out, " expected={e}").unwrap();
            }
            if let Some(c) = m.forward_cap {
                write!(out, " cap={c}").unwrap();
            }
            write!(out, " delivery_max={}", m.delivery_max).unwrap();
            if let Some(b) = m.delivery_bound {
                write!(out, " delivery_bound={b}").unwrap();
            }
            write!(out, " termination={}", m.termination).unwrap();
            if let Some(b) = m.termination_bound {
                write!(out, " termination_bound={b}").unwrap();
            }
            writeln!(
                out,
                " verdict={}",
                match m.verdict {
                    Verdict::Pass => "pass",
                    Verdict::Fail => "FAIL",
                    Verdict::Skipped => "skipped",
                }
            )
            .unwrap();
            for n in &m.notes {
                writeln!(out, "  note: {n}").unwrap();
            }
        }
        let residue: usize = self.dedup_residue.values().map(|s| s.len()).sum();
        if residue > 0 {
            write!(out, "dedup residue:").unwrap();
            for (node, ids) in &self.dedup_residue {
                for id in ids {
                    write!(out, " {}:{}", g.name(*node), id).unwrap();
                }
            }
            writeln!(out).unwrap();
        }
        writeln!(out, "BOUNDS: {}", if self.pass() { "PASS" } else { "FAIL" }).unwrap();
        out
    }
}

/// Checks a finished trace against the guarantees applicable to its class.
pub fn analyze(trace: &Trace, cfg: &ScenarioConfig) -> Result<BoundReport, MetricsError> {
    let violated = matches!(trace.outcome, Outcome::PreconditionViolated { .. });
    if !violated && !matches!(trace.outcome, Outcome::Terminated { .. }) {
        return Err(MetricsError::NotTerminated(trace.outcome));
    }

    let g = &cfg.graph;
    let f = cfg.scheme.fault_count() as u32;
    let diam = g.diameter();
    let exact = if g.is_bipartite() {
        g.edge_count()
    } else {
        2 * g.edge_count()
    };

    let mut messages = Vec::new();
    for msg in trace.message_ids() {
        let origins = trace.origins(msg);
        let forwards = trace.forward_count(msg);
        let single = origins.len() == 1;

        let mut skip_reason: Option<String> = None;
        let mut expected_forwards = None;
        let mut forward_cap = None;
        let mut delivery_bound = None;
        let mut termination_bound = None;

        if violated {
            skip_reason = Some("precondition violated".into());
        } else {
            match cfg.algorithm {
                Algorithm::SynAf | Algorithm::NaiveDeferred => {
                    if f > 0 {
                        skip_reason =
                            Some("plain flooding has no guarantees under blocking".into());
                    } else if single {
                        let origin = *origins.iter().next().unwrap();
                        let ecc = g.eccentricity(origin);
                        expected_forwards = Some(exact);
                        delivery_bound = Some(ecc);
                        termination_bound = Some(ecc + diam + 1);
                    } else {
                        forward_cap = Some(2 * g.edge_count());
                        delivery_bound = Some(diam);
                        termination_bound = Some(2 * diam + 1);
                    }
                }
                Algorithm::SynAfi => {
                    if single {
                        expected_forwards = Some(exact);
                    } else {
                        forward_cap = Some(2 * g.edge_count());
                    }
                    delivery_bound = Some(diam + 2 * f);
                    termination_bound = Some(2 * diam + 2 * f + 1);
                }
                Algorithm::Multi(_) => {
                    // Delivery is eventual; only the forward accounting is
                    // exact.
                    if single {
                        expected_forwards = Some(exact);
                    } else {
                        forward_cap = Some(2 * g.edge_count());
                    }
                }
            }
        }

        let mut undelivered = Vec::new();
        let mut delivery_max = 0;
        for v in g.nodes() {
            match trace.delivery_time(msg, v) {
                Ok(t) => delivery_max = delivery_max.max(t),
                Err(_) => undelivered.push(v),
            }
        }
        let termination = trace.termination_time(msg).unwrap_or(0);

        let mut overused_edges = Vec::new();
        let mut per_edge: BTreeMap<(NodeId, NodeId), usize> = BTreeMap::new();
        for e in trace.sends().filter(|e| e.msg == msg) {
            *per_edge.entry((e.node, e.peer.unwrap())).or_default() += 1;
        }
        for (&(u, w), &count) in &per_edge {
            if count > 2 {
                overused_edges.push((u, w, count));
            }
        }

        let mut notes = Vec::new();
        let verdict = if let Some(reason) = skip_reason {
            notes.push(reason);
            Verdict::Skipped
        } else {
            let mut ok = true;
            if !undelivered.is_empty() {
                ok = false;
                notes.push(format!(
                    "undelivered at: {}",
                    undelivered
                        .iter()
                        .map(|v| g.name(*v))
                        .collect::<Vec<_>>()
                        .join(", ")
                ));
            }
            if let Some(e) = expected_forwards {
                if forwards != e {
                    ok = false;
                    notes.push(format!("forwards {forwards} != expected {e}"));
                }
            }
            if let Some(c) = forward_cap {
                if forwards > c {
                    ok = false;
                    notes.push(format!("forwards {forwards} > cap {c}"));
                }
            }
            if let Some(b) = delivery_bound {
                if delivery_max > b {
                    ok = false;
                    notes.push(format!("delivery {delivery_max} > bound {b}"));
                }
            }
            if let Some(b) = termination_bound {
                if termination > b {
                    ok = false;
                    notes.push(format!("termination {termination} > bound {b}"));
                }
            }
            if !overused_edges.is_empty() {
                ok = false;
                notes.push(format!(
                    "{} directed edges carried the message more than twice",
                    overused_edges.len()
                ));
            }
            if ok {
                Verdict::Pass
            } else {
                Verdict::Fail
            }
        };

        messages.push(MessageReport {
            msg,
            origins,
            forwards,
            expected_forwards,
            forward_cap,
            undelivered,
            delivery_max,
            delivery_bound,
            termination,
            termination_bound,
            overused_edges,
            verdict,
            notes,
        });
    }

    let mut dedup_residue: BTreeMap<NodeId, BTreeSet<MessageId>> = BTreeMap::new();
    for e in trace.events.iter().filter(|e| e.kind == EventKind::Receive) {
        let buf = dedup_residue.entry(e.node).or_default();
        if !buf.insert(e.msg) {
            buf.remove(&e.msg);
        }
    }
    dedup_residue.retain(|_, ids| !ids.is_empty());

    Ok(BoundReport {
        outcome: trace.outcome,
        messages,
        dedup_residue,
    })
}

/// Duplicate-delivery profile of single-source plain flooding under full
/// availability, counted in distinct receive rounds (several neighbors may
/// deliver within one round): on a bipartite graph every non-origin node
/// hears the message in exactly one round and the origin in none; otherwise
/// every node has a second hearing through the mirror side of the cover —
/// two rounds for non-origin nodes, one for the origin.
pub fn check_duplicate_delivery_profile(
    trace: &Trace,
    cfg: &ScenarioConfig,
    msg: MessageId,
) -> Result<(), String> {
    let g = &cfg.graph;
    let origins = trace.origins(msg);
    if origins.len() != 1 || cfg.scheme.fault_count() > 0 {
        return Err("profile applies to single-source runs without blocking".into());
    }
    let origin = *origins.iter().next().unwrap();
    let mut rounds: Vec<BTreeSet<u32>> = vec![BTreeSet::new(); g.n()];
    for e in trace.receives().filter(|e| e.msg == msg) {
        rounds[e.node.index()].insert(e.round);
    }
    for v in g.nodes() {
        let want = match (g.is_bipartite(), v == origin) {
            (true, true) => 0,
            (true, false) => 1,
            (false, true) => 1,
            (false, false) => 2,
        };
        if g.n() > 1 && rounds[v.index()].len() != want {
            return Err(format!(
                "node {} heard the message in {} rounds, expected {want}",
                g.name(v),
                rounds[v.index()].len()
            ));
        }
    }
    Ok(())
}

//! Checkers that certify simulator traces against the oracle structures.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algorithms::Algorithm;
use crate::engine::{run_scenario, ScenarioConfig, Snapshots};
use crate::graph::{Graph, NodeId};
use crate::message::{Message, MessageId};
use crate::scheme::AvailabilityScheme;
use crate::trace::{Outcome, Trace};

use super::double_cover::DoubleCover;
use super::layered::{build_layered, LayeredGraph};

/// Result of comparing the trace's send events with the layer edges.
#[derive(Clone, Debug, Default)]
pub struct SendEquivalenceReport {
    /// Sends in the trace with no matching layer edge.
    pub missing_in_oracle: Vec<(u32, NodeId, NodeId)>,
    /// Layer edges with no matching send in the trace.
    pub missing_in_trace: Vec<(u32, NodeId, NodeId)>,
}

impl SendEquivalenceReport {
    pub fn mismatch_count(&self) -> usize {
        self.missing_in_oracle.len() + self.missing_in_trace.len()
    }

    pub fn pass(&self) -> bool {
        self.mismatch_count() == 0
    }
}

/// Checks the bijection between sends and copy-to-copy layer edges: node `v`
/// sends to `w` in round `i` exactly when a copy of `v` in layer `i - 1`
/// precedes a copy of `w` in layer `i`.
pub fn check_send_equivalence(trace: &Trace, lg: &LayeredGraph) -> SendEquivalenceReport {
    let trace_sends: BTreeSet<(u32, NodeId, NodeId)> = trace
        .sends()
        .map(|e| (e.round, e.node, e.peer.unwrap()))
        .collect();
    let oracle_sends = lg.send_edges();
    SendEquivalenceReport {
        missing_in_oracle: trace_sends.difference(&oracle_sends).copied().collect(),
        missing_in_trace: oracle_sends.difference(&trace_sends).copied().collect(),
    }
}

#[derive(Clone, Debug)]
pub struct OriginatorMismatch {
    pub layer: u32,
    pub node: NodeId,
    pub expected: BTreeSet<NodeId>,
    /// The recorded sender buffer; `None` when the slot held no arrival.
    pub actual: Option<BTreeSet<NodeId>>,
}

#[derive(Clone, Debug, Default)]
pub struct OriginatorReport {
    pub checked: usize,
    pub mismatches: Vec<OriginatorMismatch>,
}

impl OriginatorReport {
    pub fn pass(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Checks that every copy's originator set (projected to base nodes) equals
/// the sender buffer the node held at the head of the matching send phase: a
/// copy in layer `i` acts in round `i + 1`.
pub fn check_m_equals_originator(
    snapshots: &Snapshots,
    msg: MessageId,
    lg: &LayeredGraph,
) -> OriginatorReport {
    let mut report = OriginatorReport::default();
    for i in 0..=lg.depth() {
        for (c, vid) in lg.copies_in_layer(i) {
            let expected = lg.originator_bases(vid);
            let actual = snapshots.get(&(msg, c.base, i + 1)).cloned();
            report.checked += 1;
            if actual.as_ref() != Some(&expected) {
                report.mismatches.push(OriginatorMismatch {
                    layer: i,
                    node: c.base,
                    expected,
                    actual,
                });
            }
        }
    }
    report
}

/// Edge accounting of the layered graph against the double cover.
#[derive(Clone, Copy, Debug)]
pub struct EdgeCountReport {
    pub total: usize,
    pub non_dummy: usize,
    pub dummies: usize,
    /// Edges of the cover component the run lives in: `2|E|` for a
    /// non-bipartite base, `|E|` for a bipartite one.
    pub carrier: usize,
    pub fault_count: usize,
}

impl EdgeCountReport {
    /// The one-to-one part: non-dummy edges match the carrier exactly, and
    /// each dummy contributes its two incident edges.
    pub fn bijection_ok(&self) -> bool {
        self.non_dummy == self.carrier && self.total == self.non_dummy + 2 * self.dummies
    }

    /// The full identity `edges = carrier + 2f`, which additionally requires
    /// every blocked pair to have materialized as a dummy. A blocked pair at
    /// a round where the node holds nothing (or owes nothing) adds no dummy,
    /// so this only holds for schemes whose pairs all block real sends.
    pub fn strict_ok(&self) -> bool {
        self.bijection_ok() && self.dummies == self.fault_count
    }
}

pub fn check_edge_counts(
    lg: &LayeredGraph,
    cover: &DoubleCover,
    scheme: &AvailabilityScheme,
) -> EdgeCountReport {
    EdgeCountReport {
        total: lg.edge_count(),
        non_dummy: lg.non_dummy_edge_count(),
        dummies: lg.dummy_count(),
        carrier: cover.carrier_edge_count(),
        fault_count: scheme.fault_count(),
    }
}

/// The path-extended graph that reduces staggered broadcasts to simultaneous
/// ones: each source that starts `d` rounds after the earliest one gets a
/// fresh pendant path of `d` nodes, and the far tip broadcasts instead.
#[derive(Clone, Debug)]
pub struct SourceExtension {
    pub graph: Graph,
    /// Broadcast seeds in the extended graph: path tips for delayed sources,
    /// the source itself otherwise.
    pub seeds: Vec<NodeId>,
    /// The round the staggered run starts at (its earliest broadcast round).
    pub base_round: u32,
}

pub fn build_source_extension(g: &Graph, broadcasts: &[(NodeId, u32)]) -> SourceExtension {
    assert!(!broadcasts.is_empty());
    let base_round = broadcasts.iter().map(|&(_, r)| r).min().unwrap();
    let mut pairs: Vec<(String, String)> = g
        .edges()
        .iter()
        .map(|&(u, w)| (g.name(u).to_string(), g.name(w).to_string()))
        .collect();
    let mut taken: BTreeSet<String> = g.nodes().map(|v| g.name(v).to_string()).collect();
    let fresh = |stem: &str, taken: &mut BTreeSet<String>| -> String {
        let mut name = stem.to_string();
        while !taken.insert(name.clone()) {
            name.push('+');
        }
        name
    };

    let mut seed_names: Vec<String> = Vec::new();
    for &(v, r) in broadcasts {
        let delay = r - base_round;
        if delay == 0 {
            seed_names.push(g.name(v).to_string());
            continue;
        }
        // Path tip..anchor: tip is delay hops away from the source.
        let mut prev = g.name(v).to_string();
        let mut tip = String::new();
        for k in 1..=delay {
            tip = fresh(&format!("{}~{}", g.name(v), k), &mut taken);
            pairs.push((prev.clone(), tip.clone()));
            prev = tip.clone();
        }
        seed_names.push(tip);
    }

    let graph = Graph::from_edges(&pairs).expect("extension preserves connectivity");
    let seeds = seed_names.iter().map(|n| graph.node(n).unwrap()).collect();
    SourceExtension {
        graph,
        seeds,
        base_round,
    }
}

#[derive(Clone, Debug)]
pub struct MultiSourceReport {
    /// `(round, from, to)` send triples present in exactly one of the runs,
    /// in the staggered run's round numbering and the base graph's names.
    pub mismatches: Vec<(u32, String, String)>,
    /// Set when the staggered run violated the broadcast precondition and
    /// the equivalence is not defined.
    pub skipped: Option<String>,
}

impl MultiSourceReport {
    pub fn pass(&self) -> bool {
        self.skipped.is_none() && self.mismatches.is_empty()
    }
}

/// Runs plain flooding twice — staggered sources on the base graph and
/// simultaneous seeds on the path extension — and verifies that the
/// restriction of the extended run to base edges is the staggered run.
pub fn check_multisource_equivalence(
    g: &Graph,
    broadcasts: &[(NodeId, u32)],
    message: &Message,
) -> MultiSourceReport {
    let mut staggered = ScenarioConfig::new(g.clone(), Algorithm::SynAf);
    for &(v, r) in broadcasts {
        staggered = staggered.broadcast(v, r, message.clone());
    }
    let trace = run_scenario(&staggered).expect("valid staggered scenario");
    if let Outcome::PreconditionViolated { round, .. } = trace.outcome {
        return MultiSourceReport {
            mismatches: Vec::new(),
            skipped: Some(format!(
                "broadcast precondition violated in round {round}; equivalence not defined"
            )),
        };
    }

    let ext = build_source_extension(g, broadcasts);
    let mut simultaneous = ScenarioConfig::new(ext.graph.clone(), Algorithm::SynAf);
    for &s in &ext.seeds {
        simultaneous = simultaneous.broadcast(s, 1, message.clone());
    }
    let ext_trace = run_scenario(&simultaneous).expect("valid extension scenario");

    let base_names: BTreeSet<&str> = g.nodes().map(|v| g.name(v)).collect();
    let staggered_sends: BTreeSet<(u32, String, String)> = trace
        .sends()
        .map(|e| {
            (
                e.round - ext.base_round + 1,
                g.name(e.node).to_string(),
                g.name(e.peer.unwrap()).to_string(),
            )
        })
        .collect();
    let restricted: BTreeSet<(u32, String, String)> = ext_trace
        .sends()
        .filter(|e| {
            base_names.contains(ext.graph.name(e.node))
                && base_names.contains(ext.graph.name(e.peer.unwrap()))
        })
        .map(|e| {
            (
                e.round,
                ext.graph.name(e.node).to_string(),
                ext.graph.name(e.peer.unwrap()).to_string(),
            )
        })
        .collect();

    MultiSourceReport {
        mismatches: staggered_sends
            .symmetric_difference(&restricted)
            .cloned()
            .collect(),
        skipped: None,
    }
}

/// Samples an availability scheme whose `f` blocked pairs all materialize as
/// dummies, so that the strict edge identity `edges = carrier + 2f` holds.
/// Pairs are drawn (in nondecreasing round order, which keeps earlier picks
/// materialized) from the send attempts the construction actually makes.
/// Returns `None` when the graph admits no such scheme — a node that never
/// owes a send cannot be usefully blocked.
pub fn sample_materializing_scheme(
    g: &Graph,
    v0: NodeId,
    f: usize,
    seed: u64,
    attempts: u32,
) -> Option<AvailabilityScheme> {
    let cover = DoubleCover::build(g, v0);
    for attempt in 0..attempts {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt as u64 * 0x9e3779b9));
        let mut scheme = AvailabilityScheme::empty();
        let mut min_round = 1;
        let mut ok = true;
        for _ in 0..f {
            let Ok(lg) = build_layered(g, v0, &scheme) else {
                ok = false;
                break;
            };
            let mut candidates: Vec<(NodeId, u32)> = Vec::new();
            for i in 0..=lg.depth() {
                let round = i + 1;
                if round < min_round {
                    continue;
                }
                for (c, vid) in lg.copies_in_layer(i) {
                    let pair = (c.base, round);
                    if pair == (v0, 1) || !scheme.is_available(c.base, round) {
                        continue;
                    }
                    if lg.originator(vid) != cover.neighbors(c) {
                        candidates.push(pair);
                    }
                }
            }
            if candidates.is_empty() {
                ok = false;
                break;
            }
            let pick = candidates[rng.random_range(0..candidates.len())];
            scheme = scheme.with_pair(pick.0, pick.1);
            min_round = pick.1;
        }
        if !ok {
            continue;
        }
        if let Ok(lg) = build_layered(g, v0, &scheme) {
            if lg.dummy_count() == f {
                return Some(scheme);
            }
        }
    }
    None
}

/// Renders the three oracle reports with a machine-readable verdict line.
pub fn render_oracle_reports(
    g: &Graph,
    sends: &SendEquivalenceReport,
    orig: &OriginatorReport,
    edges: &EdgeCountReport,
) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "send-equivalence: {} mismatches",
        sends.mismatch_count()
    )
    .unwrap();
    for (r, u, w) in &sends.missing_in_oracle {
        writeln!(
            out,
            "  trace-only send: round {r} {} -> {}",
            g.name(*u),
            g.name(*w)
        )
        .unwrap();
    }
    for (r, u, w) in &sends.missing_in_trace {
        writeln!(
            out,
            "  oracle-only send: round {r} {} -> {}",
            g.name(*u),
            g.name(*w)
        )
        .unwrap();
    }
    writeln!(
        out,
        "originator-sets: {} mismatches over {} copies",
        orig.mismatches.len(),
        orig.checked
    )
    .unwrap();
    writeln!(
        out,
        "edge-counts: total={} non_dummy={} dummies={} carrier={} f={} bijection={}",
        edges.total,
        edges.non_dummy,
        edges.dummies,
        edges.carrier,
        edges.fault_count,
        if edges.bijection_ok() {
            "ok"
        } else {
            "VIOLATED"
        },
    )
    .unwrap();
    let pass = sends.pass() && orig.pass() && edges.bijection_ok();
    writeln!(out, "ORACLE: {}", if pass { "PASS" } else { "FAIL" }).unwrap();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{run_with_artifacts, RunOptions};
    use crate::trace::EventKind;

    fn msg() -> Message {
        Message::new(1, "m")
    }

    fn synafi_run(g: &Graph, v0: NodeId, scheme: &AvailabilityScheme) -> (Trace, Snapshots) {
        let cfg = ScenarioConfig::new(g.clone(), Algorithm::SynAfi)
            .broadcast(v0, 1, msg())
            .with_scheme(scheme.clone());
        let arts = run_with_artifacts(
            &cfg,
            &RunOptions {
                record_snapshots: true,
                extra_quiescence_rounds: 0,
            },
        )
        .unwrap();
        (arts.trace, arts.snapshots)
    }

    #[test]
    fn p3_blocked_run_matches_oracle() {
        let g = Graph::from_edge_list("a b\nb c").unwrap();
        let (a, b) = (g.node("a").unwrap(), g.node("b").unwrap());
        let scheme = AvailabilityScheme::new([(b, 2)]).unwrap();
        let (trace, snapshots) = synafi_run(&g, a, &scheme);
        let lg = build_layered(&g, a, &scheme).unwrap();
        let cover = DoubleCover::build(&g, a);

        assert!(check_send_equivalence(&trace, &lg).pass());
        let orig = check_m_equals_originator(&snapshots, MessageId(1), &lg);
        assert!(orig.pass(), "{:?}", orig.mismatches);
        let edges = check_edge_counts(&lg, &cover, &scheme);
        assert!(edges.strict_ok());
    }

    #[test]
    fn corrupted_trace_yields_exactly_one_mismatch() {
        let g = Graph::from_edge_list("a b\nb c").unwrap();
        let (a, b) = (g.node("a").unwrap(), g.node("b").unwrap());
        let scheme = AvailabilityScheme::new([(b, 2)]).unwrap();
        let (mut trace, _) = synafi_run(&g, a, &scheme);
        let lg = build_layered(&g, a, &scheme).unwrap();

        let pos = trace
            .events
            .iter()
            .position(|e| e.kind == EventKind::Send && e.round == 4)
            .unwrap();
        trace.events.remove(pos);
        let report = check_send_equivalence(&trace, &lg);
        assert_eq!(report.mismatch_count(), 1);
        assert_eq!(report.missing_in_trace.len(), 1);
    }

    #[test]
    fn source_extension_examples() {
        let g = Graph::from_edge_list("a b\nb c").unwrap();
        let (a, c) = (g.node("a").unwrap(), g.node("c").unwrap());

        // All sources simultaneous: the extension is the graph itself.
        let ext = build_source_extension(&g, &[(a, 1), (c, 1)]);
        assert_eq!(ext.graph.n(), 3);
        assert_eq!(ext.seeds.len(), 2);

        // One round of delay: a single pendant node on c.
        let ext = build_source_extension(&g, &[(a, 1), (c, 2)]);
        assert_eq!(ext.graph.n(), 4);
        assert_eq!(ext.graph.degree(ext.graph.node("c").unwrap()), 2);
        let tip = ext.seeds[1];
        assert_eq!(ext.graph.degree(tip), 1);
    }

    #[test]
    fn multisource_equivalence_on_the_path() {
        let g = Graph::from_edge_list("a b\nb c").unwrap();
        let (a, c) = (g.node("a").unwrap(), g.node("c").unwrap());

        let report = check_multisource_equivalence(&g, &[(a, 1), (c, 1)], &msg());
        assert!(report.pass(), "{:?}", report.mismatches);

        let report = check_multisource_equivalence(&g, &[(a, 1), (c, 2)], &msg());
        assert!(report.pass(), "{:?}", report.mismatches);
    }

    #[test]
    fn multisource_equivalence_skips_on_violation() {
        let g = Graph::from_edge_list("a b\nb c").unwrap();
        let (a, b) = (g.node("a").unwrap(), g.node("b").unwrap());
        let report = check_multisource_equivalence(&g, &[(a, 1), (b, 3)], &msg());
        assert!(report.skipped.is_some());
    }

    #[test]
    fn materializing_scheme_has_exact_dummy_count() {
        let g = Graph::from_edge_list("a b\nb c\nc a\nc d").unwrap();
        let a = g.node("a").unwrap();
        let cover = DoubleCover::build(&g, a);
        for f in 1..=2 {
            let scheme = sample_materializing_scheme(&g, a, f, 17, 50).unwrap();
            assert_eq!(scheme.fault_count(), f);
            let lg = build_layered(&g, a, &scheme).unwrap();
            assert_eq!(lg.dummy_count(), f);
            assert!(check_edge_counts(&lg, &cover, &scheme).strict_ok());
        }
    }

    #[test]
    fn no_materializing_scheme_on_an_edge() {
        // On the two-node graph the non-originator never owes a send, so no
        // blocked pair can ever materialize.
        let g = Graph::from_edge_list("a b").unwrap();
        let a = g.node("a").unwrap();
        assert!(sample_materializing_scheme(&g, a, 1, 5, 20).is_none());
    }
}

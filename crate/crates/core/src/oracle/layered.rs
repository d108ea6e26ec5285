//! Layer-by-layer unrolling of a run under an availability scheme.
//!
//! Layer 0 holds the originator's primary copy. A copy of cover node `c` in
//! layer `i` acts in round `i + 1`: if its originator set already covers its
//! whole cover neighborhood it has no successor; otherwise, if the base node
//! may send in round `i + 1`, it links or creates copies of the uncovered
//! neighbors in layer `i + 1`; if it is blocked, it spawns a dummy vertex
//! whose own successor re-creates the copy one layer later. The scheme
//! extends to mirror copies by blocking both copies of a base node alike.
//!
//! Originator sets are computed from predecessors: dummies pass their
//! predecessor's originator through, copies take the union of their dummy
//! predecessors' originators plus their non-dummy predecessors.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::fmt::Write as _;

use thiserror::Error;

use crate::graph::{Graph, NodeId};
use crate::scheme::AvailabilityScheme;

use super::double_cover::{CoverNode, DoubleCover};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("layer construction exceeded the {cap}-layer cap; the construction is broken")]
    DepthCapExceeded { cap: u32 },
    #[error("copies of both sides of base node index {0} appeared in one layer")]
    TwinsInLayer(usize),
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum LgKind {
    Copy(CoverNode),
    Dummy,
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct LgVertexId(u32);

#[derive(Clone, Debug)]
struct LgVertex {
    kind: LgKind,
    layer: u32,
    originator: BTreeSet<CoverNode>,
    preds: Vec<LgVertexId>,
    succs: Vec<LgVertexId>,
}

#[derive(Clone, Debug)]
pub struct LayeredGraph {
    verts: Vec<LgVertex>,
    layers: Vec<Vec<LgVertexId>>,
    dummy_count: usize,
}

pub fn build_layered(
    g: &Graph,
    v0: NodeId,
    scheme: &AvailabilityScheme,
) -> Result<LayeredGraph, OracleError> {
    let cover = DoubleCover::build(g, v0);
    build_layered_on(&cover, g, v0, scheme)
}

pub(crate) fn build_layered_on(
    cover: &DoubleCover,
    g: &Graph,
    v0: NodeId,
    scheme: &AvailabilityScheme,
) -> Result<LayeredGraph, OracleError> {
    let max_layers = 2 * g.diameter() + 2 * scheme.fault_count() as u32 + 2;

    let mut lg = LayeredGraph {
        verts: Vec::new(),
        layers: Vec::new(),
        dummy_count: 0,
    };
    let root = lg.push(LgKind::Copy(CoverNode::primary(v0)), 0);
    lg.layers.push(vec![root]);

    loop {
        let i = lg.layers.len() as u32 - 1;
        let current = lg.layers.last().unwrap().clone();
        let mut next: Vec<LgVertexId> = Vec::new();
        let mut copies_here: BTreeMap<CoverNode, LgVertexId> = BTreeMap::new();
        let mut base_seen: BTreeSet<NodeId> = BTreeSet::new();

        let link_copy = |lg: &mut LayeredGraph,
                         next: &mut Vec<LgVertexId>,
                         copies_here: &mut BTreeMap<CoverNode, LgVertexId>,
                         base_seen: &mut BTreeSet<NodeId>,
                         pred: LgVertexId,
                         u: CoverNode|
         -> Result<(), OracleError> {
            let vid = match copies_here.get(&u) {
                Some(&vid) => vid,
                None => {
                    if !base_seen.insert(u.base) {
                        return Err(OracleError::TwinsInLayer(u.base.index()));
                    }
                    let vid = lg.push(LgKind::Copy(u), i + 1);
                    copies_here.insert(u, vid);
                    next.push(vid);
                    vid
                }
            };
            lg.link(pred, vid);
            Ok(())
        };

        for &xid in &current {
            match lg.verts[xid.0 as usize].kind {
                LgKind::Copy(c) => {
                    let originator = lg.verts[xid.0 as usize].originator.clone();
                    if &originator == cover.neighbors(c) {
                        continue;
                    }
                    if scheme.is_available(c.base, i + 1) {
                        let targets: Vec<CoverNode> = cover
                            .neighbors(c)
                            .difference(&originator)
                            .copied()
                            .collect();
                        for u in targets {
                            link_copy(
                                &mut lg,
                                &mut next,
                                &mut copies_here,
                                &mut base_seen,
                                xid,
                                u,
                            )?;
                        }
                    } else {
                        let dummy = lg.push(LgKind::Dummy, i + 1);
                        lg.dummy_count += 1;
                        lg.link(xid, dummy);
                        next.push(dummy);
                    }
                }
                LgKind::Dummy => {
                    let pred = lg.verts[xid.0 as usize].preds[0];
                    let LgKind::Copy(w) = lg.verts[pred.0 as usize].kind else {
                        unreachable!("a dummy's predecessor is always a copy");
                    };
                    link_copy(&mut lg, &mut next, &mut copies_here, &mut base_seen, xid, w)?;
                }
            }
        }

        if next.is_empty() {
            break;
        }
        if lg.layers.len() as u32 + 1 > max_layers {
            return Err(OracleError::DepthCapExceeded { cap: max_layers });
        }

        for &vid in &next {
            let originator = match lg.verts[vid.0 as usize].kind {
                LgKind::Dummy => {
                    let pred = lg.verts[vid.0 as usize].preds[0];
                    lg.verts[pred.0 as usize].originator.clone()
                }
                LgKind::Copy(_) => {
                    let mut orig = BTreeSet::new();
                    for &pid in &lg.verts[vid.0 as usize].preds {
                        let pv = &lg.verts[pid.0 as usize];
                        match pv.kind {
                            LgKind::Dummy => orig.extend(pv.originator.iter().copied()),
                            LgKind::Copy(pc) => {
                                orig.insert(pc);
                            }
                        }
                    }
                    orig
                }
            };
            lg.verts[vid.0 as usize].originator = originator;
        }
        lg.layers.push(next);
    }

    Ok(lg)
}

impl LayeredGraph {
    fn push(&mut self, kind: LgKind, layer: u32) -> LgVertexId {
        let id = LgVertexId(self.verts.len() as u32);
        self.verts.push(LgVertex {
            kind,
            layer,
            originator: BTreeSet::new(),
            preds: Vec::new(),
            succs: Vec::new(),
        });
        id
    }

    fn link(&mut self, from: LgVertexId, to: LgVertexId) {
        self.verts[from.0 as usize].succs.push(to);
        self.verts[to.0 as usize].preds.push(from);
    }

    /// Index of the last non-empty layer.
    pub fn depth(&self) -> u32 {
        self.layers.len() as u32 - 1
    }

    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    pub fn dummy_count(&self) -> usize {
        self.dummy_count
    }

    pub fn edge_count(&self) -> usize {
        self.verts.iter().map(|v| v.succs.len()).sum()
    }

    pub fn non_dummy_edge_count(&self) -> usize {
        self.verts
            .iter()
            .filter(|v| matches!(v.kind, LgKind::Copy(_)))
            .map(|v| {
                v.succs
                    .iter()
                    .filter(|s| matches!(self.verts[s.0 as usize].kind, LgKind::Copy(_)))
                    .count()
            })
            .sum()
    }

    pub fn kind(&self, id: LgVertexId) -> LgKind {
        self.verts[id.0 as usize].kind
    }

    pub fn layer_of(&self, id: LgVertexId) -> u32 {
        self.verts[id.0 as usize].layer
    }

    pub fn originator(&self, id: LgVertexId) -> &BTreeSet<CoverNode> {
        &self.verts[id.0 as usize].originator
    }

    /// Originator set projected to base nodes.
    pub fn originator_bases(&self, id: LgVertexId) -> BTreeSet<NodeId> {
        self.originator(id).iter().map(|c| c.base).collect()
    }

    pub fn preds(&self, id: LgVertexId) -> &[LgVertexId] {
        &self.verts[id.0 as usize].preds
    }

    pub fn succs(&self, id: LgVertexId) -> &[LgVertexId] {
        &self.verts[id.0 as usize].succs
    }

    /// Copies in layer `i` as `(cover node, vertex)` pairs, sorted.
    pub fn copies_in_layer(&self, i: u32) -> Vec<(CoverNode, LgVertexId)> {
        let mut out: Vec<(CoverNode, LgVertexId)> = self.layers[i as usize]
            .iter()
            .filter_map(|&vid| match self.verts[vid.0 as usize].kind {
                LgKind::Copy(c) => Some((c, vid)),
                LgKind::Dummy => None,
            })
            .collect();
        out.sort();
        out
    }

    /// Cover nodes of the copies in layer `i`, sorted. Dummies excluded.
    pub fn layer_cover_nodes(&self, i: u32) -> Vec<CoverNode> {
        self.copies_in_layer(i)
            .into_iter()
            .map(|(c, _)| c)
            .collect()
    }

    /// The `(round, sender, receiver)` triples this structure predicts: one
    /// for every copy-to-copy edge from layer `i - 1` to layer `i`, projected
    /// to base nodes.
    pub fn send_edges(&self) -> BTreeSet<(u32, NodeId, NodeId)> {
        let mut out = BTreeSet::new();
        for v in &self.verts {
            let LgKind::Copy(from) = v.kind else { continue };
            for s in &v.succs {
                if let LgKind::Copy(to) = self.verts[s.0 as usize].kind {
                    out.insert((v.layer + 1, from.base, to.base));
                }
            }
        }
        out
    }

    pub fn vertices(&self) -> impl Iterator<Item = LgVertexId> + '_ {
        (0..self.verts.len() as u32).map(LgVertexId)
    }

    pub fn to_dot(&self, g: &Graph, cover: &DoubleCover) -> String {
        let mut out = String::from("digraph layered {\n  rankdir=TB;\n");
        let label = |vid: LgVertexId| -> String {
            match self.verts[vid.0 as usize].kind {
                LgKind::Copy(c) => format!("{}@{}", cover.node_label(g, c), self.layer_of(vid)),
                LgKind::Dummy => format!("dummy{}@{}", vid.0, self.layer_of(vid)),
            }
        };
        for (i, layer) in self.layers.iter().enumerate() {
            write!(out, "  {{ rank=same;").unwrap();
            for &vid in layer {
                write!(out, " \"{}\";", label(vid)).unwrap();
            }
            writeln!(out, " }} // layer {i}").unwrap();
        }
        for vid in self.vertices() {
            if matches!(self.verts[vid.0 as usize].kind, LgKind::Dummy) {
                writeln!(out, "  \"{}\" [shape=point];", label(vid)).unwrap();
            }
        }
        for vid in self.vertices() {
            for &s in self.succs(vid) {
                writeln!(out, "  \"{}\" -> \"{}\";", label(vid), label(s)).unwrap();
            }
        }
        out.push_str("}\n");
        out
    }
}

//! The double cover of a graph with respect to an originator.

use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;

use crate::graph::{Graph, NodeId};

/// A node of the double cover: a base node on either the primary or the
/// mirror side.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct CoverNode {
    pub base: NodeId,
    pub mirror: bool,
}

impl CoverNode {
    pub fn primary(base: NodeId) -> Self {
        CoverNode {
            base,
            mirror: false,
        }
    }

    pub fn mirrored(base: NodeId) -> Self {
        CoverNode { base, mirror: true }
    }
}

/// Two copies of the base graph where each cross edge `(u, w)` with respect
/// to `v0` is replaced by the inter-copy edges `(u, w')` and `(w, u')`. Every
/// non-cross edge is duplicated within each copy, so the cover always has
/// `2|E|` edges. For a bipartite base there are no cross edges and the cover
/// is two disjoint copies; the component of `v0` is the execution carrier.
#[derive(Clone, Debug)]
pub struct DoubleCover {
    v0: NodeId,
    adj: Vec<BTreeSet<CoverNode>>,
    edge_count: usize,
}

impl DoubleCover {
    pub fn build(g: &Graph, v0: NodeId) -> DoubleCover {
        let dist = g.distances_from(v0);
        let mut adj: Vec<BTreeSet<CoverNode>> = vec![BTreeSet::new(); 2 * g.n()];
        let add = |a: CoverNode, b: CoverNode, adj: &mut Vec<BTreeSet<CoverNode>>| {
            adj[Self::idx(a)].insert(b);
            adj[Self::idx(b)].insert(a);
        };
        let mut edge_count = 0;
        for &(u, w) in g.edges() {
            if dist[u.index()] == dist[w.index()] {
                add(CoverNode::primary(u), CoverNode::mirrored(w), &mut adj);
                add(CoverNode::primary(w), CoverNode::mirrored(u), &mut adj);
            } else {
                add(CoverNode::primary(u), CoverNode::primary(w), &mut adj);
                add(CoverNode::mirrored(u), CoverNode::mirrored(w), &mut adj);
            }
            edge_count += 2;
        }
        DoubleCover {
            v0,
            adj,
            edge_count,
        }
    }

    fn idx(c: CoverNode) -> usize {
        c.base.index() * 2 + c.mirror as usize
    }

    pub fn root(&self) -> CoverNode {
        CoverNode::primary(self.v0)
    }

    pub fn n(&self) -> usize {
        self.adj.len() / 2
    }

    pub fn neighbors(&self, c: CoverNode) -> &BTreeSet<CoverNode> {
        &self.adj[Self::idx(c)]
    }

    pub fn degree(&self, c: CoverNode) -> usize {
        self.adj[Self::idx(c)].len()
    }

    /// Total undirected edges, always twice the base edge count.
    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn nodes(&self) -> impl Iterator<Item = CoverNode> + '_ {
        (0..self.n()).flat_map(|i| {
            [
                CoverNode::primary(NodeId::from_index(i)),
                CoverNode::mirrored(NodeId::from_index(i)),
            ]
        })
    }

    pub fn component(&self, start: CoverNode) -> BTreeSet<CoverNode> {
        let mut seen = BTreeSet::from([start]);
        let mut queue = VecDeque::from([start]);
        while let Some(c) = queue.pop_front() {
            for &w in self.neighbors(c) {
                if seen.insert(w) {
                    queue.push_back(w);
                }
            }
        }
        seen
    }

    /// Edges inside the component of the originator's primary copy. This is
    /// `2|E|` when the base graph is non-bipartite (the cover is connected)
    /// and `|E|` when it is bipartite (the mirror copy is unreachable).
    pub fn carrier_edge_count(&self) -> usize {
        let comp = self.component(self.root());
        comp.iter()
            .map(|&c| {
                self.neighbors(c)
                    .iter()
                    .filter(|w| comp.contains(w))
                    .count()
            })
            .sum::<usize>()
            / 2
    }

    /// Breadth-first layers from the originator's primary copy; layer lists
    /// are sorted.
    pub fn bfs_layers(&self) -> Vec<Vec<CoverNode>> {
        let mut dist: Vec<Option<u32>> = vec![None; self.adj.len()];
        dist[Self::idx(self.root())] = Some(0);
        let mut queue = VecDeque::from([self.root()]);
        let mut layers: Vec<Vec<CoverNode>> = vec![vec![self.root()]];
        while let Some(c) = queue.pop_front() {
            let d = dist[Self::idx(c)].unwrap();
            for &w in self.neighbors(c) {
                if dist[Self::idx(w)].is_none() {
                    dist[Self::idx(w)] = Some(d + 1);
                    if layers.len() as u32 == d + 1 {
                        layers.push(Vec::new());
                    }
                    layers[(d + 1) as usize].push(w);
                    queue.push_back(w);
                }
            }
        }
        for layer in &mut layers {
            layer.sort();
        }
        layers
    }

    pub fn depth(&self) -> u32 {
        self.bfs_layers().len() as u32 - 1
    }

    /// Whether every carrier edge joins consecutive breadth-first layers.
    /// This is the structural property the whole layering argument rests on.
    pub fn layering_is_strict(&self) -> bool {
        let layers = self.bfs_layers();
        let mut level = vec![u32::MAX; self.adj.len()];
        for (d, layer) in layers.iter().enumerate() {
            for &c in layer {
                level[Self::idx(c)] = d as u32;
            }
        }
        self.nodes().all(|c| {
            let dc = level[Self::idx(c)];
            dc == u32::MAX
                || self
                    .neighbors(c)
                    .iter()
                    .all(|&w| level[Self::idx(w)].abs_diff(dc) == 1)
        })
    }

    pub fn is_bipartite(&self) -> bool {
        // Two-color each component independently.
        let mut color: Vec<Option<bool>> = vec![None; self.adj.len()];
        for start in self.nodes() {
            if color[Self::idx(start)].is_some() {
                continue;
            }
            color[Self::idx(start)] = Some(false);
            let mut queue = VecDeque::from([start]);
            while let Some(c) = queue.pop_front() {
                let col = color[Self::idx(c)].unwrap();
                for &w in self.neighbors(c) {
                    match color[Self::idx(w)] {
                        None => {
                            color[Self::idx(w)] = Some(!col);
                            queue.push_back(w);
                        }
                        Some(x) if x == col => return false,
                        _ => {}
                    }
                }
            }
        }
        true
    }

    pub fn node_label(&self, g: &Graph, c: CoverNode) -> String {
        if c.mirror {
            format!("{}'", g.name(c.base))
        } else {
            g.name(c.base).to_string()
        }
    }

    pub fn to_dot(&self, g: &Graph) -> String {
        let mut out = String::from("graph double_cover {\n");
        for c in self.nodes() {
            if self.degree(c) == 0 && c != self.root() {
                continue;
            }
            writeln!(
                out,
                "  \"{}\"{};",
                self.node_label(g, c),
                if c.mirror { " [style=dashed]" } else { "" }
            )
            .unwrap();
        }
        let mut seen = BTreeSet::new();
        for c in self.nodes() {
            for &w in self.neighbors(c) {
                let key = if c < w { (c, w) } else { (w, c) };
                if seen.insert(key) {
                    let crossing = c.mirror != w.mirror;
                    writeln!(
                        out,
                        "  \"{}\" -- \"{}\"{};",
                        self.node_label(g, key.0),
                        self.node_label(g, key.1),
                        if crossing { " [style=dashed]" } else { "" }
                    )
                    .unwrap();
                }
            }
        }
        out.push_str("}\n");
        out
    }
}

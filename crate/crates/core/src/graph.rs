//! Undirected connected graphs and the distance metrics the bounds depend on.
//!
//! Node tokens are arbitrary strings; internally they are mapped to dense
//! indices in lexicographic token order, so the total order on [`NodeId`] is
//! the lexicographic order of the tokens. That order is fixed for the
//! lifetime of a run and is what deterministic tie-breaking (smallest-id
//! message selection, canonical event sorting) relies on.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Dense index of a node within its [`Graph`]. Ordered lexicographically by
/// the node token it stands for.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct NodeId(u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn from_index(i: usize) -> Self {
        NodeId(i as u32)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("self-loop at node '{0}'")]
    SelfLoop(String),
    #[error("duplicate edge '{0} {1}'")]
    DuplicateEdge(String, String),
    #[error("graph is not connected")]
    Disconnected,
    #[error("graph has no nodes")]
    Empty,
    #[error("unknown node '{0}'")]
    UnknownNode(String),
    #[error("'node' lines are only legal for a single-node graph")]
    IsolatedNodes,
}

/// A finite, connected, undirected, simple graph. Immutable after
/// construction; safe to share across concurrent runs.
#[derive(Clone, Debug)]
pub struct Graph {
    names: Vec<String>,
    adj: Vec<BTreeSet<NodeId>>,
    edges: Vec<(NodeId, NodeId)>,
}

impl Graph {
    /// Builds a graph from string edge pairs, validating simplicity and
    /// connectivity.
    pub fn from_edges<S: AsRef<str>>(pairs: &[(S, S)]) -> Result<Graph, GraphError> {
        let pairs: Vec<(String, String)> = pairs
            .iter()
            .map(|(a, b)| (a.as_ref().to_string(), b.as_ref().to_string()))
            .collect();
        Self::build(pairs, Vec::new())
    }

    /// The one-node graph.
    pub fn single(name: impl Into<String>) -> Graph {
        let name = name.into();
        Graph {
            names: vec![name],
            adj: vec![BTreeSet::new()],
            edges: Vec::new(),
        }
    }

    /// Parses the edge-list text format: one edge per line as two
    /// whitespace-separated tokens, `#`-prefixed lines ignored, and optional
    /// `node <token>` lines that declare an isolated node (only legal when
    /// the whole graph is that single node).
    pub fn from_edge_list(text: &str) -> Result<Graph, GraphError> {
        let mut pairs = Vec::new();
        let mut declared = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            match toks.as_slice() {
                ["node", name] => declared.push(name.to_string()),
                [a, b] => pairs.push((a.to_string(), b.to_string())),
                _ => {
                    return Err(GraphError::Parse {
                        line: idx + 1,
                        msg: format!("expected 'a b' or 'node a', got '{line}'"),
                    })
                }
            }
        }
        Self::build(pairs, declared)
    }

    fn build(pairs: Vec<(String, String)>, declared: Vec<String>) -> Result<Graph, GraphError> {
        if !declared.is_empty() {
            let distinct: BTreeSet<&String> = declared.iter().collect();
            if !pairs.is_empty() || distinct.len() > 1 {
                return Err(GraphError::IsolatedNodes);
            }
            return Ok(Graph::single(declared[0].clone()));
        }
        if pairs.is_empty() {
            return Err(GraphError::Empty);
        }

        let mut names: BTreeSet<String> = BTreeSet::new();
        for (a, b) in &pairs {
            if a == b {
                return Err(GraphError::SelfLoop(a.clone()));
            }
            names.insert(a.clone());
            names.insert(b.clone());
        }
        let names: Vec<String> = names.into_iter().collect();
        let index: BTreeMap<&str, NodeId> = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), NodeId(i as u32)))
            .collect();

        let mut adj = vec![BTreeSet::new(); names.len()];
        let mut edges = Vec::new();
        for (a, b) in &pairs {
            let (u, w) = (index[a.as_str()], index[b.as_str()]);
            let (lo, hi) = if u < w { (u, w) } else { (w, u) };
            if !adj[lo.index()].insert(hi) {
                return Err(GraphError::DuplicateEdge(a.clone(), b.clone()));
            }
            adj[hi.index()].insert(lo);
            edges.push((lo, hi));
        }
        edges.sort();

        let g = Graph { names, adj, edges };
        if !g.is_connected() {
            return Err(GraphError::Disconnected);
        }
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.names.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edges in canonical `(lo, hi)` order.
    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        &self.edges
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.names.len()).map(|i| NodeId(i as u32))
    }

    pub fn neighbors(&self, v: NodeId) -> &BTreeSet<NodeId> {
        &self.adj[v.index()]
    }

    pub fn degree(&self, v: NodeId) -> usize {
        self.adj[v.index()].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adj.iter().map(|s| s.len()).max().unwrap_or(0)
    }

    pub fn name(&self, v: NodeId) -> &str {
        &self.names[v.index()]
    }

    pub fn node(&self, name: &str) -> Option<NodeId> {
        self.names
            .binary_search_by(|n| n.as_str().cmp(name))
            .ok()
            .map(|i| NodeId(i as u32))
    }

    pub fn node_or_err(&self, name: &str) -> Result<NodeId, GraphError> {
        self.node(name)
            .ok_or_else(|| GraphError::UnknownNode(name.to_string()))
    }

    pub fn has_edge(&self, u: NodeId, w: NodeId) -> bool {
        self.adj[u.index()].contains(&w)
    }

    fn is_connected(&self) -> bool {
        if self.names.is_empty() {
            return false;
        }
        let d = self.distances_from(NodeId(0));
        d.iter().all(|&x| x != u32::MAX)
    }

    /// Exact hop distances from `v` via breadth-first search.
    pub fn distances_from(&self, v: NodeId) -> Vec<u32> {
        let mut dist = vec![u32::MAX; self.n()];
        dist[v.index()] = 0;
        let mut queue = VecDeque::from([v]);
        while let Some(u) = queue.pop_front() {
            for &w in &self.adj[u.index()] {
                if dist[w.index()] == u32::MAX {
                    dist[w.index()] = dist[u.index()] + 1;
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    pub fn distance(&self, v: NodeId, u: NodeId) -> u32 {
        self.distances_from(v)[u.index()]
    }

    /// Greatest distance from `v` to any other node.
    pub fn eccentricity(&self, v: NodeId) -> u32 {
        *self.distances_from(v).iter().max().unwrap()
    }

    pub fn diameter(&self) -> u32 {
        self.nodes().map(|v| self.eccentricity(v)).max().unwrap()
    }

    /// Edges whose endpoints are equidistant from `v0`. These are exactly the
    /// edges rerouted between the two copies in the double cover.
    pub fn cross_edges(&self, v0: NodeId) -> Vec<(NodeId, NodeId)> {
        let dist = self.distances_from(v0);
        self.edges
            .iter()
            .copied()
            .filter(|&(u, w)| dist[u.index()] == dist[w.index()])
            .collect()
    }

    /// Two-coloring of the node set if one exists. The side containing the
    /// smallest node comes first.
    pub fn bipartition(&self) -> Option<(BTreeSet<NodeId>, BTreeSet<NodeId>)> {
        let dist = self.distances_from(NodeId(0));
        for &(u, w) in &self.edges {
            if dist[u.index()] % 2 == dist[w.index()] % 2 {
                return None;
            }
        }
        let mut even = BTreeSet::new();
        let mut odd = BTreeSet::new();
        for v in self.nodes() {
            if dist[v.index()].is_multiple_of(2) {
                even.insert(v);
            } else {
                odd.insert(v);
            }
        }
        Some((even, odd))
    }

    pub fn is_bipartite(&self) -> bool {
        self.bipartition().is_some()
    }

    /// Random connected graph on `n` nodes named `v0..v{n-1}`: a random
    /// attachment tree plus `extra_edges` additional distinct edges (capped
    /// at the complete graph). Deterministic in `seed`.
    pub fn random_connected(n: usize, extra_edges: usize, seed: u64) -> Graph {
        assert!(n >= 1);
        if n == 1 {
            return Graph::single("v0");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut present: BTreeSet<(usize, usize)> = BTreeSet::new();
        for i in 1..n {
            let j = rng.random_range(0..i);
            present.insert((j, i));
        }
        let mut missing: Vec<(usize, usize)> = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if !present.contains(&(i, j)) {
                    missing.push((i, j));
                }
            }
        }
        for _ in 0..extra_edges.min(missing.len()) {
            let k = rng.random_range(0..missing.len());
            present.insert(missing.swap_remove(k));
        }
        let pairs: Vec<(String, String)> = present
            .into_iter()
            .map(|(i, j)| (format!("v{i}"), format!("v{j}")))
            .collect();
        Graph::from_edges(&pairs).expect("construction is connected by design")
    }

    /// All connected graphs on `n` labeled nodes up to isomorphism, nodes
    /// named `v0..v{n-1}`. Intended for exhaustive sweeps with small `n`.
    pub fn connected_up_to_iso(n: usize) -> Vec<Graph> {
        assert!((1..=6).contains(&n), "exhaustive enumeration is for n <= 6");
        if n == 1 {
            return vec![Graph::single("v0")];
        }
        let pair_count = n * (n - 1) / 2;
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .collect();
        let pair_index =
            |i: usize, j: usize| -> usize { pairs.iter().position(|&p| p == (i, j)).unwrap() };

        // Edge-index permutation tables for every node permutation.
        let mut perm_tables: Vec<Vec<usize>> = Vec::new();
        let mut perm: Vec<usize> = (0..n).collect();
        heap_permutations(&mut perm, &mut |p| {
            let table = pairs
                .iter()
                .map(|&(i, j)| {
                    let (a, b) = (p[i], p[j]);
                    pair_index(a.min(b), a.max(b))
                })
                .collect();
            perm_tables.push(table);
        });

        let mut canon_seen: BTreeSet<u32> = BTreeSet::new();
        let mut out = Vec::new();
        for mask in 0u32..(1 << pair_count) {
            if !mask_connected(mask, n, &pairs) {
                continue;
            }
            let canon = perm_tables
                .iter()
                .map(|table| {
                    let mut m = 0u32;
                    for (e, &to) in table.iter().enumerate() {
                        if mask & (1 << e) != 0 {
                            m |= 1 << to;
                        }
                    }
                    m
                })
                .min()
                .unwrap();
            if canon_seen.insert(canon) {
                let edge_pairs: Vec<(String, String)> = pairs
                    .iter()
                    .enumerate()
                    .filter(|&(e, _)| canon & (1 << e) != 0)
                    .map(|(_, &(i, j))| (format!("v{i}"), format!("v{j}")))
                    .collect();
                out.push(Graph::from_edges(&edge_pairs).unwrap());
            }
        }
        out
    }
}

fn mask_connected(mask: u32, n: usize, pairs: &[(usize, usize)]) -> bool {
    let mut reach = 1u32; // node 0
    loop {
        let mut grew = false;
        for (e, &(i, j)) in pairs.iter().enumerate() {
            if mask & (1 << e) == 0 {
                continue;
            }
            let (bi, bj) = (1u32 << i, 1u32 << j);
            if reach & bi != 0 && reach & bj == 0 {
                reach |= bj;
                grew = true;
            } else if reach & bj != 0 && reach & bi == 0 {
                reach |= bi;
                grew = true;
            }
        }
        if !grew {
            break;
        }
    }
    // Every node must be an edge endpoint, otherwise the mask does not even
    // describe a graph on n nodes.
    let mut touched = 0u32;
    for (e, &(i, j)) in pairs.iter().enumerate() {
        if mask & (1 << e) != 0 {
            touched |= (1 << i) | (1 << j);
        }
    }
    touched == (1 << n) - 1 && reach == (1 << n) - 1
}

fn heap_permutations(items: &mut Vec<usize>, visit: &mut impl FnMut(&[usize])) {
    fn rec(k: usize, items: &mut Vec<usize>, visit: &mut impl FnMut(&[usize])) {
        if k == 1 {
            visit(items);
            return;
        }
        for i in 0..k {
            rec(k - 1, items, visit);
            if k.is_multiple_of(2) {
                items.swap(i, k - 1);
            } else {
                items.swap(0, k - 1);
            }
        }
    }
    let k = items.len();
    rec(k, items, visit);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p3() -> Graph {
        Graph::from_edge_list("a b\nb c").unwrap()
    }

    fn k3() -> Graph {
        Graph::from_edge_list("a b\nb c\nc a").unwrap()
    }

    fn c5() -> Graph {
        Graph::from_edge_list("a b\nb c\nc d\nd e\ne a").unwrap()
    }

    #[test]
    fn parses_path_and_triangle() {
        let g = p3();
        assert_eq!(g.n(), 3);
        assert_eq!(g.edge_count(), 2);
        let g = k3();
        assert_eq!(g.n(), 3);
        assert_eq!(g.edge_count(), 3);
    }

    #[test]
    fn rejects_disconnected() {
        assert!(matches!(
            Graph::from_edge_list("a b\nc d"),
            Err(GraphError::Disconnected)
        ));
    }

    #[test]
    fn rejects_self_loop_and_duplicate() {
        assert!(matches!(
            Graph::from_edge_list("a a"),
            Err(GraphError::SelfLoop(_))
        ));
        assert!(matches!(
            Graph::from_edge_list("a b\nb a"),
            Err(GraphError::DuplicateEdge(..))
        ));
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let g = Graph::from_edge_list("# path\n\na b\n  \nb c\n").unwrap();
        assert_eq!(g.n(), 3);
    }

    #[test]
    fn single_node_declaration() {
        let g = Graph::from_edge_list("node alpha").unwrap();
        assert_eq!(g.n(), 1);
        assert_eq!(g.edge_count(), 0);
        assert!(matches!(
            Graph::from_edge_list("node x\na b"),
            Err(GraphError::IsolatedNodes)
        ));
        assert!(matches!(
            Graph::from_edge_list("node x\nnode y"),
            Err(GraphError::IsolatedNodes)
        ));
    }

    #[test]
    fn malformed_line_is_a_parse_error() {
        assert!(matches!(
            Graph::from_edge_list("a b c"),
            Err(GraphError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn node_order_is_lexicographic() {
        let g = Graph::from_edge_list("zz aa\naa mm").unwrap();
        assert_eq!(g.name(NodeId::from_index(0)), "aa");
        assert_eq!(g.name(NodeId::from_index(1)), "mm");
        assert_eq!(g.name(NodeId::from_index(2)), "zz");
    }

    #[test]
    fn distances_on_small_graphs() {
        let g = k3();
        let a = g.node("a").unwrap();
        assert_eq!(g.distances_from(a), vec![0, 1, 1]);

        let g = p3();
        let a = g.node("a").unwrap();
        assert_eq!(g.distances_from(a), vec![0, 1, 2]);

        let g = c5();
        for v in g.nodes() {
            let mut d = g.distances_from(v);
            d.sort();
            assert_eq!(d, vec![0, 1, 1, 2, 2]);
        }
    }

    #[test]
    fn eccentricity_and_diameter() {
        let g = k3();
        assert_eq!(g.eccentricity(g.node("a").unwrap()), 1);
        assert_eq!(g.diameter(), 1);

        let g = p3();
        assert_eq!(g.eccentricity(g.node("a").unwrap()), 2);
        assert_eq!(g.eccentricity(g.node("b").unwrap()), 1);
        assert_eq!(g.diameter(), 2);

        assert_eq!(c5().diameter(), 2);
    }

    #[test]
    fn cross_edges_examples() {
        let g = k3();
        let (a, b, c) = (
            g.node("a").unwrap(),
            g.node("b").unwrap(),
            g.node("c").unwrap(),
        );
        assert_eq!(g.cross_edges(a), vec![(b, c)]);

        let g = p3();
        assert!(g.cross_edges(g.node("a").unwrap()).is_empty());

        let g = c5();
        for v in g.nodes() {
            let cross = g.cross_edges(v);
            assert_eq!(cross.len(), 1);
            let dist = g.distances_from(v);
            let (u, w) = cross[0];
            assert_eq!(dist[u.index()], 2);
            assert_eq!(dist[w.index()], 2);
        }
    }

    #[test]
    fn bipartition_examples() {
        let g = p3();
        let (even, odd) = g.bipartition().unwrap();
        assert_eq!(even.len(), 2); // {a, c}
        assert_eq!(odd.len(), 1); // {b}
        assert!(even.contains(&g.node("a").unwrap()));
        assert!(even.contains(&g.node("c").unwrap()));

        assert!(k3().bipartition().is_none());

        let c4 = Graph::from_edge_list("a b\nb c\nc d\nd a").unwrap();
        let (even, odd) = c4.bipartition().unwrap();
        assert_eq!(even.len(), 2);
        assert_eq!(odd.len(), 2);
    }

    #[test]
    fn bipartite_iff_no_cross_edges_anywhere() {
        // Exhaustive over all connected graphs with n <= 6, up to isomorphism.
        for n in 1..=6 {
            for g in Graph::connected_up_to_iso(n) {
                let no_cross = g.nodes().all(|v| g.cross_edges(v).is_empty());
                assert_eq!(g.is_bipartite(), no_cross, "n={n} edges={:?}", g.edges());
            }
        }
    }

    #[test]
    fn enumeration_counts_match_known_values() {
        // Connected graphs up to isomorphism: 1, 1, 2, 6, 21, 112.
        assert_eq!(Graph::connected_up_to_iso(1).len(), 1);
        assert_eq!(Graph::connected_up_to_iso(2).len(), 1);
        assert_eq!(Graph::connected_up_to_iso(3).len(), 2);
        assert_eq!(Graph::connected_up_to_iso(4).len(), 6);
        assert_eq!(Graph::connected_up_to_iso(5).len(), 21);
        assert_eq!(Graph::connected_up_to_iso(6).len(), 112);
    }

    #[test]
    fn random_connected_is_deterministic_and_connected() {
        let a = Graph::random_connected(7, 4, 42);
        let b = Graph::random_connected(7, 4, 42);
        assert_eq!(a.edges(), b.edges());
        assert_eq!(a.n(), 7);
        assert!(a.edge_count() >= 6);
    }

    #[test]
    fn distance_properties_hold() {
        use proptest::prelude::*;
        proptest!(|(n in 2usize..8, extra in 0usize..8, seed in 0u64..500)| {
            let g = Graph::random_connected(n, extra, seed);
            let tables: Vec<Vec<u32>> = g.nodes().map(|v| g.distances_from(v)).collect();
            for v in g.nodes() {
                for u in g.nodes() {
                    prop_assert_eq!(tables[v.index()][u.index()], tables[u.index()][v.index()]);
                    for w in g.nodes() {
                        prop_assert!(
                            tables[v.index()][u.index()]
                                <= tables[v.index()][w.index()] + tables[w.index()][u.index()]
                        );
                    }
                }
            }
            let diam = g.diameter();
            for v in g.nodes() {
                let ecc = g.eccentricity(v);
                prop_assert!(ecc <= diam && diam <= 2 * ecc);
            }
        });
    }
}

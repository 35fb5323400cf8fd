//! Undirected simple graphs with integer node identifiers.
//!
//! Identifiers double as the total order used by the protocol's guards
//! (`u < v` comparisons), so there is no separate rank map. Internally nodes
//! are addressed by their position in the sorted identifier list, and each
//! neighbor list is sorted as well, which lets registers be stored in a flat
//! per-node array indexed by neighbor slot.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type NodeId = u32;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: self-loop on node {node}")]
    SelfLoop { line: usize, node: NodeId },
    #[error("invalid graph size: {0}")]
    InvalidSize(String),
    #[error("gnp({n}, {p}): no graph without isolated nodes after {attempts} attempts")]
    IsolatedNodes { n: usize, p: f64, attempts: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Graph {
    ids: Vec<NodeId>,
    adj: Vec<Vec<NodeId>>,
    /// `rev[u][k]` is the slot of `u` inside the neighbor list of `adj[u][k]`.
    rev: Vec<Vec<usize>>,
}

/// Generator families for [`Graph::generate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GraphKind {
    Path { n: usize },
    Cycle { n: usize },
    Complete { n: usize },
    Star { n: usize },
    Gnp {
        n: usize,
        p: f64,
        seed: u64,
        #[serde(default)]
        no_isolated: bool,
    },
}

impl GraphKind {
    pub fn label(&self) -> String {
        match *self {
            GraphKind::Path { n } => format!("path({n})"),
            GraphKind::Cycle { n } => format!("cycle({n})"),
            GraphKind::Complete { n } => format!("complete({n})"),
            GraphKind::Star { n } => format!("star({n})"),
            GraphKind::Gnp { n, p, seed, .. } => format!("gnp({n},{p},seed={seed})"),
        }
    }
}

const GNP_MAX_ATTEMPTS: u32 = 1000;

impl Graph {
    /// Builds the symmetric closure of `edges`. Isolated nodes can be added
    /// through `extra_nodes`.
    pub fn from_edges<I>(edges: I, extra_nodes: &[NodeId]) -> Result<Self, GraphError>
    where
        I: IntoIterator<Item = (NodeId, NodeId)>,
    {
        let mut nodes: BTreeSet<NodeId> = extra_nodes.iter().copied().collect();
        let mut set = BTreeSet::new();
        for (i, (u, v)) in edges.into_iter().enumerate() {
            if u == v {
                return Err(GraphError::SelfLoop { line: i + 1, node: u });
            }
            nodes.insert(u);
            nodes.insert(v);
            set.insert((u, v));
            set.insert((v, u));
        }
        let ids: Vec<NodeId> = nodes.into_iter().collect();
        let mut adj = vec![Vec::new(); ids.len()];
        for (u, v) in set {
            let ui = ids.binary_search(&u).expect("endpoint registered");
            adj[ui].push(v);
        }
        let rev = adj
            .iter()
            .enumerate()
            .map(|(ui, ns)| {
                ns.iter()
                    .map(|v| {
                        let vi = ids.binary_search(v).expect("endpoint registered");
                        adj[vi].binary_search(&ids[ui]).expect("adjacency is symmetric")
                    })
                    .collect()
            })
            .collect();
        Ok(Graph { ids, adj, rev })
    }

    /// Parses the edge-list text format: one `u v` pair per line, `#` comments
    /// and blank lines ignored.
    pub fn from_edge_list(text: &str) -> Result<Self, GraphError> {
        let mut edges = Vec::new();
        let mut isolated = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse = |tok: &str| {
                tok.parse::<NodeId>().map_err(|_| GraphError::Parse {
                    line: i + 1,
                    msg: format!("`{tok}` is not a nonnegative integer"),
                })
            };
            let toks: Vec<&str> = line.split_whitespace().collect();
            match toks.as_slice() {
                [a, b] => {
                    let (u, v) = (parse(a)?, parse(b)?);
                    if u == v {
                        return Err(GraphError::SelfLoop { line: i + 1, node: u });
                    }
                    edges.push((u, v));
                }
                // A lone id declares an isolated node; `to_edge_list` emits these.
                [a] => isolated.push(parse(a)?),
                _ => {
                    return Err(GraphError::Parse {
                        line: i + 1,
                        msg: format!("expected two ids, got {} tokens", toks.len()),
                    })
                }
            }
        }
        Graph::from_edges(edges, &isolated)
    }

    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for (ui, &u) in self.ids.iter().enumerate() {
            if self.adj[ui].is_empty() {
                let _ = writeln!(out, "{u}");
            }
            for &v in &self.adj[ui] {
                if u < v {
                    let _ = writeln!(out, "{u} {v}");
                }
            }
        }
        out
    }

    pub fn generate(kind: GraphKind) -> Result<Self, GraphError> {
        let check_n = |n: usize| {
            if n < 2 {
                Err(GraphError::InvalidSize(format!("n = {n}, need n >= 2")))
            } else {
                Ok(n as NodeId)
            }
        };
        match kind {
            GraphKind::Path { n } => {
                let n = check_n(n)?;
                Graph::from_edges((1..n).map(|i| (i - 1, i)), &[])
            }
            GraphKind::Cycle { n } => {
                let n = check_n(n)?;
                if n < 3 {
                    return Err(GraphError::InvalidSize(format!(
                        "cycle needs n >= 3, got {n}"
                    )));
                }
                Graph::from_edges((0..n).map(|i| (i, (i + 1) % n)), &[])
            }
            GraphKind::Complete { n } => {
                let n = check_n(n)?;
                Graph::from_edges((0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))), &[])
            }
            GraphKind::Star { n } => {
                let n = check_n(n)?;
                Graph::from_edges((1..n).map(|i| (0, i)), &[])
            }
            GraphKind::Gnp {
                n,
                p,
                seed,
                no_isolated,
            } => {
                let n32 = check_n(n)?;
                if !(0.0..=1.0).contains(&p) {
                    return Err(GraphError::InvalidSize(format!("p = {p} outside [0, 1]")));
                }
                let nodes: Vec<NodeId> = (0..n32).collect();
                let attempts = if no_isolated { GNP_MAX_ATTEMPTS } else { 1 };
                for attempt in 0..attempts {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt as u64));
                    let mut edges = Vec::new();
                    for u in 0..n32 {
                        for v in u + 1..n32 {
                            if rng.random_bool(p) {
                                edges.push((u, v));
                            }
                        }
                    }
                    let g = Graph::from_edges(edges, &nodes)?;
                    if !no_isolated || g.adj.iter().all(|ns| !ns.is_empty()) {
                        return Ok(g);
                    }
                }
                Err(GraphError::IsolatedNodes { n, p, attempts })
            }
        }
    }

    pub fn node_count(&self) -> usize {
        self.ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Δ, the maximum degree; 0 when no node has a neighbor.
    pub fn max_degree(&self) -> usize {
        self.adj.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Node identifiers in increasing order.
    pub fn nodes(&self) -> &[NodeId] {
        &self.ids
    }

    pub fn contains(&self, u: NodeId) -> bool {
        self.index_of(u).is_some()
    }

    /// Sorted neighbors of `u`; empty if `u` is not a node.
    pub fn neighbors(&self, u: NodeId) -> &[NodeId] {
        self.index_of(u).map_or(&[], |i| &self.adj[i])
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.index_of(u)
            .is_some_and(|i| self.adj[i].binary_search(&v).is_ok())
    }

    /// Undirected edges as `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.ids.iter().enumerate().flat_map(move |(ui, &u)| {
            self.adj[ui]
                .iter()
                .filter(move |&&v| u < v)
                .map(move |&v| (u, v))
        })
    }

    /// Directed pairs `(u, v)` in lexicographic order, one per register.
    pub fn directed_edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.ids
            .iter()
            .enumerate()
            .flat_map(move |(ui, &u)| self.adj[ui].iter().map(move |&v| (u, v)))
    }

    pub(crate) fn index_of(&self, u: NodeId) -> Option<usize> {
        self.ids.binary_search(&u).ok()
    }

    pub(crate) fn id(&self, ui: usize) -> NodeId {
        self.ids[ui]
    }

    pub(crate) fn adj_at(&self, ui: usize) -> &[NodeId] {
        &self.adj[ui]
    }

    pub(crate) fn slot(&self, ui: usize, v: NodeId) -> Option<usize> {
        self.adj[ui].binary_search(&v).ok()
    }

    pub(crate) fn rev_slot(&self, ui: usize, k: usize) -> usize {
        self.rev[ui][k]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_path() {
        let g = Graph::from_edge_list("0 1\n1 2").unwrap();
        assert_eq!(g.nodes(), &[0, 1, 2]);
        assert_eq!(g.neighbors(1), &[0, 2]);
        assert_eq!(g.edge_count(), 2);
    }

    #[test]
    fn rejects_self_loop() {
        assert_eq!(
            Graph::from_edge_list("0 0"),
            Err(GraphError::SelfLoop { line: 1, node: 0 })
        );
    }

    #[test]
    fn deduplicates_reverse_edge() {
        let g = Graph::from_edge_list("0 1\n1 0").unwrap();
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.neighbors(0), &[1]);
        assert_eq!(g.neighbors(1), &[0]);
    }

    #[test]
    fn comments_and_malformed_lines() {
        let g = Graph::from_edge_list("# header\n\n3 7 \n  # trailing\n").unwrap();
        assert_eq!(g.nodes(), &[3, 7]);
        assert!(matches!(
            Graph::from_edge_list("0 1\n1 x"),
            Err(GraphError::Parse { line: 2, .. })
        ));
        assert!(matches!(
            Graph::from_edge_list("0 1 2"),
            Err(GraphError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            Graph::from_edge_list("-1 2"),
            Err(GraphError::Parse { .. })
        ));
    }

    #[test]
    fn generators() {
        let k4 = Graph::generate(GraphKind::Complete { n: 4 }).unwrap();
        assert_eq!(k4.max_degree(), 3);
        assert_eq!(k4.edge_count(), 6);

        let k2 = Graph::generate(GraphKind::Path { n: 2 }).unwrap();
        assert_eq!(k2.edges().collect::<Vec<_>>(), vec![(0, 1)]);
        assert_eq!(k2.max_degree(), 1);

        assert_eq!(
            Graph::generate(GraphKind::Star { n: 5 }).unwrap().max_degree(),
            4
        );
        assert_eq!(
            Graph::generate(GraphKind::Cycle { n: 6 }).unwrap().max_degree(),
            2
        );
        assert!(Graph::generate(GraphKind::Path { n: 1 }).is_err());
        assert!(Graph::generate(GraphKind::Cycle { n: 2 }).is_err());
        assert!(Graph::generate(GraphKind::Gnp {
            n: 4,
            p: 1.5,
            seed: 0,
            no_isolated: false
        })
        .is_err());
    }

    #[test]
    fn gnp_is_deterministic() {
        let kind = GraphKind::Gnp {
            n: 10,
            p: 0.3,
            seed: 7,
            no_isolated: false,
        };
        let a = Graph::generate(kind).unwrap();
        let b = Graph::generate(kind).unwrap();
        assert_eq!(a.edges().collect::<Vec<_>>(), b.edges().collect::<Vec<_>>());
        assert_eq!(a.node_count(), 10);
    }

    #[test]
    fn gnp_no_isolated_retries() {
        let g = Graph::generate(GraphKind::Gnp {
            n: 12,
            p: 0.2,
            seed: 3,
            no_isolated: true,
        })
        .unwrap();
        assert!(g.nodes().iter().all(|&u| !g.neighbors(u).is_empty()));
        assert!(matches!(
            Graph::generate(GraphKind::Gnp {
                n: 5,
                p: 0.0,
                seed: 0,
                no_isolated: true
            }),
            Err(GraphError::IsolatedNodes { .. })
        ));
    }

    #[test]
    fn empty_graph_degree() {
        let g = Graph::from_edges(std::iter::empty(), &[4]).unwrap();
        assert_eq!(g.max_degree(), 0);
        assert_eq!(g.to_edge_list(), "4\n");
    }

    fn arb_graph() -> impl Strategy<Value = Graph> {
        (
            proptest::collection::vec((0u32..12, 0u32..12), 0..30),
            proptest::collection::vec(0u32..20, 0..3),
        )
            .prop_map(|(edges, extra)| {
                let edges = edges.into_iter().filter(|(u, v)| u != v);
                Graph::from_edges(edges, &extra).unwrap()
            })
    }

    proptest! {
        #[test]
        fn symmetric_and_round_trips(g in arb_graph()) {
            for &u in g.nodes() {
                for &v in g.neighbors(u) {
                    prop_assert!(u != v);
                    prop_assert!(g.has_edge(v, u));
                }
            }
            let back = Graph::from_edge_list(&g.to_edge_list()).unwrap();
            prop_assert_eq!(back, g);
        }
    }
}

//! Fixed undirected interaction networks.
//!
//! Two generators are provided: Barabási–Albert preferential attachment
//! (scale-free) and Watts–Strogatz rewiring of a ring lattice
//! (small-world). Both return a [`Graph`], which is immutable once built.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type NodeId = usize;

/// Undirected, unweighted simple graph stored as sorted adjacency lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    adjacency: Vec<Vec<NodeId>>,
    n_edges: usize,
}

impl Graph {
    /// Builds a graph from an edge list. Self-loops, duplicates and
    /// out-of-range endpoints are rejected.
    pub fn from_edges(n_nodes: usize, edges: &[(NodeId, NodeId)]) -> Result<Self> {
        let mut sets = vec![BTreeSet::new(); n_nodes];
        for &(u, v) in edges {
            if u >= n_nodes || v >= n_nodes {
                return Err(Error::param(format!(
                    "edge ({u}, {v}) out of range for {n_nodes} nodes"
                )));
            }
            if u == v {
                return Err(Error::param(format!("self-loop on node {u}")));
            }
            if !sets[u].insert(v) {
                return Err(Error::param(format!("duplicate edge ({u}, {v})")));
            }
            sets[v].insert(u);
        }
        Ok(Self::from_sets(sets))
    }

    fn from_sets(sets: Vec<BTreeSet<NodeId>>) -> Self {
        let adjacency: Vec<Vec<NodeId>> = sets
            .into_iter()
            .map(|s| s.into_iter().collect())
            .collect();
        let n_edges = adjacency.iter().map(Vec::len).sum::<usize>() / 2;
        Graph { adjacency, n_edges }
    }

    pub fn n_nodes(&self) -> usize {
        self.adjacency.len()
    }

    pub fn n_edges(&self) -> usize {
        self.n_edges
    }

    /// Sorted neighbors of `i`. Panics if `i` is out of range.
    pub fn neighbors(&self, i: NodeId) -> &[NodeId] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: NodeId) -> Result<usize> {
        self.adjacency
            .get(i)
            .map(Vec::len)
            .ok_or_else(|| Error::param(format!("node {i} out of range ({})", self.n_nodes())))
    }

    pub fn has_edge(&self, i: NodeId, j: NodeId) -> bool {
        self.adjacency
            .get(i)
            .is_some_and(|adj| adj.binary_search(&j).is_ok())
    }

    /// Edges as `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(i, adj)| adj.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adjacency.iter().map(Vec::len).collect()
    }

    /// Edge-list text: a `N=<count>` header, then one `i j` pair per line.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("N={}\n", self.n_nodes());
        for (i, j) in self.edges() {
            let _ = writeln!(out, "{i} {j}");
        }
        out
    }

    pub fn read_edge_list<R: Read>(reader: R) -> Result<Self> {
        let mut lines = BufReader::new(reader).lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty edge list".into()))?
            .map_err(|e| Error::Parse(e.to_string()))?;
        let n_nodes: usize = header
            .trim()
            .strip_prefix("N=")
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse(format!("bad header line {header:?}")))?;
        let mut edges = Vec::new();
        for line in lines {
            let line = line.map_err(|e| Error::Parse(e.to_string()))?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut it = line.split_whitespace().map(str::parse::<NodeId>);
            match (it.next(), it.next(), it.next()) {
                (Some(Ok(i)), Some(Ok(j)), None) => edges.push((i, j)),
                _ => return Err(Error::Parse(format!("bad edge line {line:?}"))),
            }
        }
        Graph::from_edges(n_nodes, &edges)
    }
}

/// Network model and its parameters, as stored in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum GraphSpec {
    /// Barabási–Albert (scale-free).
    ScaleFree { n_nodes: usize, m: usize },
    /// Watts–Strogatz (small-world).
    SmallWorld {
        n_nodes: usize,
        m: usize,
        p_rewire: f64,
    },
}

impl GraphSpec {
    pub fn generate<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Graph> {
        match *self {
            GraphSpec::ScaleFree { n_nodes, m } => generate_barabasi_albert(n_nodes, m, rng),
            GraphSpec::SmallWorld {
                n_nodes,
                m,
                p_rewire,
            } => generate_watts_strogatz(n_nodes, m, p_rewire, rng),
        }
    }

    pub fn n_nodes(&self) -> usize {
        match *self {
            GraphSpec::ScaleFree { n_nodes, .. } | GraphSpec::SmallWorld { n_nodes, .. } => n_nodes,
        }
    }
}

/// Preferential attachment starting from a single edge `{0, 1}`.
///
/// Node `v` attaches to `min(m, v)` distinct existing nodes, drawn without
/// replacement with probability proportional to their degree at the start
/// of `v`'s step.
pub fn generate_barabasi_albert<R: Rng + ?Sized>(
    n_nodes: usize,
    m: usize,
    rng: &mut R,
) -> Result<Graph> {
    if n_nodes < 2 {
        return Err(Error::param(format!("BA needs n_nodes >= 2, got {n_nodes}")));
    }
    if m < 1 || m >= n_nodes {
        return Err(Error::param(format!(
            "BA needs 1 <= m <= n_nodes - 1, got m={m} with n_nodes={n_nodes}"
        )));
    }
    let mut sets = vec![BTreeSet::new(); n_nodes];
    sets[0].insert(1);
    sets[1].insert(0);
    let mut degree = vec![0usize; n_nodes];
    degree[0] = 1;
    degree[1] = 1;

    let mut weights: Vec<usize> = Vec::with_capacity(n_nodes);
    let mut targets: Vec<NodeId> = Vec::with_capacity(m);
    for v in 2..n_nodes {
        let k = m.min(v);
        weights.clear();
        weights.extend_from_slice(&degree[..v]);
        let mut total: usize = weights.iter().sum();
        targets.clear();
        for _ in 0..k {
            let mut ticket = rng.gen_range(0..total);
            let mut chosen = v;
            for (u, &w) in weights.iter().enumerate() {
                if ticket < w {
                    chosen = u;
                    break;
                }
                ticket -= w;
            }
            debug_assert!(chosen < v);
            total -= weights[chosen];
            weights[chosen] = 0;
            targets.push(chosen);
        }
        for &u in &targets {
            sets[v].insert(u);
            sets[u].insert(v);
            degree[u] += 1;
        }
        degree[v] = k;
    }
    Ok(Graph::from_sets(sets))
}

/// Ring lattice with `m / 2` neighbors per side, then each lattice edge
/// `(i, i + j)` is rewired with probability `p_rewire`: `i` is kept and the
/// far endpoint is replaced by a uniformly drawn node, redrawing on
/// self-loops and duplicates.
pub fn generate_watts_strogatz<R: Rng + ?Sized>(
    n_nodes: usize,
    m: usize,
    p_rewire: f64,
    rng: &mut R,
) -> Result<Graph> {
    if !m.is_multiple_of(2) {
        return Err(Error::param(format!("WS needs an even m, got {m}")));
    }
    if m < 2 || m >= n_nodes {
        return Err(Error::param(format!(
            "WS needs 2 <= m < n_nodes, got m={m} with n_nodes={n_nodes}"
        )));
    }
    if !(0.0..=1.0).contains(&p_rewire) {
        return Err(Error::param(format!("p_rewire must be in [0, 1], got {p_rewire}")));
    }
    let mut sets = vec![BTreeSet::new(); n_nodes];
    for i in 0..n_nodes {
        for j in 1..=m / 2 {
            let k = (i + j) % n_nodes;
            sets[i].insert(k);
            sets[k].insert(i);
        }
    }
    for j in 1..=m / 2 {
        for i in 0..n_nodes {
            let far = (i + j) % n_nodes;
            if !rng.gen_bool(p_rewire) {
                continue;
            }
            // Node already linked to everyone: nowhere to go.
            if sets[i].len() >= n_nodes - 1 {
                continue;
            }
            let target = loop {
                let w = rng.gen_range(0..n_nodes);
                if w != i && !sets[i].contains(&w) {
                    break w;
                }
            };
            let removed = sets[i].remove(&far);
            debug_assert!(removed, "lattice edge ({i}, {far}) already gone");
            sets[far].remove(&i);
            sets[i].insert(target);
            sets[target].insert(i);
        }
    }
    Ok(Graph::from_sets(sets))
}

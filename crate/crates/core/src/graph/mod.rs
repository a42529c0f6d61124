//! Undirected simple graphs, generators and exact combinatorial oracles.

mod generate;
pub mod io;
mod iso;
mod pairs;
mod wl;

pub use generate::{generate, GeneratorKind, GeneratorSpec};
pub use iso::{are_isomorphic, MAX_ISO_NODES};
pub use pairs::{generate_pair_family, GraphPair, PairFamily};
pub use wl::{same_wl_histogram, wl_refine, wl_refine_joint, WlColoring};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::diffmath::Tensor;
use crate::error::{Error, Result};

/// Undirected simple graph on nodes `0..n` with optional node features.
///
/// Edges are stored once as `(u, v)` with `u < v`, in sorted order.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
    features: Option<Tensor>,
}

impl Graph {
    /// Builds a graph, canonicalizing edge orientation. Self-loops,
    /// duplicates and out-of-range endpoints are rejected.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGraph("graph needs at least one node".into()));
        }
        let mut canon: Vec<(usize, usize)> = Vec::new();
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge ({u},{v}) out of range for {n} nodes"
                )));
            }
            if u == v {
                return Err(Error::InvalidGraph(format!("self-loop at node {u}")));
            }
            canon.push((u.min(v), u.max(v)));
        }
        canon.sort_unstable();
        if let Some(w) = canon.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidGraph(format!("duplicate edge ({},{})", w[0].0, w[0].1)));
        }
        Ok(Self::from_canonical(n, canon))
    }

    /// Like [`Graph::new`] but silently drops duplicate edges.
    pub(crate) fn from_edge_set(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut canon: Vec<(usize, usize)> = edges.into_iter().map(|(u, v)| (u.min(v), u.max(v))).collect();
        canon.sort_unstable();
        canon.dedup();
        debug_assert!(canon.iter().all(|&(u, v)| u < v && v < n));
        Self::from_canonical(n, canon)
    }

    fn from_canonical(n: usize, edges: Vec<(usize, usize)>) -> Self {
        let mut adjacency = vec![Vec::new(); n];
        for &(u, v) in &edges {
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Graph {
            n,
            edges,
            adjacency,
            features: None,
        }
    }

    pub fn with_features(mut self, features: Tensor) -> Result<Self> {
        if features.rows() != self.n {
            return Err(Error::InvalidGraph(format!(
                "feature matrix has {} rows for {} nodes",
                features.rows(),
                self.n
            )));
        }
        self.features = Some(features);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn features(&self) -> Option<&Tensor> {
        self.features.as_ref()
    }

    /// Input feature width; 1 when the graph carries no features (constant column).
    pub fn feature_dim(&self) -> usize {
        self.features.as_ref().map_or(1, Tensor::cols)
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.n && self.adjacency[u].binary_search(&v).is_ok()
    }

    /// Relabels node `i` as `perm[i]`.
    pub fn permute(&self, perm: &[usize]) -> Graph {
        assert!(is_permutation(perm, self.n), "not a permutation of 0..n");
        let mut g = Self::from_edge_set(self.n, self.edges.iter().map(|&(u, v)| (perm[u], perm[v])));
        g.features = self.features.as_ref().map(|f| f.permute_rows(perm));
        g
    }

    /// Applies a uniformly random relabeling and returns it with the permutation.
    pub fn shuffled(&self, rng: &mut impl Rng) -> (Graph, Vec<usize>) {
        let perm = random_permutation(self.n, rng);
        (self.permute(&perm), perm)
    }

    /// Disjoint union; nodes of `other` are shifted by `self.n()`.
    pub fn disjoint_union(&self, other: &Graph) -> Graph {
        let off = self.n;
        let edges = self
            .edges
            .iter()
            .copied()
            .chain(other.edges.iter().map(|&(u, v)| (u + off, v + off)));
        Self::from_edge_set(self.n + other.n, edges)
    }

    /// Breadth-first distances from `source`; `usize::MAX` when unreachable.
    pub fn distances_from(&self, source: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.n];
        let mut queue = std::collections::VecDeque::from([source]);
        dist[source] = 0;
        while let Some(u) = queue.pop_front() {
            for &w in &self.adjacency[u] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    pub fn is_connected(&self) -> bool {
        self.distances_from(0).iter().all(|&d| d != usize::MAX)
    }
}

pub fn random_permutation(n: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    perm
}

fn is_permutation(perm: &[usize], n: usize) -> bool {
    let mut seen = vec![false; n];
    perm.len() == n && perm.iter().all(|&p| p < n && !std::mem::replace(&mut seen[p], true))
}

/// Per-node boolean labels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeLabeling {
    pub labels: Vec<bool>,
}

impl NodeLabeling {
    pub fn count_true(&self) -> usize {
        self.labels.iter().filter(|&&b| b).count()
    }

    pub fn as_targets(&self) -> Vec<usize> {
        self.labels.iter().map(|&b| usize::from(b)).collect()
    }
}

/// Marks every node lying on a triangle, by checking each pair of neighbors.
pub fn label_triangles(g: &Graph) -> NodeLabeling {
    let labels = (0..g.n())
        .map(|v| {
            let nb = g.neighbors(v);
            nb.iter()
                .enumerate()
                .any(|(i, &u)| nb[i + 1..].iter().any(|&w| g.has_edge(u, w)))
        })
        .collect();
    NodeLabeling { labels }
}

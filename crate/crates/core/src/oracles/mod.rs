//! Symbolic identifier-matching constructions: a three-layer triangle
//! detector whose hidden states depend on identifier values but whose
//! output does not, and canonical relabeling through an equality oracle.

pub mod suite;

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeLabeling};

/// Distinct per-node identifiers.
#[derive(Clone, Debug, PartialEq)]
pub struct UidAssignment {
    values: Vec<f64>,
}

impl UidAssignment {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        check_distinct(&values)?;
        Ok(UidAssignment { values })
    }

    /// `n` distinct uniform draws from `[0, 1)`.
    pub fn random(n: usize, rng: &mut impl Rng) -> Self {
        let mut values: Vec<f64> = Vec::with_capacity(n);
        while values.len() < n {
            let x: f64 = rng.random();
            if !values.contains(&x) {
                values.push(x);
            }
        }
        UidAssignment { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Pairwise distinctness using equality only.
fn check_distinct<T: PartialEq>(values: &[T]) -> Result<()> {
    for (i, a) in values.iter().enumerate() {
        if let Some(j) = values[i + 1..].iter().position(|b| a == b) {
            return Err(Error::DuplicateUid {
                first: i,
                second: i + 1 + j,
            });
        }
    }
    Ok(())
}

fn check_len(g: &Graph, uids: usize) -> Result<()> {
    if uids != g.n() {
        return Err(Error::dim(
            "uid_assignment",
            format!("{uids} identifiers for {} nodes", g.n()),
        ));
    }
    Ok(())
}

/// Hidden state of the first two layers: the node's own identifier
/// followed by its neighbors' identifiers in adjacency order.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeState<T> {
    pub own: T,
    pub neighbors: Vec<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TriangleTrace<T> {
    pub layer1: Vec<NodeState<T>>,
    pub layer2: Vec<NodeState<T>>,
    pub output: NodeLabeling,
}

/// Runs the three-layer construction. Layers one and two write
/// `(own id, neighbor ids)`; in layer three node `v` receives every
/// neighbor's layer-two state and answers whether some neighbor's id occurs
/// in a different neighbor's list, i.e. whether two neighbors of `v` are
/// adjacent. Identifiers are only ever compared for equality.
pub fn triangle_net_trace<T: PartialEq + Clone>(g: &Graph, uids: &[T]) -> Result<TriangleTrace<T>> {
    check_len(g, uids.len())?;
    check_distinct(uids)?;
    let layer = |h: &[T]| -> Vec<NodeState<T>> {
        (0..g.n())
            .map(|v| NodeState {
                own: h[v].clone(),
                neighbors: g.neighbors(v).iter().map(|&u| h[u].clone()).collect(),
            })
            .collect()
    };
    let layer1 = layer(uids);
    // The message of layer two is again position 0 of the state.
    let messages: Vec<T> = layer1.iter().map(|s| s.own.clone()).collect();
    let layer2 = layer(&messages);
    let labels = (0..g.n())
        .map(|v| {
            let received: Vec<&NodeState<T>> = g.neighbors(v).iter().map(|&u| &layer2[u]).collect();
            received
                .iter()
                .any(|a| received.iter().any(|b| a.own != b.own && a.neighbors.contains(&b.own)))
        })
        .collect();
    Ok(TriangleTrace {
        layer1,
        layer2,
        output: NodeLabeling { labels },
    })
}

pub fn triangle_net_forward(g: &Graph, uids: &UidAssignment) -> Result<NodeLabeling> {
    Ok(triangle_net_trace(g, uids.values())?.output)
}

/// Identifiers seen so far with their assigned values `1..=len`.
#[derive(Clone, Debug)]
pub struct RelabelCache<T> {
    seen: Vec<T>,
    queries: usize,
}

impl<T: PartialEq + Clone> Default for RelabelCache<T> {
    fn default() -> Self {
        RelabelCache {
            seen: Vec::new(),
            queries: 0,
        }
    }
}

impl<T: PartialEq + Clone> RelabelCache<T> {
    /// Matches `x` against each cached entry with the equality oracle;
    /// unseen identifiers get `size + 1`.
    pub fn value_of(&mut self, x: &T) -> usize {
        for (i, y) in self.seen.iter().enumerate() {
            self.queries += 1;
            if oracle(x, y) {
                return i + 1;
            }
        }
        self.seen.push(x.clone());
        self.seen.len()
    }

    pub fn len(&self) -> usize {
        self.seen.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seen.is_empty()
    }

    /// Oracle calls made so far.
    pub fn queries(&self) -> usize {
        self.queries
    }
}

/// `o(u, v)`: whether two references denote the same node.
fn oracle<T: PartialEq>(a: &T, b: &T) -> bool {
    a == b
}

/// Order in which nodes are presented to the cache.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum VisitOrder {
    #[default]
    NodeIndex,
    /// Breadth-first from the lowest unvisited index, neighbors ascending.
    BreadthFirst,
}

fn visit_sequence(g: &Graph, order: VisitOrder) -> Vec<usize> {
    match order {
        VisitOrder::NodeIndex => (0..g.n()).collect(),
        VisitOrder::BreadthFirst => {
            let mut seen = vec![false; g.n()];
            let mut out = Vec::with_capacity(g.n());
            for s in 0..g.n() {
                if seen[s] {
                    continue;
                }
                seen[s] = true;
                let start = out.len();
                out.push(s);
                let mut head = start;
                while head < out.len() {
                    let v = out[head];
                    head += 1;
                    for &u in g.neighbors(v) {
                        if !seen[u] {
                            seen[u] = true;
                            out.push(u);
                        }
                    }
                }
            }
            out
        }
    }
}

/// Canonical integer identifiers `1..=n`, assigned in visit order through
/// a [`RelabelCache`]. Depends only on which identifiers are equal, never
/// on their values.
pub fn matching_oracle_relabel<T: PartialEq + Clone>(g: &Graph, uids: &[T], order: VisitOrder) -> Result<Vec<usize>> {
    check_len(g, uids.len())?;
    check_distinct(uids)?;
    let mut cache = RelabelCache::default();
    let mut out = vec![0; g.n()];
    for v in visit_sequence(g, order) {
        out[v] = cache.value_of(&uids[v]);
    }
    Ok(out)
}

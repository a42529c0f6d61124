//! Exact isomorphism test by backtracking over WL-color-compatible mappings.

use super::{wl_refine_joint, Graph};
use crate::error::{Error, Result};

pub const MAX_ISO_NODES: usize = 64;

/// True iff an edge-preserving bijection between `a` and `b` exists.
///
/// Candidates are pruned by joint 1-WL colors and adjacency consistency with
/// every previously mapped node; the search is otherwise exhaustive.
pub fn are_isomorphic(a: &Graph, b: &Graph) -> Result<bool> {
    for g in [a, b] {
        if g.n() > MAX_ISO_NODES {
            return Err(Error::Capacity {
                what: "isomorphism search",
                n: g.n(),
                limit: MAX_ISO_NODES,
            });
        }
    }
    if a.n() != b.n() || a.num_edges() != b.num_edges() {
        return Ok(false);
    }
    let colors = wl_refine_joint(&[a, b]);
    if colors[0].histogram != colors[1].histogram {
        return Ok(false);
    }
    // Initial colors encode feature rows, so color-respecting maps also match features.
    let n = a.n();
    let adj_a = bitsets(a);
    let adj_b = bitsets(b);
    let order = search_order(a);
    let mut search = Search {
        adj_a: &adj_a,
        adj_b: &adj_b,
        color_a: &colors[0].colors,
        color_b: &colors[1].colors,
        order: &order,
        map: vec![usize::MAX; n],
        used: 0,
    };
    Ok(search.extend(0))
}

fn bitsets(g: &Graph) -> Vec<u64> {
    (0..g.n())
        .map(|v| g.neighbors(v).iter().fold(0u64, |m, &w| m | (1 << w)))
        .collect()
}

/// Connectivity-first order: each next node has the most already-ordered neighbors.
fn search_order(g: &Graph) -> Vec<usize> {
    let n = g.n();
    let mut placed = vec![false; n];
    let mut links = vec![0usize; n];
    let mut order = Vec::with_capacity(n);
    for _ in 0..n {
        let next = (0..n)
            .filter(|&v| !placed[v])
            .max_by_key(|&v| (links[v], g.degree(v), std::cmp::Reverse(v)))
            .expect("unplaced node remains");
        placed[next] = true;
        order.push(next);
        for &w in g.neighbors(next) {
            links[w] += 1;
        }
    }
    order
}

struct Search<'a> {
    adj_a: &'a [u64],
    adj_b: &'a [u64],
    color_a: &'a [usize],
    color_b: &'a [usize],
    order: &'a [usize],
    map: Vec<usize>,
    used: u64,
}

impl Search<'_> {
    fn extend(&mut self, depth: usize) -> bool {
        if depth == self.order.len() {
            return true;
        }
        let u = self.order[depth];
        for cand in 0..self.adj_b.len() {
            if self.used & (1 << cand) != 0 || self.color_b[cand] != self.color_a[u] {
                continue;
            }
            let consistent = self.order[..depth].iter().all(|&p| {
                let in_a = self.adj_a[u] & (1 << p) != 0;
                let in_b = self.adj_b[cand] & (1 << self.map[p]) != 0;
                in_a == in_b
            });
            if !consistent {
                continue;
            }
            self.map[u] = cand;
            self.used |= 1 << cand;
            if self.extend(depth + 1) {
                return true;
            }
            self.used &= !(1 << cand);
            self.map[u] = usize::MAX;
        }
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate, GeneratorSpec};
    use proptest::prelude::*;

    #[test]
    fn one_wl_hard_pairs_are_not_isomorphic() {
        let c6 = generate(&GeneratorSpec::cycle(6)).unwrap();
        let c33 = generate(&GeneratorSpec::disjoint_cycles(3, 3)).unwrap();
        assert!(!are_isomorphic(&c6, &c33).unwrap());
        let s = generate(&GeneratorSpec::shrikhande()).unwrap();
        let r = generate(&GeneratorSpec::rook_4x4()).unwrap();
        assert!(!are_isomorphic(&s, &r).unwrap());
        assert!(are_isomorphic(&s, &s).unwrap());
    }

    #[test]
    fn isomorphic_csl_skips_are_recognized() {
        // 2 * 6 = 12 = 1 (mod 11) maps skip set {1,2} onto {6,1} = {±5, ±1}.
        let a = generate(&GeneratorSpec::circular_skip_link(11, 2)).unwrap();
        let b = generate(&GeneratorSpec::circular_skip_link(11, 5)).unwrap();
        let c = generate(&GeneratorSpec::circular_skip_link(11, 3)).unwrap();
        assert!(are_isomorphic(&a, &b).unwrap());
        assert!(!are_isomorphic(&a, &c).unwrap());
    }

    #[test]
    fn oversized_graphs_are_refused() {
        let g = generate(&GeneratorSpec::cycle(65)).unwrap();
        assert!(matches!(
            are_isomorphic(&g, &g),
            Err(Error::Capacity { n: 65, limit: 64, .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn permuted_copies_are_isomorphic_and_symmetric(seed in any::<u64>(), n in 5usize..40) {
            let g = generate(&GeneratorSpec::barabasi_albert(n, 2, seed)).unwrap();
            let mut rng = crate::seed::rng(seed);
            let (h, _) = g.shuffled(&mut rng);
            prop_assert!(are_isomorphic(&g, &h).unwrap());
            prop_assert!(are_isomorphic(&h, &g).unwrap());
            let other = generate(&GeneratorSpec::barabasi_albert(n, 2, seed.wrapping_add(1))).unwrap();
            prop_assert_eq!(are_isomorphic(&g, &other).unwrap(), are_isomorphic(&other, &g).unwrap());
            if !crate::graph::same_wl_histogram(&g, &other) {
                prop_assert!(!are_isomorphic(&g, &other).unwrap());
            }
        }
    }
}

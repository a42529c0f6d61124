//! 1-WL color refinement.
//!
//! Each round replaces a node's color by the rank of its signature
//! `(color, sorted neighbor colors)` among all distinct signatures, so colors
//! are canonical: they depend only on the signatures, never on node order
//! or hashing.

use std::collections::BTreeMap;

use super::Graph;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WlColoring {
    pub colors: Vec<usize>,
    pub rounds_to_stability: usize,
    /// `(color, count)` sorted by color.
    pub histogram: Vec<(usize, usize)>,
}

impl WlColoring {
    pub fn num_colors(&self) -> usize {
        self.histogram.len()
    }
}

/// Refines `g` alone until its partition is stable.
pub fn wl_refine(g: &Graph) -> WlColoring {
    wl_refine_joint(&[g]).pop().expect("one graph in, one coloring out")
}

/// Refines several graphs with a shared color space, so their histograms
/// are directly comparable.
pub fn wl_refine_joint(graphs: &[&Graph]) -> Vec<WlColoring> {
    let mut offsets = Vec::with_capacity(graphs.len());
    let mut total = 0;
    for g in graphs {
        offsets.push(total);
        total += g.n();
    }
    let neighbors = |global: usize| -> Vec<usize> {
        let gi = offsets.partition_point(|&o| o <= global) - 1;
        let off = offsets[gi];
        graphs[gi].neighbors(global - off).iter().map(|&w| w + off).collect()
    };
    let adjacency: Vec<Vec<usize>> = (0..total).map(neighbors).collect();

    let mut colors = initial_colors(graphs);
    let mut distinct = count_distinct(&colors);
    let mut rounds = 0;
    loop {
        let signatures: Vec<(usize, Vec<usize>)> = (0..total)
            .map(|v| {
                let mut nb: Vec<usize> = adjacency[v].iter().map(|&w| colors[w]).collect();
                nb.sort_unstable();
                (colors[v], nb)
            })
            .collect();
        let mut table: Vec<&(usize, Vec<usize>)> = signatures.iter().collect();
        table.sort();
        table.dedup();
        let next: Vec<usize> = signatures
            .iter()
            .map(|s| table.binary_search(&s).expect("signature present"))
            .collect();
        let next_distinct = table.len();
        colors = next;
        if next_distinct == distinct {
            break;
        }
        distinct = next_distinct;
        rounds += 1;
    }

    graphs
        .iter()
        .zip(&offsets)
        .map(|(g, &off)| {
            let own = colors[off..off + g.n()].to_vec();
            let mut hist = BTreeMap::new();
            for &c in &own {
                *hist.entry(c).or_insert(0) += 1;
            }
            WlColoring {
                colors: own,
                rounds_to_stability: rounds,
                histogram: hist.into_iter().collect(),
            }
        })
        .collect()
}

/// True when the two graphs have equal 1-WL color histograms.
pub fn same_wl_histogram(a: &Graph, b: &Graph) -> bool {
    let c = wl_refine_joint(&[a, b]);
    c[0].histogram == c[1].histogram
}

fn initial_colors(graphs: &[&Graph]) -> Vec<usize> {
    // Feature rows ranked by their bit patterns; featureless nodes share color 0.
    let keys: Vec<Vec<u64>> = graphs
        .iter()
        .flat_map(|g| {
            (0..g.n()).map(move |v| match g.features() {
                Some(f) => f.row(v).iter().map(|x| x.to_bits()).collect(),
                None => Vec::new(),
            })
        })
        .collect();
    let mut table: Vec<&Vec<u64>> = keys.iter().collect();
    table.sort();
    table.dedup();
    keys.iter()
        .map(|k| table.binary_search(&k).expect("key present"))
        .collect()
}

fn count_distinct(colors: &[usize]) -> usize {
    let mut c = colors.to_vec();
    c.sort_unstable();
    c.dedup();
    c.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate, GeneratorSpec};
    use proptest::prelude::*;

    #[test]
    fn regular_pairs_are_wl_uniform() {
        let c6 = generate(&GeneratorSpec::cycle(6)).unwrap();
        let c33 = generate(&GeneratorSpec::disjoint_cycles(3, 3)).unwrap();
        let col = wl_refine_joint(&[&c6, &c33]);
        assert_eq!(col[0].histogram, vec![(0, 6)]);
        assert_eq!(col[0].histogram, col[1].histogram);

        let s = generate(&GeneratorSpec::shrikhande()).unwrap();
        let r = generate(&GeneratorSpec::rook_4x4()).unwrap();
        let col = wl_refine_joint(&[&s, &r]);
        assert_eq!(col[0].histogram, vec![(0, 16)]);
        assert_eq!(col[1].histogram, vec![(0, 16)]);
        assert!(same_wl_histogram(&s, &r));
    }

    #[test]
    fn path_separates_endpoints_from_center() {
        let p3 = Graph::new(3, [(0, 1), (1, 2)]).unwrap();
        let c = wl_refine(&p3);
        assert_eq!(c.num_colors(), 2);
        assert_eq!(c.colors[0], c.colors[2]);
        assert_ne!(c.colors[0], c.colors[1]);
        assert_eq!(c.rounds_to_stability, 1);
    }

    #[test]
    fn one_more_round_is_a_fixpoint() {
        let g = generate(&GeneratorSpec::barabasi_albert(30, 2, 4)).unwrap();
        let c = wl_refine(&g);
        let mut sigs: Vec<(usize, Vec<usize>)> = (0..g.n())
            .map(|v| {
                let mut nb: Vec<usize> = g.neighbors(v).iter().map(|&w| c.colors[w]).collect();
                nb.sort_unstable();
                (c.colors[v], nb)
            })
            .collect();
        sigs.sort();
        sigs.dedup();
        assert_eq!(sigs.len(), c.num_colors());
    }

    proptest! {
        #[test]
        fn refinement_is_permutation_equivariant(seed in any::<u64>()) {
            let g = generate(&GeneratorSpec::barabasi_albert(25, 2, seed)).unwrap();
            let mut rng = crate::seed::rng(seed ^ 1);
            let (h, perm) = g.shuffled(&mut rng);
            let cg = wl_refine(&g);
            let ch = wl_refine(&h);
            prop_assert_eq!(&cg.histogram, &ch.histogram);
            for (v, &pv) in perm.iter().enumerate() {
                prop_assert_eq!(cg.colors[v], ch.colors[pv]);
            }
        }
    }
}

//! Verified families of 1-WL-indistinguishable, non-isomorphic graph pairs.

use std::fmt;
use std::str::FromStr;

use super::{are_isomorphic, generate, same_wl_histogram, GeneratorSpec, Graph};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PairFamily {
    /// A cycle against two disjoint cycles of the same total length.
    Wl1HardBasic,
    /// Regular graphs: Shrikhande vs 4x4 rook, then prisms vs Möbius ladders.
    Wl1HardRegular,
    /// Circular skip link graphs with different skips.
    Csl,
}

impl PairFamily {
    pub const ALL: [PairFamily; 3] = [PairFamily::Wl1HardBasic, PairFamily::Wl1HardRegular, PairFamily::Csl];

    pub fn name(self) -> &'static str {
        match self {
            PairFamily::Wl1HardBasic => "wl1-hard-basic",
            PairFamily::Wl1HardRegular => "wl1-hard-regular",
            PairFamily::Csl => "csl",
        }
    }
}

impl fmt::Display for PairFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PairFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::UnknownFamily(s.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GraphPair {
    pub family: PairFamily,
    pub id: usize,
    pub description: String,
    pub first: Graph,
    pub second: Graph,
    pub isomorphic: bool,
}

/// Returns the first `count` pairs of `family`, each relabeled by a random
/// permutation drawn from `seed`. Every pair is checked to have identical
/// 1-WL histograms and to be non-isomorphic; candidates failing the check
/// are skipped.
pub fn generate_pair_family(family: PairFamily, count: usize, seed: u64) -> Result<Vec<GraphPair>> {
    let mut out = Vec::with_capacity(count);
    let mut candidates = candidates(family);
    while out.len() < count {
        let (description, first, second) = candidates.next().expect("candidate streams are unbounded");
        if !same_wl_histogram(&first, &second) || are_isomorphic(&first, &second)? {
            continue;
        }
        let id = out.len();
        let mut rng = seed::rng(seed::derive_index(seed::derive(seed, family.name()), id as u64));
        let (first, _) = first.shuffled(&mut rng);
        let (second, _) = second.shuffled(&mut rng);
        out.push(GraphPair {
            family,
            id,
            description,
            first,
            second,
            isomorphic: false,
        });
    }
    Ok(out)
}

type Candidate = (String, Graph, Graph);

fn candidates(family: PairFamily) -> Box<dyn Iterator<Item = Candidate>> {
    match family {
        PairFamily::Wl1HardBasic => Box::new((6usize..).flat_map(|n| {
            (3..=n / 2).map(move |a| {
                (
                    format!("C{n} vs C{a}+C{}", n - a),
                    generate(&GeneratorSpec::cycle(n)).unwrap(),
                    generate(&GeneratorSpec::disjoint_cycles(a, n - a)).unwrap(),
                )
            })
        })),
        PairFamily::Wl1HardRegular => {
            let srg = std::iter::once((
                "shrikhande vs rook-4x4".to_string(),
                generate(&GeneratorSpec::shrikhande()).unwrap(),
                generate(&GeneratorSpec::rook_4x4()).unwrap(),
            ));
            let ladders = (3usize..).map(|k| (format!("prism{k} vs moebius{}", 2 * k), prism(k), moebius_ladder(k)));
            Box::new(srg.chain(ladders))
        }
        PairFamily::Csl => Box::new((11usize..).step_by(2).flat_map(|n| {
            // Skips below n/2 keep both graphs 4-regular.
            let max = (n - 1) / 2;
            (2..=max).flat_map(move |s1| {
                (s1 + 1..=max).map(move |s2| {
                    (
                        format!("csl{n} skip {s1} vs {s2}"),
                        generate(&GeneratorSpec::circular_skip_link(n, s1)).unwrap(),
                        generate(&GeneratorSpec::circular_skip_link(n, s2)).unwrap(),
                    )
                })
            })
        })),
    }
}

/// `C_k x K_2`.
fn prism(k: usize) -> Graph {
    let ring = |off: usize| (0..k).map(move |i| (off + i, off + (i + 1) % k));
    let rungs = (0..k).map(|i| (i, k + i));
    Graph::from_edge_set(2 * k, ring(0).chain(ring(k)).chain(rungs))
}

/// `C_{2k}` plus the `k` long diagonals.
fn moebius_ladder(k: usize) -> Graph {
    let n = 2 * k;
    let ring = (0..n).map(|i| (i, (i + 1) % n));
    let diagonals = (0..k).map(|i| (i, i + k));
    Graph::from_edge_set(n, ring.chain(diagonals))
}

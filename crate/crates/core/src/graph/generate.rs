use std::fmt;
use std::str::FromStr;

use rand::Rng;

use super::Graph;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GeneratorKind {
    BarabasiAlbert,
    Cycle,
    /// Two disjoint cycles of lengths `m` and `n - m`.
    DisjointCycles,
    CircularSkipLink,
    Shrikhande,
    Rook4x4,
    Complete,
}

impl GeneratorKind {
    pub const ALL: [GeneratorKind; 7] = [
        GeneratorKind::BarabasiAlbert,
        GeneratorKind::Cycle,
        GeneratorKind::DisjointCycles,
        GeneratorKind::CircularSkipLink,
        GeneratorKind::Shrikhande,
        GeneratorKind::Rook4x4,
        GeneratorKind::Complete,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GeneratorKind::BarabasiAlbert => "barabasi-albert",
            GeneratorKind::Cycle => "cycle",
            GeneratorKind::DisjointCycles => "disjoint-cycles",
            GeneratorKind::CircularSkipLink => "circular-skip-link",
            GeneratorKind::Shrikhande => "shrikhande",
            GeneratorKind::Rook4x4 => "rook-4x4",
            GeneratorKind::Complete => "complete",
        }
    }
}

impl fmt::Display for GeneratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GeneratorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::param("kind", format!("unknown generator `{s}`")))
    }
}

/// Parameters for [`generate`]. `m` is only read by the BA and
/// disjoint-cycles generators, `skip` only by circular skip links.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    pub n: usize,
    pub m: usize,
    pub skip: usize,
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn new(kind: GeneratorKind, n: usize) -> Self {
        GeneratorSpec {
            kind,
            n,
            m: 0,
            skip: 0,
            seed: 0,
        }
    }

    pub fn barabasi_albert(n: usize, m: usize, seed: u64) -> Self {
        GeneratorSpec {
            m,
            seed,
            ..Self::new(GeneratorKind::BarabasiAlbert, n)
        }
    }

    pub fn cycle(n: usize) -> Self {
        Self::new(GeneratorKind::Cycle, n)
    }

    pub fn disjoint_cycles(first: usize, second: usize) -> Self {
        GeneratorSpec {
            m: first,
            ..Self::new(GeneratorKind::DisjointCycles, first + second)
        }
    }

    pub fn circular_skip_link(n: usize, skip: usize) -> Self {
        GeneratorSpec {
            skip,
            ..Self::new(GeneratorKind::CircularSkipLink, n)
        }
    }

    pub fn shrikhande() -> Self {
        Self::new(GeneratorKind::Shrikhande, 16)
    }

    pub fn rook_4x4() -> Self {
        Self::new(GeneratorKind::Rook4x4, 16)
    }

    pub fn complete(n: usize) -> Self {
        Self::new(GeneratorKind::Complete, n)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        match self.kind {
            GeneratorKind::BarabasiAlbert => {
                if self.m < 1 {
                    return Err(Error::param("m", "attachment parameter must be >= 1"));
                }
                if self.m >= n {
                    return Err(Error::param("m", format!("m = {} must be < n = {n}", self.m)));
                }
            }
            GeneratorKind::Cycle if n < 3 => {
                return Err(Error::param("n", "a cycle needs at least 3 nodes"));
            }
            GeneratorKind::DisjointCycles => {
                if self.m < 3 || n < self.m + 3 {
                    return Err(Error::param(
                        "m",
                        format!(
                            "cycles of lengths {} and {} need both >= 3",
                            self.m,
                            n.saturating_sub(self.m)
                        ),
                    ));
                }
            }
            GeneratorKind::CircularSkipLink => {
                if n < 5 {
                    return Err(Error::param("n", "circular skip link needs n >= 5"));
                }
                if self.skip < 2 || self.skip > n / 2 {
                    return Err(Error::param(
                        "skip",
                        format!("skip must lie in [2, {}], got {}", n / 2, self.skip),
                    ));
                }
            }
            GeneratorKind::Shrikhande | GeneratorKind::Rook4x4 if n != 16 => {
                return Err(Error::param("n", format!("{} has exactly 16 nodes", self.kind)));
            }
            GeneratorKind::Complete if n < 1 => {
                return Err(Error::param("n", "complete graph needs n >= 1"));
            }
            _ => {}
        }
        Ok(())
    }
}

/// Builds the graph described by `spec`. Deterministic given the spec.
pub fn generate(spec: &GeneratorSpec) -> Result<Graph> {
    spec.validate()?;
    let n = spec.n;
    let g = match spec.kind {
        GeneratorKind::BarabasiAlbert => barabasi_albert(n, spec.m, spec.seed),
        GeneratorKind::Cycle => Graph::from_edge_set(n, cycle_edges(0, n)),
        GeneratorKind::DisjointCycles => {
            let edges = cycle_edges(0, spec.m).chain(cycle_edges(spec.m, n - spec.m));
            Graph::from_edge_set(n, edges)
        }
        GeneratorKind::CircularSkipLink => {
            let chords = (0..n).map(|i| (i, (i + spec.skip) % n));
            Graph::from_edge_set(n, cycle_edges(0, n).chain(chords))
        }
        GeneratorKind::Shrikhande => {
            // Cayley graph on Z4 x Z4 with connection set {±(1,0), ±(0,1), ±(1,1)}.
            let id = |a: usize, b: usize| 4 * (a % 4) + (b % 4);
            let mut edges = Vec::new();
            for a in 0..4 {
                for b in 0..4 {
                    for (da, db) in [(1, 0), (0, 1), (1, 1)] {
                        edges.push((id(a, b), id(a + da, b + db)));
                    }
                }
            }
            Graph::from_edge_set(16, edges)
        }
        GeneratorKind::Rook4x4 => {
            let mut edges = Vec::new();
            for u in 0..16 {
                for v in u + 1..16 {
                    if u / 4 == v / 4 || u % 4 == v % 4 {
                        edges.push((u, v));
                    }
                }
            }
            Graph::from_edge_set(16, edges)
        }
        GeneratorKind::Complete => Graph::from_edge_set(n, (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v)))),
    };
    Ok(g)
}

fn cycle_edges(offset: usize, len: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..len).map(move |i| (offset + i, offset + (i + 1) % len))
}

/// Preferential attachment seeded with a complete graph on `m + 1` nodes.
/// Each new node picks `m` distinct targets, each draw proportional to the
/// current degree among the targets not yet picked.
fn barabasi_albert(n: usize, m: usize, seed: u64) -> Graph {
    let mut rng = seed::rng(seed);
    let mut edges: Vec<(usize, usize)> = (0..=m).flat_map(|u| (u + 1..=m).map(move |v| (u, v))).collect();
    // Every edge endpoint once, so a uniform pick is degree-proportional.
    let mut endpoints: Vec<usize> = edges.iter().flat_map(|&(u, v)| [u, v]).collect();
    // A seed K1 (m = 0) cannot happen: validate() requires m >= 1.
    let mut targets = Vec::with_capacity(m);
    for new in m + 1..n {
        targets.clear();
        while targets.len() < m {
            let t = endpoints[rng.random_range(0..endpoints.len())];
            if !targets.contains(&t) {
                targets.push(t);
            }
        }
        for &t in &targets {
            edges.push((t, new));
            endpoints.push(t);
            endpoints.push(new);
        }
    }
    Graph::from_edge_set(n, edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ba_edge_count_is_forced() {
        for seed in 0..5 {
            let g = generate(&GeneratorSpec::barabasi_albert(100, 2, seed)).unwrap();
            assert_eq!(g.num_edges(), 3 + 97 * 2);
            let g = generate(&GeneratorSpec::barabasi_albert(100, 3, seed)).unwrap();
            assert_eq!(g.num_edges(), 6 + 96 * 3);
        }
    }

    #[test]
    fn ba_is_deterministic_per_seed() {
        let a = generate(&GeneratorSpec::barabasi_albert(50, 2, 9)).unwrap();
        let b = generate(&GeneratorSpec::barabasi_albert(50, 2, 9)).unwrap();
        let c = generate(&GeneratorSpec::barabasi_albert(50, 2, 10)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn cycle_is_two_regular() {
        let g = generate(&GeneratorSpec::cycle(6)).unwrap();
        assert_eq!(g.num_edges(), 6);
        assert!((0..6).all(|v| g.degree(v) == 2));
    }

    #[test]
    fn strongly_regular_parameters_by_pair_counting() {
        // SRG(16, 6, 2, 2): adjacent pairs share 2 neighbours, non-adjacent pairs share 2.
        for spec in [GeneratorSpec::shrikhande(), GeneratorSpec::rook_4x4()] {
            let g = generate(&spec).unwrap();
            assert_eq!((g.n(), g.num_edges()), (16, 48));
            assert!((0..16).all(|v| g.degree(v) == 6));
            for u in 0..16 {
                for v in u + 1..16 {
                    let common = (0..16).filter(|&w| g.has_edge(u, w) && g.has_edge(v, w)).count();
                    assert_eq!(common, 2, "{:?} pair ({u},{v})", spec.kind);
                }
            }
        }
    }

    #[test]
    fn csl_is_four_regular() {
        let g = generate(&GeneratorSpec::circular_skip_link(11, 3)).unwrap();
        assert!((0..11).all(|v| g.degree(v) == 4));
        assert_eq!(g.num_edges(), 22);
    }

    #[test]
    fn invalid_specs_name_the_field() {
        let cases = [
            (GeneratorSpec::barabasi_albert(3, 3, 0), "`m`"),
            (GeneratorSpec::barabasi_albert(3, 0, 0), "`m`"),
            (GeneratorSpec::circular_skip_link(11, 1), "`skip`"),
            (GeneratorSpec::circular_skip_link(11, 6), "`skip`"),
            (GeneratorSpec::cycle(2), "`n`"),
            (GeneratorSpec::disjoint_cycles(2, 5), "`m`"),
        ];
        for (spec, field) in cases {
            let err = generate(&spec).unwrap_err().to_string();
            assert!(err.contains(field), "{err}");
        }
        assert!("nope".parse::<GeneratorKind>().is_err());
        assert_eq!("rook-4x4".parse::<GeneratorKind>().unwrap(), GeneratorKind::Rook4x4);
    }

    proptest! {
        #[test]
        fn ba_graphs_satisfy_graph_invariants(seed in any::<u64>(), n in 4usize..60, m in 1usize..4) {
            prop_assume!(m < n);
            let g = generate(&GeneratorSpec::barabasi_albert(n, m, seed)).unwrap();
            prop_assert!(g.edges().iter().all(|&(u, v)| u < v && v < n));
            prop_assert!(g.edges().windows(2).all(|w| w[0] < w[1]));
            prop_assert_eq!(g.num_edges(), m * (m + 1) / 2 + (n - m - 1) * m);
            prop_assert!(g.is_connected());
        }
    }
}

//! Property suites behind `oracle-check`.

use rand::Rng;

use super::{matching_oracle_relabel, triangle_net_trace, UidAssignment, VisitOrder};
use crate::error::Result;
use crate::graph::{are_isomorphic, generate, label_triangles, same_wl_histogram, wl_refine, GeneratorSpec, Graph};
use crate::seed;

/// Outcome of one property over many cases.
#[derive(Clone, Debug)]
pub struct PropertyCheck {
    pub name: String,
    pub passed: bool,
    pub cases: usize,
    /// First failing graph, if any.
    pub counterexample: Option<Graph>,
}

impl PropertyCheck {
    fn new(name: &str) -> Self {
        PropertyCheck {
            name: name.to_string(),
            passed: true,
            cases: 0,
            counterexample: None,
        }
    }

    fn record(&mut self, ok: bool, g: &Graph) {
        self.cases += 1;
        if !ok && self.passed {
            self.passed = false;
            self.counterexample = Some(g.clone());
        }
    }
}

#[derive(Clone, Debug)]
pub struct SuiteConfig {
    /// Every labeled graph up to this many nodes is checked.
    pub exhaustive_max_n: usize,
    pub ba_graphs: usize,
    pub uid_draws: usize,
    pub relabel_graphs: usize,
    pub relabel_draws: usize,
    pub composed_draws: usize,
    pub iso_pairs: usize,
    pub seed: u64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            exhaustive_max_n: 6,
            ba_graphs: 50,
            uid_draws: 10,
            relabel_graphs: 20,
            relabel_draws: 200,
            composed_draws: 100,
            iso_pairs: 50,
            seed: 0,
        }
    }
}

/// All labeled simple graphs on `n` nodes.
pub fn all_graphs(n: usize) -> impl Iterator<Item = Graph> {
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
    let total = 1u64 << pairs.len();
    (0..total).map(move |mask| {
        let edges = pairs
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, &e)| e);
        Graph::new(n, edges).expect("enumerated edges are valid")
    })
}

fn random_ba(rng: &mut impl Rng, max_n: usize) -> Result<Graph> {
    let m = rng.random_range(1..=3);
    let n = rng.random_range(m + 2..=max_n);
    generate(&GeneratorSpec::barabasi_albert(n, m, rng.random()))
}

/// Triangle detector against brute-force labels, and its output under
/// repeated identifier draws.
pub fn triangle_checks(cfg: &SuiteConfig) -> Result<Vec<PropertyCheck>> {
    let mut rng = seed::rng(seed::derive(cfg.seed, "triangle"));
    let mut exhaustive = PropertyCheck::new(&format!(
        "triangle net = brute force, all graphs n <= {}",
        cfg.exhaustive_max_n
    ));
    for n in 1..=cfg.exhaustive_max_n {
        for g in all_graphs(n) {
            let truth = label_triangles(&g);
            let a = triangle_net_trace(&g, UidAssignment::random(n, &mut rng).values())?.output;
            let b = triangle_net_trace(&g, UidAssignment::random(n, &mut rng).values())?.output;
            exhaustive.record(a == truth && b == truth, &g);
        }
    }
    let mut random = PropertyCheck::new(&format!(
        "triangle net = brute force and identical across {} id draws, {} BA graphs",
        cfg.uid_draws, cfg.ba_graphs
    ));
    for _ in 0..cfg.ba_graphs {
        let g = random_ba(&mut rng, 100)?;
        let truth = label_triangles(&g);
        let mut ok = true;
        for _ in 0..cfg.uid_draws {
            ok &= triangle_net_trace(&g, UidAssignment::random(g.n(), &mut rng).values())?.output == truth;
        }
        random.record(ok, &g);
    }
    Ok(vec![exhaustive, random])
}

/// Relabeling through the equality oracle, functions composed with it, and
/// the witness that the detector's hidden states do depend on identifiers.
pub fn matching_checks(cfg: &SuiteConfig) -> Result<Vec<PropertyCheck>> {
    let mut rng = seed::rng(seed::derive(cfg.seed, "matching"));
    let mut relabel = PropertyCheck::new(&format!("relabel output invariant over {} id draws", cfg.relabel_draws));
    let mut composed = PropertyCheck::new(&format!(
        "f after relabel invariant over {} id draws",
        cfg.composed_draws
    ));
    let mut hidden = PropertyCheck::new("layer-2 states of the triangle net change with the ids");
    // A label-dependent downstream function: each node's sum of neighbor labels.
    let downstream = |g: &Graph, labels: &[usize]| -> Vec<usize> {
        (0..g.n())
            .map(|v| g.neighbors(v).iter().map(|&u| labels[u]).sum())
            .collect()
    };
    for _ in 0..cfg.relabel_graphs {
        let g = random_ba(&mut rng, 60)?;
        let mut ok = true;
        for order in [VisitOrder::NodeIndex, VisitOrder::BreadthFirst] {
            let reference = matching_oracle_relabel(&g, UidAssignment::random(g.n(), &mut rng).values(), order)?;
            for _ in 0..cfg.relabel_draws {
                let uids = UidAssignment::random(g.n(), &mut rng);
                ok &= matching_oracle_relabel(&g, uids.values(), order)? == reference;
            }
        }
        relabel.record(ok, &g);

        let first = matching_oracle_relabel(
            &g,
            UidAssignment::random(g.n(), &mut rng).values(),
            VisitOrder::BreadthFirst,
        )?;
        let reference = downstream(&g, &first);
        let mut ok = true;
        for _ in 0..cfg.composed_draws {
            let labels = matching_oracle_relabel(
                &g,
                UidAssignment::random(g.n(), &mut rng).values(),
                VisitOrder::BreadthFirst,
            )?;
            ok &= downstream(&g, &labels) == reference;
        }
        composed.record(ok, &g);

        let a = triangle_net_trace(&g, UidAssignment::random(g.n(), &mut rng).values())?;
        let b = triangle_net_trace(&g, UidAssignment::random(g.n(), &mut rng).values())?;
        hidden.record(a.layer2 != b.layer2 && a.output == b.output, &g);
    }
    Ok(vec![relabel, composed, hidden])
}

/// 1-WL blind spots and the exact isomorphism test.
pub fn wl_iso_checks(cfg: &SuiteConfig) -> Result<Vec<PropertyCheck>> {
    let named = [
        (GeneratorSpec::cycle(6), GeneratorSpec::disjoint_cycles(3, 3)),
        (GeneratorSpec::shrikhande(), GeneratorSpec::rook_4x4()),
    ];
    let mut wl = PropertyCheck::new("1-WL histograms equal: C6 / 2xC3, Shrikhande / rook 4x4");
    let mut non_iso = PropertyCheck::new("same pairs are not isomorphic");
    for (a, b) in &named {
        let (a, b) = (generate(a)?, generate(b)?);
        wl.record(
            wl_refine(&a).histogram == wl_refine(&b).histogram && same_wl_histogram(&a, &b),
            &a,
        );
        non_iso.record(!are_isomorphic(&a, &b)?, &a);
    }
    let mut rng = seed::rng(seed::derive(cfg.seed, "iso"));
    let mut permuted = PropertyCheck::new(&format!("{} random relabeled copies are isomorphic", cfg.iso_pairs));
    for _ in 0..cfg.iso_pairs {
        let g = random_ba(&mut rng, 60)?;
        let (copy, _) = g.shuffled(&mut rng);
        permuted.record(are_isomorphic(&g, &copy)?, &g);
    }
    Ok(vec![wl, non_iso, permuted])
}

pub fn run_all(cfg: &SuiteConfig) -> Result<Vec<PropertyCheck>> {
    let mut out = triangle_checks(cfg)?;
    out.extend(matching_checks(cfg)?);
    out.extend(wl_iso_checks(cfg)?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumeration_counts() {
        assert_eq!(all_graphs(1).count(), 1);
        assert_eq!(all_graphs(3).count(), 8);
        assert_eq!(all_graphs(4).filter(|g| g.num_edges() == 6).count(), 1);
    }

    #[test]
    fn small_suite_passes() {
        let cfg = SuiteConfig {
            exhaustive_max_n: 4,
            ba_graphs: 3,
            uid_draws: 3,
            relabel_graphs: 3,
            relabel_draws: 5,
            composed_draws: 5,
            iso_pairs: 3,
            seed: 1,
        };
        for check in run_all(&cfg).unwrap() {
            assert!(check.passed, "{}", check.name);
            assert!(check.cases > 0);
        }
    }
}

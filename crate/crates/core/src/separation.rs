//! Pairwise distinguishing harness with a reliability gate against
//! isomorphic copies.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::diffmath::cosine_similarity;
use crate::error::{Error, Result};
use crate::gnn::{augment_features, Augmentation, ModelConfig, ModelParams};
use crate::graph::{Graph, GraphPair};
use crate::seed;
use crate::training::{train_siamese, SiamesePair, TrainConfig, TrainHistory, TrainMode};

/// Smallest threshold `calibrate_epsilon` returns.
pub const EPSILON_FLOOR: f64 = 1e-9;

/// Sum-pooled final-layer embedding averaged over `samples` identifier
/// draws. Constant mode uses the zero identifier once.
pub fn mean_embedding(params: &ModelParams, g: &Graph, mode: TrainMode, samples: usize, seed: u64) -> Result<Vec<f64>> {
    if samples == 0 {
        return Err(Error::param("samples", "must be at least 1"));
    }
    let spec = params.config.rnf_spec();
    let pooled = |h0| params.embed(g.edges(), &h0).column_sums().as_slice().to_vec();
    if mode == TrainMode::Constant {
        return Ok(pooled(augment_features(g, Augmentation::Constant { width: spec.dim })?));
    }
    let stream = spec.stream(seed::derive(seed, "embedding"));
    let mut acc = vec![0.0; params.config.hidden_dim];
    for s in 0..samples {
        let r = stream.draw_at(s as u64, g.n());
        for (a, v) in acc
            .iter_mut()
            .zip(pooled(augment_features(g, Augmentation::Random(&r))?))
        {
            *a += v;
        }
    }
    for a in &mut acc {
        *a /= samples as f64;
    }
    Ok(acc)
}

/// `1 - cos(x, y)`, clamped to `[0, 2]`.
pub fn cosine_distance(x: &[f64], y: &[f64]) -> Result<f64> {
    Ok((1.0 - cosine_similarity(x, y)?).clamp(0.0, 2.0))
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairVerdict {
    pub cosine_distance: f64,
    pub distinguished: bool,
    /// Both graphs stay within `epsilon` of a relabeled copy under fresh draws.
    pub reliable: bool,
    pub epsilon: f64,
    pub samples: usize,
}

impl PairVerdict {
    pub fn separated(&self) -> bool {
        self.distinguished && self.reliable
    }
}

/// Distance between `g` and a random relabeling of it embedded under
/// independent draws; `tag` keeps calibration and gating streams apart.
fn copy_distance(
    params: &ModelParams,
    g: &Graph,
    mode: TrainMode,
    samples: usize,
    seed: u64,
    tag: &str,
) -> Result<f64> {
    let base = seed::derive(seed, tag);
    let (copy, _) = g.shuffled(&mut seed::rng(seed::derive(base, "perm")));
    let a = mean_embedding(params, g, mode, samples, seed::derive(base, "a"))?;
    let b = mean_embedding(params, &copy, mode, samples, seed::derive(base, "b"))?;
    cosine_distance(&a, &b)
}

/// Twice the largest distance between any of `graphs` and a relabeled copy
/// of itself, but at least [`EPSILON_FLOOR`].
pub fn calibrate_epsilon(
    params: &ModelParams,
    graphs: &[&Graph],
    mode: TrainMode,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (i, g) in graphs.iter().enumerate() {
        worst = worst.max(copy_distance(
            params,
            g,
            mode,
            samples,
            seed::derive_index(seed, i as u64),
            "calibrate",
        )?);
    }
    Ok((2.0 * worst).max(EPSILON_FLOOR))
}

/// Judges whether the model tells `g1` from `g2`. Both graphs share the
/// draw stream, so the verdict is symmetric in its arguments.
pub fn judge_pair(
    params: &ModelParams,
    g1: &Graph,
    g2: &Graph,
    mode: TrainMode,
    samples: usize,
    epsilon: f64,
    seed: u64,
) -> Result<PairVerdict> {
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::param("epsilon", "must be positive"));
    }
    let e1 = mean_embedding(params, g1, mode, samples, seed)?;
    let e2 = mean_embedding(params, g2, mode, samples, seed)?;
    let distance = cosine_distance(&e1, &e2)?;
    let gate = |g| copy_distance(params, g, mode, samples, seed, "gate").map(|d| d <= epsilon);
    let reliable = gate(g1)? && gate(g2)?;
    Ok(PairVerdict {
        cosine_distance: distance,
        distinguished: distance > epsilon,
        reliable,
        epsilon,
        samples,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteRow {
    pub family: String,
    pub pair_id: usize,
    /// `None` when an embedding had zero norm; such pairs never count.
    pub verdict: Option<PairVerdict>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SuiteReport {
    pub rows: Vec<SuiteRow>,
}

impl SuiteReport {
    /// Records a verdict; an undefined cosine is kept as an unjudged row.
    pub fn push(&mut self, family: &str, pair_id: usize, verdict: Result<PairVerdict>) -> Result<()> {
        let verdict = match verdict {
            Ok(v) => Some(v),
            Err(Error::UndefinedCosine) => None,
            Err(e) => return Err(e),
        };
        self.rows.push(SuiteRow {
            family: family.to_string(),
            pair_id,
            verdict,
        });
        Ok(())
    }

    /// `(separated, total)` per family, families in name order.
    pub fn counts(&self) -> BTreeMap<String, (usize, usize)> {
        let mut out: BTreeMap<String, (usize, usize)> = BTreeMap::new();
        for row in &self.rows {
            let e = out.entry(row.family.clone()).or_default();
            e.1 += 1;
            if row.verdict.as_ref().is_some_and(PairVerdict::separated) {
                e.0 += 1;
            }
        }
        out
    }

    pub fn separated(&self) -> usize {
        self.counts().values().map(|c| c.0).sum()
    }

    /// Fraction of separated pairs; 0 for an empty report.
    pub fn accuracy(&self) -> f64 {
        if self.rows.is_empty() {
            0.0
        } else {
            self.separated() as f64 / self.rows.len() as f64
        }
    }

    /// True when no judged pair failed its reliability gate.
    pub fn all_reliable(&self) -> bool {
        self.rows.iter().all(|r| r.verdict.as_ref().is_some_and(|v| v.reliable))
    }

    /// `family,pair_id,distance,distinguished,reliable`; unjudged pairs
    /// have an empty distance.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("family,pair_id,distance,distinguished,reliable\n");
        for r in &self.rows {
            match &r.verdict {
                Some(v) => {
                    let _ = writeln!(
                        out,
                        "{},{},{:.9e},{},{}",
                        r.family, r.pair_id, v.cosine_distance, v.distinguished, v.reliable
                    );
                }
                None => {
                    let _ = writeln!(out, "{},{},,false,false", r.family, r.pair_id);
                }
            }
        }
        out
    }

    /// `family,separated,total,percent`, with an `all` row last.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("family,separated,total,percent\n");
        let pct = |s: usize, t: usize| if t == 0 { 0.0 } else { 100.0 * s as f64 / t as f64 };
        for (family, (s, t)) in self.counts() {
            let _ = writeln!(out, "{family},{s},{t},{:.1}", pct(s, t));
        }
        let _ = writeln!(
            out,
            "all,{},{},{:.1}",
            self.separated(),
            self.rows.len(),
            pct(self.separated(), self.rows.len())
        );
        out
    }
}

/// Judges every pair with one model and a fixed threshold.
pub fn run_suite(
    params: &ModelParams,
    pairs: &[GraphPair],
    mode: TrainMode,
    samples: usize,
    epsilon: f64,
    seed: u64,
) -> Result<SuiteReport> {
    let mut report = SuiteReport::default();
    for (i, p) in pairs.iter().enumerate() {
        let verdict = judge_pair(
            params,
            &p.first,
            &p.second,
            mode,
            samples,
            epsilon,
            seed::derive_index(seed, i as u64),
        );
        report.push(p.family.name(), p.id, verdict)?;
    }
    Ok(report)
}

/// Per-pair protocol: train a Siamese model on each pair alone, calibrate
/// its threshold on relabeled copies of the two graphs, then judge.
pub fn train_and_judge_pairs(
    pairs: &[GraphPair],
    model: &ModelConfig,
    train: &TrainConfig,
    samples: usize,
    seed: u64,
) -> Result<(SuiteReport, Vec<TrainHistory>)> {
    let mut report = SuiteReport::default();
    let mut histories = Vec::with_capacity(pairs.len());
    for (i, p) in pairs.iter().enumerate() {
        let pair_seed = seed::derive_index(seed, i as u64);
        let cfg = TrainConfig {
            seed: seed::derive(pair_seed, "train"),
            ..train.clone()
        };
        let sp = SiamesePair {
            first: p.first.clone(),
            second: p.second.clone(),
        };
        let (sm, history) = train_siamese(&[sp], model, &cfg)?;
        histories.push(history);
        let verdict = calibrate_epsilon(
            &sm.params,
            &[&p.first, &p.second],
            cfg.mode,
            samples,
            seed::derive(pair_seed, "calibrate"),
        )
        .and_then(|eps| {
            judge_pair(
                &sm.params,
                &p.first,
                &p.second,
                cfg.mode,
                samples,
                eps,
                seed::derive(pair_seed, "judge"),
            )
        });
        report.push(p.family.name(), p.id, verdict)?;
    }
    Ok((report, histories))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gnn::Readout;
    use crate::graph::{generate, generate_pair_family, GeneratorSpec, PairFamily};

    fn params(rnf_dim: usize, seed: u64) -> ModelParams {
        let cfg = ModelConfig {
            layers: 3,
            hidden_dim: 16,
            rnf_dim,
            readout: Readout::Node,
            ..ModelConfig::default()
        };
        ModelParams::init(&cfg, seed).unwrap()
    }

    #[test]
    fn constant_embedding_ignores_samples_and_relabeling() {
        let p = params(4, 1);
        let g = generate(&GeneratorSpec::barabasi_albert(12, 2, 5)).unwrap();
        let a = mean_embedding(&p, &g, TrainMode::Constant, 1, 0).unwrap();
        assert_eq!(a, mean_embedding(&p, &g, TrainMode::Constant, 16, 9).unwrap());
        let (copy, _) = g.shuffled(&mut seed::rng(3));
        let b = mean_embedding(&p, &copy, TrainMode::Constant, 4, 2).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-9));
    }

    #[test]
    fn identical_draws_average_to_single_draw() {
        let p = params(4, 1);
        let g = generate(&GeneratorSpec::cycle(7)).unwrap();
        let one = mean_embedding(&p, &g, TrainMode::Siri, 1, 4).unwrap();
        let r = p.config.rnf_spec().stream(seed::derive(4, "embedding")).draw_at(0, 7);
        let direct = p
            .embed(g.edges(), &augment_features(&g, Augmentation::Random(&r)).unwrap())
            .column_sums();
        assert_eq!(one, direct.as_slice());
    }

    #[test]
    fn identical_graphs_are_not_distinguished() {
        let p = params(0, 2);
        let g = generate(&GeneratorSpec::cycle(6)).unwrap();
        let v = judge_pair(&p, &g, &g, TrainMode::Constant, 1, 1e-9, 0).unwrap();
        assert_eq!(v.cosine_distance, 0.0);
        assert!(!v.distinguished && v.reliable);
        assert_eq!(cosine_distance(&[1.0, 0.0], &[0.0, 2.0]).unwrap(), 1.0);
        assert!(matches!(cosine_distance(&[0.0], &[1.0]), Err(Error::UndefinedCosine)));
    }

    #[test]
    fn distance_is_symmetric_with_shared_seed() {
        let p = params(4, 3);
        let a = generate(&GeneratorSpec::cycle(6)).unwrap();
        let b = generate(&GeneratorSpec::disjoint_cycles(3, 3)).unwrap();
        let x = judge_pair(&p, &a, &b, TrainMode::Siri, 8, 0.01, 5).unwrap();
        let y = judge_pair(&p, &b, &a, TrainMode::Siri, 8, 0.01, 5).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn constant_model_separates_no_wl_hard_pair() {
        let p = params(4, 7);
        let mut pairs = Vec::new();
        for f in PairFamily::ALL {
            pairs.extend(generate_pair_family(f, 3, 1).unwrap());
        }
        let graphs: Vec<&Graph> = pairs.iter().flat_map(|p| [&p.first, &p.second]).collect();
        let eps = calibrate_epsilon(&p, &graphs, TrainMode::Constant, 1, 0).unwrap();
        assert_eq!(eps, EPSILON_FLOOR);
        let report = run_suite(&p, &pairs, TrainMode::Constant, 1, eps, 0).unwrap();
        assert_eq!(report.separated(), 0);
        assert!(report.all_reliable());
        for row in &report.rows {
            assert!(row.verdict.as_ref().unwrap().cosine_distance < 1e-9);
        }
    }

    #[test]
    fn empty_and_identical_suites() {
        let p = params(4, 1);
        let empty = run_suite(&p, &[], TrainMode::Siri, 2, 0.1, 0).unwrap();
        assert_eq!(empty.separated(), 0);
        assert_eq!(empty.accuracy(), 0.0);
        assert_eq!(empty.summary_csv(), "family,separated,total,percent\nall,0,0,0.0\n");
        let mut pair = generate_pair_family(PairFamily::Csl, 1, 0).unwrap().remove(0);
        pair.second = pair.first.clone();
        let report = run_suite(&p, &[pair.clone(), pair], TrainMode::Siri, 4, 0.5, 0).unwrap();
        assert_eq!(report.separated(), 0);
        assert!(report
            .to_csv()
            .starts_with("family,pair_id,distance,distinguished,reliable\ncsl,0,"));
    }

    #[test]
    fn unjudged_rows_never_count() {
        let mut r = SuiteReport::default();
        r.push("csl", 0, Err(Error::UndefinedCosine)).unwrap();
        assert_eq!(r.separated(), 0);
        assert!(!r.all_reliable());
        assert!(r.push("csl", 1, Err(Error::EmptyDataset)).is_err());
    }
}

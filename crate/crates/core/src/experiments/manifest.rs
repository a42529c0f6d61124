use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::gnn::{ModelConfig, Readout};
use crate::graph::PairFamily;
use crate::invariance::ResampleScope;
use crate::kv::{KvFile, Section};
use crate::seed;
use crate::training::{Task, TrainConfig, TrainMode};

/// A training regime compared by an experiment: the mode plus, for SIRI,
/// the candidate count. Written `constant`, `rni`, `siri` or `siri-k5`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Variant {
    pub mode: TrainMode,
    pub k: usize,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.k > 1 {
            write!(f, "{}-k{}", self.mode, self.k)
        } else {
            write!(f, "{}", self.mode)
        }
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (mode, k) = match s.split_once("-k") {
            Some((m, k)) => (
                m,
                k.parse()
                    .map_err(|_| Error::param("variants", format!("bad candidate count in `{s}`")))?,
            ),
            None => (s, 1),
        };
        let mode: TrainMode = mode.parse()?;
        if k < 1 || (k > 1 && mode != TrainMode::Siri) {
            return Err(Error::param(
                "variants",
                format!("`{s}`: only siri takes -k<count>, count >= 1"),
            ));
        }
        Ok(Variant { mode, k })
    }
}

fn parse_list<T: FromStr>(raw: &str, key: &'static str) -> Result<Vec<T>> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| Error::param(key, format!("cannot parse `{s}`"))))
        .collect()
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

/// What an experiment trains and tests on.
#[derive(Clone, Debug, PartialEq)]
pub enum DataConfig {
    /// Node classification of triangle membership on BA graphs.
    Triangle {
        nodes: usize,
        train_graphs: usize,
        test_graphs: usize,
        train_m: usize,
        /// One test set per attachment parameter.
        test_m: Vec<usize>,
    },
    /// Graph classification of `C_n` (label 0) against `C_3 + C_{n-3}`
    /// (label 1) for `n = first_n ..`; the test set holds relabeled copies.
    CyclePairs { first_n: usize, pairs: usize },
    /// Verified 1-WL-hard non-isomorphic pairs.
    PairFamilies { families: Vec<(PairFamily, usize)> },
}

impl DataConfig {
    fn from_section(s: Section<'_>) -> Result<Self> {
        let kind: String = s.get_or("kind", "triangle".to_string())?;
        let data = match kind.as_str() {
            "triangle" => DataConfig::Triangle {
                nodes: s.get_or("nodes", 100)?,
                train_graphs: s.get_or("train_graphs", 20)?,
                test_graphs: s.get_or("test_graphs", 10)?,
                train_m: s.get_or("train_m", 2)?,
                test_m: parse_list(s.raw("test_m").unwrap_or("2"), "test_m")?,
            },
            "cycle-pairs" => DataConfig::CyclePairs {
                first_n: s.get_or("first_n", 6)?,
                pairs: s.get_or("pairs", 20)?,
            },
            "pair-families" => {
                let raw = s.raw("families").unwrap_or("wl1-hard-basic:3,wl1-hard-regular:3,csl:4");
                let mut families = Vec::new();
                for item in raw.split(',').map(str::trim).filter(|x| !x.is_empty()) {
                    let (name, count) = item
                        .split_once(':')
                        .ok_or_else(|| Error::param("families", format!("expected `family:count`, got `{item}`")))?;
                    let count = count
                        .parse()
                        .map_err(|_| Error::param("families", format!("bad count in `{item}`")))?;
                    families.push((name.parse()?, count));
                }
                DataConfig::PairFamilies { families }
            }
            other => return Err(Error::param("kind", format!("unknown data kind `{other}`"))),
        };
        data.validate()?;
        Ok(data)
    }

    fn validate(&self) -> Result<()> {
        match self {
            DataConfig::Triangle {
                nodes,
                train_graphs,
                train_m,
                test_m,
                ..
            } => {
                if *train_graphs == 0 {
                    return Err(Error::param("train_graphs", "must be at least 1"));
                }
                if test_m.is_empty() {
                    return Err(Error::param("test_m", "need at least one test set"));
                }
                for &m in test_m.iter().chain([train_m]) {
                    if m == 0 || m >= *nodes {
                        return Err(Error::param("train_m", format!("attachment {m} must be in 1..{nodes}")));
                    }
                }
            }
            DataConfig::CyclePairs { first_n, pairs } => {
                if *first_n < 6 {
                    return Err(Error::param("first_n", "must be at least 6"));
                }
                if *pairs == 0 {
                    return Err(Error::param("pairs", "must be at least 1"));
                }
            }
            DataConfig::PairFamilies { families } => {
                if families.is_empty() {
                    return Err(Error::param("families", "need at least one family"));
                }
            }
        }
        Ok(())
    }

    fn to_kv(&self) -> String {
        match self {
            DataConfig::Triangle {
                nodes,
                train_graphs,
                test_graphs,
                train_m,
                test_m,
            } => format!(
                "kind=triangle\nnodes={nodes}\ntrain_graphs={train_graphs}\ntest_graphs={test_graphs}\ntrain_m={train_m}\ntest_m={}\n",
                join(test_m)
            ),
            DataConfig::CyclePairs { first_n, pairs } => {
                format!("kind=cycle-pairs\nfirst_n={first_n}\npairs={pairs}\n")
            }
            DataConfig::PairFamilies { families } => {
                let items: Vec<String> = families.iter().map(|(f, c)| format!("{f}:{c}")).collect();
                format!("kind=pair-families\nfamilies={}\n", items.join(","))
            }
        }
    }

    fn scaled(&self, s: f64) -> Self {
        let sc = |x: usize| ((x as f64 * s).round() as usize).max(1);
        match self.clone() {
            DataConfig::Triangle {
                nodes,
                train_graphs,
                test_graphs,
                train_m,
                test_m,
            } => DataConfig::Triangle {
                nodes,
                train_graphs: sc(train_graphs),
                test_graphs: sc(test_graphs),
                train_m,
                test_m,
            },
            DataConfig::CyclePairs { first_n, pairs } => DataConfig::CyclePairs {
                first_n,
                pairs: sc(pairs),
            },
            DataConfig::PairFamilies { families } => DataConfig::PairFamilies {
                families: families.into_iter().map(|(f, c)| (f, sc(c))).collect(),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalConfig {
    pub variants: Vec<Variant>,
    /// Independent training runs per variant.
    pub runs: usize,
    /// Identifier resamples per node; 0 skips the invariance evaluation.
    pub resamples: usize,
    pub invariance_seeds: usize,
    pub scope: ResampleScope,
    /// Identifier draws averaged into a graph embedding.
    pub samples: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            variants: vec![
                Variant {
                    mode: TrainMode::Constant,
                    k: 1,
                },
                Variant {
                    mode: TrainMode::Rni,
                    k: 1,
                },
                Variant {
                    mode: TrainMode::Siri,
                    k: 1,
                },
            ],
            runs: 3,
            resamples: 200,
            invariance_seeds: 3,
            scope: ResampleScope::TargetRow,
            samples: 16,
        }
    }
}

impl EvalConfig {
    fn from_section(s: Section<'_>) -> Result<Self> {
        let d = Self::default();
        let variants = match s.raw("variants") {
            Some(raw) => parse_list(raw, "variants")?,
            None => d.variants,
        };
        let cfg = EvalConfig {
            variants,
            runs: s.get_or("runs", d.runs)?,
            resamples: s.get_or("resamples", d.resamples)?,
            invariance_seeds: s.get_or("invariance_seeds", d.invariance_seeds)?,
            scope: s.get_or("scope", d.scope)?,
            samples: s.get_or("samples", d.samples)?,
        };
        if cfg.variants.is_empty() {
            return Err(Error::param("variants", "need at least one variant"));
        }
        if cfg.runs == 0 {
            return Err(Error::param("runs", "must be at least 1"));
        }
        if cfg.samples == 0 {
            return Err(Error::param("samples", "must be at least 1"));
        }
        if cfg.resamples > 0 && cfg.invariance_seeds == 0 {
            return Err(Error::param(
                "invariance_seeds",
                "must be at least 1 when resamples > 0",
            ));
        }
        Ok(cfg)
    }

    fn to_kv(&self) -> String {
        format!(
            "variants={}\nruns={}\nresamples={}\ninvariance_seeds={}\nscope={}\nsamples={}\n",
            join(&self.variants),
            self.runs,
            self.resamples,
            self.invariance_seeds,
            self.scope,
            self.samples
        )
    }
}

/// A complete experiment description: `key=value` lines with a top-level
/// `experiment` and `seed`, then `[data]`, `[model]`, `[train]`, `[eval]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentManifest {
    pub experiment: String,
    pub seed: u64,
    pub data: DataConfig,
    pub model: ModelConfig,
    /// Shared settings; mode, `k` and seed are set per run.
    pub train: TrainConfig,
    pub eval: EvalConfig,
}

const KEYS: [(&str, &[&str]); 5] = [
    ("", &["experiment", "seed"]),
    (
        "data",
        &[
            "kind",
            "nodes",
            "train_graphs",
            "test_graphs",
            "train_m",
            "test_m",
            "first_n",
            "pairs",
            "families",
        ],
    ),
    (
        "model",
        &[
            "layers",
            "hidden_dim",
            "rnf_dim",
            "input_dim",
            "out_dim",
            "readout",
            "activation",
            "distribution",
        ],
    ),
    ("train", &["mode", "k", "epochs", "lr", "task", "contrastive_weight"]),
    (
        "eval",
        &["variants", "runs", "resamples", "invariance_seeds", "scope", "samples"],
    ),
];

/// The `[train]` lines without `seed`, which is derived per run.
fn train_kv(cfg: &TrainConfig) -> String {
    cfg.to_kv()
        .lines()
        .filter(|l| !l.starts_with("seed="))
        .map(|l| format!("{l}\n"))
        .collect()
}

impl ExperimentManifest {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let file = KvFile::parse(text, origin)?;
        for name in file.sections.keys() {
            if !KEYS.iter().any(|(s, _)| s == name) {
                return Err(Error::param(
                    "section",
                    format!("unknown section `[{name}]` in {origin}"),
                ));
            }
        }
        for (section, allowed) in KEYS {
            let allowed: BTreeSet<&str> = allowed.iter().copied().collect();
            if let Some(bad) = file.section(section).keys().find(|k| !allowed.contains(k)) {
                return Err(Error::param(
                    "key",
                    format!("unknown key `{bad}` in [{section}] of {origin}"),
                ));
            }
        }
        let top = file.section("");
        let experiment = top
            .raw("experiment")
            .ok_or_else(|| Error::param("experiment", format!("missing in {origin}")))?
            .to_string();
        let manifest = ExperimentManifest {
            experiment,
            seed: top.get_or("seed", 0)?,
            data: DataConfig::from_section(file.section("data"))?,
            model: ModelConfig::from_section(file.section("model"))?,
            train: TrainConfig::from_section(file.section("train"))?,
            eval: EvalConfig::from_section(file.section("eval"))?,
        };
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn validate(&self) -> Result<()> {
        let (task, readout) = match self.data {
            DataConfig::Triangle { .. } => (Task::NodeBinary, Readout::Node),
            DataConfig::CyclePairs { .. } => (Task::GraphBinary, Readout::GraphSumMlp),
            DataConfig::PairFamilies { .. } => (Task::PairSiamese, self.model.readout),
        };
        if self.train.task != task {
            return Err(Error::param("task", format!("data kind needs task {task}")));
        }
        if self.model.readout != readout {
            return Err(Error::param("readout", format!("data kind needs readout {readout}")));
        }
        Ok(())
    }

    pub fn to_kv(&self) -> String {
        format!(
            "experiment={}\nseed={}\n\n[data]\n{}\n[model]\n{}\n[train]\n{}\n[eval]\n{}",
            self.experiment,
            self.seed,
            self.data.to_kv(),
            self.model.to_kv(),
            train_kv(&self.train),
            self.eval.to_kv()
        )
    }

    /// Epoch and dataset counts multiplied by `s` (each at least 1).
    pub fn scaled(&self, s: f64) -> Result<Self> {
        if !s.is_finite() || s <= 0.0 {
            return Err(Error::param("scale", "must be positive"));
        }
        let mut out = self.clone();
        out.data = self.data.scaled(s);
        out.train.epochs = ((self.train.epochs as f64 * s).round() as usize).max(1);
        Ok(out)
    }

    /// Seed of a purpose-tagged stream derived from the master seed.
    pub fn stream_seed(&self, purpose: &str) -> u64 {
        seed::derive(self.seed, purpose)
    }

    /// Training configuration of run `index` of `variant`. Runs with the
    /// same index share initialization and identifier streams across
    /// variants.
    pub fn run_config(&self, variant: Variant, index: usize) -> TrainConfig {
        TrainConfig {
            mode: variant.mode,
            k: variant.k,
            seed: seed::derive_index(self.stream_seed("train"), index as u64),
            ..self.train.clone()
        }
    }
}

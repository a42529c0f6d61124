//! Manifest-driven experiments: triangle membership accuracy, convergence
//! on cycle pairs and pairwise separation, with CSV artifacts.
//!
//! Every random choice is drawn from a stream derived from the manifest's
//! master seed by purpose (`data`, `train`, `eval`, `invariance`), so editing
//! evaluation settings never changes what was trained.

mod manifest;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

pub use manifest::{DataConfig, EvalConfig, ExperimentManifest, Variant};

use crate::error::{Error, Result};
use crate::gnn::ModelParams;
use crate::graph::{
    generate, generate_pair_family, io, label_triangles, GeneratorSpec, Graph, GraphPair, NodeLabeling,
};
use crate::invariance::{mean_std, set_invariance_report, InvarianceReport};
use crate::seed;
use crate::separation::{train_and_judge_pairs, SuiteReport};
use crate::training::{evaluate, train, Example, TrainHistory, TrainMode};

/// Names accepted by [`preset`].
pub const PRESETS: [&str; 4] = ["triangle-interp", "triangle-extrap", "convergence", "separation"];

const TRIANGLE: &str = "\
seed=1

[data]
kind=triangle
nodes=100
train_graphs=20
test_graphs=10
train_m=2
test_m={test_m}

[model]
layers=3
hidden_dim=32
rnf_dim=31
readout=node

[train]
task=node-binary
epochs=500
lr=0.001
contrastive_weight=1

[eval]
variants=constant,rni,siri
runs=3
resamples=200
invariance_seeds=3
";

const CONVERGENCE: &str = "\
experiment=convergence
seed=2

[data]
kind=cycle-pairs
first_n=6
pairs=20

[model]
layers=4
hidden_dim=32
rnf_dim=31
readout=graph-sum-mlp

[train]
task=graph-binary
epochs=300
lr=0.001
contrastive_weight=1

[eval]
variants=rni,siri
runs=3
resamples=0
";

const SEPARATION: &str = "\
experiment=separation
seed=3

[data]
kind=pair-families
families=wl1-hard-basic:3,wl1-hard-regular:3,csl:4

[model]
layers=4
hidden_dim=32
rnf_dim=31
readout=node

[train]
task=pair-siamese
epochs=500
lr=0.001
contrastive_weight=1

[eval]
variants=constant,siri
runs=1
resamples=0
samples=16
";

/// The canned manifest called `name`.
pub fn preset(name: &str) -> Result<ExperimentManifest> {
    let text = match name {
        "triangle-interp" => format!("experiment={name}\n{}", TRIANGLE.replace("{test_m}", "2")),
        "triangle-extrap" => format!("experiment={name}\n{}", TRIANGLE.replace("{test_m}", "2,3")),
        "convergence" => CONVERGENCE.to_string(),
        "separation" => SEPARATION.to_string(),
        _ => return Err(Error::UnknownExperiment(name.to_string())),
    };
    ExperimentManifest::parse(&text, name)
}

/// Train and test splits of a manifest, ready for training.
#[derive(Clone, Debug)]
pub enum Dataset {
    /// Node-labeled graphs; `test` holds one named set per test attachment.
    Nodes {
        train: Vec<Example>,
        test: Vec<(String, Vec<Example>)>,
    },
    Pairs(Vec<GraphPair>),
}

fn ba_set(nodes: usize, m: usize, count: usize, stream: u64) -> Result<Vec<Example>> {
    (0..count)
        .map(|i| {
            let g = generate(&GeneratorSpec::barabasi_albert(
                nodes,
                m,
                seed::derive_index(stream, i as u64),
            ))?;
            let labels = label_triangles(&g).as_targets();
            Ok(Example::new(g, labels))
        })
        .collect()
}

fn relabeled(g: &Graph, stream: u64, index: usize) -> Graph {
    g.shuffled(&mut seed::rng(seed::derive_index(stream, index as u64))).0
}

/// Builds the data described by `manifest` from its `data` stream.
pub fn build_dataset(manifest: &ExperimentManifest) -> Result<Dataset> {
    let stream = manifest.stream_seed("data");
    match &manifest.data {
        DataConfig::Triangle {
            nodes,
            train_graphs,
            test_graphs,
            train_m,
            test_m,
        } => {
            let train = ba_set(*nodes, *train_m, *train_graphs, seed::derive(stream, "train"))?;
            let test = test_m
                .iter()
                .map(|&m| {
                    let name = format!("test-m{m}");
                    let set = ba_set(*nodes, m, *test_graphs, seed::derive(stream, &name))?;
                    Ok((name, set))
                })
                .collect::<Result<_>>()?;
            Ok(Dataset::Nodes { train, test })
        }
        DataConfig::CyclePairs { first_n, pairs } => {
            let (train_stream, test_stream) = (seed::derive(stream, "train"), seed::derive(stream, "test"));
            let mut train = Vec::with_capacity(2 * pairs);
            let mut test = Vec::with_capacity(2 * pairs);
            for n in *first_n..first_n + pairs {
                for (label, spec) in [
                    (0, GeneratorSpec::cycle(n)),
                    (1, GeneratorSpec::disjoint_cycles(3, n - 3)),
                ] {
                    let g = generate(&spec)?;
                    let i = train.len();
                    train.push(Example::new(relabeled(&g, train_stream, i), vec![label]));
                    test.push(Example::new(relabeled(&g, test_stream, i), vec![label]));
                }
            }
            Ok(Dataset::Nodes {
                train,
                test: vec![("test".to_string(), test)],
            })
        }
        DataConfig::PairFamilies { families } => {
            let mut pairs = Vec::new();
            for &(family, count) in families {
                pairs.extend(generate_pair_family(
                    family,
                    count,
                    seed::derive(stream, family.name()),
                )?);
            }
            Ok(Dataset::Pairs(pairs))
        }
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_examples(set: &[Example], dir: &Path) -> Result<()> {
    create_dir(dir)?;
    for (i, ex) in set.iter().enumerate() {
        io::write_graph(&ex.graph, &dir.join(format!("g{i:04}.graph")))?;
        let labels = NodeLabeling {
            labels: ex.labels.iter().map(|&l| l == 1).collect(),
        };
        io::write_labels(&labels, &dir.join(format!("g{i:04}.labels")))?;
    }
    Ok(())
}

/// Writes `data` below `dir`: one directory of `.graph` and `.labels`
/// files per set, or the pair graphs plus a `pairs.txt` list.
pub fn write_dataset(data: &Dataset, dir: &Path) -> Result<()> {
    match data {
        Dataset::Nodes { train, test } => {
            write_examples(train, &dir.join("train"))?;
            for (name, set) in test {
                write_examples(set, &dir.join(name))?;
            }
        }
        Dataset::Pairs(pairs) => {
            let graphs = dir.join("pairs");
            create_dir(&graphs)?;
            let mut entries = Vec::with_capacity(pairs.len());
            for p in pairs {
                let stem = format!("{}_{}", p.family, p.id);
                let (a, b) = (format!("{stem}_a.graph"), format!("{stem}_b.graph"));
                io::write_graph(&p.first, &graphs.join(&a))?;
                io::write_graph(&p.second, &graphs.join(&b))?;
                entries.push(io::PairEntry {
                    first: Path::new("pairs").join(a),
                    second: Path::new("pairs").join(b),
                    isomorphic: p.isomorphic,
                });
            }
            io::write_pair_list(&entries, &dir.join("pairs.txt"))?;
        }
    }
    Ok(())
}

/// Every `.graph` file of `dir`, in file-name order.
pub fn read_graph_dir(dir: &Path) -> Result<Vec<Graph>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "graph"))
        .collect();
    paths.sort();
    paths.iter().map(|p| io::read_graph(p)).collect()
}

/// Final accuracy of one trained run on one set.
#[derive(Clone, Debug, PartialEq)]
pub struct AccuracyRow {
    pub variant: Variant,
    pub run: usize,
    pub set: String,
    pub accuracy: f64,
}

/// Everything one training run produced.
#[derive(Clone, Debug)]
pub struct RunRecord {
    pub variant: Variant,
    pub run: usize,
    pub params: ModelParams,
    pub history: TrainHistory,
    pub invariance: Option<InvarianceReport>,
}

#[derive(Clone, Debug, Default)]
pub struct NodeOutcome {
    pub runs: Vec<RunRecord>,
    pub accuracy: Vec<AccuracyRow>,
}

impl NodeOutcome {
    /// Mean and sample standard deviation of a variant's accuracy on `set`.
    pub fn accuracy_stats(&self, variant: Variant, set: &str) -> (f64, f64) {
        let values: Vec<f64> = self
            .accuracy
            .iter()
            .filter(|r| r.variant == variant && r.set == set)
            .map(|r| r.accuracy)
            .collect();
        mean_std(&values)
    }

    pub fn run(&self, variant: Variant, run: usize) -> Option<&RunRecord> {
        self.runs.iter().find(|r| r.variant == variant && r.run == run)
    }

    /// `variant,run,set,accuracy` rows, then `mean` and `std` rows per
    /// variant and set.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("variant,run,set,accuracy\n");
        for r in &self.accuracy {
            let _ = writeln!(out, "{},{},{},{:.6}", r.variant, r.run, r.set, r.accuracy);
        }
        let mut keys: Vec<(Variant, &str)> = Vec::new();
        for r in &self.accuracy {
            if !keys.contains(&(r.variant, r.set.as_str())) {
                keys.push((r.variant, &r.set));
            }
        }
        for (variant, set) in keys {
            let (mean, std) = self.accuracy_stats(variant, set);
            let _ = writeln!(out, "{variant},mean,{set},{mean:.6}");
            let _ = writeln!(out, "{variant},std,{set},{std:.6}");
        }
        out
    }

    /// `variant,run,epochs_to_95,final_test_acc`; an empty epoch field means
    /// the run never reached the fraction.
    pub fn convergence_csv(&self) -> String {
        let mut out = String::from("variant,run,epochs_to_95,final_test_acc\n");
        for r in &self.runs {
            let epochs = r
                .history
                .epochs_to_fraction_of_final(0.95)
                .map(|e| e.to_string())
                .unwrap_or_default();
            let last = r
                .history
                .last()
                .and_then(|e| e.test_acc.or(Some(e.train_acc)))
                .unwrap_or(0.0);
            let _ = writeln!(out, "{},{},{},{:.6}", r.variant, r.run, epochs, last);
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct SeparationRun {
    pub variant: Variant,
    pub run: usize,
    pub report: SuiteReport,
}

#[derive(Clone, Debug)]
pub enum Outcome {
    Nodes(NodeOutcome),
    Separation(Vec<SeparationRun>),
}

fn invariance_seeds(manifest: &ExperimentManifest) -> Vec<u64> {
    let base = manifest.stream_seed("invariance");
    (0..manifest.eval.invariance_seeds as u64)
        .map(|i| seed::derive_index(base, i))
        .collect()
}

fn run_nodes(
    manifest: &ExperimentManifest,
    train_set: &[Example],
    test: &[(String, Vec<Example>)],
) -> Result<NodeOutcome> {
    let eval_stream = manifest.stream_seed("eval");
    let monitor: &[Example] = test.first().map(|(_, s)| s.as_slice()).unwrap_or(&[]);
    let mut outcome = NodeOutcome::default();
    for &variant in &manifest.eval.variants {
        for run in 0..manifest.eval.runs {
            let cfg = manifest.run_config(variant, run);
            let (params, history) = train(train_set, monitor, &cfg, &manifest.model)?;
            let mut sets = vec![("train", train_set)];
            sets.extend(test.iter().map(|(n, s)| (n.as_str(), s.as_slice())));
            for (name, set) in sets {
                let accuracy = evaluate(&params, set, variant.mode, seed::derive(eval_stream, name))?;
                outcome.accuracy.push(AccuracyRow {
                    variant,
                    run,
                    set: name.to_string(),
                    accuracy,
                });
            }
            let invariance = if manifest.eval.resamples > 0 && variant.mode != TrainMode::Constant {
                let graphs = |s: &[Example]| s.iter().map(|e| e.graph.clone()).collect::<Vec<_>>();
                Some(set_invariance_report(
                    &params,
                    &graphs(train_set),
                    &graphs(monitor),
                    variant.mode,
                    manifest.eval.resamples,
                    &invariance_seeds(manifest),
                    manifest.eval.scope,
                )?)
            } else {
                None
            };
            outcome.runs.push(RunRecord {
                variant,
                run,
                params,
                history,
                invariance,
            });
        }
    }
    Ok(outcome)
}

fn run_separation(manifest: &ExperimentManifest, pairs: &[GraphPair]) -> Result<Vec<SeparationRun>> {
    let mut out = Vec::new();
    for &variant in &manifest.eval.variants {
        for run in 0..manifest.eval.runs {
            let cfg = manifest.run_config(variant, run);
            let (report, _) = train_and_judge_pairs(pairs, &manifest.model, &cfg, manifest.eval.samples, cfg.seed)?;
            out.push(SeparationRun { variant, run, report });
        }
    }
    Ok(out)
}

/// Runs `manifest` and returns the results without touching the disk.
pub fn run(manifest: &ExperimentManifest) -> Result<Outcome> {
    manifest.validate()?;
    match build_dataset(manifest)? {
        Dataset::Nodes { train, test } => Ok(Outcome::Nodes(run_nodes(manifest, &train, &test)?)),
        Dataset::Pairs(pairs) => Ok(Outcome::Separation(run_separation(manifest, &pairs)?)),
    }
}

fn write(path: PathBuf, text: &str) -> Result<()> {
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

/// Writes the artifacts of `outcome` into `dir`, returning the file names.
pub fn write_outcome(manifest: &ExperimentManifest, outcome: &Outcome, dir: &Path) -> Result<Vec<String>> {
    create_dir(dir)?;
    let mut files = vec![("manifest.cfg".to_string(), manifest.to_kv())];
    match outcome {
        Outcome::Nodes(o) => {
            for r in &o.runs {
                let tag = format!("{}_s{}", r.variant, r.run);
                files.push((format!("metrics_{tag}.csv"), r.history.to_csv()));
                if let Some(inv) = &r.invariance {
                    files.push((format!("invariance_{tag}.csv"), inv.to_csv()));
                }
            }
            files.push(("summary.csv".to_string(), o.summary_csv()));
            if matches!(manifest.data, DataConfig::CyclePairs { .. }) {
                files.push(("convergence.csv".to_string(), o.convergence_csv()));
            }
        }
        Outcome::Separation(runs) => {
            let mut summary = String::from("variant,run,family,separated,total,percent\n");
            for r in runs {
                files.push((format!("pairs_{}_s{}.csv", r.variant, r.run), r.report.to_csv()));
                for line in r.report.summary_csv().lines().skip(1) {
                    let _ = writeln!(summary, "{},{},{line}", r.variant, r.run);
                }
            }
            files.push(("summary.csv".to_string(), summary));
        }
    }
    for (name, text) in &files {
        write(dir.join(name), text)?;
    }
    Ok(files.into_iter().map(|(n, _)| n).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse() {
        for name in PRESETS {
            let m = preset(name).unwrap();
            assert_eq!(m.experiment, name);
        }
        let interp = preset("triangle-interp").unwrap();
        assert!(matches!(&interp.data, DataConfig::Triangle { test_m, .. } if test_m == &[2]));
        let extrap = preset("triangle-extrap").unwrap();
        assert!(matches!(&extrap.data, DataConfig::Triangle { test_m, .. } if test_m == &[2, 3]));
        assert!(matches!(preset("nope"), Err(Error::UnknownExperiment(_))));
    }

    #[test]
    fn cycle_pairs_are_balanced_and_relabeled() {
        let m = preset("convergence").unwrap().scaled(0.1).unwrap();
        let Dataset::Nodes { train, test } = build_dataset(&m).unwrap() else {
            panic!("expected node data")
        };
        assert_eq!(train.len(), 4);
        assert_eq!(train.iter().map(|e| e.labels[0]).sum::<usize>(), 2);
        let test = &test[0].1;
        for (a, b) in train.iter().zip(test) {
            assert_eq!(a.labels, b.labels);
            assert!(crate::graph::are_isomorphic(&a.graph, &b.graph).unwrap());
        }
    }

    #[test]
    fn tiny_run_is_deterministic() {
        let mut m = preset("triangle-extrap").unwrap().scaled(0.01).unwrap();
        m.eval.runs = 1;
        m.eval.resamples = 3;
        m.eval.invariance_seeds = 1;
        if let DataConfig::Triangle { nodes, .. } = &mut m.data {
            *nodes = 20;
        }
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a"), dir.path().join("b"));
        let files = write_outcome(&m, &run(&m).unwrap(), &a).unwrap();
        write_outcome(&m, &run(&m).unwrap(), &b).unwrap();
        assert!(files.contains(&"invariance_siri_s0.csv".to_string()));
        for f in files {
            assert_eq!(fs::read(a.join(&f)).unwrap(), fs::read(b.join(&f)).unwrap(), "{f}");
        }
        let summary = fs::read_to_string(a.join("summary.csv")).unwrap();
        let Dataset::Nodes { train, .. } = build_dataset(&m).unwrap() else {
            panic!("expected node data")
        };
        write_dataset(&build_dataset(&m).unwrap(), &dir.path().join("data")).unwrap();
        let read = read_graph_dir(&dir.path().join("data/train")).unwrap();
        assert_eq!(read, train.iter().map(|e| e.graph.clone()).collect::<Vec<_>>());
        assert!(summary.contains("rni,mean,test-m3,"));
    }
}

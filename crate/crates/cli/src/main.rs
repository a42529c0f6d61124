//! `uidgnn`: generate data, train, evaluate and reproduce experiments.
//!
//! Exit status: 0 success, 1 usage error, 2 invalid input or configuration,
//! 3 a verification check failed.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use uidgnn_core::diffmath::{checkpoint, primitive_suite};
use uidgnn_core::experiments::{self, build_dataset, read_graph_dir, Dataset, ExperimentManifest, Outcome, Variant};
use uidgnn_core::gnn::ModelParams;
use uidgnn_core::graph::io;
use uidgnn_core::invariance::{set_invariance_report, ResampleScope};
use uidgnn_core::oracles::suite::{run_all, SuiteConfig};
use uidgnn_core::separation::{calibrate_epsilon, judge_pair, SuiteReport};
use uidgnn_core::training::{model_grad_check, train, train_siamese, Example, SiamesePair};
use uidgnn_core::{seed, Error};

/// Default output root when `--out` is not given.
const OUT_ENV: &str = "UIDGNN_OUT";
const PRIMITIVE_TOLERANCE: f64 = 1e-6;
const MODEL_TOLERANCE: f64 = 1e-4;

#[derive(Parser)]
#[command(name = "uidgnn", version, about = "GNNs with random node identifiers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the graphs, labels and pair lists described by a manifest.
    GenData {
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one model; writes checkpoint.txt, metrics.csv and manifest.cfg.
    Train {
        manifest: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Prediction-flip ratios of a checkpoint under identifier resampling.
    EvalInvariance {
        /// Checkpoint written by `train`; its manifest.cfg must sit beside it.
        #[arg(long)]
        checkpoint: PathBuf,
        /// Directory of `.graph` files.
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long, short = 't', default_value_t = 200)]
        resamples: usize,
        #[arg(long, default_value_t = 3)]
        seeds: usize,
        #[arg(long, default_value_t = ResampleScope::TargetRow)]
        scope: ResampleScope,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Separation verdicts of a checkpoint on a pair list.
    EvalPairs {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long, short = 's', default_value_t = 16)]
        samples: usize,
        /// Threshold; calibrated per pair from relabeled copies when absent.
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Property suites of the symbolic identifier constructions.
    OracleCheck {
        /// Where counterexample graphs are written.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Finite-difference verification of every tape primitive and the model.
    GradCheck {
        #[arg(long, default_value_t = 20)]
        cases: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run a canned experiment or a manifest.
    Reproduce {
        /// One of triangle-interp, triangle-extrap, convergence, separation.
        name: String,
        /// Replaces the canned manifest.
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Multiplies epochs and dataset sizes.
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Invalid(Error),
    Check(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Invalid(e)
    }
}

type CmdResult<T = ()> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Check(msg)) => {
            eprintln!("check failed: {msg}");
            ExitCode::from(3)
        }
    }
}

fn dispatch(command: Command) -> CmdResult {
    match command {
        Command::GenData { manifest, out } => gen_data(&manifest, &out),
        Command::Train { manifest, out } => train_cmd(&manifest, out),
        Command::EvalInvariance {
            checkpoint,
            train,
            test,
            resamples,
            seeds,
            scope,
            seed,
            out,
        } => eval_invariance(&checkpoint, &train, &test, resamples, seeds, scope, seed, &out),
        Command::EvalPairs {
            checkpoint,
            pairs,
            samples,
            epsilon,
            seed,
            out,
        } => eval_pairs(&checkpoint, &pairs, samples, epsilon, seed, &out),
        Command::OracleCheck { out, seed } => oracle_check(&out, seed),
        Command::GradCheck { cases, seed } => grad_check(cases, seed),
        Command::Reproduce {
            name,
            manifest,
            scale,
            out,
        } => reproduce(&name, manifest.as_deref(), scale, out),
    }
}

fn read_manifest(path: &Path) -> Result<ExperimentManifest, Error> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    ExperimentManifest::parse(&text, &path.display().to_string())
}

fn write_file(path: &Path, text: &str) -> Result<(), Error> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn out_root(out: Option<PathBuf>, name: &str) -> PathBuf {
    out.unwrap_or_else(|| {
        let root = std::env::var_os(OUT_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("runs"));
        root.join(name)
    })
}

fn gen_data(manifest: &Path, out: &Path) -> CmdResult {
    let m = read_manifest(manifest)?;
    experiments::write_dataset(&build_dataset(&m)?, out)?;
    println!("wrote {} data to {}", m.experiment, out.display());
    Ok(())
}

fn train_cmd(manifest: &Path, out: Option<PathBuf>) -> CmdResult {
    let m = read_manifest(manifest)?;
    let out = out_root(out, &m.experiment);
    let cfg = m.run_config(
        Variant {
            mode: m.train.mode,
            k: m.train.k,
        },
        0,
    );
    let (params, history) = match build_dataset(&m)? {
        Dataset::Nodes { train: set, test } => {
            let monitor: &[Example] = test.first().map(|(_, s)| s.as_slice()).unwrap_or(&[]);
            train(&set, monitor, &cfg, &m.model)?
        }
        Dataset::Pairs(pairs) => {
            let pairs: Vec<SiamesePair> = pairs
                .into_iter()
                .map(|p| SiamesePair {
                    first: p.first,
                    second: p.second,
                })
                .collect();
            let (model, history) = train_siamese(&pairs, &m.model, &cfg)?;
            (model.params, history)
        }
    };
    write_file(&out.join("checkpoint.txt"), &params.checkpoint_text())?;
    write_file(&out.join("metrics.csv"), &history.to_csv())?;
    write_file(&out.join("manifest.cfg"), &m.to_kv())?;
    if let Some(last) = history.last() {
        println!(
            "epoch {}: loss {:.6} train_acc {:.4}{}",
            last.epoch,
            last.loss.total,
            last.train_acc,
            last.test_acc.map(|a| format!(" test_acc {a:.4}")).unwrap_or_default()
        );
    }
    println!("wrote {}", out.display());
    Ok(())
}

/// Loads a checkpoint and the manifest saved next to it.
fn load_checkpoint(path: &Path) -> Result<(ExperimentManifest, ModelParams), Error> {
    let manifest = path.with_file_name("manifest.cfg");
    let m = read_manifest(&manifest)?;
    let params = ModelParams::from_checkpoint(&m.model, checkpoint::load(path)?)?;
    Ok((m, params))
}

#[allow(clippy::too_many_arguments)]
fn eval_invariance(
    checkpoint: &Path,
    train: &Path,
    test: &Path,
    resamples: usize,
    seeds: usize,
    scope: ResampleScope,
    master: u64,
    out: &Path,
) -> CmdResult {
    let (m, params) = load_checkpoint(checkpoint)?;
    let seeds: Vec<u64> = (0..seeds as u64).map(|i| seed::derive_index(master, i)).collect();
    let report = set_invariance_report(
        &params,
        &read_graph_dir(train)?,
        &read_graph_dir(test)?,
        m.train.mode,
        resamples,
        &seeds,
        scope,
    )?;
    write_file(out, &report.to_csv())?;
    for line in report.summary_lines() {
        println!("{line}");
    }
    println!(
        "train {:.4} ± {:.4}, test {:.4} ± {:.4}",
        report.train.0, report.train.1, report.test.0, report.test.1
    );
    Ok(())
}

fn eval_pairs(
    checkpoint: &Path,
    list: &Path,
    samples: usize,
    epsilon: Option<f64>,
    master: u64,
    out: &Path,
) -> CmdResult {
    let (m, params) = load_checkpoint(checkpoint)?;
    let family = list.file_stem().and_then(|s| s.to_str()).unwrap_or("pairs").to_string();
    let mut report = SuiteReport::default();
    for (i, entry) in io::read_pair_list(list)?.iter().enumerate() {
        let (g1, g2) = (io::read_graph(&entry.first)?, io::read_graph(&entry.second)?);
        let pair_seed = seed::derive_index(master, i as u64);
        let verdict = match epsilon {
            Some(eps) => Ok(eps),
            None => calibrate_epsilon(
                &params,
                &[&g1, &g2],
                m.train.mode,
                samples,
                seed::derive(pair_seed, "calibrate"),
            ),
        }
        .and_then(|eps| {
            judge_pair(
                &params,
                &g1,
                &g2,
                m.train.mode,
                samples,
                eps,
                seed::derive(pair_seed, "judge"),
            )
        });
        report.push(&family, i, verdict)?;
    }
    write_file(out, &report.to_csv())?;
    println!(
        "separated {}/{} ({})",
        report.separated(),
        report.rows.len(),
        if report.all_reliable() {
            "all reliable"
        } else {
            "unreliable verdicts present"
        }
    );
    Ok(())
}

fn oracle_check(out: &Path, seed: u64) -> CmdResult {
    let checks = run_all(&SuiteConfig {
        seed,
        ..SuiteConfig::default()
    })?;
    let mut failed = Vec::new();
    for check in &checks {
        println!(
            "{} {} ({} cases)",
            if check.passed { "PASS" } else { "FAIL" },
            check.name,
            check.cases
        );
        if let Some(g) = &check.counterexample {
            let path = out.join(format!("counterexample_{}.graph", check.name.replace(' ', "_")));
            fs::create_dir_all(out).map_err(|source| Error::Io {
                path: out.to_path_buf(),
                source,
            })?;
            io::write_graph(g, &path)?;
            println!("  counterexample written to {}", path.display());
        }
        if !check.passed {
            failed.push(check.name.clone());
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Check(failed.join(", ")))
    }
}

fn grad_check(cases: usize, seed: u64) -> CmdResult {
    let mut results: Vec<(String, f64, f64)> = primitive_suite(cases, seed, 1e-5)?
        .into_iter()
        .map(|c| (c.name.to_string(), c.max_rel_error, PRIMITIVE_TOLERANCE))
        .collect();
    for (readout, report) in model_grad_check(seed, 0.0, 1e-6)? {
        results.push((format!("gnn-{readout}"), report.max_rel_error, MODEL_TOLERANCE));
    }
    let mut failed = Vec::new();
    for (name, err, tolerance) in &results {
        let ok = err < tolerance;
        println!(
            "{} {name} max relative error {err:.3e}",
            if ok { "PASS" } else { "FAIL" }
        );
        if !ok {
            failed.push(name.clone());
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Check(failed.join(", ")))
    }
}

fn reproduce(name: &str, manifest: Option<&Path>, scale: f64, out: Option<PathBuf>) -> CmdResult {
    let m = match manifest {
        Some(path) => read_manifest(path)?,
        None => experiments::preset(name)?,
    }
    .scaled(scale)?;
    let out = out_root(out, name);
    let outcome = experiments::run(&m)?;
    let files = experiments::write_outcome(&m, &outcome, &out)?;
    match &outcome {
        Outcome::Nodes(o) => {
            let mut sets: Vec<&str> = Vec::new();
            for row in &o.accuracy {
                if !sets.contains(&row.set.as_str()) {
                    sets.push(&row.set);
                }
            }
            for &variant in &m.eval.variants {
                for set in &sets {
                    let (mean, std) = o.accuracy_stats(variant, set);
                    println!("{variant} {set}: {:.2} ± {:.2}", 100.0 * mean, 100.0 * std);
                }
            }
        }
        Outcome::Separation(runs) => {
            for r in runs {
                println!(
                    "{} run {}: separated {}/{}{}",
                    r.variant,
                    r.run,
                    r.report.separated(),
                    r.report.rows.len(),
                    if r.report.all_reliable() {
                        ""
                    } else {
                        " (unreliable verdicts present)"
                    }
                );
            }
        }
    }
    println!("wrote {} files to {}", files.len(), out.display());
    Ok(())
}

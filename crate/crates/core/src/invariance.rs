//! Empirical identifier invariance: how often resampling a node's random
//! identifier flips the model's hard prediction.

use std::fmt::Write as _;

use ndarray::Array2;

use crate::diffmath::{scatter_neighbors, Tensor};
use crate::error::{Error, Result};
use crate::gnn::{augment_features, Augmentation, ModelParams, Readout};
use crate::graph::Graph;
use crate::seed;
use crate::training::{predict_classes, TrainMode};

/// Which identifiers are redrawn per resample.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ResampleScope {
    /// Only the target node's row; all other rows stay at the reference draw.
    #[default]
    TargetRow,
    /// The whole identifier matrix.
    WholeMatrix,
}

impl std::str::FromStr for ResampleScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "target-row" => Ok(ResampleScope::TargetRow),
            "whole-matrix" => Ok(ResampleScope::WholeMatrix),
            _ => Err(Error::param("scope", format!("unknown resample scope `{s}`"))),
        }
    }
}

impl std::fmt::Display for ResampleScope {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ResampleScope::TargetRow => "target-row",
            ResampleScope::WholeMatrix => "whole-matrix",
        })
    }
}

/// Reference draw `R*` for a graph under `seed`.
fn reference_input(params: &ModelParams, g: &Graph, seed: u64) -> Result<Tensor> {
    let r = params
        .config
        .rnf_spec()
        .stream(seed::derive(seed, "reference"))
        .draw_at(0, g.n());
    augment_features(g, Augmentation::Random(&r))
}

/// Replacement identifier number `t` for `node`; independent of `T`.
fn replacement_row(params: &ModelParams, node: usize, t: usize, seed: u64) -> Tensor {
    params
        .config
        .rnf_spec()
        .stream(seed::derive_index(seed::derive(seed, "resample"), node as u64))
        .draw_at(t as u64, 1)
}

/// Layer activations of the reference input, cached for local recomputation.
struct Reference {
    /// `H^(0) ..= H^(L)`.
    layers: Vec<Tensor>,
    /// `A·H^(l)` for `l < L`.
    aggs: Vec<Tensor>,
    pred: Vec<usize>,
}

impl Reference {
    fn new(params: &ModelParams, g: &Graph, h0: Tensor) -> Self {
        let mut layers = vec![h0];
        let mut aggs = Vec::new();
        for conv in &params.convs {
            let h = layers.last().expect("input layer");
            let agg = scatter_neighbors(h, g.edges());
            let mut pre: Array2<f64> = h.array().dot(conv.w_self.array());
            pre += &agg.array().dot(conv.w_neigh.array());
            pre += conv.bias.array();
            pre.mapv_inplace(|v| v.max(0.0));
            aggs.push(agg);
            layers.push(Tensor::from_array(pre));
        }
        let pred = predict_classes(&params.readout(layers.last().expect("output layer")));
        Reference { layers, aggs, pred }
    }
}

/// Flip counts of `node`'s prediction over `T` replacements of its input
/// row, recomputing only the rows that can both change and reach `node`.
fn local_flips(params: &ModelParams, g: &Graph, reference: &Reference, node: usize, rows: &[Tensor]) -> usize {
    let t_count = rows.len();
    let depth = params.convs.len();
    let dist = g.distances_from(node);
    let d0 = reference.layers[0].cols();

    // Layer 0: only `node` changes.
    let mut batch = Array2::<f64>::zeros((t_count, d0));
    let x = reference.layers[0].row(node);
    let feat = d0 - rows[0].cols();
    for (t, r) in rows.iter().enumerate() {
        let mut dst = batch.row_mut(t);
        for j in 0..feat {
            dst[j] = x[j];
        }
        for (j, &v) in r.row(0).iter().enumerate() {
            dst[feat + j] = v;
        }
    }
    let mut members: Vec<usize> = vec![node];
    let mut slot = vec![usize::MAX; g.n()];
    slot[node] = 0;

    for (l, conv) in params.convs.iter().enumerate() {
        let layer = l + 1;
        let radius = layer.min(depth - layer);
        let next: Vec<usize> = (0..g.n()).filter(|&u| dist[u] <= radius).collect();
        let prev_h = &reference.layers[l];
        let prev_agg = &reference.aggs[l];
        let width = prev_h.cols();
        let m = next.len();
        let prev_m = members.len();
        let mut own = Array2::<f64>::zeros((t_count * m, width));
        let mut agg = Array2::<f64>::zeros((t_count * m, width));
        for t in 0..t_count {
            for (i, &u) in next.iter().enumerate() {
                let row = t * m + i;
                let mut o = own.row_mut(row);
                if dist[u] < layer {
                    o.assign(&batch.row(t * prev_m + slot[u]));
                } else {
                    for (dst, &v) in o.iter_mut().zip(prev_h.row(u)) {
                        *dst = v;
                    }
                }
                let mut a = agg.row_mut(row);
                for (dst, &v) in a.iter_mut().zip(prev_agg.row(u)) {
                    *dst = v;
                }
                for &w in g.neighbors(u) {
                    if dist[w] < layer {
                        let changed = batch.row(t * prev_m + slot[w]);
                        for ((dst, &c), &r) in a.iter_mut().zip(changed.iter()).zip(prev_h.row(w)) {
                            *dst += c - r;
                        }
                    }
                }
            }
        }
        let mut pre = own.dot(conv.w_self.array());
        pre += &agg.dot(conv.w_neigh.array());
        pre += conv.bias.array();
        pre.mapv_inplace(|v| v.max(0.0));
        for &u in &members {
            slot[u] = usize::MAX;
        }
        for (i, &u) in next.iter().enumerate() {
            slot[u] = i;
        }
        members = next;
        batch = pre;
    }
    // `members == [node]`, one row per replacement.
    let logits = params.readout(&Tensor::from_array(batch));
    predict_classes(&logits)
        .iter()
        .filter(|&&p| p != reference.pred[node])
        .count()
}

/// Flip counts for graph-level readout, where every node reaches the
/// prediction: full forward per replacement.
fn full_flips(params: &ModelParams, g: &Graph, h0: &Tensor, base: usize, node: usize, rows: &[Tensor]) -> usize {
    let feat = h0.cols() - rows[0].cols();
    let mut input = h0.clone();
    rows.iter()
        .filter(|r| {
            for (j, &v) in r.row(0).iter().enumerate() {
                input.set(node, feat + j, v);
            }
            predict_classes(&params.readout(&params.embed(g.edges(), &input)))[0] != base
        })
        .count()
}

/// Fraction of `resamples` redraws of `node`'s identifier row (all other
/// rows fixed at the reference draw) that change `node`'s hard prediction.
pub fn node_invariance_ratio(params: &ModelParams, g: &Graph, node: usize, resamples: usize, seed: u64) -> Result<f64> {
    if node >= g.n() {
        return Err(Error::param("node", format!("node {node} outside {} nodes", g.n())));
    }
    Ok(graph_ratios(
        params,
        g,
        TrainMode::Siri,
        resamples,
        seed,
        ResampleScope::TargetRow,
        Some(node),
    )?[0])
}

/// Per-node invariance ratios of one graph.
pub fn graph_invariance_ratios(
    params: &ModelParams,
    g: &Graph,
    mode: TrainMode,
    resamples: usize,
    seed: u64,
    scope: ResampleScope,
) -> Result<Vec<f64>> {
    graph_ratios(params, g, mode, resamples, seed, scope, None)
}

fn graph_ratios(
    params: &ModelParams,
    g: &Graph,
    mode: TrainMode,
    resamples: usize,
    seed: u64,
    scope: ResampleScope,
    only: Option<usize>,
) -> Result<Vec<f64>> {
    if resamples == 0 {
        return Err(Error::param("resamples", "must be at least 1"));
    }
    let nodes: Vec<usize> = match only {
        Some(v) => vec![v],
        None => (0..g.n()).collect(),
    };
    // Without identifier columns every resample reproduces the reference input.
    if mode == TrainMode::Constant || params.config.rnf_dim == 0 {
        return Ok(vec![0.0; nodes.len()]);
    }
    let h0 = reference_input(params, g, seed)?;
    let rate = |flips: usize| flips as f64 / resamples as f64;
    match scope {
        ResampleScope::TargetRow => {
            let reference = Reference::new(params, g, h0.clone());
            Ok(nodes
                .iter()
                .map(|&v| {
                    let rows: Vec<Tensor> = (0..resamples).map(|t| replacement_row(params, v, t, seed)).collect();
                    rate(match params.config.readout {
                        Readout::Node => local_flips(params, g, &reference, v, &rows),
                        Readout::GraphSumMlp => full_flips(params, g, &h0, reference.pred[0], v, &rows),
                    })
                })
                .collect())
        }
        ResampleScope::WholeMatrix => {
            let base = predict_classes(&params.forward(g, &h0)?.logits);
            let stream = params.config.rnf_spec().stream(seed::derive(seed, "whole"));
            let mut flips = vec![0usize; g.n()];
            for t in 0..resamples {
                let r = stream.draw_at(t as u64, g.n());
                let pred = predict_classes(
                    &params
                        .forward(g, &augment_features(g, Augmentation::Random(&r))?)?
                        .logits,
                );
                for (v, f) in flips.iter_mut().enumerate() {
                    let idx = if pred.len() == 1 { 0 } else { v };
                    if pred[idx] != base[idx] {
                        *f += 1;
                    }
                }
            }
            Ok(nodes.iter().map(|&v| rate(flips[v])).collect())
        }
    }
}

/// Node ratios of one seed, per graph, for both sets.
#[derive(Clone, Debug, PartialEq)]
pub struct SeedInvariance {
    pub seed: u64,
    pub train: Vec<Vec<f64>>,
    pub test: Vec<Vec<f64>>,
    pub train_mean: f64,
    pub test_mean: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InvarianceReport {
    pub resamples: usize,
    pub per_seed: Vec<SeedInvariance>,
    /// Mean and sample standard deviation over seeds of the set means.
    pub train: (f64, f64),
    pub test: (f64, f64),
}

fn mean_over_nodes(ratios: &[Vec<f64>]) -> f64 {
    let count: usize = ratios.iter().map(Vec::len).sum();
    if count == 0 {
        return 0.0;
    }
    ratios.iter().flatten().sum::<f64>() / count as f64
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Node ratios over both sets under each seed; graph `i` of a set uses
/// the seed derived from `(seed, set, i)`.
pub fn set_invariance_report(
    params: &ModelParams,
    train: &[Graph],
    test: &[Graph],
    mode: TrainMode,
    resamples: usize,
    seeds: &[u64],
    scope: ResampleScope,
) -> Result<InvarianceReport> {
    if seeds.is_empty() {
        return Err(Error::param("seeds", "need at least one seed"));
    }
    let mut per_seed = Vec::with_capacity(seeds.len());
    for &s in seeds {
        let run = |set: &[Graph], tag: &str| -> Result<Vec<Vec<f64>>> {
            let base = seed::derive(s, tag);
            set.iter()
                .enumerate()
                .map(|(i, g)| {
                    graph_invariance_ratios(params, g, mode, resamples, seed::derive_index(base, i as u64), scope)
                })
                .collect()
        };
        let train_r = run(train, "train")?;
        let test_r = run(test, "test")?;
        per_seed.push(SeedInvariance {
            seed: s,
            train_mean: mean_over_nodes(&train_r),
            test_mean: mean_over_nodes(&test_r),
            train: train_r,
            test: test_r,
        });
    }
    let train_means: Vec<f64> = per_seed.iter().map(|p| p.train_mean).collect();
    let test_means: Vec<f64> = per_seed.iter().map(|p| p.test_mean).collect();
    Ok(InvarianceReport {
        resamples,
        train: mean_std(&train_means),
        test: mean_std(&test_means),
        per_seed,
    })
}

impl InvarianceReport {
    /// `set,node,ratio` rows with node ratios averaged over seeds (node ids
    /// are `graph:node`), then `mean` and `std` summary rows per set.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("set,node,ratio\n");
        let seeds = self.per_seed.len() as f64;
        for (name, pick) in [("train", 0), ("test", 1)] {
            let sets: Vec<&Vec<Vec<f64>>> = self
                .per_seed
                .iter()
                .map(|p| if pick == 0 { &p.train } else { &p.test })
                .collect();
            if let Some(first) = sets.first() {
                for (gi, graph) in first.iter().enumerate() {
                    for v in 0..graph.len() {
                        let avg = sets.iter().map(|s| s[gi][v]).sum::<f64>() / seeds;
                        let _ = writeln!(out, "{name},{gi}:{v},{avg:.6}");
                    }
                }
            }
        }
        for (name, (mean, std)) in [("train", self.train), ("test", self.test)] {
            let _ = writeln!(out, "{name},mean,{mean:.6}");
            let _ = writeln!(out, "{name},std,{std:.6}");
        }
        out
    }

    /// One line per seed.
    pub fn summary_lines(&self) -> Vec<String> {
        self.per_seed
            .iter()
            .map(|p| {
                format!(
                    "seed {}: train {:.4} test {:.4} (T={})",
                    p.seed, p.train_mean, p.test_mean, self.resamples
                )
            })
            .collect()
    }
}

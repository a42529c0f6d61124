//! Training loops for the constant, RNI and SIRI regimes.

mod config;
mod history;
mod loss;
mod siamese;
mod step;

pub use config::{Task, TrainConfig, TrainMode};
pub use history::{EpochRecord, TrainHistory, METRICS_HEADER};
pub use loss::{accuracy_counts, contrastive_loss, predict_classes, task_loss, LossBreakdown};
pub use siamese::{train_siamese, SiameseHead, SiameseModel, SiamesePair};
pub use step::{StepReport, Trainer};

use rand::seq::SliceRandom;

use crate::diffmath::{grad_check, GradCheckReport, Tensor};
use crate::error::{Error, Result};
use crate::gnn::{GraphOperand, ModelConfig, ModelParams, Readout};
use crate::graph::Graph;
use crate::seed;

/// One training or test instance: a graph and its class labels.
///
/// Node tasks carry one label per node, graph tasks a single label.
#[derive(Clone, Debug)]
pub struct Example {
    pub graph: Graph,
    pub labels: Vec<usize>,
    pub(crate) operand: GraphOperand,
}

impl Example {
    pub fn new(graph: Graph, labels: Vec<usize>) -> Self {
        let operand = GraphOperand::new(&graph);
        Example { graph, labels, operand }
    }

    fn check(&self, task: Task, model: &ModelConfig) -> Result<()> {
        let want = match task {
            Task::NodeBinary => self.graph.n(),
            Task::GraphBinary => 1,
            Task::PairSiamese => return Err(Error::param("task", "pair-siamese uses train_siamese")),
        };
        if self.labels.len() != want {
            return Err(Error::dim(
                "example",
                format!("{} labels, task {task} needs {want}", self.labels.len()),
            ));
        }
        let classes = model.out_dim.max(2);
        if let Some(&label) = self.labels.iter().find(|&&l| l >= classes) {
            return Err(Error::LabelOutOfRange { label, classes });
        }
        Ok(())
    }
}

/// Checks that the readout produces what `task` is scored on.
pub(crate) fn check_task(task: Task, model: &ModelConfig) -> Result<()> {
    let ok = match task {
        Task::NodeBinary => model.readout == Readout::Node,
        Task::GraphBinary => model.readout == Readout::GraphSumMlp,
        Task::PairSiamese => true,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::param(
            "readout",
            format!("readout {} does not fit task {task}", model.readout),
        ))
    }
}

/// Trains a fresh model; see [`train_with`].
pub fn train(
    dataset: &[Example],
    test: &[Example],
    cfg: &TrainConfig,
    model: &ModelConfig,
) -> Result<(ModelParams, TrainHistory)> {
    train_with(dataset, test, cfg, model, |_, _| Ok(()))
}

/// Per-graph updates over `dataset` for `cfg.epochs` epochs, visiting the
/// graphs in a seeded shuffled order each epoch. After every epoch both sets
/// are scored and `on_epoch` may annotate the record.
pub fn train_with<F>(
    dataset: &[Example],
    test: &[Example],
    cfg: &TrainConfig,
    model: &ModelConfig,
    mut on_epoch: F,
) -> Result<(ModelParams, TrainHistory)>
where
    F: FnMut(&ModelParams, &mut EpochRecord) -> Result<()>,
{
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut trainer = Trainer::new(model, cfg)?;
    for ex in dataset.iter().chain(test) {
        ex.check(cfg.task, model)?;
    }
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut order_rng = seed::rng(seed::derive(cfg.seed, "order"));
    let eval_seed = seed::derive(cfg.seed, "eval");
    let mut history = TrainHistory::default();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut order_rng);
        let mut sum = LossBreakdown::default();
        for &i in &order {
            let report = trainer.step(&dataset[i])?;
            sum.task += report.loss.task;
            sum.contrastive += report.loss.contrastive;
        }
        let steps = dataset.len() as f64;
        let loss = LossBreakdown::new(sum.task / steps, sum.contrastive / steps, cfg.contrastive_weight);
        let mut record = EpochRecord {
            epoch,
            loss,
            train_acc: evaluate(&trainer.params, dataset, cfg.mode, seed::derive(eval_seed, "train"))?,
            test_acc: if test.is_empty() {
                None
            } else {
                Some(evaluate(
                    &trainer.params,
                    test,
                    cfg.mode,
                    seed::derive(eval_seed, "test"),
                )?)
            },
            invariance: None,
        };
        on_epoch(&trainer.params, &mut record)?;
        history.push(record)?;
    }
    Ok((trainer.params, history))
}

/// Finite-difference check of the full SIRI objective
/// `task(R1) + weight * mse(H1, H2)` with respect to every model tensor, for
/// the fixed inputs `h1` and `h2`.
pub fn loss_grad_check(
    params: &ModelParams,
    ex: &Example,
    h1: &Tensor,
    h2: &Tensor,
    weight: f64,
    h: f64,
) -> Result<GradCheckReport> {
    let operand = GraphOperand::new(&ex.graph);
    let tensors: Vec<Tensor> = params.tensors().into_iter().cloned().collect();
    grad_check(
        |tape, vars| {
            let bound = params.bind_vars(vars)?;
            let x1 = tape.constant(h1.clone());
            let x2 = tape.constant(h2.clone());
            let a = params.forward_tape(tape, &bound, &operand, x1)?;
            let b = params.forward_tape(tape, &bound, &operand, x2)?;
            let task = loss::task_loss_tape(tape, a.logits, &ex.labels)?;
            let mse = tape.mse(a.embeddings, b.embeddings)?;
            let mse = tape.scale(mse, weight);
            tape.add(task, mse)
        },
        &tensors,
        h,
    )
}

/// The model-level gradient check: [`loss_grad_check`] of a six-layer
/// network on a five-node graph, once per readout. Biases are drawn in
/// `[-0.5, 0.5]` instead of zero so that no pre-activation sits exactly on
/// the ReLU kink, where the central difference sees half a slope.
///
/// With `weight > 0` the contrastive term of the unnormalized sum network
/// reaches values near 100, and components whose true gradient is exactly
/// zero (a last-layer bias cancels in `H1 - H2`) then show roundoff of about
/// `1e-8` against the `1e-8` floor of the relative error; use `weight = 0`
/// for a pass/fail verdict.
pub fn model_grad_check(seed: u64, weight: f64, h: f64) -> Result<Vec<(Readout, GradCheckReport)>> {
    use crate::gnn::{augment_features, Augmentation};
    use crate::graph::{generate, label_triangles, GeneratorSpec};
    use rand::Rng;

    let g = generate(&GeneratorSpec::barabasi_albert(5, 2, seed))?;
    let mut out = Vec::new();
    for (readout, labels) in [
        (Readout::Node, label_triangles(&g).as_targets()),
        (Readout::GraphSumMlp, vec![1]),
    ] {
        let cfg = ModelConfig {
            layers: 6,
            hidden_dim: 6,
            rnf_dim: 3,
            readout,
            ..ModelConfig::default()
        };
        let mut params = ModelParams::init(&cfg, seed)?;
        let names = params.names();
        let mut rng = seed::rng(seed::derive(seed, "biases"));
        for (name, t) in names.iter().zip(params.tensors_mut()) {
            if name.ends_with("bias") {
                for v in t.as_mut_slice() {
                    *v = rng.random_range(-0.5..0.5);
                }
            }
        }
        let stream = cfg.rnf_spec().stream(seed::derive(seed, "inputs"));
        let h1 = augment_features(&g, Augmentation::Random(&stream.draw_at(0, g.n())))?;
        let h2 = augment_features(&g, Augmentation::Random(&stream.draw_at(1, g.n())))?;
        let ex = Example::new(g.clone(), labels);
        out.push((readout, loss_grad_check(&params, &ex, &h1, &h2, weight, h)?));
    }
    Ok(out)
}

/// Input matrix for scoring example `index` of a set: zeros in constant
/// mode, otherwise a draw fixed by `(seed, index)`.
pub fn eval_input(params: &ModelParams, g: &Graph, mode: TrainMode, seed: u64, index: usize) -> Result<Tensor> {
    use crate::gnn::{augment_features, Augmentation};
    let spec = params.config.rnf_spec();
    match mode {
        TrainMode::Constant => augment_features(g, Augmentation::Constant { width: spec.dim }),
        _ => {
            let r = spec.stream(seed).draw_at(index as u64, g.n());
            augment_features(g, Augmentation::Random(&r))
        }
    }
}

/// Accuracy over all labels of `set`, each graph scored under one
/// identifier draw.
pub fn evaluate(params: &ModelParams, set: &[Example], mode: TrainMode, seed: u64) -> Result<f64> {
    let (mut correct, mut total) = (0usize, 0usize);
    for (i, ex) in set.iter().enumerate() {
        let h0 = eval_input(params, &ex.graph, mode, seed, i)?;
        let out = params.forward(&ex.graph, &h0)?;
        let (c, t) = accuracy_counts(&out.logits, &ex.labels)?;
        correct += c;
        total += t;
    }
    Ok(if total == 0 { 0.0 } else { correct as f64 / total as f64 })
}

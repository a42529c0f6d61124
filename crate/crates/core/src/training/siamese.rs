//! Pairwise training: a shared GNN embeds both graphs of a pair and a
//! learned affine map of their cosine similarity scores "same graph".

use rand::seq::SliceRandom;

use super::{check_task, EpochRecord, LossBreakdown, Task, TrainConfig, TrainHistory, TrainMode};
use crate::diffmath::{AdamConfig, AdamState, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::gnn::{augment_features, Augmentation, BoundParams, GraphOperand, ModelConfig, ModelParams, RnfStream};
use crate::graph::Graph;
use crate::seed;

/// Two graphs the model should tell apart.
#[derive(Clone, Debug)]
pub struct SiamesePair {
    pub first: Graph,
    pub second: Graph,
}

/// `logit = scale * cos(e1, e2) + bias`.
#[derive(Clone, Debug, PartialEq)]
pub struct SiameseHead {
    pub scale: Tensor,
    pub bias: Tensor,
}

impl Default for SiameseHead {
    fn default() -> Self {
        SiameseHead {
            scale: Tensor::scalar(5.0),
            bias: Tensor::scalar(-2.5),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SiameseModel {
    pub params: ModelParams,
    pub head: SiameseHead,
}

struct Branch {
    nodes: Var,
    pooled: Var,
}

fn branch(
    tape: &mut Tape,
    params: &ModelParams,
    bound: &BoundParams,
    g: &Graph,
    op: &GraphOperand,
    r: Option<&Tensor>,
) -> Result<Branch> {
    let aug = match r {
        Some(r) => Augmentation::Random(r),
        None => Augmentation::Constant {
            width: params.config.rnf_dim,
        },
    };
    let x = tape.constant(augment_features(g, aug)?);
    let nodes = params.forward_tape(tape, bound, op, x)?.embeddings;
    let pooled = tape.row_sum_pool(nodes, op.pool.clone(), 1)?;
    Ok(Branch { nodes, pooled })
}

/// Trains on `pairs` with `cfg.task = pair-siamese`. Each step compares each
/// graph with itself under two identifier draws (target "same") and the two
/// graphs with each other (target "different"); in SIRI mode the
/// final-layer embeddings of each graph's two draws are also pulled together.
/// Steps whose embedding has zero norm are skipped.
pub fn train_siamese(
    pairs: &[SiamesePair],
    model: &ModelConfig,
    cfg: &TrainConfig,
) -> Result<(SiameseModel, TrainHistory)> {
    if pairs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if cfg.task != Task::PairSiamese {
        return Err(Error::param("task", "train_siamese needs task pair-siamese"));
    }
    cfg.validate()?;
    check_task(cfg.task, model)?;
    let mut sm = SiameseModel {
        params: ModelParams::init(model, seed::derive(cfg.seed, "init"))?,
        head: SiameseHead::default(),
    };
    let mut adam = AdamState::new(
        AdamConfig::with_lr(cfg.lr),
        sm.params.tensors().into_iter().chain([&sm.head.scale, &sm.head.bias]),
    );
    let mut rnf = model.rnf_spec().stream(seed::derive(cfg.seed, "rnf"));
    let ops: Vec<[GraphOperand; 2]> = pairs
        .iter()
        .map(|p| [GraphOperand::new(&p.first), GraphOperand::new(&p.second)])
        .collect();
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut order_rng = seed::rng(seed::derive(cfg.seed, "order"));
    let mut history = TrainHistory::default();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut order_rng);
        let (mut task, mut contrastive, mut correct, mut seen) = (0.0, 0.0, 0usize, 0usize);
        for &i in &order {
            if let Some((loss, c)) = siamese_step(&mut sm, &mut adam, &mut rnf, &pairs[i], &ops[i], cfg)? {
                task += loss.task;
                contrastive += loss.contrastive;
                correct += c;
                seen += 1;
            }
        }
        let steps = seen.max(1) as f64;
        history.push(EpochRecord {
            epoch,
            loss: LossBreakdown::new(task / steps, contrastive / steps, cfg.contrastive_weight),
            train_acc: correct as f64 / (3.0 * steps),
            test_acc: None,
            invariance: None,
        })?;
    }
    Ok((sm, history))
}

/// Returns the loss and the number of correctly judged comparisons, or
/// `None` when a cosine was undefined.
fn siamese_step(
    sm: &mut SiameseModel,
    adam: &mut AdamState,
    rnf: &mut RnfStream,
    pair: &SiamesePair,
    ops: &[GraphOperand; 2],
    cfg: &TrainConfig,
) -> Result<Option<(LossBreakdown, usize)>> {
    let graphs = [&pair.first, &pair.second];
    let draws: Vec<Option<Tensor>> = graphs
        .iter()
        .flat_map(|g| [g.n(), g.n()])
        .map(|n| (cfg.mode != TrainMode::Constant).then(|| rnf.next(n)))
        .collect();

    let mut tape = Tape::new();
    let bound = sm.params.bind(&mut tape);
    let scale = tape.param(sm.head.scale.clone());
    let bias = tape.param(sm.head.bias.clone());
    let mut branches = Vec::with_capacity(4);
    for (j, r) in draws.iter().enumerate() {
        let gi = j / 2;
        branches.push(branch(&mut tape, &sm.params, &bound, graphs[gi], &ops[gi], r.as_ref())?);
    }
    let comparisons = [(0, 1, 1.0), (2, 3, 1.0), (0, 2, 0.0)];
    let mut task = None;
    let mut correct = 0;
    for (a, b, target) in comparisons {
        let cos = match tape.cosine(branches[a].pooled, branches[b].pooled) {
            Ok(c) => c,
            Err(Error::UndefinedCosine) => return Ok(None),
            Err(e) => return Err(e),
        };
        let z = tape.matmul(cos, scale)?;
        let z = tape.add_bias_row(z, bias)?;
        if (tape.value(z).item() > 0.0) == (target > 0.5) {
            correct += 1;
        }
        let l = tape.bce_with_logits(z, vec![target].into())?;
        task = Some(match task {
            None => l,
            Some(acc) => tape.add(acc, l)?,
        });
    }
    let task = tape.scale(task.expect("three comparisons"), 1.0 / 3.0);
    let w = cfg.contrastive_weight;
    let (root, contrastive_value) = if cfg.mode == TrainMode::Siri {
        let c1 = tape.mse(branches[0].nodes, branches[1].nodes)?;
        let c2 = tape.mse(branches[2].nodes, branches[3].nodes)?;
        let c = tape.add(c1, c2)?;
        let c = tape.scale(c, 0.5);
        let weighted = tape.scale(c, w);
        (tape.add(task, weighted)?, tape.value(c).item())
    } else {
        (task, 0.0)
    };
    let loss = LossBreakdown::new(tape.value(task).item(), contrastive_value, w);

    let mut grads = tape.backward(root)?;
    let mut g: Vec<Tensor> = bound
        .vars()
        .iter()
        .zip(sm.params.tensors())
        .map(|(&v, p)| grads.take_or_zeros(v, p))
        .collect();
    g.push(grads.take_or_zeros(scale, &sm.head.scale));
    g.push(grads.take_or_zeros(bias, &sm.head.bias));
    let mut targets = sm.params.tensors_mut();
    targets.push(&mut sm.head.scale);
    targets.push(&mut sm.head.bias);
    adam.step(&mut targets, &g)?;
    Ok(Some((loss, correct)))
}

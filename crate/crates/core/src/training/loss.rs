use std::rc::Rc;

use crate::diffmath::{Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Loss of one step. `total = task + weight * contrastive` by construction.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossBreakdown {
    pub task: f64,
    pub contrastive: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn new(task: f64, contrastive: f64, weight: f64) -> Self {
        LossBreakdown {
            task,
            contrastive,
            total: task + weight * contrastive,
        }
    }
}

fn check_labels(logits: &Tensor, labels: &[usize]) -> Result<()> {
    if logits.rows() != labels.len() {
        return Err(Error::dim(
            "task_loss",
            format!("{} logit rows for {} labels", logits.rows(), labels.len()),
        ));
    }
    let classes = logits.cols().max(2);
    match labels.iter().find(|&&l| l >= classes) {
        Some(&label) => Err(Error::LabelOutOfRange { label, classes }),
        None => Ok(()),
    }
}

/// Records the task loss: binary cross-entropy on a single logit column,
/// softmax cross-entropy otherwise. Averaged over rows.
pub(crate) fn task_loss_tape(tape: &mut Tape, logits: Var, labels: &[usize]) -> Result<Var> {
    check_labels(tape.value(logits), labels)?;
    if tape.value(logits).cols() == 1 {
        let targets: Rc<[f64]> = labels.iter().map(|&l| l as f64).collect();
        tape.bce_with_logits(logits, targets)
    } else {
        tape.softmax_cross_entropy(logits, labels.into())
    }
}

pub fn task_loss(logits: &Tensor, labels: &[usize]) -> Result<f64> {
    let mut tape = Tape::new();
    let z = tape.constant(logits.clone());
    let l = task_loss_tape(&mut tape, z, labels)?;
    Ok(tape.value(l).item())
}

/// Mean squared difference between two embedding matrices.
pub fn contrastive_loss(h1: &Tensor, h2: &Tensor) -> Result<f64> {
    if h1.shape() != h2.shape() {
        return Err(Error::dim(
            "contrastive_loss",
            format!("{:?} vs {:?}", h1.shape(), h2.shape()),
        ));
    }
    let sq: f64 = h1
        .as_slice()
        .iter()
        .zip(h2.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sq / h1.len().max(1) as f64)
}

/// Hard predictions: `logit > 0` for one column, argmax otherwise
/// (lowest index on ties).
pub fn predict_classes(logits: &Tensor) -> Vec<usize> {
    (0..logits.rows())
        .map(|r| {
            let row = logits.row(r);
            if row.len() == 1 {
                usize::from(row[0] > 0.0)
            } else {
                let mut best = 0;
                for (j, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = j;
                    }
                }
                best
            }
        })
        .collect()
}

/// `(correct, total)` of the hard predictions against `labels`.
pub fn accuracy_counts(logits: &Tensor, labels: &[usize]) -> Result<(usize, usize)> {
    check_labels(logits, labels)?;
    let correct = predict_classes(logits)
        .iter()
        .zip(labels)
        .filter(|(p, l)| p == l)
        .count();
    Ok((correct, labels.len()))
}

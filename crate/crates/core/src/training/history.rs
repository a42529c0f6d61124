use std::fmt::Write as _;

use super::LossBreakdown;
use crate::error::{Error, Result};

pub const METRICS_HEADER: &str = "epoch,task_loss,contrastive_loss,total_loss,train_acc,test_acc";

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean over the epoch's steps.
    pub loss: LossBreakdown,
    pub train_acc: f64,
    pub test_acc: Option<f64>,
    /// `(train, test)` invariance ratios when measured.
    pub invariance: Option<(f64, f64)>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainHistory {
    records: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn push(&mut self, record: EpochRecord) -> Result<()> {
        if let Some(last) = self.records.last() {
            if record.epoch <= last.epoch {
                return Err(Error::param(
                    "epoch",
                    format!("epoch {} after {}", record.epoch, last.epoch),
                ));
            }
        }
        self.records.push(record);
        Ok(())
    }

    pub fn records(&self) -> &[EpochRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.records.last()
    }

    /// First epoch whose test accuracy (train accuracy when no test set was
    /// scored) reaches `fraction` of the final value.
    pub fn epochs_to_fraction_of_final(&self, fraction: f64) -> Option<usize> {
        let acc = |r: &EpochRecord| r.test_acc.unwrap_or(r.train_acc);
        let target = fraction * acc(self.records.last()?);
        self.records.iter().find(|r| acc(r) >= target).map(|r| r.epoch)
    }

    /// Metrics CSV; an absent test accuracy is left empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(METRICS_HEADER);
        out.push('\n');
        for r in &self.records {
            let test = r.test_acc.map(|a| format!("{a:.6}")).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{:.8},{:.8},{:.8},{:.6},{}",
                r.epoch, r.loss.task, r.loss.contrastive, r.loss.total, r.train_acc, test
            );
        }
        out
    }
}

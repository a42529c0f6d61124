use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::kv::Section;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrainMode {
    /// Identifier columns held at zero.
    Constant,
    /// Fresh identifiers every step, task loss only.
    Rni,
    /// Task loss plus agreement between two identifier draws.
    Siri,
}

impl fmt::Display for TrainMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrainMode::Constant => "constant",
            TrainMode::Rni => "rni",
            TrainMode::Siri => "siri",
        })
    }
}

impl FromStr for TrainMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(TrainMode::Constant),
            "rni" => Ok(TrainMode::Rni),
            "siri" => Ok(TrainMode::Siri),
            _ => Err(Error::param("mode", format!("unknown mode `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Task {
    NodeBinary,
    GraphBinary,
    PairSiamese,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::NodeBinary => "node-binary",
            Task::GraphBinary => "graph-binary",
            Task::PairSiamese => "pair-siamese",
        })
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "node-binary" => Ok(Task::NodeBinary),
            "graph-binary" => Ok(Task::GraphBinary),
            "pair-siamese" => Ok(Task::PairSiamese),
            _ => Err(Error::param("task", format!("unknown task `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub mode: TrainMode,
    /// Candidate second draws per SIRI step.
    pub k: usize,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    pub task: Task,
    pub contrastive_weight: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            mode: TrainMode::Siri,
            k: 1,
            epochs: 100,
            lr: 1e-3,
            seed: 0,
            task: Task::NodeBinary,
            contrastive_weight: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::param("k", "must be at least 1"));
        }
        if self.epochs < 1 {
            return Err(Error::param("epochs", "must be at least 1"));
        }
        if !self.lr.is_finite() || self.lr <= 0.0 {
            return Err(Error::param("lr", "must be positive and finite"));
        }
        if !self.contrastive_weight.is_finite() || self.contrastive_weight < 0.0 {
            return Err(Error::param("contrastive_weight", "must be non-negative and finite"));
        }
        Ok(())
    }

    pub fn from_section(section: Section<'_>) -> Result<Self> {
        let d = Self::default();
        let cfg = TrainConfig {
            mode: section.get_or("mode", d.mode)?,
            k: section.get_or("k", d.k)?,
            epochs: section.get_or("epochs", d.epochs)?,
            lr: section.get_or("lr", d.lr)?,
            seed: section.get_or("seed", d.seed)?,
            task: section.get_or("task", d.task)?,
            contrastive_weight: section.get_or("contrastive_weight", d.contrastive_weight)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_kv(&self) -> String {
        format!(
            "mode={}\nk={}\nepochs={}\nlr={}\nseed={}\ntask={}\ncontrastive_weight={}\n",
            self.mode, self.k, self.epochs, self.lr, self.seed, self.task, self.contrastive_weight
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kv::KvFile;

    #[test]
    fn round_trip_and_field_errors() {
        let cfg = TrainConfig {
            mode: TrainMode::Rni,
            k: 4,
            lr: 0.005,
            task: Task::GraphBinary,
            contrastive_weight: 0.5,
            ..TrainConfig::default()
        };
        let kv = KvFile::parse(&cfg.to_kv(), "t").unwrap();
        assert_eq!(TrainConfig::from_section(kv.section("")).unwrap(), cfg);
        for (text, field) in [
            ("k=0", "`k`"),
            ("epochs=0", "`epochs`"),
            ("lr=0", "`lr`"),
            ("lr=-1", "`lr`"),
            ("mode=x", "`mode`"),
        ] {
            let kv = KvFile::parse(text, "t").unwrap();
            let err = TrainConfig::from_section(kv.section("")).unwrap_err().to_string();
            assert!(err.contains(field), "{err}");
        }
    }
}

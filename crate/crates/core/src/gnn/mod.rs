//! GraphConv message passing with random-identifier augmentation.

mod model;
mod params;
mod rnf;

pub use model::{ForwardResult, GraphOperand, TapeForward};
pub use params::{BoundParams, ConvLayer, Linear, ModelParams};
pub use rnf::{augment_features, Augmentation, RnfDistribution, RnfSpec, RnfStream};

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::kv::Section;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Readout {
    /// Linear classifier applied to every node row.
    Node,
    /// Sum-pool the node rows, then a three-layer MLP.
    GraphSumMlp,
}

impl fmt::Display for Readout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Readout::Node => "node",
            Readout::GraphSumMlp => "graph-sum-mlp",
        })
    }
}

impl FromStr for Readout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "node" => Ok(Readout::Node),
            "graph-sum-mlp" => Ok(Readout::GraphSumMlp),
            _ => Err(Error::param("readout", format!("unknown readout `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Activation {
    #[default]
    Relu,
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("relu")
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            _ => Err(Error::param("activation", format!("unsupported activation `{s}`"))),
        }
    }
}

/// Architecture of a GraphConv network.
///
/// The first layer maps `input_dim + rnf_dim` columns to `hidden_dim`;
/// every later layer is `hidden_dim -> hidden_dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub layers: usize,
    pub hidden_dim: usize,
    pub rnf_dim: usize,
    pub input_dim: usize,
    pub out_dim: usize,
    pub readout: Readout,
    pub activation: Activation,
    pub distribution: RnfDistribution,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            layers: 6,
            hidden_dim: 64,
            rnf_dim: 64,
            input_dim: 1,
            out_dim: 1,
            readout: Readout::Node,
            activation: Activation::Relu,
            distribution: RnfDistribution::StandardNormal,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers < 1 {
            return Err(Error::param("layers", "need at least one layer"));
        }
        if self.hidden_dim < 1 {
            return Err(Error::param("hidden_dim", "must be positive"));
        }
        if self.input_dim < 1 {
            return Err(Error::param("input_dim", "must be positive"));
        }
        if self.out_dim < 1 {
            return Err(Error::param("out_dim", "must be positive"));
        }
        Ok(())
    }

    /// Width of `H0`.
    pub fn augmented_dim(&self) -> usize {
        self.input_dim + self.rnf_dim
    }

    pub fn rnf_spec(&self) -> RnfSpec {
        RnfSpec::new(self.rnf_dim, self.distribution)
    }

    /// Reads the keys of a `key=value` section over the defaults.
    pub fn from_section(section: Section<'_>) -> Result<Self> {
        let d = Self::default();
        let config = ModelConfig {
            layers: section.get_or("layers", d.layers)?,
            hidden_dim: section.get_or("hidden_dim", d.hidden_dim)?,
            rnf_dim: section.get_or("rnf_dim", d.rnf_dim)?,
            input_dim: section.get_or("input_dim", d.input_dim)?,
            out_dim: section.get_or("out_dim", d.out_dim)?,
            readout: section.get_or("readout", d.readout)?,
            activation: section.get_or("activation", d.activation)?,
            distribution: section.get_or("distribution", d.distribution)?,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn to_kv(&self) -> String {
        format!(
            "layers={}\nhidden_dim={}\nrnf_dim={}\ninput_dim={}\nout_dim={}\nreadout={}\nactivation={}\ndistribution={}\n",
            self.layers,
            self.hidden_dim,
            self.rnf_dim,
            self.input_dim,
            self.out_dim,
            self.readout,
            self.activation,
            self.distribution
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kv::KvFile;

    #[test]
    fn config_file_round_trip() {
        let cfg = ModelConfig {
            layers: 3,
            readout: Readout::GraphSumMlp,
            distribution: RnfDistribution::Uniform01,
            ..ModelConfig::default()
        };
        let kv = KvFile::parse(&cfg.to_kv(), "cfg").unwrap();
        assert_eq!(ModelConfig::from_section(kv.section("")).unwrap(), cfg);
    }

    #[test]
    fn invalid_config_names_field() {
        let kv = KvFile::parse("layers=0\n", "cfg").unwrap();
        let err = ModelConfig::from_section(kv.section("")).unwrap_err();
        assert!(err.to_string().contains("`layers`"));
        let kv = KvFile::parse("readout=edge\n", "cfg").unwrap();
        assert!(ModelConfig::from_section(kv.section("")).is_err());
    }
}

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::diffmath::Tensor;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::seed;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum RnfDistribution {
    #[default]
    StandardNormal,
    Uniform01,
}

impl fmt::Display for RnfDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RnfDistribution::StandardNormal => "standard-normal",
            RnfDistribution::Uniform01 => "uniform-01",
        })
    }
}

impl FromStr for RnfDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard-normal" => Ok(RnfDistribution::StandardNormal),
            "uniform-01" => Ok(RnfDistribution::Uniform01),
            _ => Err(Error::param("distribution", format!("unknown distribution `{s}`"))),
        }
    }
}

/// Distribution of random node features: `dim` columns per node.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RnfSpec {
    pub dim: usize,
    pub distribution: RnfDistribution,
}

impl RnfSpec {
    pub fn new(dim: usize, distribution: RnfDistribution) -> Self {
        RnfSpec { dim, distribution }
    }

    /// Draws an `rows x dim` sample.
    pub fn sample(&self, rows: usize, rng: &mut impl Rng) -> Tensor {
        let mut t = Tensor::zeros(rows, self.dim);
        for v in t.as_mut_slice() {
            *v = match self.distribution {
                RnfDistribution::StandardNormal => StandardNormal.sample(rng),
                RnfDistribution::Uniform01 => rng.random::<f64>(),
            };
        }
        t
    }

    /// A counter-indexed stream of independent draws.
    pub fn stream(self, seed: u64) -> RnfStream {
        RnfStream {
            spec: self,
            seed,
            counter: 0,
        }
    }
}

/// Draw `k` depends only on `(seed, k)`, never on the sizes of earlier draws.
#[derive(Clone, Debug)]
pub struct RnfStream {
    spec: RnfSpec,
    seed: u64,
    counter: u64,
}

impl RnfStream {
    pub fn spec(&self) -> RnfSpec {
        self.spec
    }

    pub fn counter(&self) -> u64 {
        self.counter
    }

    pub fn draw_at(&self, counter: u64, rows: usize) -> Tensor {
        let mut rng = seed::rng(seed::derive_index(self.seed, counter));
        self.spec.sample(rows, &mut rng)
    }

    pub fn next(&mut self, rows: usize) -> Tensor {
        let t = self.draw_at(self.counter, rows);
        self.counter += 1;
        t
    }
}

/// What fills the identifier columns of the input.
#[derive(Clone, Copy, Debug)]
pub enum Augmentation<'a> {
    /// `width` zero columns; width 0 leaves the input features untouched.
    Constant {
        width: usize,
    },
    Random(&'a Tensor),
}

/// `H0 = X ; R`. Featureless graphs use the all-ones column as `X`.
pub fn augment_features(g: &Graph, aug: Augmentation<'_>) -> Result<Tensor> {
    let x = match g.features() {
        Some(f) => f.clone(),
        None => Tensor::ones(g.n(), 1),
    };
    match aug {
        Augmentation::Constant { width: 0 } => Ok(x),
        Augmentation::Constant { width } => x.concat_cols(&Tensor::zeros(g.n(), width)),
        Augmentation::Random(r) => {
            if r.rows() != g.n() {
                return Err(Error::dim(
                    "augment_features",
                    format!("{} random rows for {} nodes", r.rows(), g.n()),
                ));
            }
            x.concat_cols(r)
        }
    }
}

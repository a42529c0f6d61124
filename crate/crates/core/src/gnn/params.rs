use rand::Rng;

use super::{ModelConfig, Readout};
use crate::diffmath::{checkpoint, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub weight: Tensor,
    pub bias: Tensor,
}

/// One GraphConv layer: `relu(H·W_self + (A·H)·W_neigh + b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvLayer {
    pub w_self: Tensor,
    pub w_neigh: Tensor,
    pub bias: Tensor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub convs: Vec<ConvLayer>,
    /// Hidden layers of the graph readout MLP; empty for node readout.
    pub readout_mlp: Vec<Linear>,
    /// Final linear map `g` to `out_dim`.
    pub classifier: Linear,
}

/// Parameters registered as differentiable leaves of one tape.
#[derive(Clone, Debug)]
pub struct BoundParams {
    pub(crate) convs: Vec<[Var; 3]>,
    pub(crate) readout_mlp: Vec<[Var; 2]>,
    pub(crate) classifier: [Var; 2],
}

impl BoundParams {
    /// Vars in the order of [`ModelParams::tensors`].
    pub fn vars(&self) -> Vec<Var> {
        let mut out: Vec<Var> = self.convs.iter().flatten().copied().collect();
        out.extend(self.readout_mlp.iter().flatten().copied());
        out.extend(self.classifier);
        out
    }
}

fn glorot(rows: usize, cols: usize, rng: &mut impl Rng) -> Tensor {
    let a = (6.0 / (rows + cols) as f64).sqrt();
    let mut t = Tensor::zeros(rows, cols);
    for v in t.as_mut_slice() {
        *v = rng.random_range(-a..=a);
    }
    t
}

impl ModelParams {
    /// Glorot-uniform weights, zero biases.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = seed::rng(seed);
        let d = config.hidden_dim;
        let mut convs = Vec::with_capacity(config.layers);
        for l in 0..config.layers {
            let fan_in = if l == 0 { config.augmented_dim() } else { d };
            convs.push(ConvLayer {
                w_self: glorot(fan_in, d, &mut rng),
                w_neigh: glorot(fan_in, d, &mut rng),
                bias: Tensor::zeros(1, d),
            });
        }
        let readout_mlp = match config.readout {
            Readout::Node => Vec::new(),
            Readout::GraphSumMlp => (0..2)
                .map(|_| Linear {
                    weight: glorot(d, d, &mut rng),
                    bias: Tensor::zeros(1, d),
                })
                .collect(),
        };
        let classifier = Linear {
            weight: glorot(d, config.out_dim, &mut rng),
            bias: Tensor::zeros(1, config.out_dim),
        };
        Ok(ModelParams {
            config: config.clone(),
            convs,
            readout_mlp,
            classifier,
        })
    }

    pub fn tensors(&self) -> Vec<&Tensor> {
        let mut out = Vec::new();
        for c in &self.convs {
            out.extend([&c.w_self, &c.w_neigh, &c.bias]);
        }
        for m in &self.readout_mlp {
            out.extend([&m.weight, &m.bias]);
        }
        out.extend([&self.classifier.weight, &self.classifier.bias]);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        for c in &mut self.convs {
            out.extend([&mut c.w_self, &mut c.w_neigh, &mut c.bias]);
        }
        for m in &mut self.readout_mlp {
            out.extend([&mut m.weight, &mut m.bias]);
        }
        out.extend([&mut self.classifier.weight, &mut self.classifier.bias]);
        out
    }

    pub fn names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for l in 0..self.convs.len() {
            for part in ["w_self", "w_neigh", "bias"] {
                out.push(format!("conv{l}.{part}"));
            }
        }
        for l in 0..self.readout_mlp.len() {
            out.push(format!("mlp{l}.weight"));
            out.push(format!("mlp{l}.bias"));
        }
        out.push("classifier.weight".into());
        out.push("classifier.bias".into());
        out
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.is_finite())
    }

    /// Groups `vars`, given in the order of [`ModelParams::tensors`], the
    /// way [`ModelParams::bind`] would.
    pub fn bind_vars(&self, vars: &[Var]) -> Result<BoundParams> {
        let expected = self.tensors().len();
        if vars.len() != expected {
            return Err(Error::dim(
                "bind_vars",
                format!("{} vars for {expected} tensors", vars.len()),
            ));
        }
        let (convs, rest) = vars.split_at(3 * self.convs.len());
        let (mlp, classifier) = rest.split_at(2 * self.readout_mlp.len());
        Ok(BoundParams {
            convs: convs.chunks(3).map(|c| [c[0], c[1], c[2]]).collect(),
            readout_mlp: mlp.chunks(2).map(|c| [c[0], c[1]]).collect(),
            classifier: [classifier[0], classifier[1]],
        })
    }

    pub fn bind(&self, tape: &mut Tape) -> BoundParams {
        let convs = self
            .convs
            .iter()
            .map(|c| {
                [
                    tape.param(c.w_self.clone()),
                    tape.param(c.w_neigh.clone()),
                    tape.param(c.bias.clone()),
                ]
            })
            .collect();
        let readout_mlp = self
            .readout_mlp
            .iter()
            .map(|m| [tape.param(m.weight.clone()), tape.param(m.bias.clone())])
            .collect();
        let classifier = [
            tape.param(self.classifier.weight.clone()),
            tape.param(self.classifier.bias.clone()),
        ];
        BoundParams {
            convs,
            readout_mlp,
            classifier,
        }
    }

    pub fn checkpoint_text(&self) -> String {
        let names = self.names();
        let named: Vec<(String, &Tensor)> = names.into_iter().zip(self.tensors()).collect();
        checkpoint::encode(&named)
    }

    /// Restores weights saved by [`ModelParams::checkpoint_text`] for `config`.
    pub fn from_checkpoint(config: &ModelConfig, named: Vec<(String, Tensor)>) -> Result<Self> {
        let mut params = Self::init(config, 0)?;
        let names = params.names();
        if named.len() != names.len() {
            return Err(Error::dim(
                "from_checkpoint",
                format!("{} tensors for a model with {}", named.len(), names.len()),
            ));
        }
        for ((slot, expected), (name, t)) in params.tensors_mut().into_iter().zip(&names).zip(named) {
            if &name != expected || slot.shape() != t.shape() {
                return Err(Error::dim(
                    "from_checkpoint",
                    format!(
                        "`{name}` {:?} where `{expected}` {:?} expected",
                        t.shape(),
                        slot.shape()
                    ),
                ));
            }
            *slot = t;
        }
        Ok(params)
    }
}

use std::rc::Rc;

use ndarray::Array2;

use super::{BoundParams, ModelParams, Readout};
use crate::diffmath::{scatter_neighbors, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::graph::Graph;

/// Graph structure in the form the tape primitives consume.
#[derive(Clone, Debug)]
pub struct GraphOperand {
    pub n: usize,
    pub edges: Rc<[(usize, usize)]>,
    pub(crate) pool: Rc<[usize]>,
}

impl GraphOperand {
    pub fn new(g: &Graph) -> Self {
        GraphOperand {
            n: g.n(),
            edges: g.edges().into(),
            pool: vec![0; g.n()].into(),
        }
    }
}

/// Outputs of a recorded forward pass.
#[derive(Clone, Copy, Debug)]
pub struct TapeForward {
    /// `H^(L)`, the last GraphConv output (n x d).
    pub embeddings: Var,
    pub logits: Var,
}

/// Outputs of an unrecorded forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardResult {
    pub embeddings: Tensor,
    /// `n x out_dim` for node readout, `1 x out_dim` for graph readout.
    pub logits: Tensor,
}

impl ModelParams {
    fn check_input(&self, n: usize, h0: (usize, usize)) -> Result<()> {
        let want = self.config.augmented_dim();
        if h0 != (n, want) {
            return Err(Error::dim(
                "forward",
                format!("H0 is {}x{}, model expects {n}x{want}", h0.0, h0.1),
            ));
        }
        Ok(())
    }

    /// Forward pass recorded on `tape` for differentiation.
    pub fn forward_tape(
        &self,
        tape: &mut Tape,
        bound: &BoundParams,
        graph: &GraphOperand,
        h0: Var,
    ) -> Result<TapeForward> {
        self.check_input(graph.n, tape.value(h0).shape())?;
        let mut h = h0;
        for &[w_self, w_neigh, bias] in &bound.convs {
            let own = tape.matmul(h, w_self)?;
            let agg = tape.aggregate_neighbors(h, graph.edges.clone())?;
            let msg = tape.matmul(agg, w_neigh)?;
            let pre = tape.add(own, msg)?;
            let pre = tape.add_bias_row(pre, bias)?;
            h = tape.relu(pre);
        }
        let embeddings = h;
        let mut z = match self.config.readout {
            Readout::Node => embeddings,
            Readout::GraphSumMlp => tape.row_sum_pool(embeddings, graph.pool.clone(), 1)?,
        };
        for &[w, b] in &bound.readout_mlp {
            let lin = tape.matmul(z, w)?;
            let lin = tape.add_bias_row(lin, b)?;
            z = tape.relu(lin);
        }
        let [w, b] = bound.classifier;
        let logits = tape.matmul(z, w)?;
        let logits = tape.add_bias_row(logits, b)?;
        Ok(TapeForward { embeddings, logits })
    }

    /// Forward pass without recording.
    pub fn forward(&self, g: &Graph, h0: &Tensor) -> Result<ForwardResult> {
        self.check_input(g.n(), h0.shape())?;
        let embeddings = self.embed(g.edges(), h0);
        let logits = self.readout(&embeddings);
        Ok(ForwardResult { embeddings, logits })
    }

    /// `H^(L)` for an input whose shape has already been checked.
    pub(crate) fn embed(&self, edges: &[(usize, usize)], h0: &Tensor) -> Tensor {
        let mut h = h0.clone();
        for conv in &self.convs {
            let agg = scatter_neighbors(&h, edges);
            let mut pre: Array2<f64> = h.array().dot(conv.w_self.array());
            pre += &agg.array().dot(conv.w_neigh.array());
            pre += conv.bias.array();
            pre.mapv_inplace(|v| v.max(0.0));
            h = Tensor::from_array(pre);
        }
        h
    }

    /// Logits from final-layer embeddings.
    pub(crate) fn readout(&self, embeddings: &Tensor) -> Tensor {
        let mut z: Array2<f64> = match self.config.readout {
            Readout::Node => embeddings.array().clone(),
            Readout::GraphSumMlp => sum_rows(embeddings).into_array(),
        };
        for m in &self.readout_mlp {
            z = z.dot(m.weight.array()) + m.bias.array();
            z.mapv_inplace(|v| v.max(0.0));
        }
        Tensor::from_array(z.dot(self.classifier.weight.array()) + self.classifier.bias.array())
    }
}

/// `1 x d` column sums.
pub(crate) fn sum_rows(t: &Tensor) -> Tensor {
    t.column_sums()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gnn::{augment_features, Augmentation, ModelConfig, RnfDistribution, RnfSpec};
    use crate::graph::{generate, GeneratorSpec};

    fn config(readout: Readout, rnf_dim: usize) -> ModelConfig {
        ModelConfig {
            layers: 3,
            hidden_dim: 8,
            rnf_dim,
            out_dim: 2,
            readout,
            ..ModelConfig::default()
        }
    }

    #[test]
    fn tape_and_plain_forward_agree() {
        for readout in [Readout::Node, Readout::GraphSumMlp] {
            let cfg = config(readout, 3);
            let p = ModelParams::init(&cfg, 11).unwrap();
            let g = generate(&GeneratorSpec::barabasi_albert(12, 2, 3)).unwrap();
            let r = RnfSpec::new(3, RnfDistribution::StandardNormal).stream(4).next(12);
            let h0 = augment_features(&g, Augmentation::Random(&r)).unwrap();
            let plain = p.forward(&g, &h0).unwrap();
            let mut tape = Tape::new();
            let bound = p.bind(&mut tape);
            let x = tape.constant(h0);
            let out = p.forward_tape(&mut tape, &bound, &GraphOperand::new(&g), x).unwrap();
            assert!(tape.value(out.logits).max_abs_diff(&plain.logits) < 1e-12);
            assert!(tape.value(out.embeddings).max_abs_diff(&plain.embeddings) < 1e-12);
        }
    }

    #[test]
    fn edgeless_graph_is_a_per_node_mlp() {
        let cfg = config(Readout::Node, 2);
        let p = ModelParams::init(&cfg, 2).unwrap();
        let g = Graph::new(4, []).unwrap();
        let r = RnfSpec::new(2, RnfDistribution::StandardNormal).stream(1).next(4);
        let h0 = augment_features(&g, Augmentation::Random(&r)).unwrap();
        let out = p.forward(&g, &h0).unwrap();
        for v in 0..4 {
            let single = Graph::new(1, []).unwrap();
            let row = Tensor::from_vec(1, 3, h0.row(v).to_vec()).unwrap();
            let alone = p.forward(&single, &row).unwrap();
            assert_eq!(alone.logits.row(0), out.logits.row(v));
        }
    }

    #[test]
    fn one_layer_on_k2_matches_hand_computation() {
        // H0 = [[1, 2], [1, -1]], W_self = [[1, 0], [0, 1]], W_neigh = [[0.5, 0], [0, 2]],
        // b = [0.1, -0.2]. Node 0: [1,2] + [0.5,-2] + b = [1.6, -0.2] -> [1.6, 0].
        // Node 1: [1,-1] + [0.5, 4] + b = [1.6, 2.8].
        let cfg = ModelConfig {
            layers: 1,
            hidden_dim: 2,
            rnf_dim: 1,
            out_dim: 1,
            ..ModelConfig::default()
        };
        let mut p = ModelParams::init(&cfg, 0).unwrap();
        p.convs[0].w_self = Tensor::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        p.convs[0].w_neigh = Tensor::from_rows(&[vec![0.5, 0.0], vec![0.0, 2.0]]).unwrap();
        p.convs[0].bias = Tensor::from_rows(&[vec![0.1, -0.2]]).unwrap();
        p.classifier.weight = Tensor::from_rows(&[vec![1.0], vec![1.0]]).unwrap();
        let g = Graph::new(2, [(0, 1)]).unwrap();
        let h0 = Tensor::from_rows(&[vec![1.0, 2.0], vec![1.0, -1.0]]).unwrap();
        let out = p.forward(&g, &h0).unwrap();
        let expect = [1.6, 0.0, 1.6, 2.8];
        for (a, b) in out.embeddings.as_slice().iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((out.logits.get(0, 0) - 1.6).abs() < 1e-12);
        assert!((out.logits.get(1, 0) - 4.4).abs() < 1e-12);
    }

    #[test]
    fn joint_permutation_equivariance() {
        let cfg = config(Readout::Node, 4);
        let p = ModelParams::init(&cfg, 8).unwrap();
        let gcfg = config(Readout::GraphSumMlp, 4);
        let gp = ModelParams::init(&gcfg, 8).unwrap();
        let g = generate(&GeneratorSpec::barabasi_albert(20, 2, 1)).unwrap();
        let r = RnfSpec::new(4, RnfDistribution::StandardNormal).stream(3).next(20);
        let h0 = augment_features(&g, Augmentation::Random(&r)).unwrap();
        let mut rng = crate::seed::rng(5);
        let (pg, perm) = g.shuffled(&mut rng);
        let ph0 = h0.permute_rows(&perm);
        let a = p.forward(&g, &h0).unwrap().logits.permute_rows(&perm);
        let b = p.forward(&pg, &ph0).unwrap().logits;
        assert!(a.max_abs_diff(&b) < 1e-9);
        let a = gp.forward(&g, &h0).unwrap().logits;
        let b = gp.forward(&pg, &ph0).unwrap().logits;
        assert!(a.max_abs_diff(&b) < 1e-9);
    }

    #[test]
    fn constant_features_cannot_split_wl_equivalent_regular_graphs() {
        let cfg = config(Readout::GraphSumMlp, 0);
        let p = ModelParams::init(&cfg, 4).unwrap();
        let s = generate(&GeneratorSpec::shrikhande()).unwrap();
        let r = generate(&GeneratorSpec::rook_4x4()).unwrap();
        let out = |g: &Graph| {
            let h0 = augment_features(g, Augmentation::Constant { width: 0 }).unwrap();
            p.forward(g, &h0).unwrap().logits
        };
        assert!(out(&s).max_abs_diff(&out(&r)) < 1e-9);
    }

    #[test]
    fn wrong_input_width_is_rejected() {
        let p = ModelParams::init(&config(Readout::Node, 2), 0).unwrap();
        let g = Graph::new(2, [(0, 1)]).unwrap();
        assert!(p.forward(&g, &Tensor::ones(2, 1)).is_err());
    }
}

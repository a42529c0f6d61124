use super::loss::task_loss_tape;
use super::{check_task, contrastive_loss, Example, LossBreakdown, TrainConfig, TrainMode};
use crate::diffmath::{AdamConfig, AdamState, Tape, Tensor, Var};
use crate::error::Result;
use crate::gnn::{augment_features, Augmentation, BoundParams, ModelConfig, ModelParams, RnfStream};
use crate::seed;

/// Outcome of a single parameter update.
#[derive(Clone, Debug, PartialEq)]
pub struct StepReport {
    pub loss: LossBreakdown,
    /// Contrastive loss of every candidate second draw (SIRI only).
    pub candidate_losses: Vec<f64>,
    /// Index of the candidate that was trained against.
    pub selected: usize,
}

/// Model parameters together with optimizer state and the identifier stream.
#[derive(Clone, Debug)]
pub struct Trainer {
    pub params: ModelParams,
    pub config: TrainConfig,
    adam: AdamState,
    rnf: RnfStream,
}

impl Trainer {
    /// Fresh parameters initialized from the `init` stream of `cfg.seed`.
    pub fn new(model: &ModelConfig, cfg: &TrainConfig) -> Result<Self> {
        let params = ModelParams::init(model, seed::derive(cfg.seed, "init"))?;
        Self::from_params(params, cfg)
    }

    pub fn from_params(params: ModelParams, cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        check_task(cfg.task, &params.config)?;
        let adam = AdamState::new(AdamConfig::with_lr(cfg.lr), params.tensors());
        let rnf = params.config.rnf_spec().stream(seed::derive(cfg.seed, "rnf"));
        Ok(Trainer {
            params,
            config: cfg.clone(),
            adam,
            rnf,
        })
    }

    /// One update in the configured mode.
    pub fn step(&mut self, ex: &Example) -> Result<StepReport> {
        match self.config.mode {
            TrainMode::Constant => self.constant_step(ex),
            TrainMode::Rni => self.rni_step(ex),
            TrainMode::Siri => self.siri_step(ex),
        }
    }

    pub fn constant_step(&mut self, ex: &Example) -> Result<StepReport> {
        let width = self.params.config.rnf_dim;
        let h0 = augment_features(&ex.graph, Augmentation::Constant { width })?;
        let mut tape = Tape::new();
        let bound = self.params.bind(&mut tape);
        let x = tape.constant(h0);
        let out = self.params.forward_tape(&mut tape, &bound, &ex.operand, x)?;
        let task = task_loss_tape(&mut tape, out.logits, &ex.labels)?;
        let value = tape.value(task).item();
        self.apply(&tape, &bound, task)?;
        Ok(StepReport {
            loss: LossBreakdown::new(value, 0.0, self.config.contrastive_weight),
            candidate_losses: Vec::new(),
            selected: 0,
        })
    }

    /// Two fresh draws from the stream; see [`Trainer::rni_step_with`].
    pub fn rni_step(&mut self, ex: &Example) -> Result<StepReport> {
        let n = ex.graph.n();
        let (ra, rb) = (self.rnf.next(n), self.rnf.next(n));
        self.rni_step_with(ex, &ra, &rb)
    }

    /// Averages the task loss over the two identifier draws.
    pub fn rni_step_with(&mut self, ex: &Example, ra: &Tensor, rb: &Tensor) -> Result<StepReport> {
        let mut tape = Tape::new();
        let bound = self.params.bind(&mut tape);
        let la = self.branch_task(&mut tape, &bound, ex, ra)?.1;
        let lb = self.branch_task(&mut tape, &bound, ex, rb)?.1;
        let sum = tape.add(la, lb)?;
        let task = tape.scale(sum, 0.5);
        let value = tape.value(task).item();
        self.apply(&tape, &bound, task)?;
        Ok(StepReport {
            loss: LossBreakdown::new(value, 0.0, self.config.contrastive_weight),
            candidate_losses: Vec::new(),
            selected: 0,
        })
    }

    /// Draws `R1` then `k` candidates for `R2`; see [`Trainer::siri_step_with`].
    pub fn siri_step(&mut self, ex: &Example) -> Result<StepReport> {
        let n = ex.graph.n();
        let r1 = self.rnf.next(n);
        let candidates: Vec<Tensor> = (0..self.config.k).map(|_| self.rnf.next(n)).collect();
        self.siri_step_with(ex, &r1, &candidates)
    }

    /// Scores every candidate `R2` by the contrastive loss of its final-layer
    /// embeddings against those of `R1` (no gradients), keeps the largest
    /// (first on ties), then updates on `task(R1) + w * mse(H1, H2)`.
    pub fn siri_step_with(&mut self, ex: &Example, r1: &Tensor, candidates: &[Tensor]) -> Result<StepReport> {
        assert!(!candidates.is_empty(), "at least one candidate draw");
        let mut candidate_losses = Vec::with_capacity(candidates.len());
        let mut selected = 0;
        if candidates.len() > 1 {
            let edges = ex.graph.edges();
            let h1 = self
                .params
                .embed(edges, &augment_features(&ex.graph, Augmentation::Random(r1))?);
            for (i, r2) in candidates.iter().enumerate() {
                let h0 = augment_features(&ex.graph, Augmentation::Random(r2))?;
                let l = contrastive_loss(&h1, &self.params.embed(edges, &h0))?;
                if l > candidate_losses.get(selected).copied().unwrap_or(f64::NEG_INFINITY) {
                    selected = i;
                }
                candidate_losses.push(l);
            }
        }
        let w = self.config.contrastive_weight;
        let mut tape = Tape::new();
        let bound = self.params.bind(&mut tape);
        let (h1, task) = self.branch_task(&mut tape, &bound, ex, r1)?;
        let h2 = self.branch_embed(&mut tape, &bound, ex, &candidates[selected])?;
        let contrastive = tape.mse(h1, h2)?;
        let weighted = tape.scale(contrastive, w);
        let total = tape.add(task, weighted)?;
        let loss = LossBreakdown::new(tape.value(task).item(), tape.value(contrastive).item(), w);
        if candidates.len() == 1 {
            candidate_losses.push(loss.contrastive);
        }
        self.apply(&tape, &bound, total)?;
        Ok(StepReport {
            loss,
            candidate_losses,
            selected,
        })
    }

    fn branch_embed(&self, tape: &mut Tape, bound: &BoundParams, ex: &Example, r: &Tensor) -> Result<Var> {
        let h0 = augment_features(&ex.graph, Augmentation::Random(r))?;
        let x = tape.constant(h0);
        Ok(self.params.forward_tape(tape, bound, &ex.operand, x)?.embeddings)
    }

    /// Final-layer embeddings and task loss for one identifier draw.
    fn branch_task(&self, tape: &mut Tape, bound: &BoundParams, ex: &Example, r: &Tensor) -> Result<(Var, Var)> {
        let h0 = augment_features(&ex.graph, Augmentation::Random(r))?;
        let x = tape.constant(h0);
        let out = self.params.forward_tape(tape, bound, &ex.operand, x)?;
        let loss = task_loss_tape(tape, out.logits, &ex.labels)?;
        Ok((out.embeddings, loss))
    }

    fn apply(&mut self, tape: &Tape, bound: &BoundParams, root: Var) -> Result<()> {
        let mut grads = tape.backward(root)?;
        let vars = bound.vars();
        let g: Vec<Tensor> = {
            let current = self.params.tensors();
            vars.iter()
                .zip(current)
                .map(|(&v, p)| grads.take_or_zeros(v, p))
                .collect()
        };
        let mut params = self.params.tensors_mut();
        self.adam.step(&mut params, &g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gnn::{GraphOperand, RnfDistribution, RnfSpec};
    use crate::graph::{generate, label_triangles, GeneratorSpec};
    use crate::training::Task;

    fn setup(mode: TrainMode, k: usize, rnf_dim: usize) -> (Trainer, Example) {
        let model = ModelConfig {
            layers: 3,
            hidden_dim: 8,
            rnf_dim,
            ..ModelConfig::default()
        };
        let cfg = TrainConfig {
            mode,
            k,
            lr: 0.01,
            seed: 3,
            task: Task::NodeBinary,
            ..TrainConfig::default()
        };
        let g = generate(&GeneratorSpec::barabasi_albert(15, 2, 7)).unwrap();
        let labels = label_triangles(&g).as_targets();
        (Trainer::new(&model, &cfg).unwrap(), Example::new(g, labels))
    }

    fn draw(rows: usize, dim: usize, seed: u64) -> Tensor {
        RnfSpec::new(dim, RnfDistribution::StandardNormal)
            .stream(seed)
            .next(rows)
    }

    /// Task loss of a single draw, recomputed outside the trainer.
    fn single_loss(params: &ModelParams, ex: &Example, r: &Tensor) -> f64 {
        let h0 = augment_features(&ex.graph, Augmentation::Random(r)).unwrap();
        super::super::task_loss(&params.forward(&ex.graph, &h0).unwrap().logits, &ex.labels).unwrap()
    }

    #[test]
    fn selected_candidate_is_brute_force_argmax() {
        let (mut t, ex) = setup(TrainMode::Siri, 5, 4);
        let n = ex.graph.n();
        let r1 = draw(n, 4, 1);
        let cands: Vec<Tensor> = (0..5).map(|i| draw(n, 4, 10 + i)).collect();
        let before = t.params.clone();
        let report = t.siri_step_with(&ex, &r1, &cands).unwrap();
        let embed = |r: &Tensor| {
            before
                .forward(
                    &ex.graph,
                    &augment_features(&ex.graph, Augmentation::Random(r)).unwrap(),
                )
                .unwrap()
                .embeddings
        };
        let h1 = embed(&r1);
        let losses: Vec<f64> = cands
            .iter()
            .map(|c| contrastive_loss(&h1, &embed(c)).unwrap())
            .collect();
        let argmax = (0..5).fold(0, |b, i| if losses[i] > losses[b] { i } else { b });
        assert_eq!(report.selected, argmax);
        assert_eq!(report.candidate_losses, losses);
        assert!(report.candidate_losses[report.selected] >= report.candidate_losses[0]);
        assert!((report.loss.contrastive - losses[argmax]).abs() < 1e-12);
        assert!((report.loss.task - single_loss(&before, &ex, &r1)).abs() < 1e-12);
        assert_eq!(report.loss.total, report.loss.task + report.loss.contrastive);
    }

    #[test]
    fn identical_draws_give_zero_contrastive() {
        let (mut t, ex) = setup(TrainMode::Siri, 1, 4);
        let r = draw(ex.graph.n(), 4, 2);
        let report = t.siri_step_with(&ex, &r, std::slice::from_ref(&r)).unwrap();
        assert_eq!(report.loss.contrastive, 0.0);
        assert_eq!(report.loss.total, report.loss.task);
    }

    #[test]
    fn rni_loss_is_mean_of_branches() {
        let (mut t, ex) = setup(TrainMode::Rni, 1, 4);
        let n = ex.graph.n();
        let (ra, rb) = (draw(n, 4, 5), draw(n, 4, 6));
        let before = t.params.clone();
        let report = t.rni_step_with(&ex, &ra, &rb).unwrap();
        let expect = 0.5 * (single_loss(&before, &ex, &ra) + single_loss(&before, &ex, &rb));
        assert!((report.loss.task - expect).abs() < 1e-12);
        assert_eq!(report.loss.contrastive, 0.0);

        let (mut a, _) = setup(TrainMode::Rni, 1, 4);
        let single = single_loss(&a.params, &ex, &ra);
        let same = a.rni_step_with(&ex, &ra, &ra).unwrap();
        assert!((same.loss.task - single).abs() < 1e-15);
    }

    #[test]
    fn rni_without_identifiers_matches_constant_step() {
        let (mut rni, ex) = setup(TrainMode::Rni, 1, 0);
        let (mut constant, _) = setup(TrainMode::Constant, 1, 0);
        for _ in 0..5 {
            let a = rni.step(&ex).unwrap();
            let b = constant.step(&ex).unwrap();
            assert_eq!(a.loss, b.loss);
        }
        assert_eq!(rni.params, constant.params);
    }

    #[test]
    fn zero_weight_siri_follows_task_only_trajectory() {
        let (mut siri, ex) = setup(TrainMode::Siri, 1, 4);
        siri.config.contrastive_weight = 0.0;
        let mut params = siri.params.clone();
        let mut adam = AdamState::new(AdamConfig::with_lr(siri.config.lr), params.tensors());
        let mut stream = params.config.rnf_spec().stream(seed::derive(3, "rnf"));
        let operand = GraphOperand::new(&ex.graph);
        for _ in 0..5 {
            siri.step(&ex).unwrap();
            let r1 = stream.next(ex.graph.n());
            stream.next(ex.graph.n());
            let mut tape = Tape::new();
            let bound = params.bind(&mut tape);
            let x = tape.constant(augment_features(&ex.graph, Augmentation::Random(&r1)).unwrap());
            let out = params.forward_tape(&mut tape, &bound, &operand, x).unwrap();
            let loss = task_loss_tape(&mut tape, out.logits, &ex.labels).unwrap();
            let mut grads = tape.backward(loss).unwrap();
            let g: Vec<Tensor> = bound
                .vars()
                .iter()
                .zip(params.tensors())
                .map(|(&v, p)| grads.take_or_zeros(v, p))
                .collect();
            adam.step(&mut params.tensors_mut(), &g).unwrap();
        }
        assert_eq!(siri.params, params);
    }

    #[test]
    fn zero_learning_rate_keeps_params() {
        let (mut t, ex) = setup(TrainMode::Siri, 2, 4);
        t.adam.config.lr = 0.0;
        let before = t.params.clone();
        t.step(&ex).unwrap();
        assert_eq!(before, t.params);
    }

    #[test]
    fn long_run_stays_finite() {
        for mode in [TrainMode::Constant, TrainMode::Rni, TrainMode::Siri] {
            let (mut t, ex) = setup(mode, 2, 4);
            for _ in 0..1000 {
                let r = t.step(&ex).unwrap();
                assert!(r.loss.total.is_finite());
            }
            assert!(t.params.is_finite(), "{mode}");
        }
    }
}

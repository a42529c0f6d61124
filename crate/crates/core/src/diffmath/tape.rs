//! Reverse-mode automatic differentiation over dense matrices.
//!
//! A [`Tape`] records every primitive in execution order, so the record is
//! topologically sorted by construction. [`Tape::backward`] walks it once in
//! reverse and accumulates gradients additively into every input that
//! (transitively) depends on a [`Tape::param`] leaf. Constants never receive
//! gradients, which keeps backward passes through fixed inputs cheap.

use std::rc::Rc;

use ndarray::{Array2, Axis};

use super::Tensor;
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    AddBiasRow(Var, Var),
    ConcatCols(Var, Var),
    Relu(Var),
    RowSumPool { input: Var, segments: Rc<[usize]> },
    AggregateNeighbors { input: Var, edges: Rc<[(usize, usize)]> },
    Mse(Var, Var),
    SoftmaxCrossEntropy { logits: Var, targets: Rc<[usize]> },
    BceWithLogits { logits: Var, targets: Rc<[f64]> },
    ScalarSum(Var),
    Scale(Var, f64),
    Cosine(Var, Var),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of one backward pass, indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient of `v`, or zeros shaped like `like` when `v` did not
    /// influence the root.
    pub fn take_or_zeros(&mut self, v: Var, like: &Tensor) -> Tensor {
        self.grads[v.0]
            .take()
            .unwrap_or_else(|| Tensor::zeros(like.rows(), like.cols()))
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// A differentiable leaf.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// A leaf that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(out, Op::MatMul(a, b), ng))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::dim("add", format!("{:?} + {:?}", self.shape(a), self.shape(b))));
        }
        let out = self.value(a).add(self.value(b))?;
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(out, Op::Add(a, b), ng))
    }

    /// Adds a `1 x d` bias row to every row of an `n x d` matrix.
    pub fn add_bias_row(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (_, cols) = self.shape(a);
        if self.shape(bias) != (1, cols) {
            return Err(Error::dim(
                "add_bias_row",
                format!("bias {:?} for input {:?}", self.shape(bias), self.shape(a)),
            ));
        }
        let out = self.value(a).array() + self.value(bias).array();
        let ng = self.needs(a) || self.needs(bias);
        Ok(self.push(Tensor::from_array(out), Op::AddBiasRow(a, bias), ng))
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).concat_cols(self.value(b))?;
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(out, Op::ConcatCols(a, b), ng))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|v| v.max(0.0));
        let ng = self.needs(a);
        self.push(out, Op::Relu(a), ng)
    }

    /// Sums rows into `num_segments` output rows: row `i` goes to `segments[i]`.
    pub fn row_sum_pool(&mut self, a: Var, segments: Rc<[usize]>, num_segments: usize) -> Result<Var> {
        let (rows, cols) = self.shape(a);
        if segments.len() != rows {
            return Err(Error::dim(
                "row_sum_pool",
                format!("{} segment ids for {rows} rows", segments.len()),
            ));
        }
        if let Some(&bad) = segments.iter().find(|&&s| s >= num_segments) {
            return Err(Error::dim(
                "row_sum_pool",
                format!("segment id {bad} >= {num_segments}"),
            ));
        }
        let mut out = Array2::zeros((num_segments, cols));
        let input = self.value(a).array();
        for (i, &s) in segments.iter().enumerate() {
            let mut dst = out.row_mut(s);
            dst += &input.row(i);
        }
        let ng = self.needs(a);
        Ok(self.push(Tensor::from_array(out), Op::RowSumPool { input: a, segments }, ng))
    }

    /// Neighbor sum `A·H` for an undirected edge list.
    pub fn aggregate_neighbors(&mut self, a: Var, edges: Rc<[(usize, usize)]>) -> Result<Var> {
        let rows = self.shape(a).0;
        if let Some(&(u, v)) = edges.iter().find(|&&(u, v)| u >= rows || v >= rows) {
            return Err(Error::dim(
                "aggregate_neighbors",
                format!("edge ({u},{v}) outside {rows} rows"),
            ));
        }
        let out = scatter_neighbors(self.value(a), &edges);
        let ng = self.needs(a);
        Ok(self.push(out, Op::AggregateNeighbors { input: a, edges }, ng))
    }

    /// Mean squared error over all entries, as a `1 x 1` value.
    pub fn mse(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::dim("mse", format!("{:?} vs {:?}", self.shape(a), self.shape(b))));
        }
        let (x, y) = (self.value(a).as_slice(), self.value(b).as_slice());
        let count = x.len().max(1) as f64;
        let value = x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum::<f64>() / count;
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(Tensor::scalar(value), Op::Mse(a, b), ng))
    }

    /// Mean over rows of the softmax cross-entropy against class indices.
    pub fn softmax_cross_entropy(&mut self, logits: Var, targets: Rc<[usize]>) -> Result<Var> {
        let (rows, classes) = self.shape(logits);
        if targets.len() != rows {
            return Err(Error::dim(
                "softmax_cross_entropy",
                format!("{} targets for {rows} rows", targets.len()),
            ));
        }
        if let Some(&label) = targets.iter().find(|&&t| t >= classes) {
            return Err(Error::LabelOutOfRange { label, classes });
        }
        let z = self.value(logits);
        let mut total = 0.0;
        for (r, &t) in targets.iter().enumerate() {
            let row = z.row(r);
            total += log_sum_exp(row) - row[t];
        }
        let value = total / rows.max(1) as f64;
        let ng = self.needs(logits);
        Ok(self.push(Tensor::scalar(value), Op::SoftmaxCrossEntropy { logits, targets }, ng))
    }

    /// Mean binary cross-entropy of an `n x 1` logit column against targets in `[0, 1]`.
    pub fn bce_with_logits(&mut self, logits: Var, targets: Rc<[f64]>) -> Result<Var> {
        let (rows, cols) = self.shape(logits);
        if cols != 1 || targets.len() != rows {
            return Err(Error::dim(
                "bce_with_logits",
                format!("{} targets for logits {rows}x{cols}", targets.len()),
            ));
        }
        let z = self.value(logits).as_slice();
        let total: f64 = z
            .iter()
            .zip(targets.iter())
            .map(|(&z, &t)| z.max(0.0) - z * t + (-z.abs()).exp().ln_1p())
            .sum();
        let value = total / rows.max(1) as f64;
        let ng = self.needs(logits);
        Ok(self.push(Tensor::scalar(value), Op::BceWithLogits { logits, targets }, ng))
    }

    pub fn scalar_sum(&mut self, a: Var) -> Var {
        let value = self.value(a).sum();
        let ng = self.needs(a);
        self.push(Tensor::scalar(value), Op::ScalarSum(a), ng)
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let out = self.value(a).scale(factor);
        let ng = self.needs(a);
        self.push(out, Op::Scale(a, factor), ng)
    }

    /// Cosine similarity of two `1 x d` rows.
    pub fn cosine(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb || sa.0 != 1 {
            return Err(Error::dim("cosine", format!("{sa:?} vs {sb:?}")));
        }
        let value = cosine_similarity(self.value(a).as_slice(), self.value(b).as_slice())?;
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(Tensor::scalar(value), Op::Cosine(a, b), ng))
    }

    /// Backpropagates from a `1 x 1` root.
    pub fn backward(&self, root: Var) -> Result<Gradients> {
        if self.shape(root) != (1, 1) {
            return Err(Error::dim(
                "backward",
                format!("root must be 1x1, got {:?}", self.shape(root)),
            ));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; root.0 + 1];
        grads[root.0] = Some(Tensor::scalar(1.0));

        for i in (0..=root.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            self.propagate(&node.op, &node.value, &g, &mut grads);
            grads[i] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, op: &Op, out: &Tensor, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let mut send = |v: Var, delta: Tensor| {
            if !self.needs(v) {
                return;
            }
            match &mut grads[v.0] {
                Some(acc) => acc.add_assign(&delta),
                slot @ None => *slot = Some(delta),
            }
        };
        match op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if self.needs(*a) {
                    let bt = self.value(*b).array().t();
                    send(*a, Tensor::from_array(g.array().dot(&bt)));
                }
                if self.needs(*b) {
                    let at = self.value(*a).array().t();
                    send(*b, Tensor::from_array(at.dot(g.array())));
                }
            }
            Op::Add(a, b) => {
                send(*a, g.clone());
                send(*b, g.clone());
            }
            Op::AddBiasRow(a, bias) => {
                send(*a, g.clone());
                send(*bias, g.column_sums());
            }
            Op::ConcatCols(a, b) => {
                let split = self.shape(*a).1;
                let (left, right) = g.array().view().split_at(Axis(1), split);
                send(*a, Tensor::from_array(left.to_owned()));
                send(*b, Tensor::from_array(right.to_owned()));
            }
            Op::Relu(a) => {
                let mut d = g.clone();
                for (dv, &o) in d.as_mut_slice().iter_mut().zip(out.as_slice()) {
                    if o <= 0.0 {
                        *dv = 0.0;
                    }
                }
                send(*a, d);
            }
            Op::RowSumPool { input, segments } => {
                let cols = g.cols();
                let mut d = Array2::zeros((segments.len(), cols));
                for (i, &s) in segments.iter().enumerate() {
                    d.row_mut(i).assign(&g.array().row(s));
                }
                send(*input, Tensor::from_array(d));
            }
            Op::AggregateNeighbors { input, edges } => {
                // A is symmetric, so the adjoint is the same scatter.
                send(*input, scatter_neighbors(g, edges));
            }
            Op::Mse(a, b) => {
                let (x, y) = (self.value(*a), self.value(*b));
                let scale = 2.0 * g.item() / x.len().max(1) as f64;
                let diff = (x.array() - y.array()) * scale;
                if self.needs(*b) {
                    send(*b, Tensor::from_array(-&diff));
                }
                send(*a, Tensor::from_array(diff));
            }
            Op::SoftmaxCrossEntropy { logits, targets } => {
                let z = self.value(*logits);
                let (rows, classes) = z.shape();
                let scale = g.item() / rows.max(1) as f64;
                let mut d = Tensor::zeros(rows, classes);
                for (r, &t) in targets.iter().enumerate() {
                    let row = z.row(r);
                    let lse = log_sum_exp(row);
                    for (c, &zc) in row.iter().enumerate() {
                        let p = (zc - lse).exp();
                        let onehot = if c == t { 1.0 } else { 0.0 };
                        d.set(r, c, (p - onehot) * scale);
                    }
                }
                send(*logits, d);
            }
            Op::BceWithLogits { logits, targets } => {
                let z = self.value(*logits);
                let scale = g.item() / z.rows().max(1) as f64;
                let d: Vec<f64> = z
                    .as_slice()
                    .iter()
                    .zip(targets.iter())
                    .map(|(&z, &t)| (sigmoid(z) - t) * scale)
                    .collect();
                send(
                    *logits,
                    Tensor::from_array(Array2::from_shape_vec((d.len(), 1), d).unwrap()),
                );
            }
            Op::ScalarSum(a) => {
                let (r, c) = self.shape(*a);
                send(*a, Tensor::full(r, c, g.item()));
            }
            Op::Scale(a, factor) => send(*a, g.scale(*factor)),
            Op::Cosine(a, b) => {
                let (x, y) = (self.value(*a).as_slice(), self.value(*b).as_slice());
                let nx = norm(x);
                let ny = norm(y);
                let c = out.item();
                let gv = g.item();
                let dx: Vec<f64> = x
                    .iter()
                    .zip(y)
                    .map(|(&xi, &yi)| gv * (yi / (nx * ny) - c * xi / (nx * nx)))
                    .collect();
                let dy: Vec<f64> = x
                    .iter()
                    .zip(y)
                    .map(|(&xi, &yi)| gv * (xi / (nx * ny) - c * yi / (ny * ny)))
                    .collect();
                let d = x.len();
                send(*a, Tensor::from_array(Array2::from_shape_vec((1, d), dx).unwrap()));
                send(*b, Tensor::from_array(Array2::from_shape_vec((1, d), dy).unwrap()));
            }
        }
    }
}

/// `out[u] += h[v]` and `out[v] += h[u]` for every edge `(u, v)`.
pub(crate) fn scatter_neighbors(h: &Tensor, edges: &[(usize, usize)]) -> Tensor {
    let (rows, cols) = h.shape();
    let mut out = Tensor::zeros(rows, cols);
    let src = h.as_slice();
    let dst = out.as_mut_slice();
    for &(u, v) in edges {
        for c in 0..cols {
            dst[u * cols + c] += src[v * cols + c];
            dst[v * cols + c] += src[u * cols + c];
        }
    }
    out
}

fn log_sum_exp(row: &[f64]) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub(crate) fn cosine_similarity(x: &[f64], y: &[f64]) -> Result<f64> {
    let (nx, ny) = (norm(x), norm(y));
    if nx == 0.0 || ny == 0.0 {
        return Err(Error::UndefinedCosine);
    }
    let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    Ok(dot / (nx * ny))
}

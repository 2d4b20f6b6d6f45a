//! Reverse-mode tape over 2-D double-precision arrays.
//!
//! Every op appends a node holding its output value; [`Graph::backward`]
//! walks the tape in reverse and accumulates gradients for parameter leaves.

use ndarray::{s, Array1, Array2, Axis, Zip};
use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::params::ParameterSet;

pub type Tensor = Array2<f64>;

/// Handle to a node of a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Input,
    Param(usize),
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    Columns { x: Var, start: usize },
    Mask { x: Var, mask: Tensor },
    LayerNorm { x: Var, gamma: Var, beta: Var, xhat: Tensor, inv_std: Array1<f64> },
    BatchNormTrain { x: Var, gamma: Var, beta: Var, xhat: Tensor, inv_std: Array1<f64> },
    BatchNormEval { x: Var, gamma: Var, beta: Var, xhat: Tensor, inv_std: Array1<f64> },
    WeightedCrossEntropy { logits: Var, labels: Vec<usize>, weights: Vec<f64>, probs: Tensor },
    WeightedSum { x: Var, w: Tensor },
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Input => "input",
            Op::Param(_) => "param",
            Op::MatMul(..) => "matmul",
            Op::Add(..) => "add",
            Op::AddRow(..) => "add_row",
            Op::Mul(..) => "mul",
            Op::Sigmoid(_) => "sigmoid",
            Op::Tanh(_) => "tanh",
            Op::Relu(_) => "relu",
            Op::Columns { .. } => "columns",
            Op::Mask { .. } => "dropout",
            Op::LayerNorm { .. } => "layer_norm",
            Op::BatchNormTrain { .. } => "batch_norm",
            Op::BatchNormEval { .. } => "batch_norm_eval",
            Op::WeightedCrossEntropy { .. } => "weighted_cross_entropy",
            Op::WeightedSum { .. } => "weighted_sum",
        }
    }
}

struct Node {
    value: Tensor,
    op: Op,
}

/// Batch statistics produced by a training-mode batch norm.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchStats {
    pub mean: Array1<f64>,
    /// Unbiased variance, as used for running estimates.
    pub var_unbiased: Array1<f64>,
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
    non_finite: Option<(usize, &'static str)>,
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn shape(t: &Tensor) -> (usize, usize) {
    t.dim()
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        if self.non_finite.is_none() && !value.iter().all(|v| v.is_finite()) {
            self.non_finite = Some((self.nodes.len(), op.name()));
        }
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Scalar value of a 1x1 node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[[0, 0]]
    }

    /// Errors if any op so far produced a non-finite value.
    pub fn ensure_finite(&self) -> Result<()> {
        match self.non_finite {
            None => Ok(()),
            Some((i, name)) => Err(Error::NonFinite(format!("{name} output at node {i}"))),
        }
    }

    pub fn input(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Input)
    }

    pub fn param(&mut self, params: &ParameterSet, index: usize) -> Var {
        self.push(params.value(index).clone(), Op::Param(index))
    }

    fn check(&self, cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
        if cond {
            Ok(())
        } else {
            Err(Error::Shape(msg()))
        }
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (shape(self.value(a)), shape(self.value(b)));
        self.check(sa.1 == sb.0, || format!("matmul {sa:?} x {sb:?}"))?;
        let v = self.value(a).dot(self.value(b));
        Ok(self.push(v, Op::MatMul(a, b)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (shape(self.value(a)), shape(self.value(b)));
        self.check(sa == sb, || format!("add {sa:?} + {sb:?}"))?;
        let v = self.value(a) + self.value(b);
        Ok(self.push(v, Op::Add(a, b)))
    }

    /// Adds a 1 x n row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (sa, sr) = (shape(self.value(a)), shape(self.value(row)));
        self.check(sr.0 == 1 && sr.1 == sa.1, || format!("add_row {sa:?} + {sr:?}"))?;
        let v = self.value(a) + self.value(row);
        Ok(self.push(v, Op::AddRow(a, row)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (shape(self.value(a)), shape(self.value(b)));
        self.check(sa == sb, || format!("mul {sa:?} * {sb:?}"))?;
        let v = self.value(a) * self.value(b);
        Ok(self.push(v, Op::Mul(a, b)))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let v = self.value(x).mapv(sigmoid);
        self.push(v, Op::Sigmoid(x))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let v = self.value(x).mapv(f64::tanh);
        self.push(v, Op::Tanh(x))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let v = self.value(x).mapv(|z| z.max(0.0));
        self.push(v, Op::Relu(x))
    }

    /// Columns `start..start + len`.
    pub fn columns(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let sx = shape(self.value(x));
        self.check(start + len <= sx.1, || format!("columns {start}..{} of {sx:?}", start + len))?;
        let v = self.value(x).slice(s![.., start..start + len]).to_owned();
        Ok(self.push(v, Op::Columns { x, start }))
    }

    /// Inverted dropout: zeroes entries with probability `p` and scales the
    /// rest by 1/(1-p). Identity when `p` is 0.
    pub fn dropout<R: Rng>(&mut self, x: Var, p: f64, rng: &mut R) -> Var {
        if p <= 0.0 {
            return x;
        }
        let keep = 1.0 / (1.0 - p);
        let mask = self.value(x).mapv(|_| if rng.random::<f64>() < p { 0.0 } else { keep });
        self.mask(x, mask)
    }

    /// Dropout when an RNG is supplied (training), identity otherwise.
    pub fn maybe_dropout<R: Rng>(&mut self, x: Var, p: f64, rng: Option<&mut R>) -> Var {
        match rng {
            Some(rng) => self.dropout(x, p, rng),
            None => x,
        }
    }

    /// Multiplies by a fixed mask; gradients flow through the mask.
    pub fn mask(&mut self, x: Var, mask: Tensor) -> Var {
        let v = self.value(x) * &mask;
        self.push(v, Op::Mask { x, mask })
    }

    /// Normalizes each row over its columns, then applies `gamma`, `beta` (1 x n).
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Result<Var> {
        let sx = shape(self.value(x));
        for p in [gamma, beta] {
            let sp = shape(self.value(p));
            self.check(sp == (1, sx.1), || format!("layer_norm param {sp:?} for input {sx:?}"))?;
        }
        let xv = self.value(x);
        let n = sx.1 as f64;
        let mean = xv.sum_axis(Axis(1)) / n;
        let mut xhat = xv - &mean.view().insert_axis(Axis(1));
        let var = xhat.mapv(|d| d * d).sum_axis(Axis(1)) / n;
        let inv_std = var.mapv(|v| 1.0 / (v + eps).sqrt());
        xhat *= &inv_std.view().insert_axis(Axis(1));
        let out = &xhat * self.value(gamma) + self.value(beta);
        Ok(self.push(out, Op::LayerNorm { x, gamma, beta, xhat, inv_std }))
    }

    /// Training-mode batch norm over the rows of `x`, per column.
    pub fn batch_norm_train(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Result<(Var, BatchStats)> {
        let sx = shape(self.value(x));
        if sx.0 < 2 {
            return Err(Error::BatchTooSmall);
        }
        for p in [gamma, beta] {
            let sp = shape(self.value(p));
            self.check(sp == (1, sx.1), || format!("batch_norm param {sp:?} for input {sx:?}"))?;
        }
        let xv = self.value(x);
        let b = sx.0 as f64;
        let mean = xv.sum_axis(Axis(0)) / b;
        let mut xhat = xv - &mean;
        let sq = xhat.mapv(|d| d * d).sum_axis(Axis(0));
        let var = &sq / b;
        let var_unbiased = &sq / (b - 1.0);
        let inv_std = var.mapv(|v| 1.0 / (v + eps).sqrt());
        xhat *= &inv_std;
        let out = &xhat * self.value(gamma) + self.value(beta);
        let stats = BatchStats { mean, var_unbiased };
        Ok((self.push(out, Op::BatchNormTrain { x, gamma, beta, xhat, inv_std }), stats))
    }

    /// Inference-mode batch norm with fixed running statistics.
    pub fn batch_norm_eval(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        running_mean: &Array1<f64>,
        running_var: &Array1<f64>,
        eps: f64,
    ) -> Result<Var> {
        let sx = shape(self.value(x));
        self.check(running_mean.len() == sx.1 && running_var.len() == sx.1, || {
            format!("batch_norm running stats of length {} for input {sx:?}", running_mean.len())
        })?;
        let inv_std = running_var.mapv(|v| 1.0 / (v + eps).sqrt());
        let xhat = (self.value(x) - running_mean) * &inv_std;
        let out = &xhat * self.value(gamma) + self.value(beta);
        Ok(self.push(out, Op::BatchNormEval { x, gamma, beta, xhat, inv_std }))
    }

    /// Weighted mean of per-row cross-entropy, fused with log-softmax.
    pub fn weighted_cross_entropy(&mut self, logits: Var, labels: &[usize], class_weights: &[f64]) -> Result<Var> {
        let z = self.value(logits);
        let (b, k) = z.dim();
        self.check(labels.len() == b, || format!("{} labels for {b} rows", labels.len()))?;
        self.check(class_weights.len() == k, || format!("{} class weights for {k} classes", class_weights.len()))?;
        if let Some(&bad) = labels.iter().find(|&&y| y >= k) {
            return Err(Error::InvalidLabel(bad));
        }
        if class_weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::Invalid("class weights must be positive".into()));
        }
        let mut probs = Array2::zeros((b, k));
        let mut total = 0.0;
        let mut wsum = 0.0;
        for (r, row) in z.rows().into_iter().enumerate() {
            let m = row.fold(f64::NEG_INFINITY, |a, &v| a.max(v));
            let se: f64 = row.iter().map(|v| (v - m).exp()).sum();
            let lse = m + se.ln();
            for c in 0..k {
                probs[[r, c]] = (row[c] - lse).exp();
            }
            let w = class_weights[labels[r]];
            total += w * (lse - row[labels[r]]);
            wsum += w;
        }
        let weights = labels.iter().map(|&y| class_weights[y]).collect();
        Ok(self.push(
            Array2::from_elem((1, 1), total / wsum),
            Op::WeightedCrossEntropy { logits, labels: labels.to_vec(), weights, probs },
        ))
    }

    /// Scalar `sum(w * x)`; a convenient probe loss for gradient checks.
    pub fn weighted_sum(&mut self, x: Var, w: Tensor) -> Result<Var> {
        let sx = shape(self.value(x));
        self.check(sx == w.dim(), || format!("weighted_sum {sx:?} vs {:?}", w.dim()))?;
        let v = (self.value(x) * &w).sum();
        Ok(self.push(Array2::from_elem((1, 1), v), Op::WeightedSum { x, w }))
    }

    /// Back-propagates from the scalar `loss` and returns one gradient per
    /// parameter of `params` (zeros for parameters not on the tape).
    pub fn backward(&self, loss: Var, params: &ParameterSet) -> Result<Vec<Tensor>> {
        self.ensure_finite()?;
        if self.value(loss).dim() != (1, 1) {
            return Err(Error::Shape("backward needs a scalar loss".into()));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Array2::ones((1, 1)));
        let mut out: Vec<Tensor> = (0..params.len()).map(|i| Array2::zeros(params.value(i).dim())).collect();

        fn acc(grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
            match &mut grads[v.0] {
                Some(existing) => *existing += &g,
                slot => *slot = Some(g),
            }
        }

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Input => {}
                Op::Param(p) => {
                    if *p < out.len() {
                        out[*p] += &g;
                    }
                }
                Op::MatMul(a, b) => {
                    let ga = g.dot(&self.value(*b).t());
                    let gb = self.value(*a).t().dot(&g);
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *b, g.clone());
                    acc(&mut grads, *a, g);
                }
                Op::AddRow(a, row) => {
                    acc(&mut grads, *row, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    acc(&mut grads, *a, g);
                }
                Op::Mul(a, b) => {
                    let ga = &g * self.value(*b);
                    let gb = &g * self.value(*a);
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::Sigmoid(x) => {
                    let mut gx = g;
                    Zip::from(&mut gx).and(&node.value).for_each(|g, &y| *g *= y * (1.0 - y));
                    acc(&mut grads, *x, gx);
                }
                Op::Tanh(x) => {
                    let mut gx = g;
                    Zip::from(&mut gx).and(&node.value).for_each(|g, &y| *g *= 1.0 - y * y);
                    acc(&mut grads, *x, gx);
                }
                Op::Relu(x) => {
                    let mut gx = g;
                    Zip::from(&mut gx).and(&node.value).for_each(|g, &y| {
                        if y <= 0.0 {
                            *g = 0.0
                        }
                    });
                    acc(&mut grads, *x, gx);
                }
                Op::Columns { x, start } => {
                    let mut gx = Array2::zeros(self.value(*x).dim());
                    gx.slice_mut(s![.., *start..*start + g.ncols()]).assign(&g);
                    acc(&mut grads, *x, gx);
                }
                Op::Mask { x, mask } => acc(&mut grads, *x, &g * mask),
                Op::LayerNorm { x, gamma, beta, xhat, inv_std } => {
                    acc(&mut grads, *gamma, (&g * xhat).sum_axis(Axis(0)).insert_axis(Axis(0)));
                    acc(&mut grads, *beta, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    let dxhat = &g * self.value(*gamma);
                    let n = xhat.ncols() as f64;
                    let s1 = dxhat.sum_axis(Axis(1)).insert_axis(Axis(1));
                    let s2 = (&dxhat * xhat).sum_axis(Axis(1)).insert_axis(Axis(1));
                    let gx = (dxhat * n - s1 - xhat * &s2) * &(inv_std / n).insert_axis(Axis(1));
                    acc(&mut grads, *x, gx);
                }
                Op::BatchNormTrain { x, gamma, beta, xhat, inv_std } => {
                    acc(&mut grads, *gamma, (&g * xhat).sum_axis(Axis(0)).insert_axis(Axis(0)));
                    acc(&mut grads, *beta, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    let dxhat = &g * self.value(*gamma);
                    let b = xhat.nrows() as f64;
                    let s1 = dxhat.sum_axis(Axis(0));
                    let s2 = (&dxhat * xhat).sum_axis(Axis(0));
                    let gx = (dxhat * b - s1 - xhat * &s2) * &(inv_std / b);
                    acc(&mut grads, *x, gx);
                }
                Op::BatchNormEval { x, gamma, beta, xhat, inv_std } => {
                    acc(&mut grads, *gamma, (&g * xhat).sum_axis(Axis(0)).insert_axis(Axis(0)));
                    acc(&mut grads, *beta, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    let gx = &g * self.value(*gamma) * inv_std;
                    acc(&mut grads, *x, gx);
                }
                Op::WeightedCrossEntropy { logits, labels, weights, probs } => {
                    let wsum: f64 = weights.iter().sum();
                    let mut gz = probs.clone();
                    for (r, &y) in labels.iter().enumerate() {
                        gz[[r, y]] -= 1.0;
                        let scale = weights[r] / wsum * g[[0, 0]];
                        gz.row_mut(r).mapv_inplace(|v| v * scale);
                    }
                    acc(&mut grads, *logits, gz);
                }
                Op::WeightedSum { x, w } => acc(&mut grads, *x, w * g[[0, 0]]),
            }
        }
        Ok(out)
    }
}

/// Row-wise softmax with max-subtraction.
pub fn softmax(z: &Tensor) -> Tensor {
    let mut out = z.clone();
    for mut row in out.rows_mut() {
        let m = row.fold(f64::NEG_INFINITY, |a, &v| a.max(v));
        row.mapv_inplace(|v| (v - m).exp());
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
    out
}

/// `softmax([z0, z1])[1]` computed as a stable logistic of the gap.
pub fn positive_probability(z0: f64, z1: f64) -> f64 {
    sigmoid(z1 - z0)
}

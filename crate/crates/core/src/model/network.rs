use ndarray::{Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::config::ModelConfig;
use crate::tensor::graph::sigmoid;
use crate::tensor::{positive_probability, BatchStats, Graph, Linear, Lstm, Norm, ParameterSet, RunningStats, Tensor, Var, NORM_EPS};

/// Windows per inference chunk; chunks run in parallel and are gathered in order.
pub const PREDICT_CHUNK: usize = 64;

/// Stacked LSTM with per-layer layer norm and dropout, read out at the last
/// time step into a linear / batch-norm / ReLU classification head.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub config: ModelConfig,
    pub n_features: usize,
    pub params: ParameterSet,
    pub bn_stats: RunningStats,
    lstm: Vec<Lstm>,
    ln: Vec<Norm>,
    head: Vec<Linear>,
    bn: Norm,
}

/// Forward-pass mode. Training draws dropout masks and uses batch statistics.
pub enum Mode<'a> {
    Train(&'a mut ChaCha8Rng),
    Eval,
}

impl Model {
    /// Builds and initializes the network from `config.seed`.
    pub fn new(config: &ModelConfig, n_features: usize) -> Result<Self> {
        config.validate()?;
        if n_features == 0 {
            return Err(Error::Config("model needs at least one feature".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut params = ParameterSet::new();
        let h = config.hidden_dim;
        let mut lstm = Vec::new();
        let mut ln = Vec::new();
        for l in 0..config.lstm_layers {
            let input = if l == 0 { n_features } else { h };
            lstm.push(Lstm::new(&mut params, &format!("lstm{l}"), input, h, &mut rng)?);
            ln.push(Norm::new(&mut params, &format!("ln{l}"), h)?);
        }
        let mut head = Vec::new();
        let mut prev = h;
        for (k, &d) in config.head_dims.iter().enumerate() {
            // Batch norm follows the first head layer, which makes its bias redundant.
            head.push(Linear::new(&mut params, &format!("head{k}"), prev, d, k > 0, &mut rng)?);
            prev = d;
        }
        let d0 = config.head_dims[0];
        let bn = Norm::new(&mut params, "bn", d0)?;
        Ok(Self { config: config.clone(), n_features, params, bn_stats: RunningStats::new(d0), lstm, ln, head, bn })
    }

    pub fn n_params(&self) -> usize {
        self.params.n_scalars()
    }

    /// Closed-form parameter count of the architecture.
    pub fn expected_param_count(config: &ModelConfig, n_features: usize) -> usize {
        let h = config.hidden_dim;
        let mut n = 0;
        for l in 0..config.lstm_layers {
            let input = if l == 0 { n_features } else { h };
            n += 4 * (h * (input + h) + h) + 2 * h;
        }
        let dims = &config.head_dims;
        n += h * dims[0] + 2 * dims[0];
        for w in dims.windows(2) {
            n += w[0] * w[1] + w[1];
        }
        n
    }

    fn check_windows(&self, windows: &[ArrayView2<'_, f64>]) -> Result<usize> {
        let first = windows.first().ok_or_else(|| Error::Shape("empty batch".into()))?;
        let steps = first.nrows();
        if steps == 0 {
            return Err(Error::Shape("window with no time steps".into()));
        }
        for w in windows {
            if w.dim() != (steps, self.n_features) {
                return Err(Error::Shape(format!(
                    "window of shape {:?}, expected ({steps}, {})",
                    w.dim(),
                    self.n_features
                )));
            }
            if w.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("window contains a non-finite value".into()));
            }
        }
        Ok(steps)
    }

    /// Time step `t` of every window as a `batch x features` matrix.
    fn step_input(windows: &[ArrayView2<'_, f64>], t: usize) -> Tensor {
        let f = windows[0].ncols();
        Array2::from_shape_fn((windows.len(), f), |(b, j)| windows[b][[t, j]])
    }

    /// Differentiable forward pass on `params` (which must share this model's
    /// layout). Returns the `batch x 2` logits and, in training mode, the
    /// batch-norm statistics for the running-average update.
    pub fn forward(
        &self,
        g: &mut Graph,
        params: &ParameterSet,
        windows: &[ArrayView2<'_, f64>],
        mut mode: Mode<'_>,
    ) -> Result<(Var, Option<BatchStats>)> {
        let steps = self.check_windows(windows)?;
        let p = self.config.dropout;
        let mut seq: Vec<Var> = (0..steps).map(|t| g.input(Self::step_input(windows, t))).collect();
        let top = self.lstm.len() - 1;
        for (l, (cell, norm)) in self.lstm.iter().zip(&self.ln).enumerate() {
            let hs = cell.forward(g, params, &seq)?;
            let (gamma, beta) = norm.vars(g, params);
            // Only the last step of the top layer reaches the head.
            let keep_from = if l == top { steps - 1 } else { 0 };
            let mut next = Vec::with_capacity(steps - keep_from);
            for &h in &hs[keep_from..] {
                let y = g.layer_norm(h, gamma, beta, NORM_EPS)?;
                let y = match &mut mode {
                    Mode::Train(rng) => g.dropout(y, p, *rng),
                    Mode::Eval => y,
                };
                next.push(y);
            }
            seq = next;
        }
        let mut x = seq[0];
        let mut stats = None;
        let last = self.head.len() - 1;
        for (k, lin) in self.head.iter().enumerate() {
            x = lin.forward(g, params, x)?;
            if k == last {
                break;
            }
            if k == 0 {
                let (gamma, beta) = self.bn.vars(g, params);
                x = match &mode {
                    Mode::Train(_) => {
                        let (y, s) = g.batch_norm_train(x, gamma, beta, NORM_EPS)?;
                        stats = Some(s);
                        y
                    }
                    Mode::Eval => g.batch_norm_eval(x, gamma, beta, &self.bn_stats.mean, &self.bn_stats.var, NORM_EPS)?,
                };
            }
            x = g.relu(x);
            if let Mode::Train(rng) = &mut mode {
                x = g.dropout(x, p, *rng);
            }
        }
        Ok((x, stats))
    }

    /// Inference-mode logits without building a tape.
    pub fn logits(&self, windows: &[ArrayView2<'_, f64>]) -> Result<Tensor> {
        let steps = self.check_windows(windows)?;
        let b = windows.len();
        let h = self.config.hidden_dim;
        let v = |i: usize| self.params.value(i);
        let mut seq: Vec<Tensor> = (0..steps).map(|t| Self::step_input(windows, t)).collect();
        let top = self.lstm.len() - 1;
        for (l, (cell, norm)) in self.lstm.iter().zip(&self.ln).enumerate() {
            let (wx, wh, bias) = (v(cell.wx), v(cell.wh), v(cell.b));
            let (gamma, beta) = (v(norm.gamma), v(norm.beta));
            let mut hs = Array2::<f64>::zeros((b, h));
            let mut cs = Array2::<f64>::zeros((b, h));
            let keep_from = if l == top { steps - 1 } else { 0 };
            let mut next = Vec::with_capacity(steps - keep_from);
            for (t, x) in seq.iter().enumerate() {
                let z = x.dot(wx) + hs.dot(wh) + bias;
                for r in 0..b {
                    for j in 0..h {
                        let i = sigmoid(z[[r, j]]);
                        let f = sigmoid(z[[r, h + j]]);
                        let gg = z[[r, 2 * h + j]].tanh();
                        let o = sigmoid(z[[r, 3 * h + j]]);
                        let c = f * cs[[r, j]] + i * gg;
                        cs[[r, j]] = c;
                        hs[[r, j]] = o * c.tanh();
                    }
                }
                if t >= keep_from {
                    next.push(layer_norm(&hs, gamma, beta));
                }
            }
            seq = next;
        }
        let mut x = seq.pop().expect("at least one step");
        let last = self.head.len() - 1;
        for (k, lin) in self.head.iter().enumerate() {
            x = x.dot(v(lin.w));
            if let Some(bi) = lin.b {
                x += v(bi);
            }
            if k == last {
                break;
            }
            if k == 0 {
                let inv_std = self.bn_stats.var.mapv(|s| 1.0 / (s + NORM_EPS).sqrt());
                x = (&x - &self.bn_stats.mean) * &inv_std * v(self.bn.gamma) + v(self.bn.beta);
            }
            x.mapv_inplace(|e| e.max(0.0));
        }
        Ok(x)
    }

    /// Positive-class probabilities (softmax of the two logits), computed in
    /// fixed-size chunks across worker threads and returned in input order.
    pub fn predict_proba(&self, windows: &[ArrayView2<'_, f64>]) -> Result<Vec<f64>> {
        let chunks: Vec<Result<Vec<f64>>> = windows
            .par_chunks(PREDICT_CHUNK)
            .map(|c| {
                let z = self.logits(c)?;
                Ok(z.rows().into_iter().map(|r| positive_probability(r[0], r[1])).collect())
            })
            .collect();
        let mut out = Vec::with_capacity(windows.len());
        for c in chunks {
            out.extend(c?);
        }
        Ok(out)
    }
}

fn layer_norm(x: &Tensor, gamma: &Tensor, beta: &Tensor) -> Tensor {
    let n = x.ncols() as f64;
    let mean = x.sum_axis(Axis(1)) / n;
    let mut xhat = x - &mean.view().insert_axis(Axis(1));
    let var = xhat.mapv(|d| d * d).sum_axis(Axis(1)) / n;
    let inv_std = var.mapv(|v| 1.0 / (v + NORM_EPS).sqrt());
    xhat *= &inv_std.view().insert_axis(Axis(1));
    &xhat * gamma + beta
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::grad_check;
    use rand::Rng;

    fn toy(hidden: usize, layers: usize, seed: u64) -> ModelConfig {
        ModelConfig { hidden_dim: hidden, lstm_layers: layers, head_dims: vec![6, 4, 2], seed, ..Default::default() }
    }

    fn windows(n: usize, steps: usize, f: usize, seed: u64) -> Vec<Array2<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| Array2::from_shape_simple_fn((steps, f), || rng.random::<f64>())).collect()
    }

    fn views(w: &[Array2<f64>]) -> Vec<ArrayView2<'_, f64>> {
        w.iter().map(|w| w.view()).collect()
    }

    #[test]
    fn parameter_count_closed_form() {
        for f in [1, 15, 28] {
            let cfg = ModelConfig::default();
            let m = Model::new(&cfg, f).unwrap();
            assert_eq!(m.n_params(), Model::expected_param_count(&cfg, f));
        }
        // Hand total for the default network on 15 features.
        let h = 256;
        let lstm = 4 * (h * (15 + h) + h) + 2 * 4 * (h * 2 * h + h);
        let norms = 3 * 2 * h;
        let head = 256 * 128 + 2 * 128 + 128 * 64 + 64 + 64 * 2 + 2;
        assert_eq!(Model::expected_param_count(&ModelConfig::default(), 15), lstm + norms + head);
        let small = toy(8, 2, 0);
        assert_eq!(Model::new(&small, 3).unwrap().n_params(), Model::expected_param_count(&small, 3));
    }

    #[test]
    fn toy_forward_gives_two_logits() {
        let cfg = ModelConfig { hidden_dim: 8, lstm_layers: 1, ..Default::default() };
        let m = Model::new(&cfg, 5).unwrap();
        let w = windows(1, 35, 5, 1);
        let z = m.logits(&views(&w)).unwrap();
        assert_eq!(z.dim(), (1, 2));
        let p = m.predict_proba(&views(&w)).unwrap();
        assert!((0.0..=1.0).contains(&p[0]));
        assert!(m.logits(&[Array2::zeros((35, 4)).view()]).is_err());
    }

    #[test]
    fn same_seed_same_parameters() {
        let a = Model::new(&toy(8, 2, 5), 4).unwrap();
        let b = Model::new(&toy(8, 2, 5), 4).unwrap();
        let c = Model::new(&toy(8, 2, 6), 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.params, c.params);
    }

    #[test]
    fn fast_path_matches_graph_in_eval_mode() {
        let mut m = Model::new(&toy(8, 3, 2), 4).unwrap();
        m.bn_stats.mean = ndarray::Array1::from_vec(vec![0.1, -0.2, 0.0, 0.3, 0.05, -0.1]);
        m.bn_stats.var = ndarray::Array1::from_vec(vec![0.5, 1.5, 1.0, 0.8, 2.0, 0.3]);
        let w = windows(5, 12, 4, 3);
        let fast = m.logits(&views(&w)).unwrap();
        let mut g = Graph::new();
        let (z, stats) = m.forward(&mut g, &m.params, &views(&w), Mode::Eval).unwrap();
        assert!(stats.is_none());
        let diff = (&fast - g.value(z)).mapv(f64::abs).fold(0.0f64, |a, &b| a.max(b));
        assert!(diff < 1e-12, "{diff}");
        // Repeated inference is bit-identical.
        assert_eq!(m.logits(&views(&w)).unwrap(), fast);
    }

    #[test]
    fn chunked_prediction_keeps_order() {
        let m = Model::new(&toy(4, 1, 9), 3).unwrap();
        let w = windows(150, 6, 3, 11);
        let all = m.predict_proba(&views(&w)).unwrap();
        for i in [0, 63, 64, 149] {
            let one = m.predict_proba(&[w[i].view()]).unwrap()[0];
            assert!((one - all[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn dropout_only_in_training() {
        let cfg = ModelConfig { dropout: 0.5, ..toy(8, 2, 4) };
        let m = Model::new(&cfg, 3).unwrap();
        let w = windows(4, 5, 3, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut g1 = Graph::new();
        let (a, s) = m.forward(&mut g1, &m.params, &views(&w), Mode::Train(&mut rng)).unwrap();
        assert!(s.is_some());
        let mut g2 = Graph::new();
        let (b, _) = m.forward(&mut g2, &m.params, &views(&w), Mode::Train(&mut rng)).unwrap();
        assert_ne!(g1.value(a), g2.value(b));
    }

    fn composed_check(mode_train: bool) -> crate::tensor::GradCheck {
        let cfg = ModelConfig { dropout: 0.0, ..toy(8, 3, 13) };
        let mut m = Model::new(&cfg, 3).unwrap();
        m.bn_stats.mean.fill(0.05);
        m.bn_stats.var.fill(0.4);
        let w = windows(6, 4, 3, 14);
        let labels = [0, 1, 0, 1, 1, 0];
        grad_check(&m.params, 1e-6, |p| {
            let mut g = Graph::new();
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            let mode = if mode_train { Mode::Train(&mut rng) } else { Mode::Eval };
            let (z, _) = m.forward(&mut g, p, &views(&w), mode)?;
            let loss = g.weighted_cross_entropy(z, &labels, &[0.8, 1.3])?;
            Ok((g, loss))
        })
        .unwrap()
    }

    /// Whole network (hidden 8, three LSTM layers), dropout off, batch norm
    /// on running statistics: every parameter has a live gradient.
    #[test]
    fn composed_toy_gradients_inference_mode() {
        let r = composed_check(false);
        assert!(r.max_rel_error <= 1e-4, "{r:?}");
    }

    /// Batch-statistics mode. The top layer-norm shift is annihilated by the
    /// batch-norm mean subtraction, so its exact gradient is zero and only the
    /// absolute error is meaningful there.
    #[test]
    fn composed_toy_gradients_training_mode() {
        let r = composed_check(true);
        assert!(r.max_abs_error <= 1e-9, "{r:?}");
    }
}

use ndarray::{s, Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::tensor::graph::{BatchStats, Graph, Tensor, Var};
use crate::tensor::params::{uniform, ParameterSet};

pub const NORM_EPS: f64 = 1e-5;

/// Affine map `x W (+ b)` with `W: in x out`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub w: usize,
    pub b: Option<usize>,
    pub input: usize,
    pub output: usize,
}

impl Linear {
    pub fn new<R: Rng>(
        params: &mut ParameterSet,
        name: &str,
        input: usize,
        output: usize,
        bias: bool,
        rng: &mut R,
    ) -> Result<Self> {
        let bound = 1.0 / (input as f64).sqrt();
        let w = params.add(format!("{name}.weight"), uniform(rng, input, output, bound))?;
        let b = if bias {
            Some(params.add(format!("{name}.bias"), uniform(rng, 1, output, bound))?)
        } else {
            None
        };
        Ok(Self { w, b, input, output })
    }

    pub fn n_params(&self) -> usize {
        self.input * self.output + if self.b.is_some() { self.output } else { 0 }
    }

    pub fn forward(&self, g: &mut Graph, params: &ParameterSet, x: Var) -> Result<Var> {
        let w = g.param(params, self.w);
        let y = g.matmul(x, w)?;
        match self.b {
            Some(b) => {
                let b = g.param(params, b);
                g.add_row(y, b)
            }
            None => Ok(y),
        }
    }
}

/// LSTM layer with gate order i, f, g, o in the 4h columns of its weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lstm {
    pub wx: usize,
    pub wh: usize,
    pub b: usize,
    pub input: usize,
    pub hidden: usize,
}

/// Parameter handles of one LSTM layer on a specific graph.
#[derive(Clone, Copy, Debug)]
pub struct LstmVars {
    pub wx: Var,
    pub wh: Var,
    pub b: Var,
}

impl Lstm {
    /// Uniform ±1/sqrt(input + hidden) initialization with forget bias 1.
    pub fn new<R: Rng>(params: &mut ParameterSet, name: &str, input: usize, hidden: usize, rng: &mut R) -> Result<Self> {
        let bound = 1.0 / ((input + hidden) as f64).sqrt();
        let wx = params.add(format!("{name}.wx"), uniform(rng, input, 4 * hidden, bound))?;
        let wh = params.add(format!("{name}.wh"), uniform(rng, hidden, 4 * hidden, bound))?;
        let mut bias = uniform(rng, 1, 4 * hidden, bound);
        bias.slice_mut(s![.., hidden..2 * hidden]).fill(1.0);
        let b = params.add(format!("{name}.bias"), bias)?;
        Ok(Self { wx, wh, b, input, hidden })
    }

    pub fn n_params(&self) -> usize {
        4 * self.hidden * (self.input + self.hidden) + 4 * self.hidden
    }

    pub fn vars(&self, g: &mut Graph, params: &ParameterSet) -> LstmVars {
        LstmVars {
            wx: g.param(params, self.wx),
            wh: g.param(params, self.wh),
            b: g.param(params, self.b),
        }
    }

    /// One step: returns `(h_t, c_t)`.
    pub fn cell(&self, g: &mut Graph, v: LstmVars, x: Var, h: Var, c: Var) -> Result<(Var, Var)> {
        let n = self.hidden;
        let zx = g.matmul(x, v.wx)?;
        let zh = g.matmul(h, v.wh)?;
        let z = g.add(zx, zh)?;
        let z = g.add_row(z, v.b)?;
        let i = g.columns(z, 0, n)?;
        let f = g.columns(z, n, n)?;
        let gg = g.columns(z, 2 * n, n)?;
        let o = g.columns(z, 3 * n, n)?;
        let i = g.sigmoid(i);
        let f = g.sigmoid(f);
        let gg = g.tanh(gg);
        let o = g.sigmoid(o);
        let fc = g.mul(f, c)?;
        let ig = g.mul(i, gg)?;
        let c = g.add(fc, ig)?;
        let tc = g.tanh(c);
        let h = g.mul(o, tc)?;
        Ok((h, c))
    }

    /// Runs the sequence from zero state and returns every hidden state.
    pub fn forward(&self, g: &mut Graph, params: &ParameterSet, xs: &[Var]) -> Result<Vec<Var>> {
        let Some(first) = xs.first() else { return Ok(Vec::new()) };
        let batch = g.value(*first).nrows();
        let v = self.vars(g, params);
        let mut h = g.input(Array2::zeros((batch, self.hidden)));
        let mut c = g.input(Array2::zeros((batch, self.hidden)));
        let mut out = Vec::with_capacity(xs.len());
        for &x in xs {
            (h, c) = self.cell(g, v, x, h, c)?;
            out.push(h);
        }
        Ok(out)
    }
}

/// Learnable scale and shift shared by layer and batch norm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Norm {
    pub gamma: usize,
    pub beta: usize,
    pub dim: usize,
}

impl Norm {
    pub fn new(params: &mut ParameterSet, name: &str, dim: usize) -> Result<Self> {
        let gamma = params.add(format!("{name}.gamma"), Array2::ones((1, dim)))?;
        let beta = params.add(format!("{name}.beta"), Array2::zeros((1, dim)))?;
        Ok(Self { gamma, beta, dim })
    }

    pub fn n_params(&self) -> usize {
        2 * self.dim
    }

    pub fn vars(&self, g: &mut Graph, params: &ParameterSet) -> (Var, Var) {
        (g.param(params, self.gamma), g.param(params, self.beta))
    }
}

/// Running statistics of a batch norm layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunningStats {
    pub mean: Array1<f64>,
    pub var: Array1<f64>,
    pub momentum: f64,
}

impl RunningStats {
    pub fn new(dim: usize) -> Self {
        Self {
            mean: Array1::zeros(dim),
            var: Array1::ones(dim),
            momentum: 0.1,
        }
    }

    pub fn update(&mut self, batch: &BatchStats) {
        let m = self.momentum;
        self.mean = &self.mean * (1.0 - m) + &batch.mean * m;
        self.var = &self.var * (1.0 - m) + &batch.var_unbiased * m;
    }
}

/// Result of a finite-difference gradient check.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    /// Parameter name and flat index of the worst element.
    pub worst: Option<(String, usize)>,
    /// Analytic and finite-difference gradients at the worst element.
    pub worst_pair: (f64, f64),
    /// Largest absolute difference between the two gradients.
    pub max_abs_error: f64,
    /// Smallest analytic gradient magnitude; below roughly 1e-6 the relative
    /// error is dominated by rounding in the loss, not by the gradient.
    pub min_abs_grad: f64,
    pub checked: usize,
}

/// Compares reverse-mode gradients with central differences of step `h`.
///
/// `build` constructs the graph for the given parameters and returns it with
/// its scalar loss. Relative error per element is
/// `|g_ad - g_fd| / max(1e-8, |g_ad| + |g_fd|)`.
pub fn grad_check<F>(params: &ParameterSet, h: f64, mut build: F) -> Result<GradCheck>
where
    F: FnMut(&ParameterSet) -> Result<(Graph, Var)>,
{
    let (g, loss) = build(params)?;
    let analytic = g.backward(loss, params)?;
    drop(g);
    let mut work = params.clone();
    let mut report = GradCheck {
        max_rel_error: 0.0,
        worst: None,
        worst_pair: (0.0, 0.0),
        max_abs_error: 0.0,
        min_abs_grad: f64::INFINITY,
        checked: 0,
    };
    for p in 0..params.len() {
        for k in 0..params.value(p).len() {
            let orig = params.value(p).as_slice().expect("standard layout")[k];
            work.value_mut(p).as_slice_mut().unwrap()[k] = orig + h;
            let (gp, lp) = build(&work)?;
            let up = gp.scalar(lp);
            work.value_mut(p).as_slice_mut().unwrap()[k] = orig - h;
            let (gm, lm) = build(&work)?;
            let down = gm.scalar(lm);
            work.value_mut(p).as_slice_mut().unwrap()[k] = orig;
            let fd = (up - down) / (2.0 * h);
            let ad = analytic[p].as_slice().unwrap()[k];
            let rel = (ad - fd).abs() / (ad.abs() + fd.abs()).max(1e-8);
            report.checked += 1;
            report.max_abs_error = report.max_abs_error.max((ad - fd).abs());
            report.min_abs_grad = report.min_abs_grad.min(ad.abs());
            if report.worst.is_none() || rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst = Some((params.name(p).to_string(), k));
                report.worst_pair = (ad, fd);
            }
        }
    }
    Ok(report)
}

/// Fixed pseudo-random probe weights for turning any output into a scalar loss.
pub fn probe_weights<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Tensor {
    uniform(rng, rows, cols, 1.0)
}

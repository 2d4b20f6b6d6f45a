use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::graph::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Parameter {
    pub name: String,
    pub value: Tensor,
    /// AdamW first and second moment estimates.
    pub m: Tensor,
    pub v: Tensor,
}

/// Named parameters in insertion order, with optimizer state.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParameterSet {
    params: Vec<Parameter>,
    /// Completed optimizer steps.
    pub step: u64,
}

impl ParameterSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> Result<usize> {
        let name = name.into();
        if self.index_of(&name).is_some() {
            return Err(Error::Invalid(format!("duplicate parameter name {name}")));
        }
        let zeros = Array2::zeros(value.dim());
        self.params.push(Parameter { name, m: zeros.clone(), v: zeros, value });
        Ok(self.params.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn value(&self, i: usize) -> &Tensor {
        &self.params[i].value
    }

    pub fn value_mut(&mut self, i: usize) -> &mut Tensor {
        &mut self.params[i].value
    }

    pub fn name(&self, i: usize) -> &str {
        &self.params[i].name
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter> {
        self.params.iter()
    }

    /// Total number of scalar parameters.
    pub fn n_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// Copies values and optimizer state from `other`, which must have the same layout.
    pub fn assign(&mut self, other: &ParameterSet) {
        self.clone_from(other);
    }
}

/// Uniform initialization in `[-bound, bound]`.
pub fn uniform<R: Rng>(rng: &mut R, rows: usize, cols: usize, bound: f64) -> Tensor {
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-bound..=bound))
}

/// Decoupled-weight-decay Adam.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamW {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }
}

impl AdamW {
    /// One update of every parameter. Fails without touching anything if a
    /// gradient is non-finite.
    pub fn step(&self, params: &mut ParameterSet, grads: &[Tensor], lr: f64) -> Result<()> {
        if grads.len() != params.len() {
            return Err(Error::Shape(format!("{} gradients for {} parameters", grads.len(), params.len())));
        }
        for (p, g) in params.params.iter().zip(grads) {
            if g.dim() != p.value.dim() {
                return Err(Error::Shape(format!("gradient of {} has shape {:?}", p.name, g.dim())));
            }
            if let Some(bad) = g.iter().find(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("gradient of {} contains {bad}", p.name)));
            }
        }
        params.step += 1;
        let t = params.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for (p, g) in params.params.iter_mut().zip(grads) {
            ndarray::Zip::from(&mut p.value)
                .and(&mut p.m)
                .and(&mut p.v)
                .and(g)
                .for_each(|w, m, v, &g| {
                    *w -= lr * self.weight_decay * *w;
                    *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                    *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                    let m_hat = *m / bc1;
                    let v_hat = *v / bc2;
                    *w -= lr * m_hat / (v_hat.sqrt() + self.eps);
                });
        }
        Ok(())
    }
}

/// Step decay: `base_lr * gamma^floor(epoch / step_size)`.
pub fn step_lr(epoch: usize, base_lr: f64, gamma: f64, step_size: usize) -> f64 {
    base_lr * gamma.powi((epoch / step_size.max(1)) as i32)
}

/// Rescales gradients so their global L2 norm is at most `max_norm`.
pub fn clip_grad_norm(grads: &mut [Tensor], max_norm: f64) -> f64 {
    let norm = grads.iter().map(|g| g.iter().map(|v| v * v).sum::<f64>()).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        for g in grads.iter_mut() {
            g.mapv_inplace(|v| v * s);
        }
    }
    norm
}

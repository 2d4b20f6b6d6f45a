use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::samples::LabelMode;

/// Network and training hyperparameters. Defaults are the full-size network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub lstm_layers: usize,
    pub hidden_dim: usize,
    /// Widths of the head's linear layers; the last one must be 2.
    pub head_dims: Vec<usize>,
    pub dropout: f64,
    pub batch_size: usize,
    pub base_lr: f64,
    pub lr_gamma: f64,
    pub lr_step: usize,
    pub max_epochs: usize,
    pub early_stop_patience: usize,
    pub seed: u64,
    pub label_mode: LabelMode,
    pub weight_decay: f64,
    /// Optional global gradient-norm cap.
    pub grad_clip: Option<f64>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            lstm_layers: 3,
            hidden_dim: 256,
            head_dims: vec![128, 64, 2],
            dropout: 0.3,
            batch_size: 32,
            base_lr: 5e-4,
            lr_gamma: 0.1,
            lr_step: 30,
            max_epochs: 250,
            early_stop_patience: 30,
            seed: 0,
            label_mode: LabelMode::AL,
            weight_decay: 0.01,
            grad_clip: None,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.lstm_layers == 0 || self.hidden_dim == 0 {
            return bad("lstm_layers and hidden_dim must be positive");
        }
        if self.head_dims.is_empty() || self.head_dims.contains(&0) {
            return bad("head_dims must be non-empty and positive");
        }
        if self.head_dims.last() != Some(&2) {
            return bad("the last head layer must have 2 outputs");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if self.batch_size < 2 {
            return bad("batch_size must be at least 2 for batch norm");
        }
        if !(self.base_lr.is_finite() && self.base_lr > 0.0) {
            return bad("base_lr must be positive");
        }
        if !(self.lr_gamma.is_finite() && self.lr_gamma > 0.0) || self.lr_step == 0 {
            return bad("lr_gamma and lr_step must be positive");
        }
        if self.max_epochs == 0 || self.early_stop_patience == 0 {
            return bad("max_epochs and early_stop_patience must be positive");
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return bad("weight_decay must be non-negative");
        }
        if let Some(c) = self.grad_clip {
            if !(c.is_finite() && c > 0.0) {
                return bad("grad_clip must be positive");
            }
        }
        Ok(())
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(Error::io(path))?;
        Self::from_toml_str(&s)
    }
}

//! Minimal reverse-mode engine: tape graph, layers, AdamW and gradient checks.

pub mod graph;
pub mod layers;
pub mod params;

pub use graph::{positive_probability, softmax, BatchStats, Graph, Tensor, Var};
pub use layers::{grad_check, GradCheck, Linear, Lstm, Norm, RunningStats, NORM_EPS};
pub use params::{clip_grad_norm, step_lr, uniform, AdamW, ParameterSet};

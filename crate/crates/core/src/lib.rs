//! Explainable LSTM pipeline for predicting tetrodotoxin contamination in
//! bivalve mollusks from 35-day environmental time-series windows.

pub mod error;
pub mod evaluate;
pub mod explain;
pub mod ingest;
pub mod model;
pub mod pipeline;
pub mod preprocess;
pub mod stats;
pub mod synthgen;
pub mod tensor;

pub use error::{Error, Result};

//! Network assembly, training with early stopping, and checkpoints.

pub mod checkpoint;
pub mod config;
pub mod network;
pub mod train;

pub use checkpoint::{file_sha256, mean_window, InputSchema, TrainedModel};
pub use config::ModelConfig;
pub use network::{Mode, Model, PREDICT_CHUNK};
pub use train::{class_weights, train, EpochRecord, TrainingHistory};

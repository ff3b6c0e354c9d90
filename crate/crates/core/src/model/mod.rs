//! The multi-task network, the LSTM autoencoder baseline, the per-maneuver
//! ensemble, checkpoints and training.

pub mod baseline;
pub mod checkpoint;
pub mod config;
pub mod multitask;
pub mod train;

pub use baseline::{baseline_autoencoder_loss, ensemble_loss, EnsembleModel, LstmAutoencoder};
pub use checkpoint::{load_checkpoint, load_into, save_checkpoint, StoredParam};
pub use config::{ConvSpec, LossWeights, ModelConfig};
pub use multitask::{multitask_loss, Encoding, MultiTaskLoss, MultiTaskModel, TaskLosses};
pub use train::{
    evaluate, symbol_class_weights, train, train_ensemble, EpochMetrics, TrainConfig, Trainable, METRICS_HEADER,
    Trainer, WindowLoss,
};

//! Geometry-head pretraining, classifier training, schedules and losses.

pub mod config;
pub mod losses;
pub mod trainer;

pub use config::{learning_rate, TrainConfig};
pub use trainer::{
    pretrain_geometry_head, score_sequences, train_classifier, EpochRecord, PretrainOutcome,
    TrainOutcome,
};

//! Splitting, target scaling, the optimization loop, metrics, checkpoints
//! and the modality comparison.

mod checkpoint;
mod compare;
mod metrics;
mod normalize;
mod optim;
mod schedule;
mod split;
#[cfg(test)]
mod tests;
mod trainer;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint, MAGIC, VERSION,
};
pub use compare::{compare_modalities, fit_model, ComparisonReport, ComparisonRow, FittedModel, SPLITS};
pub use metrics::{evaluate, percentage_error, predict_targets, MetricsReport, Residual};
pub use normalize::Normalizer;
pub use optim::Adam;
pub use schedule::PlateauScheduler;
pub use split::{select, split_dataset, split_ids, split_sizes, DatasetSplit, HOLDOUT, MIN_RECORDS};
pub use trainer::{eval_mse, normalized_targets, train, EpochStats, LossTrace, TrainConfig, Trainer};

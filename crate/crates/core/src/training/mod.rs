//! Training loops, class-balanced resampling, model selection and
//! multi-seed experiments.

mod config;
mod epoch;
mod experiment;

pub use config::{LossKind, ModelSpec, TrainConfig, DEFAULT_MAX_CHARS, DEFAULT_SEEDS};
pub use epoch::{
    loss, make_batches, predict_examples, resample_balanced, select_best, selection_metric, train_epoch, Dataset,
    EpochEvent, Example, EVAL_BATCH_SIZE,
};
pub use experiment::{model_config_for, run_experiment, train_run, Experiment, RunFailure, RunOutput, RunRecord};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::epoch::{
    make_batches, predict_examples, resample_balanced, select_best, selection_metric, train_epoch, Dataset, EpochEvent,
    Example,
};
use crate::autodiff::{AdamConfig, AdamState, Tensor};
use crate::error::{Error, Result};
use crate::models::{Model, ModelConfig};
use crate::stats::{PredictionRecord, Report, RunSummary};

/// Outcome of training one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub train_loss: Vec<f64>,
    pub valid_metric: Vec<f64>,
    pub selected_epoch: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<String>,
    pub test_predictions: Vec<PredictionRecord>,
}

pub struct RunOutput {
    pub record: RunRecord,
    /// Parameters restored to the selected epoch.
    pub model: Model,
    pub events: Vec<EpochEvent>,
}

pub struct RunFailure {
    /// History up to the failure.
    pub record: RunRecord,
    pub events: Vec<EpochEvent>,
    pub error: Error,
}

pub struct Experiment {
    pub config: TrainConfig,
    pub runs: Vec<RunOutput>,
    pub failures: Vec<RunFailure>,
}

impl Experiment {
    pub fn succeeded(&self) -> bool {
        self.failures.is_empty()
    }

    /// Aggregate test report; fails if any run failed.
    pub fn report(&self) -> Result<Report> {
        if let Some(f) = self.failures.first() {
            return Err(Error::InvalidArgument(format!(
                "experiment failed: run with seed {} aborted: {}",
                f.record.seed, f.error
            )));
        }
        let predictions: Vec<Vec<PredictionRecord>> =
            self.runs.iter().map(|r| r.record.test_predictions.clone()).collect();
        let summaries = self
            .runs
            .iter()
            .map(|r| {
                let epoch = r.record.selected_epoch.unwrap_or(0);
                RunSummary {
                    seed: r.record.seed,
                    selected_epoch: epoch,
                    valid_metric: r.record.valid_metric[epoch],
                }
            })
            .collect();
        Report::from_runs(self.config.task, &predictions, summaries)
    }
}

fn now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

/// Trains one seed: fixed epoch budget, model selection on the natural
/// validation split, then test predictions from the selected parameters.
pub fn train_run(
    config: &TrainConfig,
    model_config: &ModelConfig,
    data: &Dataset,
    seed: u64,
    embeddings: Option<&Tensor>,
) -> std::result::Result<RunOutput, Box<RunFailure>> {
    let mut record = RunRecord {
        seed,
        train_loss: Vec::new(),
        valid_metric: Vec::new(),
        selected_epoch: None,
        checkpoint: None,
        test_predictions: Vec::new(),
    };
    let mut events = Vec::new();
    let result = train_inner(config, model_config, data, seed, embeddings, &mut record, &mut events);
    match result {
        Ok(model) => Ok(RunOutput { record, model, events }),
        Err(error) => Err(Box::new(RunFailure { record, events, error })),
    }
}

fn train_inner(
    config: &TrainConfig,
    model_config: &ModelConfig,
    data: &Dataset,
    seed: u64,
    embeddings: Option<&Tensor>,
    record: &mut RunRecord,
    events: &mut Vec<EpochEvent>,
) -> Result<Model> {
    let task = config.task;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = match embeddings {
        Some(e) => Model::with_embeddings(model_config.clone(), e.clone(), &mut rng)?,
        None => Model::new(model_config.clone(), &mut rng)?,
    };
    let mut optimizer = AdamState::new(
        AdamConfig {
            lr: config.lr,
            ..AdamConfig::default()
        },
        model.params(),
    );
    let labels: Vec<bool> = data.train.iter().map(Example::class).collect();
    let mut best = None;

    for epoch in 0..config.epochs {
        let order = if config.resample {
            resample_balanced(&labels, &mut rng)?
        } else {
            let mut all: Vec<usize> = (0..data.train.len()).collect();
            all.shuffle(&mut rng);
            all
        };
        let batches: Vec<Vec<&Example>> = make_batches(&order, config.batch_size)
            .into_iter()
            .map(|b| b.into_iter().map(|i| &data.train[i]).collect())
            .collect();
        let train_loss = train_epoch(&mut model, &mut optimizer, &batches, epoch, config.grad_clip, &mut rng)?;
        let valid = predict_examples(&model, &data.valid, task, Some(seed))?;
        let metric = selection_metric(&valid, task)?;
        record.train_loss.push(train_loss);
        record.valid_metric.push(metric);
        events.push(EpochEvent {
            epoch,
            train_loss,
            valid_metric: metric,
            timestamp: now(),
        });
        // `>=` keeps the last epoch among ties
        if best.as_ref().is_none_or(|(m, _)| metric >= *m) {
            best = Some((metric, model.params().clone()));
        }
    }

    let selected = select_best(&record.valid_metric)?;
    record.selected_epoch = Some(selected);
    let (_, params) = best.expect("at least one epoch");
    model.params_mut().copy_values_from(&params)?;
    record.test_predictions = predict_examples(&model, &data.test, task, Some(seed))?;
    Ok(model)
}

/// One training per configured seed. Runs are independent; with more than
/// one thread they execute in parallel, with identical results.
pub fn run_experiment(
    config: &TrainConfig,
    model_config: &ModelConfig,
    data: &Dataset,
    embeddings: Option<&Tensor>,
    threads: Option<usize>,
) -> Result<Experiment> {
    config.validate()?;
    model_config.validate()?;
    if model_config.head != config.task.head() {
        return Err(Error::Config("model head does not match the task".into()));
    }
    let run = |&seed: &u64| train_run(config, model_config, data, seed, embeddings);
    let results: Vec<_> = match threads {
        Some(1) => config.seeds.iter().map(run).collect(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(|| config.seeds.par_iter().map(run).collect()),
        None => config.seeds.par_iter().map(run).collect(),
    };
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(o) => runs.push(o),
            Err(f) => failures.push(*f),
        }
    }
    Ok(Experiment {
        config: config.clone(),
        runs,
        failures,
    })
}

/// Convenience for callers holding a resolved config.
pub fn model_config_for(config: &TrainConfig, vocab_size: usize) -> ModelConfig {
    config.model.resolve(config.task, vocab_size)
}


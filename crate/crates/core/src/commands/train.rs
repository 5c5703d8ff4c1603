use std::path::{Path, PathBuf};

use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use super::dataset::{write_json, write_jsonl, PreparedData};
use crate::error::{Error, Result};
use crate::models::save_checkpoint;
use crate::stats::{vote_aggregate, PredictionRecord, Task};
use crate::text::load_embeddings;
use crate::training::{model_config_for, run_experiment, Dataset, TrainConfig};
use crate::util::{read_file, sha256_hex};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const REPORT_FILE: &str = "report.json";
pub const PREDICTIONS_FILE: &str = "predictions.jsonl";
pub const VOTED_FILE: &str = "predictions-voted.jsonl";

/// Everything needed to re-run an experiment and check it against the same data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub tool_version: String,
    pub config: TrainConfig,
    pub seeds: Vec<u64>,
    pub data_dir: PathBuf,
    pub corpus_hash: String,
    pub dataset_hash: String,
    pub vocab_hash: String,
    /// Per-seed checkpoint files, relative to the manifest.
    pub checkpoints: Vec<String>,
    pub logs: Vec<String>,
    pub report: Option<String>,
    /// Seeds whose run aborted, with the reason.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<String>,
}

impl ExperimentManifest {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&read_file(path)?)?)
    }
}

#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    pub force: bool,
    pub threads: Option<usize>,
    /// Replaces the configured seeds.
    pub seeds: Option<Vec<u64>>,
}

pub fn checkpoint_name(seed: u64) -> String {
    format!("run-{seed}.ckpt")
}

pub fn log_name(seed: u64) -> String {
    format!("run-{seed}.log.jsonl")
}

/// Trains every seed on a prepared dataset and writes checkpoints, logs,
/// predictions, the report and the manifest into `out`.
pub fn cmd_train(config: &TrainConfig, data_dir: &Path, out: &Path, options: &TrainOptions) -> Result<ExperimentManifest> {
    let mut config = config.clone();
    if let Some(seeds) = &options.seeds {
        config.seeds = seeds.clone();
    }
    config.validate()?;
    let manifest_path = out.join(MANIFEST_FILE);
    if manifest_path.exists() && !options.force {
        return Err(Error::WouldOverwrite(manifest_path));
    }

    let data = PreparedData::load(data_dir)?;
    let meta = &data.meta;
    if meta.tagset != config.model.tagset || meta.cutoff != config.cutoff || meta.max_vocab != config.vocab_size {
        return Err(Error::Config(format!(
            "dataset in {} was prepared with tagset {:?}, cutoff {:?}, vocab {}; the config asks for {:?}, {:?}, {}",
            data_dir.display(),
            meta.tagset,
            meta.cutoff,
            meta.max_vocab,
            config.model.tagset,
            config.cutoff,
            config.vocab_size
        )));
    }
    let dataset_hash = data.current_dataset_hash()?;
    if dataset_hash != meta.dataset_hash {
        return Err(Error::Config("dataset file changed since it was prepared".into()));
    }

    let dataset = Dataset::from_documents(&data.docs, config.task)?;
    let model_config = model_config_for(&config, data.vocab.len());
    let embeddings = match &config.embeddings {
        Some(path) => {
            // one fixed draw for uncovered rows, shared by every seed
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
            Some(load_embeddings(path, &data.vocab, model_config.embedding_dim, &mut rng)?.0)
        }
        None => None,
    };

    let experiment = run_experiment(&config, &model_config, &dataset, embeddings.as_ref(), options.threads)?;

    let mut manifest = ExperimentManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        seeds: config.seeds.clone(),
        data_dir: data_dir.to_path_buf(),
        corpus_hash: meta.corpus_hash.clone(),
        dataset_hash,
        vocab_hash: data.vocab.hash(),
        checkpoints: Vec::new(),
        logs: Vec::new(),
        report: None,
        failures: Vec::new(),
    };
    let mut all_predictions: Vec<PredictionRecord> = Vec::new();
    for run in &experiment.runs {
        let seed = run.record.seed;
        save_checkpoint(&out.join(checkpoint_name(seed)), &run.model, &manifest.vocab_hash)?;
        write_jsonl(&out.join(log_name(seed)), &run.events)?;
        write_jsonl(&out.join(format!("predictions-{seed}.jsonl")), &run.record.test_predictions)?;
        manifest.checkpoints.push(checkpoint_name(seed));
        manifest.logs.push(log_name(seed));
        all_predictions.extend(run.record.test_predictions.iter().cloned());
    }
    for failure in &experiment.failures {
        let seed = failure.record.seed;
        write_jsonl(&out.join(log_name(seed)), &failure.events)?;
        manifest.logs.push(log_name(seed));
        manifest.failures.push(format!("seed {seed}: {}", failure.error));
    }

    if experiment.succeeded() {
        let report = experiment.report()?;
        super::dataset::write_atomic_str(&out.join(REPORT_FILE), &report.to_json()?)?;
        write_jsonl(&out.join(PREDICTIONS_FILE), &all_predictions)?;
        let runs: Vec<Vec<PredictionRecord>> =
            experiment.runs.iter().map(|r| r.record.test_predictions.clone()).collect();
        if config.task == Task::Regress || runs.len() % 2 == 1 {
            write_jsonl(&out.join(VOTED_FILE), &vote_aggregate(&runs, config.task)?)?;
        }
        manifest.report = Some(REPORT_FILE.to_string());
    }
    write_json(&manifest_path, &manifest)?;
    if let Some(f) = experiment.failures.into_iter().next() {
        return Err(f.error);
    }
    Ok(manifest)
}

/// Re-runs the experiment recorded in a manifest, refusing data whose
/// hashes differ from the recorded ones.
pub fn cmd_train_from_manifest(
    manifest_path: &Path,
    data_dir: Option<&Path>,
    out: &Path,
    options: &TrainOptions,
) -> Result<ExperimentManifest> {
    let manifest = ExperimentManifest::load(manifest_path)?;
    let dir = data_dir.map_or_else(|| manifest.data_dir.clone(), Path::to_path_buf);
    let data = PreparedData::load(&dir)?;
    if data.meta.dataset_hash != manifest.dataset_hash || data.vocab.hash() != manifest.vocab_hash {
        return Err(Error::IncompatibleCheckpoint(format!(
            "data in {} does not match the manifest hashes",
            dir.display()
        )));
    }
    let options = TrainOptions {
        seeds: Some(manifest.seeds.clone()),
        ..options.clone()
    };
    cmd_train(&manifest.config, &dir, out, &options)
}

/// Hash of a report file, handy for reproduction checks.
pub fn report_hash(dir: &Path) -> Result<String> {
    Ok(sha256_hex(&crate::util::read_bytes(&dir.join(REPORT_FILE))?))
}

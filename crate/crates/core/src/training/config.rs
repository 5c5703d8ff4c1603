use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{ModelConfig, ModelKind};
use crate::stats::Task;
use crate::text::{CutoffPolicy, TagSet, DEFAULT_MAX_SIZE};

pub const DEFAULT_MAX_CHARS: usize = 20_000;
pub const DEFAULT_SEEDS: [u64; 3] = [1, 2, 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    CrossEntropy,
    Mae,
}

impl LossKind {
    pub fn for_task(task: Task) -> Self {
        match task {
            Task::Classify => LossKind::CrossEntropy,
            Task::Regress => LossKind::Mae,
        }
    }
}

/// Architecture choice. Sizes left out fall back to the task defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: ModelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding_dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hidden: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dropout: Option<f64>,
    #[serde(default)]
    pub tagset: TagSet,
    #[serde(default)]
    pub freeze_embeddings: bool,
}

impl ModelSpec {
    pub fn resolve(&self, task: Task, vocab_size: usize) -> ModelConfig {
        let base = match task {
            Task::Classify => ModelConfig::classification(self.kind, vocab_size, self.tagset),
            Task::Regress => ModelConfig::regression(self.kind, vocab_size, self.tagset),
        };
        ModelConfig {
            embedding_dim: self.embedding_dim.unwrap_or(base.embedding_dim),
            hidden: self.hidden.unwrap_or(base.hidden),
            dropout: self.dropout.unwrap_or(base.dropout),
            freeze_embeddings: self.freeze_embeddings,
            ..base
        }
    }
}

/// Everything needed to train one experiment. Parsed from TOML; keys left
/// out take the defaults of the task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTrainConfig", into = "RawTrainConfig")]
pub struct TrainConfig {
    pub task: Task,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub loss: LossKind,
    pub resample: bool,
    pub seeds: Vec<u64>,
    pub cutoff: CutoffPolicy,
    pub vocab_size: usize,
    /// Pretrained vectors in whitespace-separated text format.
    pub embeddings: Option<PathBuf>,
    pub grad_clip: Option<f64>,
    pub model: ModelSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTrainConfig {
    task: Task,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    epochs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    batch_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lr: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    loss: Option<LossKind>,
    #[serde(default)]
    resample: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seeds: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    max_chars: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sentence_limit: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    vocab_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    embeddings: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    grad_clip: Option<f64>,
    model: ModelSpec,
}

impl TryFrom<RawTrainConfig> for TrainConfig {
    type Error = Error;

    fn try_from(raw: RawTrainConfig) -> Result<Self> {
        let cutoff = match (raw.max_chars, raw.sentence_limit) {
            (Some(_), Some(_)) => {
                return Err(Error::Config("set either max_chars or sentence_limit, not both".into()))
            }
            (_, Some(n)) => CutoffPolicy::SentenceLimit(n),
            (c, None) => CutoffPolicy::CharacterLimit(c.unwrap_or(DEFAULT_MAX_CHARS)),
        };
        let (epochs, batch_size) = match raw.task {
            Task::Classify => (360, 4),
            Task::Regress => (60, 64),
        };
        Ok(Self {
            task: raw.task,
            epochs: raw.epochs.unwrap_or(epochs),
            batch_size: raw.batch_size.unwrap_or(batch_size),
            lr: raw.lr.unwrap_or(0.005),
            loss: raw.loss.unwrap_or(LossKind::for_task(raw.task)),
            resample: raw.resample,
            seeds: raw.seeds.unwrap_or_else(|| DEFAULT_SEEDS.to_vec()),
            cutoff,
            vocab_size: raw.vocab_size.unwrap_or(DEFAULT_MAX_SIZE),
            embeddings: raw.embeddings,
            grad_clip: raw.grad_clip,
            model: raw.model,
        })
    }
}

impl From<TrainConfig> for RawTrainConfig {
    fn from(c: TrainConfig) -> Self {
        let (max_chars, sentence_limit) = match c.cutoff {
            CutoffPolicy::CharacterLimit(n) => (Some(n), None),
            CutoffPolicy::SentenceLimit(n) => (None, Some(n)),
        };
        Self {
            task: c.task,
            epochs: Some(c.epochs),
            batch_size: Some(c.batch_size),
            lr: Some(c.lr),
            loss: Some(c.loss),
            resample: c.resample,
            seeds: Some(c.seeds),
            max_chars,
            sentence_limit,
            vocab_size: Some(c.vocab_size),
            embeddings: c.embeddings,
            grad_clip: c.grad_clip,
            model: c.model,
        }
    }
}

impl TrainConfig {
    /// Paper defaults for a task and architecture.
    pub fn defaults(task: Task, kind: ModelKind, tagset: TagSet) -> Self {
        let raw = RawTrainConfig {
            task,
            epochs: None,
            batch_size: None,
            lr: None,
            loss: None,
            resample: task == Task::Classify,
            seeds: None,
            max_chars: None,
            sentence_limit: None,
            vocab_size: None,
            embeddings: None,
            grad_clip: None,
            model: ModelSpec {
                kind,
                embedding_dim: None,
                hidden: None,
                dropout: None,
                tagset,
                freeze_embeddings: false,
            },
        };
        Self::try_from(raw).expect("defaults are consistent")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&crate::util::read_file(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.loss != LossKind::for_task(self.task) {
            return Err(Error::Config(format!(
                "loss {:?} does not match task {}",
                self.loss, self.task
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(Error::Config(format!("invalid learning rate {}", self.lr)));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        if seeds.len() != self.seeds.len() {
            return Err(Error::Config("seeds must be distinct".into()));
        }
        if self.task == Task::Classify && self.seeds.len().is_multiple_of(2) {
            return Err(Error::Config("classification needs an odd number of seeds for voting".into()));
        }
        if self.resample && self.task == Task::Regress {
            return Err(Error::Config("resampling applies to classification only".into()));
        }
        if let Some(c) = self.grad_clip {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::Config(format!("invalid grad_clip {c}")));
            }
        }
        if self.vocab_size == 0 {
            return Err(Error::Config("vocab_size must be positive".into()));
        }
        self.cutoff.validate()?;
        self.model.resolve(self.task, 2).validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn task_defaults_fill_missing_keys() {
        let c = TrainConfig::from_toml("task = \"classify\"\n[model]\nkind = \"han\"\ntagset = \"full\"\n").unwrap();
        assert_eq!((c.epochs, c.batch_size, c.lr), (360, 4, 0.005));
        assert_eq!(c.loss, LossKind::CrossEntropy);
        assert_eq!(c.cutoff, CutoffPolicy::CharacterLimit(20_000));
        assert_eq!(c.vocab_size, 10_000);
        let m = c.model.resolve(c.task, 10_002);
        assert_eq!((m.embedding_dim, m.hidden, m.dropout), (50, 256, 0.5));

        let r = TrainConfig::from_toml("task = \"regress\"\nsentence_limit = 30\n[model]\nkind = \"awe\"\n").unwrap();
        assert_eq!((r.epochs, r.batch_size, r.loss), (60, 64, LossKind::Mae));
        assert_eq!(r.cutoff, CutoffPolicy::SentenceLimit(30));
        let m = r.model.resolve(r.task, 10_002);
        assert_eq!((m.embedding_dim, m.hidden, m.dropout), (300, 100, 0.2));
    }

    #[test]
    fn mismatched_loss_is_rejected() {
        let err = TrainConfig::from_toml("task = \"classify\"\nloss = \"mae\"\n[model]\nkind = \"awe\"\n").unwrap_err();
        assert_eq!(err.code(), "CONFIG_INVALID");
        let err = TrainConfig::from_toml("task = \"classify\"\nbatch_size = 0\n[model]\nkind = \"awe\"\n").unwrap_err();
        assert_eq!(err.code(), "CONFIG_INVALID");
        assert!(TrainConfig::from_toml("task = \"classify\"\nbogus = 1\n[model]\nkind = \"awe\"\n").is_err());
    }

    #[test]
    fn toml_roundtrip() {
        let mut c = TrainConfig::defaults(Task::Classify, ModelKind::Han, TagSet::Reduced);
        c.cutoff = CutoffPolicy::SentenceLimit(12);
        c.grad_clip = Some(5.0);
        assert_eq!(TrainConfig::from_toml(&c.to_toml()).unwrap(), c);
    }
}

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::TagSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Average word embeddings.
    Awe,
    /// Per-sentence mean embedding fed to a document-level BiLSTM.
    SentAvgBilstm,
    /// Hierarchical attention network. With a tagset other than `none` this
    /// is HAN-ST; the architecture is the same.
    Han,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadKind {
    /// Two logits: index 0 rejected, index 1 accepted.
    Classify,
    /// One unbounded citation-score.
    Regress,
}

impl HeadKind {
    pub fn outputs(self) -> usize {
        match self {
            HeadKind::Classify => 2,
            HeadKind::Regress => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub vocab_size: usize,
    pub embedding_dim: usize,
    /// Hidden size per direction, shared by word and sentence BiLSTMs.
    pub hidden: usize,
    pub dropout: f64,
    pub head: HeadKind,
    pub tagset: TagSet,
    #[serde(default)]
    pub freeze_embeddings: bool,
}

impl ModelConfig {
    /// Accept/reject defaults: d=50, hidden 256, dropout 0.5.
    pub fn classification(kind: ModelKind, vocab_size: usize, tagset: TagSet) -> Self {
        Self {
            kind,
            vocab_size,
            embedding_dim: 50,
            hidden: 256,
            dropout: 0.5,
            head: HeadKind::Classify,
            tagset,
            freeze_embeddings: false,
        }
    }

    /// Citation regression defaults: d=300, hidden 100, dropout 0.2.
    pub fn regression(kind: ModelKind, vocab_size: usize, tagset: TagSet) -> Self {
        Self {
            kind,
            vocab_size,
            embedding_dim: 300,
            hidden: 100,
            dropout: 0.2,
            head: HeadKind::Regress,
            tagset,
            freeze_embeddings: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.vocab_size < 2 {
            return Err(Error::Config("vocabulary must hold at least PAD and UNK".into()));
        }
        if self.embedding_dim == 0 || self.hidden == 0 {
            return Err(Error::Config("embedding_dim and hidden must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }

    /// Width of the document vector fed to the head.
    pub fn doc_dim(&self) -> usize {
        match self.kind {
            ModelKind::Awe => self.embedding_dim,
            ModelKind::SentAvgBilstm | ModelKind::Han => 2 * self.hidden,
        }
    }
}

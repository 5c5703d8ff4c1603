use std::path::Path;

use super::dataset::{dataset_jsonl, split_stats, stats_table, write_json, PrepareMeta, DATASET_FILE, META_FILE, VOCAB_FILE};
use crate::error::Result;
use crate::text::{prepare_corpus, read_corpus, CutoffPolicy, TagSet};
use crate::util::{read_bytes, sha256_hex, write_atomic};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrepareOptions {
    pub tagset: TagSet,
    pub cutoff: CutoffPolicy,
    pub max_vocab: usize,
}

impl Default for PrepareOptions {
    fn default() -> Self {
        Self {
            tagset: TagSet::Full,
            cutoff: CutoffPolicy::CharacterLimit(crate::training::DEFAULT_MAX_CHARS),
            max_vocab: crate::text::DEFAULT_MAX_SIZE,
        }
    }
}

impl From<&crate::training::TrainConfig> for PrepareOptions {
    fn from(c: &crate::training::TrainConfig) -> Self {
        Self {
            tagset: c.model.tagset,
            cutoff: c.cutoff,
            max_vocab: c.vocab_size,
        }
    }
}

/// Segments, tags, truncates and encodes a JSONL corpus into `out`:
/// `dataset.jsonl`, `vocab.json` and `prepare.json`. Returns the per-split
/// statistics table.
pub fn cmd_prepare(corpus: &Path, out: &Path, options: PrepareOptions) -> Result<(PrepareMeta, String)> {
    let raw = read_corpus(corpus)?;
    let corpus_hash = sha256_hex(&read_bytes(corpus)?);
    let (docs, vocab) = prepare_corpus(&raw, options.tagset, options.cutoff, options.max_vocab)?;
    let dataset = dataset_jsonl(&docs)?;
    let stats = split_stats(&docs);
    let meta = PrepareMeta {
        corpus_hash,
        dataset_hash: sha256_hex(dataset.as_bytes()),
        vocab_hash: vocab.hash(),
        tagset: options.tagset,
        cutoff: options.cutoff,
        max_vocab: options.max_vocab,
        stats: stats.clone(),
    };
    write_atomic(&out.join(DATASET_FILE), dataset.as_bytes())?;
    vocab.save(&out.join(VOCAB_FILE))?;
    write_json(&out.join(META_FILE), &meta)?;
    Ok((meta, stats_table(&stats)))
}

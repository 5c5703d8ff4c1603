use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::{CutoffPolicy, Split, TagSet, TaggedDocument, Vocabulary};
use crate::util::{median, read_file, sha256_hex, write_atomic};

/// Environment variable overriding the default data directory.
pub const DATA_DIR_ENV: &str = "HANST_DATA_DIR";

pub const DATASET_FILE: &str = "dataset.jsonl";
pub const VOCAB_FILE: &str = "vocab.json";
pub const META_FILE: &str = "prepare.json";

/// `$HANST_DATA_DIR`, or `./data`.
pub fn default_data_dir() -> PathBuf {
    std::env::var_os(DATA_DIR_ENV)
        .filter(|v| !v.is_empty())
        .map_or_else(|| PathBuf::from("data"), PathBuf::from)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitStats {
    pub split: Split,
    pub docs: usize,
    pub mean_words: f64,
    pub median_words: f64,
    pub mean_tokens: f64,
}

/// Settings and hashes recorded next to a prepared dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrepareMeta {
    pub corpus_hash: String,
    pub dataset_hash: String,
    pub vocab_hash: String,
    pub tagset: TagSet,
    pub cutoff: CutoffPolicy,
    pub max_vocab: usize,
    pub stats: Vec<SplitStats>,
}

pub fn split_stats(docs: &[TaggedDocument]) -> Vec<SplitStats> {
    [Split::Train, Split::Valid, Split::Test]
        .into_iter()
        .filter_map(|split| {
            let words: Vec<f64> = docs.iter().filter(|d| d.split == split).map(|d| d.word_count as f64).collect();
            let tokens: Vec<f64> = docs.iter().filter(|d| d.split == split).map(|d| d.token_count() as f64).collect();
            (!words.is_empty()).then(|| SplitStats {
                split,
                docs: words.len(),
                mean_words: crate::util::mean(&words),
                median_words: median(&words),
                mean_tokens: crate::util::mean(&tokens),
            })
        })
        .collect()
}

pub fn stats_table(stats: &[SplitStats]) -> String {
    let mut out = format!("{:<6} {:>7} {:>11} {:>13} {:>12}\n", "split", "docs", "mean words", "median words", "mean tokens");
    for s in stats {
        out.push_str(&format!(
            "{:<6} {:>7} {:>11.1} {:>13.1} {:>12.1}\n",
            s.split.to_string(),
            s.docs,
            s.mean_words,
            s.median_words,
            s.mean_tokens
        ));
    }
    out
}

pub fn dataset_jsonl(docs: &[TaggedDocument]) -> Result<String> {
    let mut out = String::new();
    for d in docs {
        out.push_str(&serde_json::to_string(d)?);
        out.push('\n');
    }
    Ok(out)
}

/// A prepared dataset directory, loaded.
pub struct PreparedData {
    pub dir: PathBuf,
    pub docs: Vec<TaggedDocument>,
    pub vocab: Vocabulary,
    pub meta: PrepareMeta,
}

impl PreparedData {
    pub fn load(dir: &Path) -> Result<Self> {
        let meta: PrepareMeta = serde_json::from_str(&read_file(&dir.join(META_FILE))?)?;
        let vocab = Vocabulary::load(&dir.join(VOCAB_FILE))?;
        if vocab.hash() != meta.vocab_hash {
            return Err(Error::IncompatibleCheckpoint(format!(
                "{} does not match the hash recorded in {META_FILE}",
                VOCAB_FILE
            )));
        }
        let path = dir.join(DATASET_FILE);
        let file = std::fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
        let mut docs = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(&path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            docs.push(serde_json::from_str(&line).map_err(|e| Error::Format {
                line: i + 1,
                message: e.to_string(),
            })?);
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            docs,
            vocab,
            meta,
        })
    }

    /// Hash of the dataset file as it is on disk now.
    pub fn current_dataset_hash(&self) -> Result<String> {
        Ok(sha256_hex(&crate::util::read_bytes(&self.dir.join(DATASET_FILE))?))
    }
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

pub(crate) fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut s = String::new();
    for r in rows {
        s.push_str(&serde_json::to_string(r)?);
        s.push('\n');
    }
    write_atomic(path, s.as_bytes())
}

pub(crate) fn write_atomic_str(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, text.as_bytes())
}

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::dataset::PreparedData;
use super::train::ExperimentManifest;
use crate::error::{Error, Result};
use crate::models::{decode_checkpoint, load_checkpoint, HeadKind, Model};
use crate::stats::{citation_count, Report, Task};
use crate::text::{tokenize_document, Label, RawDocument, Split, TaggedDocument};
use crate::training::{predict_examples, Example};
use crate::util::read_bytes;

pub enum EvalSource {
    Manifest(PathBuf),
    Checkpoint(PathBuf),
}

fn task_of(model: &Model) -> Task {
    match model.config().head {
        HeadKind::Classify => Task::Classify,
        HeadKind::Regress => Task::Regress,
    }
}

/// Scores one or more checkpoints on a split of a prepared dataset.
pub fn cmd_evaluate(source: &EvalSource, data_dir: &Path, split: Split) -> Result<Report> {
    let data = PreparedData::load(data_dir)?;
    let vocab_hash = data.vocab.hash();
    let paths: Vec<PathBuf> = match source {
        EvalSource::Checkpoint(p) => vec![p.clone()],
        EvalSource::Manifest(p) => {
            let m = ExperimentManifest::load(p)?;
            let base = p.parent().unwrap_or(Path::new("."));
            if m.checkpoints.is_empty() {
                return Err(Error::Config("manifest lists no checkpoints".into()));
            }
            m.checkpoints.iter().map(|c| base.join(c)).collect()
        }
    };
    let models: Vec<Model> = paths.iter().map(|p| load_checkpoint(p, &vocab_hash, None)).collect::<Result<_>>()?;
    let task = task_of(&models[0]);
    if models.iter().any(|m| task_of(m) != task) {
        return Err(Error::IncompatibleCheckpoint("checkpoints mix tasks".into()));
    }
    let examples: Vec<Example> = data
        .docs
        .iter()
        .filter(|d| d.split == split)
        .map(|d| Example::from_document(d, task))
        .collect::<Result<_>>()?;
    if examples.is_empty() {
        return Err(Error::Config(format!("the {split} split is empty")));
    }
    let runs: Vec<_> = models
        .iter()
        .map(|m| predict_examples(m, &examples, task, None))
        .collect::<Result<_>>()?;
    Report::from_runs(task, &runs, Vec::new())
}

/// Document fields accepted by `predict`; labels and splits are ignored.
#[derive(Debug, Clone, Deserialize)]
pub struct InputDocument {
    pub id: String,
    #[serde(default)]
    pub title: String,
    #[serde(rename = "abstract", default)]
    pub abstract_text: String,
    #[serde(default)]
    pub body_text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceAttention {
    pub tokens: Vec<String>,
    pub weight: f64,
    pub word_weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocPrediction {
    pub id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub class: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probability: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub citation_score: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub citations: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attention: Option<Vec<SentenceAttention>>,
}

/// Predicts raw documents with a checkpoint, preprocessing them exactly as
/// the prepared dataset in `data_dir` was. Unknown words map to UNK.
pub fn cmd_predict(checkpoint: &Path, data_dir: &Path, docs: &[InputDocument], attention: bool) -> Result<Vec<DocPrediction>> {
    let data = PreparedData::load(data_dir)?;
    let (header, model) = decode_checkpoint(&read_bytes(checkpoint)?)?;
    if header.vocab_hash != data.vocab.hash() {
        return Err(Error::IncompatibleCheckpoint(format!(
            "checkpoint vocabulary {} does not match {}",
            header.vocab_hash,
            data.vocab.hash()
        )));
    }
    let tagset = model.config().tagset;
    let mut tokenized = Vec::with_capacity(docs.len());
    let mut encoded = Vec::with_capacity(docs.len());
    for d in docs {
        let raw = RawDocument {
            id: d.id.clone(),
            title: d.title.clone(),
            abstract_text: d.abstract_text.clone(),
            body_text: d.body_text.clone(),
            label: Label::default(),
            split: Split::Test,
        };
        let t = tokenize_document(&raw, tagset, data.meta.cutoff);
        let e = TaggedDocument::from_tokenized(&t, &data.vocab);
        if e.token_count() == 0 {
            return Err(Error::Degenerate(format!("document `{}` is empty", d.id)));
        }
        tokenized.push(t);
        encoded.push(e);
    }
    let refs: Vec<&[Vec<u32>]> = encoded.iter().map(|e| e.sentences.as_slice()).collect();
    let preds = model.predict(&refs, crate::training::EVAL_BATCH_SIZE)?;

    docs.iter()
        .zip(tokenized)
        .zip(preds)
        .map(|((d, t), p)| {
            let score = p.score();
            let attention = match (attention, &p.attention) {
                (true, Some(map)) => {
                    // the model drops empty sentences, tokenization already did
                    Some(
                        t.sentences
                            .iter()
                            .zip(&map.sentences)
                            .zip(&map.words)
                            .map(|((tokens, &weight), words)| SentenceAttention {
                                tokens: tokens.clone(),
                                weight,
                                word_weights: words.clone(),
                            })
                            .collect(),
                    )
                }
                _ => None,
            };
            Ok(DocPrediction {
                id: d.id.clone(),
                class: p.predicted_class(),
                probability: p.positive_probability(),
                citation_score: score,
                citations: score.map(citation_count).transpose()?,
                attention,
            })
        })
        .collect()
}

pub fn read_input_documents(path: &Path) -> Result<Vec<InputDocument>> {
    let text = crate::util::read_file(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Format {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

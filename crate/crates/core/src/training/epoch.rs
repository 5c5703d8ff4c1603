use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{AdamState, Tape};
use crate::error::{Error, Result};
use crate::models::{DocTokens, Model};
use crate::stats::{citation_score, mae, PredictionRecord, Task};
use crate::text::{Split, TaggedDocument};

pub const EVAL_BATCH_SIZE: usize = 32;

/// A model-ready example: token ids per sentence and a numeric target
/// (class index or citation-score).
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub id: String,
    pub sentences: Vec<Vec<u32>>,
    pub target: f64,
}

impl Example {
    pub fn from_document(doc: &TaggedDocument, task: Task) -> Result<Self> {
        let target = match task {
            Task::Classify => doc.label.accepted.map(|a| f64::from(u8::from(a))),
            Task::Regress => doc.label.citation_count.map(|n| citation_score(n as i64)).transpose()?,
        };
        let target = target.ok_or_else(|| {
            Error::Config(format!("document `{}` has no label for task {task}", doc.id))
        })?;
        if doc.token_count() == 0 {
            return Err(Error::Degenerate(format!("document `{}` has no tokens", doc.id)));
        }
        Ok(Self {
            id: doc.id.clone(),
            sentences: doc.sentences.clone(),
            target,
        })
    }

    pub fn class(&self) -> bool {
        self.target > 0.5
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub train: Vec<Example>,
    pub valid: Vec<Example>,
    pub test: Vec<Example>,
}

impl Dataset {
    pub fn from_documents(docs: &[TaggedDocument], task: Task) -> Result<Self> {
        let mut data = Self::default();
        for d in docs {
            let ex = Example::from_document(d, task)?;
            match d.split {
                Split::Train => data.train.push(ex),
                Split::Valid => data.valid.push(ex),
                Split::Test => data.test.push(ex),
            }
        }
        for (name, split) in [("train", &data.train), ("valid", &data.valid), ("test", &data.test)] {
            if split.is_empty() {
                return Err(Error::Config(format!("the {name} split is empty")));
            }
        }
        Ok(data)
    }

    pub fn split(&self, split: Split) -> &[Example] {
        match split {
            Split::Train => &self.train,
            Split::Valid => &self.valid,
            Split::Test => &self.test,
        }
    }
}

/// One epoch's sample of training indices: every minority-class example
/// plus as many majority-class examples drawn without replacement, shuffled.
pub fn resample_balanced<R: Rng + ?Sized>(labels: &[bool], rng: &mut R) -> Result<Vec<usize>> {
    let (pos, neg): (Vec<usize>, Vec<usize>) = (0..labels.len()).partition(|&i| labels[i]);
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::Config("resampling needs both classes in the training set".into()));
    }
    let (minority, majority) = if pos.len() <= neg.len() { (pos, neg) } else { (neg, pos) };
    let mut sample = minority;
    let k = sample.len();
    sample.extend(index::sample(rng, majority.len(), k).into_iter().map(|i| majority[i]));
    sample.shuffle(rng);
    Ok(sample)
}

/// Mean batch loss: cross-entropy of the gold class over logits, or mean
/// absolute error of scalar predictions.
pub fn loss(outputs: &[Vec<f64>], golds: &[f64], task: Task) -> Result<f64> {
    if outputs.is_empty() || outputs.len() != golds.len() {
        return Err(Error::InvalidArgument(format!(
            "loss over {} outputs and {} golds",
            outputs.len(),
            golds.len()
        )));
    }
    match task {
        Task::Classify => {
            let total: f64 = outputs
                .iter()
                .zip(golds)
                .map(|(logits, &g)| crate::autodiff::log_sum_exp(logits) - logits[g as usize])
                .sum();
            Ok(total / outputs.len() as f64)
        }
        Task::Regress => {
            let preds: Vec<f64> = outputs.iter().map(|o| o[0]).collect();
            mae(golds, &preds)
        }
    }
}

pub fn make_batches(order: &[usize], batch_size: usize) -> Vec<Vec<usize>> {
    order.chunks(batch_size.max(1)).map(<[usize]>::to_vec).collect()
}

/// One optimizer step per batch. Returns the mean of the batch losses.
pub fn train_epoch<R: Rng + ?Sized>(
    model: &mut Model,
    optimizer: &mut AdamState,
    batches: &[Vec<&Example>],
    epoch: usize,
    grad_clip: Option<f64>,
    rng: &mut R,
) -> Result<f64> {
    if batches.is_empty() {
        return Err(Error::InvalidArgument("epoch without batches".into()));
    }
    let mut total = 0.0;
    for (b, batch) in batches.iter().enumerate() {
        let docs: Vec<&DocTokens> = batch.iter().map(|e| e.sentences.as_slice()).collect();
        let targets: Vec<f64> = batch.iter().map(|e| e.target).collect();
        let mut grads = {
            let mut tape = Tape::new(model.params());
            let out = model.forward(&mut tape, &docs, true, rng)?;
            let l = model.loss(&mut tape, out.output, &targets)?;
            let value = tape.value(l).item();
            if !value.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: b });
            }
            total += value;
            tape.backward(l)?
        };
        if let Some(max) = grad_clip {
            grads.clip_global_norm(max);
        }
        optimizer.step(model.params_mut(), &grads)?;
    }
    Ok(total / batches.len() as f64)
}

/// Eval-mode predictions for a split.
pub fn predict_examples(model: &Model, examples: &[Example], task: Task, seed: Option<u64>) -> Result<Vec<PredictionRecord>> {
    let docs: Vec<&DocTokens> = examples.iter().map(|e| e.sentences.as_slice()).collect();
    let preds = model.predict(&docs, EVAL_BATCH_SIZE)?;
    Ok(examples
        .iter()
        .zip(preds)
        .map(|(e, p)| match task {
            Task::Classify => PredictionRecord {
                id: e.id.clone(),
                gold: e.target,
                prediction: f64::from(p.predicted_class().unwrap_or(0)),
                probability: p.positive_probability(),
                seed,
            },
            Task::Regress => PredictionRecord {
                id: e.id.clone(),
                gold: e.target,
                prediction: p.score().unwrap_or(f64::NAN),
                probability: None,
                seed,
            },
        })
        .collect())
}

/// Selection metric, higher is better: accuracy, or negated MAE.
pub fn selection_metric(records: &[PredictionRecord], task: Task) -> Result<f64> {
    let golds: Vec<f64> = records.iter().map(|r| r.gold).collect();
    let preds: Vec<f64> = records.iter().map(|r| r.prediction).collect();
    match task {
        Task::Classify => crate::stats::accuracy(&golds, &preds),
        Task::Regress => Ok(-mae(&golds, &preds)?),
    }
}

/// Index of the last epoch reaching the best validation metric.
pub fn select_best(history: &[f64]) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in history.iter().enumerate() {
        if best.is_none_or(|(_, b)| v >= b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
        .ok_or_else(|| Error::InvalidArgument("empty validation history".into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochEvent {
    pub epoch: usize,
    pub train_loss: f64,
    pub valid_metric: f64,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
}

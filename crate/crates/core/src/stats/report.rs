use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::metrics::{accuracy, auc_roc, mae, mse, r2_score};
use super::significance::SignificanceResult;
use crate::error::{Error, Result};
use crate::models::HeadKind;
use crate::util::{mean, sample_std};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    /// Accept/reject prediction.
    Classify,
    /// Citation-score regression.
    Regress,
}

impl Task {
    pub fn head(self) -> HeadKind {
        match self {
            Task::Classify => HeadKind::Classify,
            Task::Regress => HeadKind::Regress,
        }
    }
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Task::Classify => "classify",
            Task::Regress => "regress",
        })
    }
}

/// One model output for one example. For classification `gold` and
/// `prediction` hold the class (0 rejected, 1 accepted).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    pub gold: f64,
    pub prediction: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probability: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl PredictionRecord {
    pub fn validate(&self) -> Result<()> {
        if let Some(p) = self.probability {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidArgument(format!("{}: probability {p} outside [0, 1]", self.id)));
            }
        }
        Ok(())
    }
}

/// Combines several runs per example: modal class for classification, mean
/// score for regression. Output follows the example order of the first run.
pub fn vote_aggregate(runs: &[Vec<PredictionRecord>], task: Task) -> Result<Vec<PredictionRecord>> {
    let first = runs.first().ok_or_else(|| Error::Config("no runs to aggregate".into()))?;
    if task == Task::Classify && runs.len().is_multiple_of(2) {
        return Err(Error::Config(format!("class voting needs an odd number of runs, got {}", runs.len())));
    }
    check_alignment(runs)?;
    let by_id: Vec<HashMap<&str, &PredictionRecord>> = runs
        .iter()
        .map(|run| run.iter().map(|r| (r.id.as_str(), r)).collect())
        .collect();

    first
        .iter()
        .map(|r| {
            let values: Vec<f64> = by_id.iter().map(|m| m[r.id.as_str()].prediction).collect();
            let prediction = match task {
                Task::Regress => mean(&values),
                Task::Classify => {
                    let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
                    for v in &values {
                        *counts.entry(v.round() as i64).or_default() += 1;
                    }
                    // first maximum in class order on the (impossible for binary) tie
                    let best = counts.values().copied().max().unwrap_or(0);
                    counts.into_iter().find(|(_, c)| *c == best).map(|(k, _)| k as f64).unwrap_or(0.0)
                }
            };
            Ok(PredictionRecord {
                id: r.id.clone(),
                gold: r.gold,
                prediction,
                probability: None,
                seed: None,
            })
        })
        .collect()
}

/// Every run must cover the same example ids, each exactly once.
pub fn check_alignment(runs: &[Vec<PredictionRecord>]) -> Result<()> {
    let Some(first) = runs.first() else {
        return Ok(());
    };
    let reference: BTreeSet<&str> = first.iter().map(|r| r.id.as_str()).collect();
    let mut offending: BTreeSet<String> = BTreeSet::new();
    for run in runs {
        let mut seen = BTreeSet::new();
        for r in run {
            if !seen.insert(r.id.as_str()) {
                offending.insert(r.id.clone());
            }
        }
        offending.extend(reference.symmetric_difference(&seen).map(|s| s.to_string()));
    }
    if offending.is_empty() {
        Ok(())
    } else {
        Err(Error::Alignment(offending.into_iter().collect()))
    }
}

/// Test metrics of one run. AUC and R² are left out when undefined for the split.
pub fn run_metrics(records: &[PredictionRecord], task: Task) -> Result<BTreeMap<String, f64>> {
    let golds: Vec<f64> = records.iter().map(|r| r.gold).collect();
    let preds: Vec<f64> = records.iter().map(|r| r.prediction).collect();
    let mut out = BTreeMap::new();
    match task {
        Task::Classify => {
            out.insert("accuracy".to_string(), accuracy(&golds, &preds)?);
            if let Some(probs) = records.iter().map(|r| r.probability).collect::<Option<Vec<f64>>>() {
                let positive: Vec<bool> = golds.iter().map(|g| *g > 0.5).collect();
                match auc_roc(&positive, &probs) {
                    Ok(auc) => {
                        out.insert("auc".to_string(), auc);
                    }
                    Err(Error::UndefinedMetric(_)) => {}
                    Err(e) => return Err(e),
                }
            }
        }
        Task::Regress => {
            match r2_score(&golds, &preds) {
                Ok(r2) => {
                    out.insert("r2".to_string(), r2);
                }
                Err(Error::UndefinedMetric(_)) => {}
                Err(e) => return Err(e),
            }
            out.insert("mse".to_string(), mse(&golds, &preds)?);
            out.insert("mae".to_string(), mae(&golds, &preds)?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    /// Sample standard deviation over runs.
    pub std: f64,
    pub per_run: Vec<f64>,
}

impl MetricSummary {
    pub fn from_runs(values: Vec<f64>) -> Self {
        Self {
            mean: mean(&values),
            std: sample_std(&values),
            per_run: values,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub selected_epoch: usize,
    pub valid_metric: f64,
}

/// Aggregate experiment report. Field order and map ordering are fixed so
/// the serialized form is reproducible byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub task: Task,
    pub metrics: BTreeMap<String, MetricSummary>,
    /// Metrics of the vote-aggregated predictions.
    pub voted: BTreeMap<String, f64>,
    #[serde(default)]
    pub significance: Vec<SignificanceResult>,
    #[serde(default)]
    pub runs: Vec<RunSummary>,
}

impl Report {
    /// Builds the report from per-run test predictions (one vector per run).
    pub fn from_runs(task: Task, runs: &[Vec<PredictionRecord>], summaries: Vec<RunSummary>) -> Result<Self> {
        let per_run: Vec<BTreeMap<String, f64>> = runs.iter().map(|r| run_metrics(r, task)).collect::<Result<_>>()?;
        let mut metrics = BTreeMap::new();
        if let Some(first) = per_run.first() {
            for name in first.keys() {
                if let Some(values) = per_run.iter().map(|m| m.get(name).copied()).collect::<Option<Vec<_>>>() {
                    metrics.insert(name.clone(), MetricSummary::from_runs(values));
                }
            }
        }
        let voted = if task == Task::Classify && runs.len().is_multiple_of(2) {
            BTreeMap::new()
        } else {
            run_metrics(&vote_aggregate(runs, task)?, task)?
        };
        Ok(Self {
            task,
            metrics,
            voted,
            significance: Vec::new(),
            runs: summaries,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

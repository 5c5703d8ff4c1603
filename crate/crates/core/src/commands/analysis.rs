use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::dataset::write_json;
use crate::error::{Error, Result};
use crate::stats::{
    corpus_citation_stats, histogram_csv, mcnemar_exact, vote_aggregate, wilcoxon_signed_rank, CitationStats,
    HistogramBin, PredictionRecord, SignificanceResult, Task, TestKind,
};
use crate::text::read_corpus;
use crate::util::{mean, median, sample_std, write_atomic};

pub const HISTOGRAM_FILE: &str = "citation_histogram.csv";
pub const STATS_FILE: &str = "citation_stats.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CitationSummary {
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    pub median: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsOutput {
    pub overall: CitationSummary,
    /// Present when every document carries both label kinds.
    pub groups: Option<CitationStats>,
}

/// Citation statistics of a corpus. Writes the histogram CSV and a JSON
/// summary into `out` and returns a printable table.
pub fn cmd_stats(corpus: &Path, out: &Path, truncation: u64, bin_width: u64) -> Result<(StatsOutput, String)> {
    let docs = read_corpus(corpus)?;
    let cited: Vec<u64> = docs.iter().filter_map(|d| d.label.citation_count).collect();
    if cited.is_empty() {
        return Err(Error::UndefinedMetric("no document has a citation count".into()));
    }
    let values: Vec<f64> = cited.iter().map(|&c| c as f64).collect();
    let overall = CitationSummary {
        n: values.len(),
        mean: mean(&values),
        std: sample_std(&values),
        median: median(&values),
    };
    let both: Option<Vec<(bool, u64)>> = docs
        .iter()
        .map(|d| Some((d.label.accepted?, d.label.citation_count?)))
        .collect();
    let (groups, bins) = match both {
        Some(pairs) => {
            let s = corpus_citation_stats(&pairs, truncation, bin_width)?;
            let bins = s.histogram.clone();
            (Some(s), bins)
        }
        None => {
            let pairs: Vec<(bool, u64)> = cited.iter().map(|&c| (false, c)).collect();
            (None, overall_histogram(&pairs, truncation, bin_width)?)
        }
    };
    write_atomic(&out.join(HISTOGRAM_FILE), histogram_csv(&bins)?.as_bytes())?;
    let output = StatsOutput { overall, groups };
    write_json(&out.join(STATS_FILE), &output)?;
    Ok((output.clone(), stats_table(&output)))
}

fn overall_histogram(pairs: &[(bool, u64)], truncation: u64, bin_width: u64) -> Result<Vec<HistogramBin>> {
    if truncation == 0 || bin_width == 0 {
        return Err(Error::Config("histogram bound and bin width must be positive".into()));
    }
    let nbins = truncation.div_ceil(bin_width) as usize;
    let mut counts = vec![0usize; nbins];
    for &(_, c) in pairs {
        if c < truncation {
            counts[(c / bin_width) as usize] += 1;
        }
    }
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| HistogramBin {
            bin_start: i as u64 * bin_width,
            bin_end: ((i as u64 + 1) * bin_width).min(truncation),
            count,
            group: "all".into(),
        })
        .collect())
}

fn stats_table(s: &StatsOutput) -> String {
    let mut out = format!(
        "all       n={:<6} mean {:.1} ± {:.1}  median {:.1}\n",
        s.overall.n, s.overall.mean, s.overall.std, s.overall.median
    );
    if let Some(g) = &s.groups {
        for (name, x) in [("accepted", &g.accepted), ("rejected", &g.rejected)] {
            out.push_str(&format!(
                "{name:<9} n={:<6} mean {:.1} ± {:.1}  median {:.1}\n",
                x.n, x.mean, x.std, x.median
            ));
        }
        out.push_str(&format!("spearman  rho {:.3}  p {:.3e}\n", g.spearman.rho, g.spearman.p_value));
    }
    out
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRecord>> {
    let text = crate::util::read_file(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let r: PredictionRecord = serde_json::from_str(l).map_err(|e| Error::Format {
                line: i + 1,
                message: e.to_string(),
            })?;
            r.validate()?;
            Ok(r)
        })
        .collect()
}

/// Splits a predictions file into runs by seed (records without a seed form one run).
fn runs_by_seed(records: Vec<PredictionRecord>) -> Vec<Vec<PredictionRecord>> {
    let mut runs: BTreeMap<Option<u64>, Vec<PredictionRecord>> = BTreeMap::new();
    for r in records {
        runs.entry(r.seed).or_default().push(r);
    }
    runs.into_values().collect()
}

/// Compares two systems' prediction files: exact McNemar on vote-aggregated
/// classes, or Wilcoxon signed-rank on run-averaged absolute errors.
pub fn cmd_significance(a: &Path, b: &Path, test: TestKind) -> Result<SignificanceResult> {
    let task = match test {
        TestKind::McnemarExact => Task::Classify,
        TestKind::WilcoxonSignedRank => Task::Regress,
    };
    let va = vote_aggregate(&runs_by_seed(read_predictions(a)?), task)?;
    let vb = vote_aggregate(&runs_by_seed(read_predictions(b)?), task)?;

    let index_b: HashMap<&str, &PredictionRecord> = vb.iter().map(|r| (r.id.as_str(), r)).collect();
    let index_a: HashMap<&str, &PredictionRecord> = va.iter().map(|r| (r.id.as_str(), r)).collect();
    let mut offending: Vec<String> = va
        .iter()
        .filter(|r| !index_b.contains_key(r.id.as_str()))
        .chain(vb.iter().filter(|r| !index_a.contains_key(r.id.as_str())))
        .map(|r| r.id.clone())
        .collect();
    offending.extend(
        va.iter()
            .filter(|r| index_b.get(r.id.as_str()).is_some_and(|o| o.gold != r.gold))
            .map(|r| format!("{} (gold differs)", r.id)),
    );
    if !offending.is_empty() {
        offending.sort();
        return Err(Error::Alignment(offending));
    }
    let pairs: Vec<(&PredictionRecord, &PredictionRecord)> = va.iter().map(|r| (r, index_b[r.id.as_str()])).collect();
    let result = match test {
        TestKind::McnemarExact => {
            let golds: Vec<f64> = pairs.iter().map(|(x, _)| x.gold).collect();
            let pa: Vec<f64> = pairs.iter().map(|(x, _)| x.prediction).collect();
            let pb: Vec<f64> = pairs.iter().map(|(_, y)| y.prediction).collect();
            mcnemar_exact(&golds, &pa, &pb)?
        }
        TestKind::WilcoxonSignedRank => {
            let ea: Vec<f64> = pairs.iter().map(|(x, _)| (x.prediction - x.gold).abs()).collect();
            let eb: Vec<f64> = pairs.iter().map(|(_, y)| (y.prediction - y.gold).abs()).collect();
            wilcoxon_signed_rank(&ea, &eb)?
        }
    };
    let name = |p: &Path| p.file_stem().map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned());
    Ok(result.with_systems(name(a), name(b)))
}

use serde::{Deserialize, Serialize};

use super::significance::{spearman_rho, Correlation};
use crate::error::{Error, Result};
use crate::util::{mean, sample_std};

pub const DEFAULT_TRUNCATION: u64 = 100;
pub const DEFAULT_BIN_WIDTH: u64 = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub bin_start: u64,
    /// Exclusive.
    pub bin_end: u64,
    pub count: usize,
    pub group: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    pub median: f64,
    /// Documents at or beyond the truncation bound, left out of the histogram.
    pub truncated: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CitationStats {
    pub accepted: GroupStats,
    pub rejected: GroupStats,
    pub spearman: Correlation,
    pub histogram: Vec<HistogramBin>,
}

fn group(name: &str, counts: &[u64], truncation: u64, bin_width: u64, bins: &mut Vec<HistogramBin>) -> GroupStats {
    let nbins = truncation.div_ceil(bin_width);
    let mut hist = vec![0usize; nbins as usize];
    let mut truncated = 0;
    for &c in counts {
        if c >= truncation {
            truncated += 1;
        } else {
            hist[(c / bin_width) as usize] += 1;
        }
    }
    for (i, count) in hist.into_iter().enumerate() {
        let start = i as u64 * bin_width;
        bins.push(HistogramBin {
            bin_start: start,
            bin_end: (start + bin_width).min(truncation),
            count,
            group: name.to_string(),
        });
    }
    let values: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    GroupStats {
        n: counts.len(),
        mean: mean(&values),
        std: sample_std(&values),
        median: crate::util::median(&values),
        truncated,
    }
}

/// Citation histograms and summary statistics per acceptance group, plus
/// the rank correlation between acceptance and citations.
pub fn corpus_citation_stats(docs: &[(bool, u64)], truncation: u64, bin_width: u64) -> Result<CitationStats> {
    if truncation == 0 || bin_width == 0 {
        return Err(Error::Config("histogram bound and bin width must be positive".into()));
    }
    let accepted: Vec<u64> = docs.iter().filter(|d| d.0).map(|d| d.1).collect();
    let rejected: Vec<u64> = docs.iter().filter(|d| !d.0).map(|d| d.1).collect();
    if accepted.is_empty() || rejected.is_empty() {
        return Err(Error::UndefinedMetric("both accepted and rejected documents are required".into()));
    }
    let x: Vec<f64> = docs.iter().map(|d| f64::from(u8::from(d.0))).collect();
    let y: Vec<f64> = docs.iter().map(|d| d.1 as f64).collect();
    let spearman = spearman_rho(&x, &y)?;
    let mut histogram = Vec::new();
    let accepted = group("accepted", &accepted, truncation, bin_width, &mut histogram);
    let rejected = group("rejected", &rejected, truncation, bin_width, &mut histogram);
    Ok(CitationStats {
        accepted,
        rejected,
        spearman,
        histogram,
    })
}

/// Histogram rows as CSV with a `bin_start,bin_end,count,group` header.
pub fn histogram_csv(bins: &[HistogramBin]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for b in bins {
        w.serialize(b).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn all_zero_citations_is_undefined() {
        let docs = [(true, 0), (false, 0), (true, 0), (false, 0)];
        assert!(matches!(
            corpus_citation_stats(&docs, 100, 5),
            Err(Error::UndefinedMetric(_))
        ));
    }

    #[test]
    fn constructed_correlation_is_recovered() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let docs: Vec<(bool, u64)> = (0..200)
            .map(|i| {
                let accepted = i % 3 == 0;
                let base = if accepted { 10 } else { 0 };
                (accepted, base + rng.random_range(0..4))
            })
            .collect();
        let s = corpus_citation_stats(&docs, 100, 5).unwrap();
        assert!(s.spearman.rho > 0.5);
        assert!(s.accepted.mean > s.rejected.mean);
        assert_eq!(s.histogram.len(), 40);
        let total: usize = s.histogram.iter().map(|b| b.count).sum();
        assert_eq!(total, 200);
    }

    #[test]
    fn truncation_and_csv() {
        let docs = [(true, 3), (true, 250), (false, 99), (false, 100), (false, 0)];
        let s = corpus_citation_stats(&docs, 100, 50).unwrap();
        assert_eq!(s.accepted.truncated, 1);
        assert_eq!(s.rejected.truncated, 1);
        let csv = histogram_csv(&s.histogram).unwrap();
        assert_eq!(
            csv,
            "bin_start,bin_end,count,group\n0,50,1,accepted\n50,100,0,accepted\n0,50,1,rejected\n50,100,1,rejected\n"
        );
    }
}

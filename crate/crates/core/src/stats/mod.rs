//! Metrics, significance tests, run aggregation and corpus statistics.

mod citations;
mod metrics;
mod report;
mod significance;

pub use citations::{corpus_citation_stats, histogram_csv, CitationStats, GroupStats, HistogramBin, DEFAULT_BIN_WIDTH, DEFAULT_TRUNCATION};
pub use metrics::{accuracy, auc_roc, average_ranks, citation_count, citation_score, mae, mse, r2_score};
pub use report::{check_alignment, run_metrics, vote_aggregate, MetricSummary, PredictionRecord, Report, RunSummary, Task};
pub use significance::{
    mcnemar_exact, mcnemar_from_counts, spearman_rho, wilcoxon_signed_rank, Correlation, SignificanceResult, TestKind,
    SPEARMAN_EXACT_MAX, WILCOXON_EXACT_MAX, WILCOXON_MIN_PAIRS,
};

//! The operations behind each command-line subcommand, with their file
//! formats and reproducibility bookkeeping.

mod analysis;
mod dataset;
mod evaluate;
mod prepare;
mod train;

pub use analysis::{cmd_significance, cmd_stats, read_predictions, CitationSummary, StatsOutput, HISTOGRAM_FILE, STATS_FILE};
pub use dataset::{
    default_data_dir, split_stats, stats_table, PrepareMeta, PreparedData, SplitStats, DATASET_FILE, DATA_DIR_ENV,
    META_FILE, VOCAB_FILE,
};
pub use evaluate::{
    cmd_evaluate, cmd_predict, read_input_documents, DocPrediction, EvalSource, InputDocument, SentenceAttention,
};
pub use prepare::{cmd_prepare, PrepareOptions};
pub use train::{
    checkpoint_name, cmd_train, cmd_train_from_manifest, log_name, report_hash, ExperimentManifest, TrainOptions,
    MANIFEST_FILE, PREDICTIONS_FILE, REPORT_FILE, VOTED_FILE,
};

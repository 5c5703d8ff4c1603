use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hanst_core::commands::{
    cmd_evaluate, cmd_predict, cmd_prepare, cmd_significance, cmd_stats, cmd_train, cmd_train_from_manifest,
    default_data_dir, read_input_documents, EvalSource, PrepareOptions, TrainOptions, DATA_DIR_ENV,
};
use hanst_core::stats::{TestKind, DEFAULT_BIN_WIDTH, DEFAULT_TRUNCATION};
use hanst_core::synth::{generate, to_jsonl, SynthKind};
use hanst_core::text::{CutoffPolicy, Split, TagSet};
use hanst_core::training::TrainConfig;
use hanst_core::{Error, Result};

#[derive(Parser)]
#[command(name = "hanst", version, about = "Structure-tagged hierarchical attention networks for scholarly document quality")]
struct Cli {
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Comma-separated seeds, replacing the configured ones.
    #[arg(long, global = true, value_delimiter = ',')]
    seed_list: Option<Vec<u64>>,

    /// Worker threads for parallel runs.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Output directory (or file, for `synth`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Overwrite existing experiment outputs.
    #[arg(long, global = true)]
    force: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Segment, tag, truncate and encode a JSONL corpus.
    Prepare {
        corpus: PathBuf,
        /// Overrides the config's tagset.
        #[arg(long)]
        tagset: Option<TagSet>,
        /// Sentence-count cutoff instead of the character limit.
        #[arg(long)]
        sentence_limit: Option<usize>,
    },
    /// Train every seed of an experiment.
    Train {
        /// Prepared dataset directory.
        #[arg(long, env = DATA_DIR_ENV)]
        data: Option<PathBuf>,
        /// Re-run the experiment recorded in a manifest.
        #[arg(long, conflicts_with = "config")]
        from_manifest: Option<PathBuf>,
    },
    /// Score checkpoints on a dataset split.
    Evaluate {
        #[arg(long, required_unless_present = "checkpoint", conflicts_with = "checkpoint")]
        manifest: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, env = DATA_DIR_ENV)]
        data: Option<PathBuf>,
        #[arg(long, default_value = "test")]
        split: Split,
    },
    /// Predict raw JSONL documents with a checkpoint.
    Predict {
        input: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, env = DATA_DIR_ENV)]
        data: Option<PathBuf>,
        /// Include per-sentence attention weights (HAN only).
        #[arg(long)]
        attention: bool,
    },
    /// Citation histograms and acceptance statistics of a corpus.
    Stats {
        corpus: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TRUNCATION)]
        truncate: u64,
        #[arg(long, default_value_t = DEFAULT_BIN_WIDTH)]
        bin_width: u64,
    },
    /// Significance test between two systems' prediction files.
    Significance {
        a: PathBuf,
        b: PathBuf,
        /// `mcnemar` or `wilcoxon`.
        #[arg(long)]
        test: TestKind,
    },
    /// Write a seeded synthetic corpus.
    Synth {
        #[arg(long, default_value = "general")]
        kind: SynthKind,
        #[arg(long, default_value_t = 60)]
        docs: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn load_config(path: Option<&Path>) -> Result<TrainConfig> {
    let path = path.ok_or_else(|| Error::Config("--config is required".into()))?;
    TrainConfig::load(path)
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let data_or_default = |d: Option<PathBuf>| d.unwrap_or_else(default_data_dir);
    match cli.command {
        Command::Prepare {
            corpus,
            tagset,
            sentence_limit,
        } => {
            let mut options = match &cli.config {
                Some(p) => PrepareOptions::from(&TrainConfig::load(p)?),
                None => PrepareOptions::default(),
            };
            if let Some(t) = tagset {
                options.tagset = t;
            }
            if let Some(n) = sentence_limit {
                options.cutoff = CutoffPolicy::SentenceLimit(n);
            }
            let out = data_or_default(cli.out);
            let (_, table) = cmd_prepare(&corpus, &out, options)?;
            print!("{table}");
        }
        Command::Train { data, from_manifest } => {
            let out = cli.out.ok_or_else(|| Error::Config("--out is required for train".into()))?;
            let options = TrainOptions {
                force: cli.force,
                threads: cli.threads,
                seeds: cli.seed_list,
            };
            let manifest = match from_manifest {
                Some(m) => cmd_train_from_manifest(&m, data.as_deref(), &out, &options)?,
                None => {
                    let config = load_config(cli.config.as_deref())?;
                    cmd_train(&config, &data_or_default(data), &out, &options)?
                }
            };
            let report = hanst_core::util::read_file(&out.join(manifest.report.as_deref().unwrap_or_default()))?;
            print!("{report}");
        }
        Command::Evaluate {
            manifest,
            checkpoint,
            data,
            split,
        } => {
            let source = match (manifest, checkpoint) {
                (Some(m), _) => EvalSource::Manifest(m),
                (None, Some(c)) => EvalSource::Checkpoint(c),
                (None, None) => return Err(Error::Config("pass --manifest or --checkpoint".into())),
            };
            let report = cmd_evaluate(&source, &data_or_default(data), split)?;
            print!("{}", report.to_json()?);
        }
        Command::Predict {
            input,
            checkpoint,
            data,
            attention,
        } => {
            let docs = read_input_documents(&input)?;
            for p in cmd_predict(&checkpoint, &data_or_default(data), &docs, attention)? {
                println!("{}", serde_json::to_string(&p)?);
            }
        }
        Command::Stats {
            corpus,
            truncate,
            bin_width,
        } => {
            let out = cli.out.unwrap_or_else(|| PathBuf::from("."));
            let (_, table) = cmd_stats(&corpus, &out, truncate, bin_width)?;
            print!("{table}");
        }
        Command::Significance { a, b, test } => {
            print_json(&cmd_significance(&a, &b, test)?)?;
        }
        Command::Synth { kind, docs, seed } => {
            let text = to_jsonl(&generate(kind, docs, seed));
            match cli.out {
                Some(path) => hanst_core::util::write_atomic(&path, text.as_bytes())?,
                None => print!("{text}"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        // ignore failure: the pool may already be initialized
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let message = e.to_string().replace(['\n', '\r'], " ");
            eprintln!("error: {}: {message}", e.code());
            ExitCode::FAILURE
        }
    }
}

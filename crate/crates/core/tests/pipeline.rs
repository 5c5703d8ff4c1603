use std::fs;
use std::path::Path;

use hanst_core::commands::{
    cmd_evaluate, cmd_predict, cmd_prepare, cmd_train, EvalSource, InputDocument, PrepareOptions, PreparedData,
    TrainOptions,
};
use hanst_core::models::ModelKind;
use hanst_core::stats::{citation_count, Task};
use hanst_core::synth::{self, to_jsonl};
use hanst_core::text::{CutoffPolicy, Label, RawDocument, Split, TagSet};
use hanst_core::training::TrainConfig;
use hanst_core::Error;
use tempfile::TempDir;

fn write_corpus(path: &Path, docs: &[RawDocument]) {
    fs::write(path, to_jsonl(docs)).unwrap();
}

fn doc(id: &str, body: &str, split: Split) -> RawDocument {
    RawDocument {
        id: id.into(),
        title: format!("Title of {id}"),
        abstract_text: "A short abstract. It has two sentences.".into(),
        body_text: body.into(),
        label: Label {
            accepted: Some(id.ends_with('1')),
            citation_count: Some(3),
        },
        split,
    }
}

fn small_config(task: Task, kind: ModelKind) -> TrainConfig {
    let mut c = TrainConfig::defaults(task, kind, TagSet::Full);
    c.epochs = 3;
    c.batch_size = 8;
    c.vocab_size = 300;
    c.model.embedding_dim = Some(6);
    c.model.hidden = Some(4);
    c.model.dropout = Some(0.0);
    c
}

#[test]
fn prepare_three_documents_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let corpus = tmp.path().join("c.jsonl");
    write_corpus(
        &corpus,
        &[
            doc("d0", "Body text here. More body.", Split::Train),
            doc("d1", "Another body.", Split::Valid),
            doc("d2", "Third body text.", Split::Test),
        ],
    );
    let (meta_a, table) = cmd_prepare(&corpus, &tmp.path().join("a"), PrepareOptions::default()).unwrap();
    let (meta_b, _) = cmd_prepare(&corpus, &tmp.path().join("b"), PrepareOptions::default()).unwrap();
    assert_eq!(meta_a, meta_b);
    for f in ["dataset.jsonl", "vocab.json", "prepare.json"] {
        assert_eq!(
            fs::read(tmp.path().join("a").join(f)).unwrap(),
            fs::read(tmp.path().join("b").join(f)).unwrap(),
            "{f}"
        );
    }
    assert_eq!(meta_a.stats.iter().map(|s| s.docs).sum::<usize>(), 3);
    assert!(table.starts_with("split"));

    let data = PreparedData::load(&tmp.path().join("a")).unwrap();
    assert_eq!(data.docs.len(), 3);
    // <TITLE> Title of d0 </TITLE>
    assert_eq!(data.docs[0].sentences[0].len(), 5);
    assert!(data.vocab.contains("<BODY_TEXT>"));
}

#[test]
fn character_cutoff_bounds_stored_text() {
    let tmp = TempDir::new().unwrap();
    let corpus = tmp.path().join("c.jsonl");
    // 1000 sentences of 30 characters: far over the 20000 default
    let body: String = (0..1000).map(|i| format!("Sentence number {i:05} is here.")).collect::<Vec<_>>().join(" ");
    assert!(body.len() > 30_000);
    write_corpus(&corpus, &[doc("long", &body, Split::Train)]);
    cmd_prepare(&corpus, &tmp.path().join("out"), PrepareOptions::default()).unwrap();
    let data = PreparedData::load(&tmp.path().join("out")).unwrap();
    let d = &data.docs[0];
    // every body sentence is "sentence number NNNNN is here ." + 2 tags
    let body_sentences = d.sentences.len() - 3;
    let kept_chars = "Title of long".len() + 1 + "A short abstract. It has two sentences.".len() + body_sentences * 31;
    assert!(kept_chars <= 20_000, "{kept_chars}");
    assert!(kept_chars + 31 > 20_000, "cut too early: {kept_chars}");
    assert!(d.word_count < 5 * 1000);
}

#[test]
fn prepare_rejects_bad_corpus() {
    let tmp = TempDir::new().unwrap();
    let corpus = tmp.path().join("c.jsonl");
    fs::write(&corpus, "{\"id\":\"a\",\"label\":{\"accepted\":true},\"split\":\"train\"}\n{\"id\":\"b\"\n").unwrap();
    let err = cmd_prepare(&corpus, &tmp.path().join("o"), PrepareOptions::default()).unwrap_err();
    assert!(matches!(err, Error::Format { line: 2, .. }), "{err}");
}

#[test]
fn evaluate_reproduces_report_and_rejects_stale_data() {
    let tmp = TempDir::new().unwrap();
    let corpus = tmp.path().join("c.jsonl");
    write_corpus(&corpus, &synth::general(40, 5));
    let config = small_config(Task::Classify, ModelKind::Han);
    let data = tmp.path().join("data");
    let run = tmp.path().join("run");
    cmd_prepare(&corpus, &data, PrepareOptions::from(&config)).unwrap();
    let manifest = cmd_train(&config, &data, &run, &TrainOptions::default()).unwrap();
    assert_eq!(manifest.checkpoints.len(), 3);

    let stored: serde_json::Value = serde_json::from_str(&fs::read_to_string(run.join("report.json")).unwrap()).unwrap();
    let report = cmd_evaluate(&EvalSource::Manifest(run.join("manifest.json")), &data, Split::Test).unwrap();
    let fresh: serde_json::Value = serde_json::from_str(&report.to_json().unwrap()).unwrap();
    assert_eq!(fresh["metrics"], stored["metrics"]);

    // validation accuracy of the selected epoch is reproduced from the checkpoint
    let valid = cmd_evaluate(&EvalSource::Checkpoint(run.join("run-2.ckpt")), &data, Split::Valid).unwrap();
    let log = fs::read_to_string(run.join("run-2.log.jsonl")).unwrap();
    let best = log
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["valid_metric"].as_f64().unwrap())
        .fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(valid.metrics["accuracy"].mean, best);

    // another tagset's data does not match the config
    let other = tmp.path().join("other");
    cmd_prepare(
        &corpus,
        &other,
        PrepareOptions {
            tagset: TagSet::None,
            ..PrepareOptions::from(&config)
        },
    )
    .unwrap();
    let err = cmd_train(&config, &other, &tmp.path().join("run2"), &TrainOptions::default()).unwrap_err();
    assert!(matches!(err, Error::Config(_)), "{err}");
}

#[test]
fn regression_pipeline() {
    let tmp = TempDir::new().unwrap();
    let corpus = tmp.path().join("c.jsonl");
    write_corpus(&corpus, &synth::heterogeneous_lengths(40, 6, 2));
    let mut config = small_config(Task::Regress, ModelKind::Awe);
    config.seeds = vec![1, 2];
    config.cutoff = CutoffPolicy::CharacterLimit(2000);
    let data = tmp.path().join("data");
    let run = tmp.path().join("run");
    cmd_prepare(&corpus, &data, PrepareOptions::from(&config)).unwrap();
    cmd_train(&config, &data, &run, &TrainOptions::default()).unwrap();
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(run.join("report.json")).unwrap()).unwrap();
    let metrics = report["metrics"].as_object().unwrap();
    for key in ["mse", "mae"] {
        assert_eq!(metrics[key]["per_run"].as_array().unwrap().len(), 2, "{key}");
    }
    assert!(!metrics.contains_key("accuracy"));

    let docs: Vec<InputDocument> = serde_json::from_str::<Vec<InputDocument>>(
        r#"[{"id":"x","title":"Some title","abstract":"An abstract.","body_text":"Body."}]"#,
    )
    .unwrap();
    let preds = cmd_predict(&run.join("run-1.ckpt"), &data, &docs, false).unwrap();
    let p = &preds[0];
    assert_eq!(p.citations, Some(citation_count(p.citation_score.unwrap()).unwrap()));
    assert!(p.class.is_none() && p.attention.is_none());
    assert_eq!(citation_count(0.0).unwrap(), 0);
}

#[test]
fn predict_rejects_empty_documents() {
    let tmp = TempDir::new().unwrap();
    let corpus = tmp.path().join("c.jsonl");
    write_corpus(&corpus, &synth::general(30, 1));
    let config = small_config(Task::Classify, ModelKind::Awe);
    let data = tmp.path().join("data");
    cmd_prepare(&corpus, &data, PrepareOptions::from(&config)).unwrap();
    cmd_train(&config, &data, &tmp.path().join("run"), &TrainOptions::default()).unwrap();
    let docs: Vec<InputDocument> = serde_json::from_str(r#"[{"id":"empty"}]"#).unwrap();
    let err = cmd_predict(&tmp.path().join("run/run-1.ckpt"), &data, &docs, false).unwrap_err();
    assert!(matches!(err, Error::Degenerate(_)), "{err}");
}

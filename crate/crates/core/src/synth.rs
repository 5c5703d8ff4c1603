//! Seeded synthetic corpora, so every pipeline and property check runs
//! without external data.

use std::ops::RangeInclusive;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::text::{Label, RawDocument, Split};

/// Marker word whose placement decides the label in the probe corpora.
pub const KEYWORD: &str = "zenith";

const SYLLABLES: [&str; 12] = ["ka", "lo", "mi", "ne", "su", "ra", "ti", "po", "de", "fu", "gar", "bel"];

/// Deterministic filler vocabulary of `n` distinct lowercase words.
pub fn filler_words(n: usize) -> Vec<String> {
    let mut out = Vec::with_capacity(n);
    let s = SYLLABLES.len();
    let mut i = 0usize;
    while out.len() < n {
        let mut w = String::new();
        let mut k = i;
        loop {
            w.push_str(SYLLABLES[k % s]);
            k /= s;
            if k == 0 {
                break;
            }
            k -= 1;
        }
        if w.len() >= 4 {
            out.push(w);
        }
        i += 1;
    }
    out
}

fn sentence(words: &[String]) -> String {
    let mut s = words.join(" ");
    if let Some(first) = s.get(..1) {
        let upper = first.to_uppercase();
        s.replace_range(..1, &upper);
    }
    s.push('.');
    s
}

fn random_words<R: Rng>(rng: &mut R, vocab: &[String], len: RangeInclusive<usize>) -> Vec<String> {
    let len = rng.random_range(len);
    (0..len).map(|_| vocab.choose(rng).expect("non-empty vocabulary").clone()).collect()
}

fn insert_keyword<R: Rng>(rng: &mut R, words: &mut Vec<String>) {
    let at = rng.random_range(0..=words.len());
    words.insert(at, KEYWORD.to_string());
}

/// Assigns splits in the given proportions (train, valid), the rest test.
fn split_for(i: usize, n: usize, train: f64, valid: f64) -> Split {
    let f = i as f64 / n as f64;
    if f < train {
        Split::Train
    } else if f < train + valid {
        Split::Valid
    } else {
        Split::Test
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthKind {
    /// Both label kinds; acceptance follows the keyword in the title.
    General,
    /// Keyword-in-title labels with position decoys.
    TitleProbe,
    /// 8% minority class marked by a single diluted token.
    Imbalanced,
    /// Long documents whose sentence lengths vary by author.
    Lengths,
}

impl std::str::FromStr for SynthKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "general" => Ok(SynthKind::General),
            "title-probe" => Ok(SynthKind::TitleProbe),
            "imbalanced" => Ok(SynthKind::Imbalanced),
            "lengths" => Ok(SynthKind::Lengths),
            other => Err(crate::Error::Config(format!("unknown synthetic corpus `{other}`"))),
        }
    }
}

pub fn generate(kind: SynthKind, docs: usize, seed: u64) -> Vec<RawDocument> {
    match kind {
        SynthKind::General => general(docs, seed),
        SynthKind::TitleProbe => title_probe(docs, seed),
        SynthKind::Imbalanced => imbalanced(docs, 0.08, 1, seed),
        SynthKind::Lengths => heterogeneous_lengths(docs, 600, seed),
    }
}

/// Small corpus with acceptance and citation labels. Accepted papers carry
/// the keyword in the title and collect more citations.
pub fn general(n: usize, seed: u64) -> Vec<RawDocument> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab = filler_words(60);
    (0..n)
        .map(|i| {
            let accepted = rng.random_bool(0.5);
            let mut title = random_words(&mut rng, &vocab, 4..=7);
            if accepted {
                insert_keyword(&mut rng, &mut title);
            }
            let abstract_text = (0..rng.random_range(1..=2))
                .map(|_| sentence(&random_words(&mut rng, &vocab, 5..=9)))
                .collect::<Vec<_>>()
                .join(" ");
            let body_text = (0..rng.random_range(2..=4))
                .map(|_| {
                    let mut w = random_words(&mut rng, &vocab, 5..=9);
                    if rng.random_bool(0.3) {
                        insert_keyword(&mut rng, &mut w);
                    }
                    sentence(&w)
                })
                .collect::<Vec<_>>()
                .join(" ");
            let citations = if accepted { 12 } else { 2 } + rng.random_range(0..8u64);
            RawDocument {
                id: format!("gen-{i:04}"),
                title: sentence(&title).trim_end_matches('.').to_string(),
                abstract_text,
                body_text,
                label: Label {
                    accepted: Some(accepted),
                    citation_count: Some(citations),
                },
                split: split_for(i, n, 0.6, 0.2),
            }
        })
        .collect()
}

/// Positive iff the keyword occurs in the title. Some negatives have no
/// title and open their abstract with the keyword instead, so without role
/// markers the first sentence alone cannot separate the classes. Sentence
/// counts and lengths follow the same distribution for every group, and the
/// keyword also appears at random in body text.
pub fn title_probe(n: usize, seed: u64) -> Vec<RawDocument> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab = filler_words(40);
    (0..n)
        .map(|i| {
            let group = rng.random_range(0..10);
            let positive = group < 5;
            let has_title = group < 7;
            let total = rng.random_range(4..=6);
            let mut sentences: Vec<Vec<String>> = (0..total)
                .map(|_| random_words(&mut rng, &vocab, 5..=8))
                .collect();
            if positive || !has_title {
                insert_keyword(&mut rng, &mut sentences[0]);
            }
            if rng.random_bool(0.5) {
                let at = rng.random_range(2..total);
                insert_keyword(&mut rng, &mut sentences[at]);
            }
            let (title, rest) = if has_title {
                // punctuated like every other sentence, so only the role differs
                (sentence(&sentences[0]), &sentences[1..])
            } else {
                (String::new(), &sentences[..])
            };
            let abstract_len = rest.len() / 2;
            let join = |s: &[Vec<String>]| s.iter().map(|w| sentence(w)).collect::<Vec<_>>().join(" ");
            RawDocument {
                id: format!("probe-{i:04}"),
                title,
                abstract_text: join(&rest[..abstract_len]),
                body_text: join(&rest[abstract_len..]),
                label: Label::accepted(positive),
                split: split_for(i, n, 0.5, 0.2),
            }
        })
        .collect()
}

/// Separable but imbalanced: each minority document carries the keyword in
/// `markers` of its four sentences, diluted among 40 filler words.
pub fn imbalanced(n: usize, minority: f64, markers: usize, seed: u64) -> Vec<RawDocument> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab = filler_words(40);
    let minority_count = (n as f64 * minority).round() as usize;
    let mut labels: Vec<bool> = (0..n).map(|i| i < minority_count).collect();
    // interleave so each split keeps the ratio
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| (i * 7919) % n);
    labels = order.iter().map(|&i| labels[i]).collect();
    labels
        .into_iter()
        .enumerate()
        .map(|(i, positive)| {
            let mut sentences: Vec<Vec<String>> = (0..4).map(|_| random_words(&mut rng, &vocab, 10..=10)).collect();
            if positive {
                for s in rand::seq::index::sample(&mut rng, sentences.len(), markers.min(sentences.len())) {
                    insert_keyword(&mut rng, &mut sentences[s]);
                }
            }
            let text: Vec<String> = sentences.iter().map(|w| sentence(w)).collect();
            RawDocument {
                id: format!("imb-{i:04}"),
                title: String::new(),
                abstract_text: text[0].clone(),
                body_text: text[1..].join(" "),
                label: Label::accepted(positive),
                split: split_for(i, n, 0.6, 0.2),
            }
        })
        .collect()
}

/// Documents of `sentences` sentences each, where every document has its
/// own typical sentence length between 6 and 40 words.
pub fn heterogeneous_lengths(n: usize, sentences: usize, seed: u64) -> Vec<RawDocument> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab = filler_words(200);
    (0..n)
        .map(|i| {
            let typical: usize = rng.random_range(6..=40);
            let body: Vec<String> = (0..sentences)
                .map(|_| {
                    let len = (typical + rng.random_range(0..5)).saturating_sub(2).max(1);
                    sentence(&random_words(&mut rng, &vocab, len..=len))
                })
                .collect();
            RawDocument {
                id: format!("len-{i:04}"),
                title: String::new(),
                abstract_text: String::new(),
                body_text: body.join(" "),
                label: Label::citations(rng.random_range(0..50)),
                split: split_for(i, n, 0.6, 0.2),
            }
        })
        .collect()
}

/// Serializes documents as JSONL.
pub fn to_jsonl(docs: &[RawDocument]) -> String {
    let mut out = String::new();
    for d in docs {
        out.push_str(&serde_json::to_string(d).expect("documents serialize"));
        out.push('\n');
    }
    out
}

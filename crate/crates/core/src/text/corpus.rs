use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cutoff::{apply_cutoff, CutoffPolicy};
use super::segment::segment_sentences;
use super::tags::{strip_sentence_tags, wrap_sentence, Role, TagScheme, TagSet};
use super::tokenize::tokenize;
use super::vocab::Vocabulary;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        })
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "valid" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            other => Err(Error::InvalidArgument(format!("unknown split `{other}`"))),
        }
    }
}

/// Document label. Training needs the key matching its task; corpus
/// statistics need both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Label {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accepted: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub citation_count: Option<u64>,
}

impl Label {
    pub fn accepted(value: bool) -> Self {
        Self {
            accepted: Some(value),
            citation_count: None,
        }
    }

    pub fn citations(n: u64) -> Self {
        Self {
            accepted: None,
            citation_count: Some(n),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawDocument {
    pub id: String,
    #[serde(default)]
    pub title: String,
    #[serde(rename = "abstract", default)]
    pub abstract_text: String,
    #[serde(default)]
    pub body_text: String,
    pub label: Label,
    pub split: Split,
}

/// Reads a JSONL corpus. Blank lines are ignored; ids must be unique.
pub fn read_corpus(path: &Path) -> Result<Vec<RawDocument>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut docs = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: RawDocument = serde_json::from_str(&line).map_err(|e| Error::Format {
            line: i + 1,
            message: e.to_string(),
        })?;
        if doc.label.accepted.is_none() && doc.label.citation_count.is_none() {
            return Err(Error::Format {
                line: i + 1,
                message: "label needs `accepted` or `citation_count`".into(),
            });
        }
        if !seen.insert(doc.id.clone()) {
            return Err(Error::Format {
                line: i + 1,
                message: format!("duplicate document id `{}`", doc.id),
            });
        }
        docs.push(doc);
    }
    Ok(docs)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedSentence {
    pub role: Role,
    pub text: String,
}

/// Untagged sentences with their roles: the title as a single sentence,
/// then the segmented abstract and body.
pub fn role_sentences(doc: &RawDocument) -> Vec<(Role, String)> {
    let mut out = Vec::new();
    let title = doc.title.trim();
    if !title.is_empty() {
        out.push((Role::Title, title.to_string()));
    }
    out.extend(segment_sentences(&doc.abstract_text).into_iter().map(|s| (Role::Abstract, s)));
    out.extend(segment_sentences(&doc.body_text).into_iter().map(|s| (Role::BodyText, s)));
    out
}

fn wrap_all(sentences: Vec<(Role, String)>, tagset: TagSet) -> Vec<TaggedSentence> {
    sentences
        .into_iter()
        .map(|(role, s)| TaggedSentence {
            role,
            text: wrap_sentence(&tagset, role, &s),
        })
        .collect()
}

pub fn inject_tags(doc: &RawDocument, tagset: TagSet) -> Vec<TaggedSentence> {
    wrap_all(role_sentences(doc), tagset)
}

pub fn strip_tags(sentences: &[TaggedSentence]) -> Vec<String> {
    sentences
        .iter()
        .map(|s| strip_sentence_tags(&s.text).to_string())
        .collect()
}

/// A document after segmentation, cutoff, tagging and tokenization.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenizedDocument {
    pub id: String,
    pub split: Split,
    pub label: Label,
    pub sentences: Vec<Vec<String>>,
    pub roles: Vec<Role>,
    /// Whitespace-delimited words in the retained raw text.
    pub word_count: usize,
    /// Characters of retained raw text, one separator between sentences.
    pub char_count: usize,
}

pub fn tokenize_document(doc: &RawDocument, tagset: TagSet, cutoff: CutoffPolicy) -> TokenizedDocument {
    let all = role_sentences(doc);
    let texts: Vec<&str> = all.iter().map(|(_, s)| s.as_str()).collect();
    let kept = apply_cutoff(&texts, cutoff).len();
    let retained: Vec<(Role, String)> = all.into_iter().take(kept).collect();

    let word_count = retained.iter().map(|(_, s)| s.split_whitespace().count()).sum();
    let char_count = retained.iter().map(|(_, s)| s.chars().count()).sum::<usize>() + kept.saturating_sub(1);

    let tagged = wrap_all(retained, tagset);
    let mut sentences = Vec::with_capacity(tagged.len());
    let mut roles = Vec::with_capacity(tagged.len());
    for s in tagged {
        let toks = tokenize(&s.text);
        if !toks.is_empty() {
            sentences.push(toks);
            roles.push(s.role);
        }
    }
    TokenizedDocument {
        id: doc.id.clone(),
        split: doc.split,
        label: doc.label,
        sentences,
        roles,
        word_count,
        char_count,
    }
}

/// Model input: sentences of token ids plus their roles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggedDocument {
    pub id: String,
    pub split: Split,
    pub label: Label,
    pub sentences: Vec<Vec<u32>>,
    pub roles: Vec<Role>,
    pub word_count: usize,
}

impl TaggedDocument {
    pub fn from_tokenized(doc: &TokenizedDocument, vocab: &Vocabulary) -> Self {
        Self {
            id: doc.id.clone(),
            split: doc.split,
            label: doc.label,
            sentences: doc.sentences.iter().map(|s| vocab.encode_all(s)).collect(),
            roles: doc.roles.clone(),
            word_count: doc.word_count,
        }
    }

    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(Vec::len).sum()
    }
}

/// Builds the vocabulary from the training split, forcing in the tagset's tags.
pub fn build_vocabulary(docs: &[TokenizedDocument], tagset: TagSet, max_size: usize) -> Result<Vocabulary> {
    let sentences = docs
        .iter()
        .filter(|d| d.split == Split::Train)
        .flat_map(|d| d.sentences.iter().map(Vec::as_slice));
    Vocabulary::build(sentences, max_size, &tagset.tag_tokens())
}

/// Full preprocessing of a corpus: tokenization with tags and cutoff, a
/// training-split vocabulary, and id encoding. Documents keep their order.
pub fn prepare_corpus(
    docs: &[RawDocument],
    tagset: TagSet,
    cutoff: CutoffPolicy,
    max_vocab: usize,
) -> Result<(Vec<TaggedDocument>, Vocabulary)> {
    cutoff.validate()?;
    let tokenized: Vec<TokenizedDocument> = docs.par_iter().map(|d| tokenize_document(d, tagset, cutoff)).collect();
    let vocab = build_vocabulary(&tokenized, tagset, max_vocab)?;
    let tagged = tokenized.par_iter().map(|d| TaggedDocument::from_tokenized(d, &vocab)).collect();
    Ok((tagged, vocab))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::tags::is_tag_token;
    use proptest::prelude::*;

    fn doc(title: &str, abs: &str, body: &str) -> RawDocument {
        RawDocument {
            id: "d1".into(),
            title: title.into(),
            abstract_text: abs.into(),
            body_text: body.into(),
            label: Label::accepted(true),
            split: Split::Train,
        }
    }

    #[test]
    fn title_is_one_tagged_sentence() {
        let d = doc("Cross-Task Knowledge-Constrained Self Training", "", "");
        let tagged = inject_tags(&d, TagSet::Full);
        assert_eq!(tagged.len(), 1);
        assert_eq!(tagged[0].text, "<TITLE> Cross-Task Knowledge-Constrained Self Training </TITLE>");
        // punctuation in a title does not split it
        let d = doc("Why? A Study. Of Things.", "", "");
        assert_eq!(inject_tags(&d, TagSet::Full).len(), 1);
    }

    #[test]
    fn none_tagset_leaves_text_unchanged() {
        let d = doc("T", "First one. Second one.", "Body here.");
        let tagged = inject_tags(&d, TagSet::None);
        let texts: Vec<&str> = tagged.iter().map(|s| s.text.as_str()).collect();
        assert_eq!(texts, vec!["T", "First one.", "Second one.", "Body here."]);
        assert_eq!(tagged[1].role, Role::Abstract);
        assert_eq!(tagged[3].role, Role::BodyText);
    }

    #[test]
    fn reduced_is_full_with_relabelled_roles() {
        let d = doc("Title", "First one. Second one.", "Body.");
        let full = inject_tags(&d, TagSet::Full);
        let reduced = inject_tags(&d, TagSet::Reduced);
        for (f, r) in full.iter().zip(&reduced) {
            let relabelled = f
                .text
                .replace("<TITLE>", "<TITLE_ABSTRACT>")
                .replace("</TITLE>", "</TITLE_ABSTRACT>")
                .replace("<ABSTRACT>", "<TITLE_ABSTRACT>")
                .replace("</ABSTRACT>", "</TITLE_ABSTRACT>");
            assert_eq!(relabelled, r.text);
        }
        assert_eq!(reduced[1].text, "<TITLE_ABSTRACT> First one. </TITLE_ABSTRACT>");
        assert_eq!(reduced[2].text, "<TITLE_ABSTRACT> Second one. </TITLE_ABSTRACT>");
    }

    #[test]
    fn cutoff_is_applied_before_tagging() {
        let body = (0..50).map(|i| format!("Sentence number {i} is here.")).collect::<Vec<_>>().join(" ");
        let d = doc("Title", "", &body);
        let t = tokenize_document(&d, TagSet::Full, CutoffPolicy::CharacterLimit(100));
        assert!(t.char_count <= 100);
        assert_eq!(t.sentences.len(), 4);
        let t = tokenize_document(&d, TagSet::Full, CutoffPolicy::SentenceLimit(3));
        assert_eq!(t.sentences.len(), 3);
        assert_eq!(t.sentences[0].first().unwrap(), "<TITLE>");
    }

    #[test]
    fn malformed_corpus_line_reports_number() {
        use std::io::Write;
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, r#"{{"id":"a","title":"t","abstract":"","body_text":"","label":{{"accepted":true}},"split":"train"}}"#).unwrap();
        writeln!(f, r#"{{"id":"b","title":"t","abstract":"","body_text":"","label":{{"accepted":true}},"split":"dev"}}"#).unwrap();
        let err = read_corpus(f.path()).unwrap_err();
        assert!(matches!(err, Error::Format { line: 2, .. }), "{err}");
    }

    fn text_strategy() -> impl Strategy<Value = String> {
        prop::collection::vec("[A-Z][a-z]{0,6}( [a-z]{1,6}){0,5}[.!?]", 0..5).prop_map(|v| v.join(" "))
    }

    proptest! {
        #[test]
        fn strip_inverts_injection(title in "[A-Za-z ,:-]{0,30}", abs in text_strategy(), body in text_strategy()) {
            let d = doc(&title, &abs, &body);
            let plain: Vec<String> = inject_tags(&d, TagSet::None).into_iter().map(|s| s.text).collect();
            for tagset in [TagSet::Full, TagSet::Reduced] {
                let tagged = inject_tags(&d, tagset);
                prop_assert_eq!(strip_tags(&tagged), plain.clone());
                for s in &tagged {
                    let toks = tokenize(&s.text);
                    prop_assert_eq!(Some(toks[0].clone()), tagset.open(s.role));
                    prop_assert_eq!(toks.last().cloned(), tagset.close(s.role));
                    prop_assert!(toks[1..toks.len() - 1].iter().all(|t| !is_tag_token(t)));
                }
            }
        }
    }
}

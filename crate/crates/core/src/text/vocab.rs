use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::util::{read_file, sha256_hex, write_atomic};

pub const PAD: u32 = 0;
pub const UNK: u32 = 1;
pub const PAD_TOKEN: &str = "<PAD>";
pub const UNK_TOKEN: &str = "<UNK>";
pub const DEFAULT_MAX_SIZE: usize = 10_000;

/// Bijective token/id mapping. Ids 0 and 1 are PAD and UNK, followed by
/// force-included tag tokens and then content tokens by descending frequency.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    /// Builds from tokenized training sentences. `forced` tokens (structure
    /// tags) are always present and count against `max_size`; ties in
    /// frequency are broken lexicographically.
    pub fn build<'a, I>(sentences: I, max_size: usize, forced: &[String]) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [String]>,
    {
        if forced.len() > max_size {
            return Err(Error::Config(format!(
                "{} forced tokens exceed vocabulary size {max_size}",
                forced.len()
            )));
        }
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for sentence in sentences {
            for tok in sentence {
                *counts.entry(tok.as_str()).or_default() += 1;
            }
        }
        let mut ranked: Vec<(&str, usize)> = counts
            .into_iter()
            .filter(|(t, _)| {
                !forced.iter().any(|f| f == t) && *t != PAD_TOKEN && *t != UNK_TOKEN
            })
            .collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        ranked.truncate(max_size - forced.len());

        let tokens = [PAD_TOKEN, UNK_TOKEN]
            .into_iter()
            .map(String::from)
            .chain(forced.iter().cloned())
            .chain(ranked.into_iter().map(|(t, _)| t.to_string()))
            .collect();
        Self::from_tokens(tokens)
    }

    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < 2 || tokens[0] != PAD_TOKEN || tokens[1] != UNK_TOKEN {
            return Err(Error::Format {
                line: 1,
                message: "vocabulary must start with <PAD>, <UNK>".into(),
            });
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i as u32).is_some() {
                return Err(Error::Format {
                    line: 1,
                    message: format!("duplicate vocabulary token `{t}`"),
                });
            }
        }
        Ok(Self { tokens, index })
    }

    /// Total number of ids, specials included.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Number of non-special tokens (tags and content).
    pub fn content_len(&self) -> usize {
        self.tokens.len() - 2
    }

    pub fn encode(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn encode_all(&self, tokens: &[String]) -> Vec<u32> {
        tokens.iter().map(|t| self.encode(t)).collect()
    }

    pub fn decode(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.tokens).expect("strings serialize")
    }

    pub fn hash(&self) -> String {
        sha256_hex(self.to_json().as_bytes())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = read_file(path)?;
        let tokens: Vec<String> = serde_json::from_str(&text)?;
        Self::from_tokens(tokens)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(tokens: &[&str]) -> Vec<String> {
        tokens.iter().map(|t| t.to_string()).collect()
    }

    #[test]
    fn keeps_all_small_vocabularies() {
        let corpus = [s(&["a", "b", "c"]), s(&["d", "e", "a"])];
        let v = Vocabulary::build(corpus.iter().map(Vec::as_slice), DEFAULT_MAX_SIZE, &[]).unwrap();
        assert_eq!(v.len(), 5 + 2);
        assert_eq!(v.encode("a"), 2);
        assert_eq!(v.encode(PAD_TOKEN), PAD);
        assert_eq!(v.encode("zzz"), UNK);
    }

    #[test]
    fn ties_break_lexicographically() {
        let corpus = [s(&["beta", "alpha"])];
        let v = Vocabulary::build(corpus.iter().map(Vec::as_slice), 10, &[]).unwrap();
        assert!(v.encode("alpha") < v.encode("beta"));
    }

    #[test]
    fn forced_tokens_count_against_cap() {
        let corpus = [s(&["x", "x", "y", "z", "<TITLE>"])];
        let forced = s(&["<TITLE>", "</TITLE>"]);
        let v = Vocabulary::build(corpus.iter().map(Vec::as_slice), 3, &forced).unwrap();
        assert_eq!(v.content_len(), 3);
        assert_eq!(v.encode("<TITLE>"), 2);
        assert_eq!(v.encode("</TITLE>"), 3);
        assert_eq!(v.encode("x"), 4);
        assert_eq!(v.encode("y"), UNK);
    }

    #[test]
    fn empty_corpus_gives_specials_only() {
        let v = Vocabulary::build(std::iter::empty(), 10, &[]).unwrap();
        assert_eq!(v.len(), 2);
    }

    #[test]
    fn decode_encode_roundtrip() {
        let corpus = [s(&["a", "b"])];
        let v = Vocabulary::build(corpus.iter().map(Vec::as_slice), 10, &[]).unwrap();
        for t in ["a", "b", "never"] {
            let back = v.decode(v.encode(t)).unwrap();
            assert!(back == t || back == UNK_TOKEN);
        }
        let again = Vocabulary::from_tokens(v.tokens().to_vec()).unwrap();
        assert_eq!(again, v);
        assert_eq!(again.hash(), v.hash());
    }
}

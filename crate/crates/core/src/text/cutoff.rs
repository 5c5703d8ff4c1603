use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rule limiting how much of a document a model sees. Truncation always
/// happens at sentence boundaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutoffPolicy {
    /// Keep the longest sentence prefix whose raw characters, counting one
    /// separator between consecutive sentences, fit in the limit. The first
    /// sentence is always kept.
    CharacterLimit(usize),
    SentenceLimit(usize),
}

impl CutoffPolicy {
    pub fn validate(&self) -> Result<()> {
        match self {
            CutoffPolicy::CharacterLimit(0) | CutoffPolicy::SentenceLimit(0) => {
                Err(Error::Config(format!("cutoff limit must be positive: {self:?}")))
            }
            _ => Ok(()),
        }
    }
}

/// Number of leading sentences retained under `policy`.
pub fn cutoff_len<S: AsRef<str>>(sentences: &[S], policy: CutoffPolicy) -> usize {
    match policy {
        CutoffPolicy::SentenceLimit(m) => sentences.len().min(m),
        CutoffPolicy::CharacterLimit(n) => {
            let mut used = 0usize;
            let mut kept = 0usize;
            for s in sentences {
                let len = s.as_ref().chars().count() + usize::from(kept > 0);
                if kept > 0 && used + len > n {
                    break;
                }
                used += len;
                kept += 1;
            }
            kept
        }
    }
}

pub fn apply_cutoff<S: AsRef<str>>(sentences: &[S], policy: CutoffPolicy) -> &[S] {
    &sentences[..cutoff_len(sentences, policy)]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        let short = vec!["x".repeat(10); 3];
        assert_eq!(apply_cutoff(&short, CutoffPolicy::CharacterLimit(20000)).len(), 3);

        let many: Vec<String> = (0..400).map(|i| format!("s{i}")).collect();
        let kept = apply_cutoff(&many, CutoffPolicy::SentenceLimit(360));
        assert_eq!(kept.len(), 360);
        assert_eq!(kept.last().unwrap(), "s359");

        let long = vec!["y".repeat(9000); 3];
        assert_eq!(apply_cutoff(&long, CutoffPolicy::CharacterLimit(20000)).len(), 2);

        let huge = vec!["z".repeat(30000), "a".into()];
        assert_eq!(apply_cutoff(&huge, CutoffPolicy::CharacterLimit(20000)).len(), 1);

        let empty: Vec<String> = vec![];
        assert!(apply_cutoff(&empty, CutoffPolicy::CharacterLimit(5)).is_empty());
    }

    #[test]
    fn separators_are_counted() {
        let s = vec!["ab", "cd"];
        assert_eq!(cutoff_len(&s, CutoffPolicy::CharacterLimit(4)), 1);
        assert_eq!(cutoff_len(&s, CutoffPolicy::CharacterLimit(5)), 2);
    }

    #[test]
    fn zero_limits_rejected() {
        assert!(CutoffPolicy::CharacterLimit(0).validate().is_err());
        assert!(CutoffPolicy::SentenceLimit(0).validate().is_err());
        assert!(CutoffPolicy::SentenceLimit(1).validate().is_ok());
    }

    proptest! {
        #[test]
        fn character_limit_is_monotone(lens in prop::collection::vec(1usize..50, 0..40), n1 in 1usize..500, extra in 0usize..500) {
            let sentences: Vec<String> = lens.iter().map(|&l| "w".repeat(l)).collect();
            let a = cutoff_len(&sentences, CutoffPolicy::CharacterLimit(n1));
            let b = cutoff_len(&sentences, CutoffPolicy::CharacterLimit(n1 + extra));
            prop_assert!(a <= b);
            if !sentences.is_empty() {
                prop_assert!(a >= 1);
            }
            if a > 1 {
                let used: usize = lens[..a].iter().sum::<usize>() + a - 1;
                prop_assert!(used <= n1);
            }
        }
    }
}

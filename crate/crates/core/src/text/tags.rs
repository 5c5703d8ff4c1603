use serde::{Deserialize, Serialize};

/// Role a sentence plays inside a document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Role {
    Title,
    Abstract,
    BodyText,
}

/// Maps sentence roles to structure-tag labels. A scheme that returns
/// `None` leaves sentences untagged.
pub trait TagScheme {
    fn label(&self, role: Role) -> Option<&'static str>;

    /// Every label the scheme can emit, in a fixed order.
    fn labels(&self) -> Vec<&'static str>;

    fn open(&self, role: Role) -> Option<String> {
        self.label(role).map(|l| format!("<{l}>"))
    }

    fn close(&self, role: Role) -> Option<String> {
        self.label(role).map(|l| format!("</{l}>"))
    }

    /// Open and close surface forms of every label.
    fn tag_tokens(&self) -> Vec<String> {
        self.labels()
            .into_iter()
            .flat_map(|l| [format!("<{l}>"), format!("</{l}>")])
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TagSet {
    /// TITLE, ABSTRACT and BODY_TEXT.
    #[default]
    Full,
    /// Title and abstract merged into TITLE_ABSTRACT, plus BODY_TEXT.
    Reduced,
    None,
}

impl TagScheme for TagSet {
    fn label(&self, role: Role) -> Option<&'static str> {
        match (self, role) {
            (TagSet::None, _) => None,
            (TagSet::Full, Role::Title) => Some("TITLE"),
            (TagSet::Full, Role::Abstract) => Some("ABSTRACT"),
            (TagSet::Reduced, Role::Title | Role::Abstract) => Some("TITLE_ABSTRACT"),
            (_, Role::BodyText) => Some("BODY_TEXT"),
        }
    }

    fn labels(&self) -> Vec<&'static str> {
        match self {
            TagSet::Full => vec!["TITLE", "ABSTRACT", "BODY_TEXT"],
            TagSet::Reduced => vec!["TITLE_ABSTRACT", "BODY_TEXT"],
            TagSet::None => vec![],
        }
    }
}

impl std::str::FromStr for TagSet {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "full" => Ok(TagSet::Full),
            "reduced" => Ok(TagSet::Reduced),
            "none" => Ok(TagSet::None),
            other => Err(crate::Error::Config(format!("unknown tagset `{other}`"))),
        }
    }
}

/// Surface forms of every tag any shipped scheme can produce. The tokenizer
/// keeps these atomic.
pub fn all_tag_tokens() -> Vec<String> {
    let mut out = TagSet::Full.tag_tokens();
    for t in TagSet::Reduced.tag_tokens() {
        if !out.contains(&t) {
            out.push(t);
        }
    }
    out
}

pub fn is_tag_token(token: &str) -> bool {
    all_tag_tokens().iter().any(|t| t == token)
}

/// Wraps a sentence in its role's open/close tags: `<ROLE> text </ROLE>`.
pub fn wrap_sentence(scheme: &impl TagScheme, role: Role, text: &str) -> String {
    match (scheme.open(role), scheme.close(role)) {
        (Some(open), Some(close)) => format!("{open} {text} {close}"),
        _ => text.to_string(),
    }
}

/// Removes a leading open tag and trailing close tag, if present.
pub fn strip_sentence_tags(text: &str) -> &str {
    let mut s = text;
    for tag in all_tag_tokens() {
        if tag.starts_with("</") {
            if let Some(rest) = s.strip_suffix(tag.as_str()) {
                s = rest.strip_suffix(' ').unwrap_or(rest);
            }
        } else if let Some(rest) = s.strip_prefix(tag.as_str()) {
            s = rest.strip_prefix(' ').unwrap_or(rest);
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wraps_title_like_the_reference_example() {
        let s = wrap_sentence(&TagSet::Full, Role::Title, "Cross-Task Knowledge-Constrained Self Training");
        assert_eq!(s, "<TITLE> Cross-Task Knowledge-Constrained Self Training </TITLE>");
        assert_eq!(strip_sentence_tags(&s), "Cross-Task Knowledge-Constrained Self Training");
    }

    #[test]
    fn reduced_merges_title_and_abstract() {
        assert_eq!(TagSet::Reduced.open(Role::Title), TagSet::Reduced.open(Role::Abstract));
        assert_eq!(TagSet::Reduced.open(Role::Title).unwrap(), "<TITLE_ABSTRACT>");
        assert_eq!(TagSet::Reduced.close(Role::BodyText).unwrap(), "</BODY_TEXT>");
        assert_eq!(TagSet::Reduced.tag_tokens().len(), 4);
        assert_eq!(TagSet::Full.tag_tokens().len(), 6);
        assert!(TagSet::None.tag_tokens().is_empty());
    }

    #[test]
    fn untagged_scheme_leaves_text_alone() {
        assert_eq!(wrap_sentence(&TagSet::None, Role::Abstract, "Plain text."), "Plain text.");
        assert_eq!(all_tag_tokens().len(), 8);
    }
}

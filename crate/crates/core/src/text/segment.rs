//! Rule-based sentence segmentation.
//!
//! A boundary is placed after a run of `.`, `!` or `?` (plus any closing
//! quotes or brackets) when it is followed by whitespace and the next
//! visible character (after any opening quote or bracket) is an uppercase
//! letter or a digit. A period that closes a known abbreviation, a single
//! initial, or a dotted acronym such as "e.g." never ends a sentence.

const ABBREVIATIONS: &[&str] = &[
    "al", "fig", "figs", "eq", "eqs", "sec", "secs", "tab", "cf", "vs", "no", "nos", "dr", "mr",
    "mrs", "ms", "prof", "approx", "resp", "ref", "refs", "ch", "vol", "pp", "st", "jr", "sr",
    "def", "thm", "lem", "prop", "alg", "app", "ex", "viz",
];

fn is_terminal(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'' | ')' | ']' | '}' | '\u{201D}' | '\u{2019}')
}

fn is_opener(c: char) -> bool {
    matches!(c, '"' | '\'' | '(' | '[' | '{' | '\u{201C}' | '\u{2018}')
}

/// Whether the word ending in a period at the end of `before` is an abbreviation.
fn ends_with_abbreviation(before: &str) -> bool {
    let word = before
        .rsplit(char::is_whitespace)
        .next()
        .unwrap_or("")
        .trim_start_matches(|c: char| !c.is_alphanumeric());
    let stem = word.strip_suffix('.').unwrap_or(word);
    if stem.is_empty() {
        return false;
    }
    // single initial: "J."
    let mut chars = stem.chars();
    if let (Some(c), None) = (chars.next(), chars.next()) {
        if c.is_uppercase() {
            return true;
        }
    }
    // dotted acronyms: "i.e", "e.g", "U.S"
    if stem.contains('.') && stem.split('.').all(|p| p.chars().count() == 1) {
        return true;
    }
    let lower = stem.to_lowercase();
    ABBREVIATIONS.contains(&lower.as_str())
}

pub fn segment_sentences(text: &str) -> Vec<String> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut sentences = Vec::new();
    let mut start = 0usize;
    let mut i = 0usize;

    while i < chars.len() {
        let (_, c) = chars[i];
        if !is_terminal(c) {
            i += 1;
            continue;
        }
        let first_terminal = i;
        let mut j = i;
        while j + 1 < chars.len() && (is_terminal(chars[j + 1].1) || is_closer(chars[j + 1].1)) {
            j += 1;
        }
        let end_byte = chars.get(j + 1).map_or(text.len(), |(b, _)| *b);

        let mut k = j + 1;
        while k < chars.len() && chars[k].1.is_whitespace() {
            k += 1;
        }
        let followed_by_space = k > j + 1;
        let next_starts = chars[k.min(chars.len())..]
            .iter()
            .find(|(_, n)| !is_opener(*n))
            .is_some_and(|(_, n)| n.is_uppercase() || n.is_ascii_digit());

        let abbreviation = chars[first_terminal].1 == '.'
            && j == first_terminal
            && ends_with_abbreviation(&text[..chars[first_terminal].0 + 1]);

        if followed_by_space && next_starts && !abbreviation {
            push_trimmed(&mut sentences, &text[start..end_byte]);
            start = chars[k].0;
            i = k;
        } else {
            i = j + 1;
        }
    }
    push_trimmed(&mut sentences, &text[start..]);
    sentences
}

fn push_trimmed(out: &mut Vec<String>, s: &str) {
    let s = s.trim();
    if !s.is_empty() {
        out.push(s.to_string());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn splits_simple_sentences() {
        assert_eq!(segment_sentences("A cat. A dog."), vec!["A cat.", "A dog."]);
        assert!(segment_sentences("").is_empty());
        assert!(segment_sentences("   \n ").is_empty());
    }

    #[test]
    fn abbreviations_do_not_end_sentences() {
        let s = segment_sentences("See Fig. 2 for details. Next sentence.");
        assert_eq!(s, vec!["See Fig. 2 for details.", "Next sentence."]);

        let s = segment_sentences("Smith et al. Proposed this. It works.");
        assert_eq!(s, vec!["Smith et al. Proposed this.", "It works."]);

        let s = segment_sentences("Use a prior, i.e. A Gaussian. Done.");
        assert_eq!(s, vec!["Use a prior, i.e. A Gaussian.", "Done."]);

        let s = segment_sentences("Written by J. Smith. Then more.");
        assert_eq!(s, vec!["Written by J. Smith.", "Then more."]);

        let s = segment_sentences("As in Eq. 3 and e.g. Table 2. Yes.");
        assert_eq!(s, vec!["As in Eq. 3 and e.g. Table 2.", "Yes."]);
    }

    #[test]
    fn needs_capital_or_digit_after_boundary() {
        assert_eq!(segment_sentences("it ends. then continues."), vec!["it ends. then continues."]);
        assert_eq!(segment_sentences("Value is 3.14 here. 42 is next."), vec!["Value is 3.14 here.", "42 is next."]);
        assert_eq!(segment_sentences("Really?! Yes. \"Quoted.\" Next."), vec!["Really?!", "Yes.", "\"Quoted.\"", "Next."]);
    }

    #[test]
    fn unicode_text() {
        let s = segment_sentences("Größe ist wichtig. Übung macht den Meister!");
        assert_eq!(s, vec!["Größe ist wichtig.", "Übung macht den Meister!"]);
    }

    proptest! {
        #[test]
        fn reconstructs_input_modulo_whitespace(text in "[A-Za-z0-9 .!?,]{0,200}") {
            let sentences = segment_sentences(&text);
            let joined = sentences.join(" ");
            let a: Vec<&str> = text.split_whitespace().collect();
            let b: Vec<&str> = joined.split_whitespace().collect();
            prop_assert_eq!(a, b);
            prop_assert!(sentences.iter().all(|s| !s.is_empty()));
        }
    }
}

use super::tags::all_tag_tokens;

/// Lowercases, splits on whitespace and peels punctuation off word edges.
/// Structure-tag surface forms are recognized first and kept verbatim.
pub fn tokenize(sentence: &str) -> Vec<String> {
    let tags = all_tag_tokens();
    let mut out = Vec::new();
    for chunk in sentence.split_whitespace() {
        let mut rest = chunk;
        while !rest.is_empty() {
            match find_tag(rest, &tags) {
                Some((pos, tag)) => {
                    split_word(&rest[..pos], &mut out);
                    out.push(tag.to_string());
                    rest = &rest[pos + tag.len()..];
                }
                None => {
                    split_word(rest, &mut out);
                    break;
                }
            }
        }
    }
    out
}

fn find_tag<'t>(s: &str, tags: &'t [String]) -> Option<(usize, &'t str)> {
    s.match_indices('<').find_map(|(pos, _)| {
        tags.iter()
            .find(|t| s[pos..].starts_with(t.as_str()))
            .map(|t| (pos, t.as_str()))
    })
}

fn split_word(word: &str, out: &mut Vec<String>) {
    if word.is_empty() {
        return;
    }
    let Some(first) = word.find(|c: char| c.is_alphanumeric()) else {
        out.extend(word.chars().map(String::from));
        return;
    };
    let last = word
        .char_indices()
        .rev()
        .find(|(_, c)| c.is_alphanumeric())
        .map(|(i, c)| i + c.len_utf8())
        .expect("has an alphanumeric char");
    out.extend(word[..first].chars().map(String::from));
    out.push(word[first..last].to_lowercase());
    out.extend(word[last..].chars().map(String::from));
}

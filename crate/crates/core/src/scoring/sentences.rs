use crate::error::{Error, Result};

/// Words whose trailing period never ends a sentence (compared lowercased).
const ABBREVIATIONS: [&str; 5] = ["e.g.", "i.e.", "etc.", "mr.", "dr."];

const TERMINALS: [char; 3] = ['.', '!', '?'];
const CLOSERS: [char; 6] = ['"', '\'', ')', ']', '\u{201d}', '\u{2019}'];

/// Splits `text` into sentences.
///
/// A sentence ends at `.`, `!` or `?` (optionally followed by closing quotes
/// or brackets) when the next character is whitespace or the text ends. A
/// period closing one of `e.g.`, `i.e.`, `etc.`, `Mr.` or `Dr.` does not end a
/// sentence. Fragments are trimmed; fragments without any alphanumeric
/// character are dropped.
pub fn split_sentences(text: &str) -> Result<Vec<String>> {
    if !text.chars().any(char::is_alphanumeric) {
        return Err(Error::EmptyInput("text has no alphanumeric content".into()));
    }
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut sentences = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < chars.len() {
        let (_, ch) = chars[i];
        if !TERMINALS.contains(&ch) {
            i += 1;
            continue;
        }
        let mut end = i + 1;
        while end < chars.len() && CLOSERS.contains(&chars[end].1) {
            end += 1;
        }
        let at_boundary = end == chars.len() || chars[end].1.is_whitespace();
        let byte_end = chars.get(end).map_or(text.len(), |&(b, _)| b);
        if at_boundary && !(ch == '.' && ends_with_abbreviation(&text[start..byte_end])) {
            push_fragment(&mut sentences, &text[start..byte_end]);
            start = byte_end;
        }
        i = end;
    }
    push_fragment(&mut sentences, &text[start..]);
    Ok(sentences)
}

fn ends_with_abbreviation(fragment: &str) -> bool {
    let last = fragment
        .split_whitespace()
        .last()
        .unwrap_or("")
        .trim_start_matches(|c: char| !c.is_alphanumeric())
        .trim_end_matches(|c| CLOSERS.contains(&c))
        .to_lowercase();
    ABBREVIATIONS.contains(&last.as_str())
}

fn push_fragment(out: &mut Vec<String>, fragment: &str) {
    let f = fragment.trim();
    if f.chars().any(char::is_alphanumeric) {
        out.push(f.to_string());
    }
}

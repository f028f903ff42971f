//! Small text utilities shared by extraction, viewpoint batching and context
//! construction.

use std::ops::Range;

/// Tokenizer-agnostic token estimate: `ceil(chars / 4)`.
pub fn estimate_tokens(text: &str) -> usize {
    text.chars().count().div_ceil(4)
}

const ABBREVIATIONS: &[&str] = &["mr", "mrs", "ms", "dr", "st", "sir", "prof", "rev", "gen", "sgt", "no", "vs", "etc", "jr", "sr"];

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'' | '\u{2019}' | '\u{201D}' | ')' | ']')
}

/// Splits `body` into sentence byte ranges (trimmed, non-empty, in order).
///
/// A sentence ends at `.`, `!` or `?` (plus any closing quotes/brackets)
/// followed by whitespace, unless the word before the period is a common
/// title abbreviation or a single capital letter.
pub fn sentence_spans(body: &str) -> Vec<Range<usize>> {
    let chars: Vec<(usize, char)> = body.char_indices().collect();
    let mut spans = Vec::new();
    let mut start = 0usize;
    let mut i = 0usize;
    while i < chars.len() {
        let (_, c) = chars[i];
        if matches!(c, '.' | '!' | '?') {
            let mut j = i + 1;
            while j < chars.len() && (is_closer(chars[j].1) || matches!(chars[j].1, '.' | '!' | '?')) {
                j += 1;
            }
            let at_end = j >= chars.len();
            let followed_by_space = !at_end && chars[j].1.is_whitespace();
            if (at_end || followed_by_space) && !(c == '.' && j == i + 1 && is_abbreviation(body, chars[i].0)) {
                let end = if at_end { body.len() } else { chars[j].0 };
                push_trimmed(body, start..end, &mut spans);
                start = end;
            }
            i = j;
            continue;
        }
        if c == '\n' && i + 1 < chars.len() && chars[i + 1].1 == '\n' {
            // paragraph break always ends a sentence
            push_trimmed(body, start..chars[i].0, &mut spans);
            start = chars[i].0;
        }
        i += 1;
    }
    push_trimmed(body, start..body.len(), &mut spans);
    spans
}

fn is_abbreviation(body: &str, dot: usize) -> bool {
    let before = &body[..dot];
    let word: String = before.chars().rev().take_while(|c| c.is_alphabetic()).collect::<Vec<_>>().into_iter().rev().collect();
    if word.is_empty() {
        return false;
    }
    if word.chars().count() == 1 && word.chars().all(char::is_uppercase) {
        return true;
    }
    ABBREVIATIONS.contains(&word.to_lowercase().as_str())
}

fn push_trimmed(body: &str, range: Range<usize>, out: &mut Vec<Range<usize>>) {
    let slice = &body[range.clone()];
    let lead = slice.len() - slice.trim_start().len();
    let trail = slice.len() - slice.trim_end().len();
    let r = (range.start + lead)..(range.end - trail);
    if r.start < r.end {
        out.push(r);
    }
}

/// Maps typographic quotes and dashes onto their ASCII forms.
pub fn fold_char(c: char) -> char {
    match c {
        '\u{2018}' | '\u{2019}' | '\u{201B}' | '`' => '\'',
        '\u{201C}' | '\u{201D}' => '"',
        '\u{2013}' | '\u{2014}' => '-',
        other => other,
    }
}

/// Lowercased alphanumeric-and-space projection of `text`, with whitespace
/// collapsed, together with the byte offset in `text` of every output char.
pub fn normalize_with_offsets(text: &str) -> (String, Vec<usize>) {
    let mut out = String::new();
    let mut offsets = Vec::new();
    let mut pending_space = false;
    for (pos, c) in text.char_indices() {
        let c = fold_char(c);
        if c.is_alphanumeric() {
            if pending_space && !out.is_empty() {
                out.push(' ');
                offsets.push(pos);
            }
            pending_space = false;
            for lc in c.to_lowercase() {
                out.push(lc);
                offsets.push(pos);
            }
        } else if c.is_whitespace() || c == '-' || c == '/' {
            pending_space = true;
        }
        // other punctuation is dropped without introducing a break
    }
    (out, offsets)
}

pub fn normalize(text: &str) -> String {
    normalize_with_offsets(text).0
}

const STOPWORDS: &[&str] = &[
    "a", "an", "the", "and", "or", "but", "of", "to", "in", "on", "at", "for", "with", "by", "from", "is", "are", "was",
    "were", "be", "been", "has", "have", "had", "it", "its", "that", "this", "as", "not", "they", "their", "he", "she",
    "his", "her", "we", "our", "said", "says", "will", "would",
];

/// Lowercased content words (stopwords removed).
pub fn content_tokens(text: &str) -> Vec<String> {
    normalize(text)
        .split(' ')
        .filter(|w| !w.is_empty() && !STOPWORDS.contains(w))
        .map(str::to_string)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn token_estimate_rounds_up() {
        assert_eq!(estimate_tokens(""), 0);
        assert_eq!(estimate_tokens("abcd"), 1);
        assert_eq!(estimate_tokens("abcde"), 2);
    }

    #[test]
    fn splits_on_terminal_punctuation() {
        let body = "First one. Second? Mr. Smith said 'no.' Third!";
        let s: Vec<&str> = sentence_spans(body).into_iter().map(|r| &body[r]).collect();
        assert_eq!(s, vec!["First one.", "Second?", "Mr. Smith said 'no.'", "Third!"]);
    }

    #[test]
    fn single_sentence_without_terminator() {
        let body = "  no terminator here ";
        let s: Vec<&str> = sentence_spans(body).into_iter().map(|r| &body[r]).collect();
        assert_eq!(s, vec!["no terminator here"]);
    }

    #[test]
    fn normalization_keeps_offsets() {
        let text = "The \u{2018}Grip\u{2019} \u{2014} failed!";
        let (norm, offs) = normalize_with_offsets(text);
        assert_eq!(norm, "the grip failed");
        assert_eq!(norm.chars().count(), offs.len());
        assert_eq!(&text[offs[4]..offs[4] + 1], "G");
    }
}

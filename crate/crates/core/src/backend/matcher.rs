//! Whole-word, case-insensitive phrase matching over punctuation-stripped
//! tokens. Matching is deliberately literal: no stemming, no fuzzing.

/// One token of the original text: the normalized word plus its byte span.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub word: String,
    pub start: usize,
    pub end: usize,
}

/// Split text into tokens. Each token keeps its byte span in the original
/// string; the `word` is lowercased with leading/trailing punctuation removed
/// (inner punctuation such as apostrophes and hyphens is kept).
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut start = None;
    for (i, ch) in text.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                push_token(text, s, i, &mut tokens);
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        push_token(text, s, text.len(), &mut tokens);
    }
    tokens
}

fn push_token(text: &str, start: usize, end: usize, out: &mut Vec<Token>) {
    let raw = &text[start..end];
    let trimmed = raw.trim_matches(|c: char| !c.is_alphanumeric());
    if trimmed.is_empty() {
        return;
    }
    let offset = raw.find(trimmed).unwrap_or(0);
    out.push(Token {
        word: trimmed.to_lowercase(),
        start: start + offset,
        end: start + offset + trimmed.len(),
    });
}

/// Normalize a pattern into its word sequence.
pub fn pattern_words(pattern: &str) -> Vec<String> {
    tokenize(pattern).into_iter().map(|t| t.word).collect()
}

/// Find the first occurrence of `pattern` as a consecutive token run.
/// Returns the token index range `[start, end)`.
pub fn find_phrase(tokens: &[Token], pattern: &[String]) -> Option<(usize, usize)> {
    if pattern.is_empty() || tokens.len() < pattern.len() {
        return None;
    }
    (0..=tokens.len() - pattern.len()).find_map(|i| {
        tokens[i..i + pattern.len()]
            .iter()
            .zip(pattern)
            .all(|(t, p)| &t.word == p)
            .then_some((i, i + pattern.len()))
    })
}

/// Find every occurrence of `pattern` as a consecutive token run.
pub fn find_all_phrases(tokens: &[Token], pattern: &[String]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    if pattern.is_empty() || tokens.len() < pattern.len() {
        return out;
    }
    for i in 0..=tokens.len() - pattern.len() {
        if tokens[i..i + pattern.len()]
            .iter()
            .zip(pattern)
            .all(|(t, p)| &t.word == p)
        {
            out.push((i, i + pattern.len()));
        }
    }
    out
}

/// True when `pattern` occurs somewhere in `text`.
pub fn text_contains_phrase(text: &str, pattern: &str) -> bool {
    find_phrase(&tokenize(text), &pattern_words(pattern)).is_some()
}

/// Slice the original text covering tokens `[start, end)`.
pub fn span_text<'a>(text: &'a str, tokens: &[Token], start: usize, end: usize) -> &'a str {
    &text[tokens[start].start..tokens[end - 1].end]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenizes_with_spans_and_punctuation() {
        let toks = tokenize("Two men, at arm's length!");
        let words: Vec<&str> = toks.iter().map(|t| t.word.as_str()).collect();
        assert_eq!(words, ["two", "men", "at", "arm's", "length"]);
        assert_eq!(&"Two men, at arm's length!"[toks[1].start..toks[1].end], "men");
    }

    #[test]
    fn whole_word_phrase_matching() {
        assert!(text_contains_phrase("a heated ARGUMENT broke out", "argument"));
        assert!(!text_contains_phrase("argumentative people", "argument"));
        assert!(text_contains_phrase("ends in a physical fight.", "physical fight"));
        assert!(!text_contains_phrase("a physical, fair fight", "physical fight"));
    }

    #[test]
    fn span_text_recovers_original_casing() {
        let text = "A Heated Argument";
        let toks = tokenize(text);
        let m = find_phrase(&toks, &pattern_words("heated argument")).unwrap();
        assert_eq!(span_text(text, &toks, m.0, m.1), "Heated Argument");
    }
}

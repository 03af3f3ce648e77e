use crate::model::is_project_code;

/// Built-in English stop words dropped by [`tokenize`].
pub const STOP_WORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "against", "all", "am", "an", "and", "any", "are",
    "as", "at", "be", "because", "been", "before", "being", "below", "between", "both", "but",
    "by", "can", "could", "did", "do", "does", "doing", "down", "during", "each", "few", "for",
    "from", "further", "had", "has", "have", "having", "he", "her", "here", "hers", "him", "his",
    "how", "if", "in", "into", "is", "it", "its", "itself", "just", "me", "more", "most", "my",
    "no", "nor", "not", "now", "of", "off", "on", "once", "only", "or", "other", "our", "ours",
    "out", "over", "own", "same", "she", "should", "so", "some", "such", "than", "that", "the",
    "their", "theirs", "them", "then", "there", "these", "they", "this", "those", "through", "to",
    "too", "under", "until", "up", "very", "was", "we", "were", "what", "when", "where", "which",
    "while", "who", "whom", "why", "will", "with", "would", "you", "your", "yours",
];

fn is_stop_word(token: &str) -> bool {
    STOP_WORDS.binary_search(&token).is_ok()
}

/// Byte ranges of maximal alphanumeric runs.
fn runs(text: &str) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        match (c.is_alphanumeric(), start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push((s, i));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, text.len()));
    }
    out
}

fn is_key_number(run: &str) -> bool {
    !run.starts_with('0') && run.bytes().all(|b| b.is_ascii_digit())
}

/// Lowercased alphanumeric tokens of at least two characters, without stop
/// words. Canonical issue keys such as `QTBUG-30` survive as one token
/// (`qtbug-30`).
pub fn tokenize(text: &str) -> Vec<String> {
    let runs = runs(text);
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < runs.len() {
        let (s, e) = runs[i];
        let word = &text[s..e];
        if let Some(&(ns, ne)) = runs.get(i + 1) {
            let joined_by_dash = ns == e + 1 && text.as_bytes()[e] == b'-';
            if joined_by_dash && is_project_code(word) && is_key_number(&text[ns..ne]) {
                tokens.push(text[s..ne].to_lowercase());
                i += 2;
                continue;
            }
        }
        let token = word.to_lowercase();
        if token.chars().count() >= 2 && !is_stop_word(&token) {
            tokens.push(token);
        }
        i += 1;
    }
    tokens
}

//! Tokenization.
//!
//! Text is lowercased and split on every character that is not alphanumeric.
//! No stemming is applied. An optional stopword list removes tokens after
//! splitting.

use std::collections::BTreeSet;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenizerConfig {
    pub stopwords: BTreeSet<String>,
}

impl TokenizerConfig {
    /// Builds a config from a newline-separated stopword list. Blank lines and
    /// lines starting with `#` are ignored; entries are lowercased.
    pub fn with_stopword_list(list: &str) -> Self {
        let stopwords = list
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase)
            .collect();
        TokenizerConfig { stopwords }
    }
}

pub fn tokenize(text: &str, config: &TokenizerConfig) -> Vec<String> {
    // Lowercase first: some characters lowercase into sequences that contain
    // non-alphanumeric marks, which must act as separators too.
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty() && !config.stopwords.contains(*t))
        .map(str::to_owned)
        .collect()
}

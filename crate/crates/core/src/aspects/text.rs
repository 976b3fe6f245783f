use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::record::ArticleRecord;

/// Lowercases and splits on every non-alphanumeric character.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Hashtags are matched without the leading `#` and case-insensitively.
pub fn normalize_hashtag(tag: &str) -> String {
    tag.trim().trim_start_matches('#').to_lowercase()
}

/// A small English stop-word list, applied only when explicitly requested.
pub const STOPWORDS: &[&str] = &[
    "a", "about", "after", "all", "also", "an", "and", "any", "are", "as", "at", "be", "been",
    "but", "by", "can", "could", "did", "do", "does", "for", "from", "had", "has", "have", "he",
    "her", "his", "how", "i", "if", "in", "into", "is", "it", "its", "more", "my", "no", "not",
    "of", "on", "one", "or", "our", "out", "she", "so", "some", "than", "that", "the", "their",
    "them", "then", "there", "these", "they", "this", "to", "up", "was", "we", "were", "what",
    "when", "which", "who", "will", "with", "would", "you", "your",
];

pub fn tokenize_filtered(text: &str, remove_stopwords: bool) -> Vec<String> {
    let mut toks = tokenize(text);
    if remove_stopwords {
        toks.retain(|t| STOPWORDS.binary_search(&t.as_str()).is_err());
    }
    toks
}

/// Token index. Indices are contiguous from 0 in (count desc, token asc)
/// order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for Vocabulary {
    fn from(tokens: Vec<String>) -> Self {
        Self::from_tokens(tokens)
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.tokens
    }
}

impl Vocabulary {
    /// Keeps every key with count >= `min_count`.
    pub fn from_counts(counts: &BTreeMap<String, usize>, min_count: usize) -> Self {
        let mut kept: Vec<(&String, usize)> = counts
            .iter()
            .filter(|(_, &c)| c >= min_count && c > 0)
            .map(|(t, &c)| (t, c))
            .collect();
        // BTreeMap iteration is already token-ascending; a stable sort keeps it.
        kept.sort_by_key(|&(_, c)| std::cmp::Reverse(c));
        Self::from_tokens(kept.into_iter().map(|(t, _)| t.clone()).collect())
    }

    /// Panics on duplicate tokens.
    pub fn from_tokens(tokens: Vec<String>) -> Self {
        let index: HashMap<String, usize> = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        assert_eq!(index.len(), tokens.len(), "duplicate vocabulary token");
        Self { tokens, index }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, idx: usize) -> &str {
        &self.tokens[idx]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

pub fn build_vocabulary(corpus: &[ArticleRecord], min_count: usize) -> Vocabulary {
    build_vocabulary_with(corpus, min_count, false)
}

pub fn build_vocabulary_with(
    corpus: &[ArticleRecord],
    min_count: usize,
    remove_stopwords: bool,
) -> Vocabulary {
    let mut counts = BTreeMap::new();
    for rec in corpus {
        for t in tokenize_filtered(&rec.text, remove_stopwords) {
            *counts.entry(t).or_insert(0) += 1;
        }
    }
    Vocabulary::from_counts(&counts, min_count)
}

/// Vocabulary over normalized hashtags, counted once per article.
pub fn build_hashtag_vocabulary(corpus: &[ArticleRecord], min_count: usize) -> Vocabulary {
    let mut counts = BTreeMap::new();
    for rec in corpus {
        let mut tags: Vec<String> = rec
            .hashtags
            .iter()
            .map(|h| normalize_hashtag(h))
            .filter(|h| !h.is_empty())
            .collect();
        tags.sort();
        tags.dedup();
        for h in tags {
            *counts.entry(h).or_insert(0) += 1;
        }
    }
    Vocabulary::from_counts(&counts, min_count)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, text: &str) -> ArticleRecord {
        ArticleRecord {
            id: id.into(),
            text: text.into(),
            hashtags: vec![],
            tag_counts: BTreeMap::new(),
            domain: String::new(),
            label: None,
        }
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize("The cat sat."), ["the", "cat", "sat"]);
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("U.S.-based  NEWS"), ["u", "s", "based", "news"]);
    }

    #[test]
    fn stopwords_are_sorted() {
        assert!(STOPWORDS.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(tokenize_filtered("the cat and a dog", true), ["cat", "dog"]);
    }

    #[test]
    fn vocabulary_order_and_threshold() {
        let c = [rec("1", "a b"), rec("2", "b c")];
        let v = build_vocabulary(&c, 1);
        assert_eq!(v.tokens(), ["b", "a", "c"]);
        assert_eq!(v.get("b"), Some(0));
        assert!(build_vocabulary(&c, 3).is_empty());
        assert_eq!(build_vocabulary(&[rec("1", "x x x")], 1).tokens(), ["x"]);
    }

    #[test]
    fn hashtags_normalize() {
        assert_eq!(normalize_hashtag("#Elec"), "elec");
        let mut r = rec("1", "");
        r.hashtags = vec!["#A".into(), "a".into(), "#b".into()];
        let v = build_hashtag_vocabulary(&[r], 1);
        assert_eq!(v.tokens(), ["a", "b"]);
    }
}

//! Synthetic two-class corpus with a known class signal in every aspect.
//!
//! Each class owns a block of indicative words, a block of hashtags and a
//! shifted HTML tag profile. Every aspect is individually noisy and the
//! noise is independent across aspects, so combining them should help.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::aspects::{ArticleRecord, Label};
use crate::seed::rng_for;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_articles: usize,
    pub vocab_size: usize,
    pub indicative_per_class: usize,
    pub hashtags_per_class: usize,
    pub neutral_hashtags: usize,
    pub tokens_per_article: usize,
    /// Chance that a position starts a phrase of the article's own class.
    pub indicative_rate: f64,
    /// Chance that a position starts a phrase of the other class.
    pub crossover_rate: f64,
    /// Indicative words per phrase. Phrases make class words co-occur.
    pub phrase_len: usize,
    pub hashtags_per_article: usize,
    /// Chance that a hashtag comes from the article's own class block.
    pub hashtag_fidelity: f64,
    /// Multiplicative shift of class-leaning tag means.
    pub tag_shift: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_articles: 600,
            vocab_size: 500,
            indicative_per_class: 30,
            hashtags_per_class: 10,
            neutral_hashtags: 10,
            tokens_per_article: 60,
            indicative_rate: 0.15,
            crossover_rate: 0.05,
            phrase_len: 3,
            hashtags_per_article: 2,
            hashtag_fidelity: 0.7,
            tag_shift: 1.8,
            seed: 0,
        }
    }
}

/// Tag names and baseline means; the first four lean fake, the next four
/// lean real, the rest are shared.
const TAGS: &[(&str, f64)] = &[
    ("iframe", 3.0),
    ("script", 12.0),
    ("ins", 4.0),
    ("button", 5.0),
    ("p", 25.0),
    ("blockquote", 2.0),
    ("cite", 2.0),
    ("time", 3.0),
    ("a", 40.0),
    ("div", 60.0),
    ("img", 8.0),
    ("span", 30.0),
    ("meta", 15.0),
    ("link", 6.0),
    ("h1", 1.0),
    ("h2", 4.0),
    ("h3", 3.0),
    ("ul", 5.0),
    ("li", 20.0),
    ("table", 1.0),
    ("tr", 4.0),
    ("td", 10.0),
    ("form", 1.0),
    ("input", 3.0),
    ("nav", 2.0),
    ("footer", 1.0),
    ("header", 1.0),
    ("section", 6.0),
    ("article", 1.0),
    ("style", 2.0),
];

fn word(i: usize) -> String {
    format!("w{i:03}")
}

fn class_of(i: usize, n: usize) -> Label {
    if i < n / 2 {
        Label::Fake
    } else {
        Label::Real
    }
}

/// Background words follow a Zipf-like law over the neutral block.
fn background_word(rng: &mut ChaCha8Rng, cdf: &[f64], offset: usize) -> usize {
    let u: f64 = rng.random();
    offset + cdf.partition_point(|&c| c < u).min(cdf.len() - 1)
}

pub fn generate(spec: &SyntheticSpec) -> Vec<ArticleRecord> {
    let ind = spec.indicative_per_class;
    assert!(
        spec.vocab_size > 2 * ind,
        "vocabulary too small for the indicative blocks"
    );
    let neutral = spec.vocab_size - 2 * ind;
    let weights: Vec<f64> = (1..=neutral).map(|r| 1.0 / r as f64).collect();
    let total: f64 = weights.iter().sum();
    let cdf: Vec<f64> = weights
        .iter()
        .scan(0.0, |acc, w| {
            *acc += w / total;
            Some(*acc)
        })
        .collect();

    (0..spec.n_articles)
        .map(|i| {
            let mut rng = rng_for(spec.seed, i as u64);
            let label = class_of(i, spec.n_articles);
            let (own, other) = match label {
                Label::Fake => (0, ind),
                Label::Real => (ind, 0),
            };
            let mut idx = Vec::with_capacity(spec.tokens_per_article + spec.phrase_len);
            while idx.len() < spec.tokens_per_article {
                let u: f64 = rng.random();
                let block = if u < spec.indicative_rate {
                    Some(own)
                } else if u < spec.indicative_rate + spec.crossover_rate {
                    Some(other)
                } else {
                    None
                };
                match block {
                    Some(b) => idx
                        .extend((0..spec.phrase_len.max(1)).map(|_| b + rng.random_range(0..ind))),
                    None => idx.push(background_word(&mut rng, &cdf, 2 * ind)),
                }
            }
            idx.truncate(spec.tokens_per_article);
            let text: Vec<String> = idx.into_iter().map(word).collect();

            let hashtags: Vec<String> = (0..spec.hashtags_per_article)
                .map(|_| {
                    let u: f64 = rng.random();
                    let fidelity = spec.hashtag_fidelity;
                    let (block, size) = if u < fidelity {
                        (label.as_str(), spec.hashtags_per_class)
                    } else if u < fidelity + (1.0 - fidelity) / 2.0 {
                        (label.other().as_str(), spec.hashtags_per_class)
                    } else {
                        ("topic", spec.neutral_hashtags)
                    };
                    format!("#{block}{}", rng.random_range(0..size))
                })
                .collect();

            let tag_counts: BTreeMap<String, u64> = TAGS
                .iter()
                .enumerate()
                .map(|(t, &(name, base))| {
                    let leans = match t {
                        0..=3 => Some(Label::Fake),
                        4..=7 => Some(Label::Real),
                        _ => None,
                    };
                    let mean = if leans == Some(label) {
                        base * spec.tag_shift
                    } else {
                        base
                    };
                    let draw: f64 = Poisson::new(mean).expect("positive mean").sample(&mut rng);
                    (name.to_string(), draw as u64)
                })
                .collect();

            ArticleRecord {
                id: format!("art{i:04}"),
                text: text.join(" "),
                hashtags,
                tag_counts,
                domain: format!("site{i:04}.example"),
                label: Some(label),
            }
        })
        .collect()
}

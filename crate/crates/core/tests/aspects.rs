use std::collections::{BTreeMap, BTreeSet};

use misinfo_core::aspects::{
    build_hashtag_vocabulary, build_hta, build_tags, build_tta, build_vocabulary, check_alignment,
    read_corpus, write_corpus, ArticleRecord, ExternalPairs, Label, TextOptions, Vocabulary,
};
use misinfo_core::seed::rng_for;
use misinfo_core::ErrorClass;
use proptest::prelude::*;
use rand::Rng;

const POOL: &[&str] = &[
    "alpha", "beta", "gamma", "delta", "eps", "zeta", "eta", "theta", "iota", "kappa",
];

fn article(id: usize, tokens: &[&str], hashtags: &[&str]) -> ArticleRecord {
    ArticleRecord {
        id: format!("a{id}"),
        text: tokens.join(" "),
        hashtags: hashtags.iter().map(|s| s.to_string()).collect(),
        tag_counts: BTreeMap::new(),
        domain: format!("d{id}"),
        label: None,
    }
}

fn random_corpus(seed: u64) -> Vec<ArticleRecord> {
    let mut rng = rng_for(seed, 0);
    let n = rng.random_range(1..=10);
    (0..n)
        .map(|k| {
            let len = rng.random_range(0..=50);
            let toks: Vec<&str> = (0..len)
                .map(|_| POOL[rng.random_range(0..POOL.len())])
                .collect();
            article(k, &toks, &[])
        })
        .collect()
}

/// Every contiguous window of `w` positions (the whole text when shorter),
/// every ordered pair of distinct in-vocabulary terms inside it.
fn window_oracle(
    corpus: &[ArticleRecord],
    vocab: &Vocabulary,
    w: usize,
) -> BTreeSet<(usize, usize, usize)> {
    let mut out = BTreeSet::new();
    for (k, rec) in corpus.iter().enumerate() {
        let toks: Vec<&str> = rec.text.split_whitespace().collect();
        let starts = if toks.len() <= w {
            1
        } else {
            toks.len() - w + 1
        };
        for s in 0..starts {
            let win = &toks[s..(s + w).min(toks.len())];
            for a in win {
                for b in win {
                    if let (Some(i), Some(j)) = (vocab.get(a), vocab.get(b)) {
                        if i != j {
                            out.insert((i, j, k));
                        }
                    }
                }
            }
        }
    }
    out
}

#[test]
fn tta_matches_window_oracle_with_oov_gaps() {
    for seed in 0..100 {
        let corpus = random_corpus(seed);
        let window = 2 + (seed as usize % 4);
        // drop two pool words so out-of-vocabulary positions appear
        let vocab = Vocabulary::from_tokens(POOL[2..].iter().map(|s| s.to_string()).collect());
        let model = build_tta(
            &corpus,
            &vocab,
            &TextOptions {
                window,
                remove_stopwords: false,
            },
        )
        .unwrap();
        let got: BTreeSet<_> = model
            .tensor()
            .unwrap()
            .entries()
            .iter()
            .map(|e| (e.i, e.j, e.k))
            .collect();
        assert_eq!(got, window_oracle(&corpus, &vocab, window), "seed {seed}");
        assert!(model
            .tensor()
            .unwrap()
            .entries()
            .iter()
            .all(|e| e.value == 1.0));
    }
}

#[test]
fn tta_is_symmetric_in_term_modes() {
    for seed in 100..120 {
        let mut corpus = random_corpus(seed);
        corpus.extend(random_corpus(seed + 1000).into_iter().map(|mut r| {
            r.id.push('x');
            r
        }));
        corpus.truncate(20);
        let vocab = build_vocabulary(&corpus, 1);
        if vocab.is_empty() {
            continue;
        }
        let t = build_tta(&corpus, &vocab, &TextOptions::default()).unwrap();
        let t = t.tensor().unwrap();
        let [v, _, n] = t.dims();
        for k in 0..n {
            for i in 0..v {
                assert_eq!(t.get(i, i, k), 0.0);
                for j in 0..v {
                    assert_eq!(t.get(i, j, k), t.get(j, i, k));
                }
            }
        }
    }
}

#[test]
fn hta_count_formula() {
    let mut rng = rng_for(5, 0);
    let tags = ["#a", "#b", "#c", "#d"];
    let corpus: Vec<ArticleRecord> = (0..15)
        .map(|k| {
            let toks: Vec<&str> = (0..rng.random_range(1..30))
                .map(|_| POOL[rng.random_range(0..POOL.len())])
                .collect();
            let h: Vec<&str> = tags
                .iter()
                .copied()
                .filter(|_| rng.random_bool(0.5))
                .collect();
            article(k, &toks, &h)
        })
        .collect();
    let vocab = build_vocabulary(&corpus, 1);
    let hv = build_hashtag_vocabulary(&corpus, 1);
    let model = build_hta(&corpus, &vocab, &hv, &TextOptions::default()).unwrap();
    let expected: usize = corpus
        .iter()
        .map(|r| {
            let distinct: BTreeSet<&str> = r.text.split_whitespace().collect();
            r.hashtags.len() * distinct.len()
        })
        .sum();
    assert_eq!(model.tensor().unwrap().nnz(), expected);
}

#[test]
fn all_aspects_share_article_order() {
    let mut corpus = random_corpus(42);
    for (k, r) in corpus.iter_mut().enumerate() {
        r.hashtags = vec!["#x".into()];
        r.tag_counts = BTreeMap::from([("p".into(), k as u64 + 1)]);
        r.text.push_str(" alpha beta");
    }
    let vocab = build_vocabulary(&corpus, 1);
    let hv = build_hashtag_vocabulary(&corpus, 1);
    let ids: Vec<String> = corpus.iter().map(|r| r.id.clone()).collect();
    let ext = ExternalPairs::read(format!("{},u1\n", ids[0]).as_bytes(), "users", &ids).unwrap();
    let models = vec![
        build_tta(&corpus, &vocab, &TextOptions::default()).unwrap(),
        build_hta(&corpus, &vocab, &hv, &TextOptions::default()).unwrap(),
        build_tags(&corpus).0,
        ext.to_model(&ids).0,
    ];
    assert!(models.iter().all(|m| m.article_ids == ids));
    check_alignment(&models).unwrap();

    let mut shuffled = models[2].clone();
    shuffled.article_ids.reverse();
    if ids.len() > 1 {
        let err = check_alignment(&[models[0].clone(), shuffled]).unwrap_err();
        assert_eq!(err.class(), ErrorClass::Input);
    }
}

#[test]
fn external_pairs_are_binary_and_follow_the_subset() {
    let ids: Vec<String> = vec!["art1".into(), "art2".into(), "art3".into(), "art4".into()];
    let csv = "art1,user7\nart2,user7\nart2,user7\nart4,user9\nart3,user8\n";
    let pairs = ExternalPairs::read(csv.as_bytes(), "users", &ids).unwrap();
    let subset = &ids[..3];
    let (model, entities) = pairs.to_model(subset);
    let m = model.matrix().unwrap();
    let c7 = entities.iter().position(|e| e == "user7").unwrap();
    assert_eq!(m.col(c7), vec![1.0, 1.0, 0.0]);
    assert_eq!(entities, vec!["user7".to_string(), "user8".to_string()]);

    let err = ExternalPairs::read("zzz,user1\n".as_bytes(), "users", &ids).unwrap_err();
    assert_eq!(err.class(), ErrorClass::Input);
}

#[test]
fn corpus_round_trip_and_errors() {
    let mut rec = article(1, &["hello", "world"], &["#News"]);
    rec.label = Some(Label::Fake);
    rec.tag_counts.insert("div".into(), 3);
    let mut buf = Vec::new();
    write_corpus(&[rec.clone()], &mut buf).unwrap();
    assert_eq!(read_corpus(buf.as_slice()).unwrap(), vec![rec]);

    let bad = "{\"id\":\"a\"}\n{not json}\n";
    let err = read_corpus(bad.as_bytes()).unwrap_err();
    assert_eq!(err.class(), ErrorClass::Input);
    assert!(err.to_string().contains('2'));
    let dup = "{\"id\":\"a\"}\n{\"id\":\"a\"}\n";
    assert!(read_corpus(dup.as_bytes()).is_err());
}

proptest! {
    #[test]
    fn tta_nonzeros_are_in_vocab_pairs(words in prop::collection::vec(0usize..POOL.len(), 0..40), window in 2usize..6) {
        let toks: Vec<&str> = words.iter().map(|&i| POOL[i]).collect();
        let corpus = vec![article(0, &toks, &[])];
        let vocab = Vocabulary::from_tokens(POOL.iter().map(|s| s.to_string()).collect());
        let t = build_tta(&corpus, &vocab, &TextOptions { window, remove_stopwords: false }).unwrap();
        let got: BTreeSet<_> = t.tensor().unwrap().entries().iter().map(|e| (e.i, e.j, e.k)).collect();
        prop_assert_eq!(got, window_oracle(&corpus, &vocab, window));
    }
}

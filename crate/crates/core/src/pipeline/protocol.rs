//! Evaluation protocol: corpus sampling, label masking and scoring.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::aspects::{ArticleRecord, Label};
use crate::error::{Error, Result};
use crate::seed::rng_for;

/// Indices into `corpus` of the sampled subset, in corpus order.
///
/// Each domain keeps at most `per_domain` articles, drawn uniformly. An
/// empty domain string counts as a domain of its own article. With
/// `balance`, unlabeled articles are dropped and the larger class is
/// downsampled to the smaller.
pub fn sample_corpus(
    corpus: &[ArticleRecord],
    per_domain: Option<usize>,
    balance: bool,
    seed: u64,
) -> Result<Vec<usize>> {
    if corpus.is_empty() {
        return Err(Error::parameter("cannot sample an empty corpus"));
    }
    let mut rng = rng_for(seed, 0);
    let mut chosen: Vec<usize> = match per_domain {
        None => (0..corpus.len()).collect(),
        Some(cap) => {
            let mut by_domain: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
            let mut out = Vec::new();
            for (i, r) in corpus.iter().enumerate() {
                if r.domain.is_empty() {
                    out.push(i);
                } else {
                    by_domain.entry(r.domain.as_str()).or_default().push(i);
                }
            }
            for (_, mut idx) in by_domain {
                idx.shuffle(&mut rng);
                out.extend(idx.into_iter().take(cap));
            }
            out
        }
    };
    chosen.sort_unstable();

    if balance {
        let mut fake: Vec<usize> = chosen
            .iter()
            .copied()
            .filter(|&i| corpus[i].label == Some(Label::Fake))
            .collect();
        let mut real: Vec<usize> = chosen
            .iter()
            .copied()
            .filter(|&i| corpus[i].label == Some(Label::Real))
            .collect();
        if fake.is_empty() || real.is_empty() {
            return Err(Error::Balancing {
                message: "a class is absent after per-domain sampling".into(),
                fake: fake.len(),
                real: real.len(),
            });
        }
        let n = fake.len().min(real.len());
        for class in [&mut fake, &mut real] {
            class.shuffle(&mut rng);
            class.truncate(n);
        }
        chosen = fake.into_iter().chain(real).collect();
        chosen.sort_unstable();
    }
    Ok(chosen)
}

/// Positions (into the label slice) whose labels are revealed and those
/// held out for scoring. Unlabeled positions are in neither set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSplit {
    pub known: Vec<usize>,
    pub hidden: Vec<usize>,
}

/// Reveals `round(p * n_c)` uniformly chosen labels of each class.
pub fn mask_labels(labels: &[Option<Label>], p: f64, seed: u64) -> Result<LabelSplit> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::parameter(format!(
            "label fraction {p} outside (0, 1)"
        )));
    }
    let mut rng = rng_for(seed, 1);
    let mut known = Vec::new();
    let mut hidden = Vec::new();
    for class in [Label::Fake, Label::Real] {
        let mut idx: Vec<usize> = (0..labels.len())
            .filter(|&i| labels[i] == Some(class))
            .collect();
        let n_known = (p * idx.len() as f64).round() as usize;
        if n_known == 0 {
            return Err(Error::Protocol(format!(
                "label fraction {p} reveals no {class} label out of {}",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        known.extend_from_slice(&idx[..n_known]);
        hidden.extend_from_slice(&idx[n_known..]);
    }
    known.sort_unstable();
    hidden.sort_unstable();
    Ok(LabelSplit { known, hidden })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn from_labels(predicted: &[Label], truth: &[Label], positive: Label) -> Result<Self> {
        if predicted.len() != truth.len() {
            return Err(Error::dimension(format!(
                "{} predictions for {} truths",
                predicted.len(),
                truth.len()
            )));
        }
        if predicted.is_empty() {
            return Err(Error::parameter("no predictions to score"));
        }
        let mut c = Confusion::default();
        for (&p, &t) in predicted.iter().zip(truth) {
            match (p == positive, t == positive) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        Ok(c)
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

pub fn f1_score(predicted: &[Label], truth: &[Label], positive: Label) -> Result<f64> {
    Ok(Confusion::from_labels(predicted, truth, positive)?.f1())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: usize, domain: &str, label: Option<Label>) -> ArticleRecord {
        ArticleRecord {
            id: id.to_string(),
            text: String::new(),
            hashtags: vec![],
            tag_counts: Default::default(),
            domain: domain.into(),
            label,
        }
    }

    #[test]
    fn one_per_domain() {
        let c: Vec<_> = (0..6)
            .map(|i| rec(i, ["a", "b", "c"][i / 2], Some(Label::Fake)))
            .collect();
        let s = sample_corpus(&c, Some(1), false, 3).unwrap();
        assert_eq!(s.len(), 3);
        let domains: std::collections::BTreeSet<_> =
            s.iter().map(|&i| c[i].domain.clone()).collect();
        assert_eq!(domains.len(), 3);
    }

    #[test]
    fn balance_downsamples() {
        let c: Vec<_> = (0..14)
            .map(|i| {
                rec(
                    i,
                    &format!("d{i}"),
                    Some(if i < 10 { Label::Fake } else { Label::Real }),
                )
            })
            .collect();
        let s = sample_corpus(&c, Some(1), true, 0).unwrap();
        let fake = s
            .iter()
            .filter(|&&i| c[i].label == Some(Label::Fake))
            .count();
        assert_eq!((fake, s.len() - fake), (4, 4));
    }

    #[test]
    fn missing_class_is_balancing_error() {
        let c: Vec<_> = (0..3).map(|i| rec(i, "d", Some(Label::Real))).collect();
        match sample_corpus(&c, None, true, 0) {
            Err(Error::Balancing { fake, real, .. }) => assert_eq!((fake, real), (0, 3)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn stratified_mask() {
        let labels: Vec<_> = (0..8)
            .map(|i| Some(if i % 2 == 0 { Label::Fake } else { Label::Real }))
            .collect();
        let s = mask_labels(&labels, 0.5, 1).unwrap();
        assert_eq!(s.known.len(), 4);
        assert_eq!(s.known.iter().filter(|&&i| i % 2 == 0).count(), 2);
        assert_eq!(s, mask_labels(&labels, 0.5, 1).unwrap());
        let hundred: Vec<_> = (0..100)
            .map(|i| Some(if i < 50 { Label::Fake } else { Label::Real }))
            .collect();
        assert_eq!(mask_labels(&hundred, 0.1, 0).unwrap().known.len(), 10);
    }

    #[test]
    fn tiny_fraction_is_protocol_error() {
        let labels = vec![Some(Label::Fake), Some(Label::Real)];
        assert!(matches!(
            mask_labels(&labels, 0.1, 0),
            Err(Error::Protocol(_))
        ));
    }

    #[test]
    fn f1_examples() {
        use Label::*;
        assert_eq!(f1_score(&[Fake, Real], &[Fake, Real], Fake).unwrap(), 1.0);
        assert_eq!(f1_score(&[Real, Real], &[Fake, Real], Fake).unwrap(), 0.0);
        let f = f1_score(&[Fake, Fake, Fake, Real], &[Fake, Fake, Real, Fake], Fake).unwrap();
        assert!((f - 2.0 / 3.0).abs() < 1e-15);
        assert!(f1_score(&[Fake], &[], Fake).is_err());
    }
}

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::aspects::{AspectKind, Label};
use crate::decompose::Normalization;
use crate::error::{Error, Result};
use crate::inference::EdgeWeight;

/// Everything one experiment needs. Parsed from `key = value` text and
/// overridable key by key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub aspects: Vec<AspectKind>,
    /// Interaction CSVs added as extra matrix aspects.
    pub external: Vec<PathBuf>,
    pub rank_tta: usize,
    pub rank_hta: usize,
    pub rank_tags: usize,
    pub rank_external: usize,
    pub window: usize,
    pub min_count: usize,
    pub hashtag_min_count: usize,
    pub remove_stopwords: bool,
    pub cp_max_sweeps: usize,
    pub cp_tol: f64,
    pub normalization: Normalization,
    pub r_joint: Option<usize>,
    pub r_individual: Option<Vec<usize>>,
    pub alpha: f64,
    pub n_perm: usize,
    pub jive_eps: f64,
    pub jive_max_iter: usize,
    pub k: usize,
    pub edge_weight: EdgeWeight,
    pub homophily: f64,
    pub fabp_max_iter: usize,
    pub fabp_tol: f64,
    /// Shrink the homophily onto the convergence bound when needed.
    pub fabp_guard: bool,
    pub label_fraction: f64,
    pub trials: usize,
    pub balance: bool,
    /// `None` keeps every article of a domain.
    pub articles_per_domain: Option<usize>,
    pub seed: u64,
    pub positive_class: Label,
    pub report: Option<PathBuf>,
    pub trials_csv: Option<PathBuf>,
    pub timings: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            aspects: vec![AspectKind::Tta, AspectKind::Hta, AspectKind::Tags],
            external: Vec::new(),
            rank_tta: 10,
            rank_hta: 40,
            rank_tags: 20,
            rank_external: 10,
            window: 5,
            min_count: 2,
            hashtag_min_count: 1,
            remove_stopwords: false,
            cp_max_sweeps: 100,
            cp_tol: 1e-6,
            normalization: Normalization::UnitColumn,
            r_joint: None,
            r_individual: None,
            alpha: 0.05,
            n_perm: 100,
            jive_eps: 1e-6,
            jive_max_iter: 100,
            k: 15,
            edge_weight: EdgeWeight::Inverse,
            homophily: 0.05,
            fabp_max_iter: 2000,
            fabp_tol: 1e-12,
            fabp_guard: true,
            label_fraction: 0.1,
            trials: 10,
            balance: true,
            articles_per_domain: Some(1),
            seed: 0,
            positive_class: Label::Fake,
            report: None,
            trials_csv: None,
            timings: None,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::parameter(format!("{key}: cannot parse {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(Error::parameter(format!(
            "{key}: expected a boolean, got {value:?}"
        ))),
    }
}

fn is_auto(value: &str) -> bool {
    value.is_empty() || value.eq_ignore_ascii_case("auto")
}

fn list(value: &str) -> impl Iterator<Item = &str> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty())
}

impl RunConfig {
    /// Every key accepted by [`RunConfig::set`].
    pub const KEYS: &'static [&'static str] = &[
        "aspects",
        "external",
        "rank_tta",
        "rank_hta",
        "rank_tags",
        "rank_external",
        "rank_order",
        "window",
        "min_count",
        "hashtag_min_count",
        "remove_stopwords",
        "cp_max_sweeps",
        "cp_tol",
        "normalization",
        "r_joint",
        "r_individual",
        "alpha",
        "n_perm",
        "jive_eps",
        "jive_max_iter",
        "k",
        "edge_weight",
        "homophily",
        "fabp_max_iter",
        "fabp_tol",
        "fabp_guard",
        "label_fraction",
        "trials",
        "balance",
        "articles_per_domain",
        "seed",
        "positive_class",
        "report",
        "trials_csv",
        "timings",
    ];

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let value = value.trim();
        let k = key.as_str();
        match k {
            "aspects" => self.aspects = list(value).map(str::parse).collect::<Result<_>>()?,
            "external" => self.external = list(value).map(PathBuf::from).collect(),
            "rank_tta" => self.rank_tta = parse(k, value)?,
            "rank_hta" => self.rank_hta = parse(k, value)?,
            "rank_tags" => self.rank_tags = parse(k, value)?,
            "rank_external" => self.rank_external = parse(k, value)?,
            // the two published orderings of the text tensor ranks
            "rank_order" => match value {
                "tta10_hta40" => (self.rank_tta, self.rank_hta) = (10, 40),
                "tta40_hta10" => (self.rank_tta, self.rank_hta) = (40, 10),
                _ => {
                    return Err(Error::parameter(format!(
                        "rank_order: unknown preset {value:?}"
                    )))
                }
            },
            "window" => self.window = parse(k, value)?,
            "min_count" => self.min_count = parse(k, value)?,
            "hashtag_min_count" => self.hashtag_min_count = parse(k, value)?,
            "remove_stopwords" => self.remove_stopwords = parse_bool(k, value)?,
            "cp_max_sweeps" => self.cp_max_sweeps = parse(k, value)?,
            "cp_tol" => self.cp_tol = parse(k, value)?,
            "normalization" => self.normalization = value.parse()?,
            "r_joint" => {
                self.r_joint = if is_auto(value) {
                    None
                } else {
                    Some(parse(k, value)?)
                }
            }
            "r_individual" => {
                self.r_individual = if is_auto(value) {
                    None
                } else {
                    Some(list(value).map(|v| parse(k, v)).collect::<Result<_>>()?)
                }
            }
            "alpha" => self.alpha = parse(k, value)?,
            "n_perm" => self.n_perm = parse(k, value)?,
            "jive_eps" => self.jive_eps = parse(k, value)?,
            "jive_max_iter" => self.jive_max_iter = parse(k, value)?,
            "k" => self.k = parse(k, value)?,
            "edge_weight" => self.edge_weight = value.parse()?,
            "homophily" => self.homophily = parse(k, value)?,
            "fabp_max_iter" => self.fabp_max_iter = parse(k, value)?,
            "fabp_tol" => self.fabp_tol = parse(k, value)?,
            "fabp_guard" => self.fabp_guard = parse_bool(k, value)?,
            "label_fraction" => self.label_fraction = parse(k, value)?,
            "trials" => self.trials = parse(k, value)?,
            "balance" => self.balance = parse_bool(k, value)?,
            "articles_per_domain" => {
                let n: usize = parse(k, value)?;
                self.articles_per_domain = (n > 0).then_some(n);
            }
            "seed" => self.seed = parse(k, value)?,
            "positive_class" => self.positive_class = value.parse()?,
            "report" => self.report = Some(PathBuf::from(value)),
            "trials_csv" => self.trials_csv = Some(PathBuf::from(value)),
            "timings" => self.timings = Some(PathBuf::from(value)),
            _ => return Err(Error::parameter(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines. `#` starts a comment; blank lines are
    /// ignored.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Ingestion {
                    line: idx + 1,
                    message: format!("expected key = value, got {line:?}"),
                });
            };
            self.set(key, value).map_err(|e| Error::Ingestion {
                line: idx + 1,
                message: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = Self::default();
        c.apply_text(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn rank_for(&self, kind: AspectKind) -> usize {
        match kind {
            AspectKind::Tta => self.rank_tta,
            AspectKind::Hta => self.rank_hta,
            AspectKind::Tags => self.rank_tags,
            AspectKind::External => self.rank_external,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Parameter(m));
        if !(self.label_fraction > 0.0 && self.label_fraction < 1.0) {
            return bad(format!(
                "label_fraction {} outside (0, 1)",
                self.label_fraction
            ));
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.aspects.is_empty() && self.external.is_empty() {
            return bad("no aspects selected".into());
        }
        if self.aspects.contains(&AspectKind::External) {
            return bad("external aspects are selected through the external key".into());
        }
        for (name, r) in [
            ("rank_tta", self.rank_tta),
            ("rank_hta", self.rank_hta),
            ("rank_tags", self.rank_tags),
            ("rank_external", self.rank_external),
        ] {
            if r == 0 {
                return bad(format!("{name} must be at least 1"));
            }
        }
        if self.window < 2 {
            return bad(format!("window {} must be at least 2", self.window));
        }
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if !(self.homophily > 0.0 && self.homophily < 0.5) {
            return bad(format!("homophily {} outside (0, 0.5)", self.homophily));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) || self.n_perm == 0 {
            return bad("alpha must be in (0, 1) and n_perm at least 1".into());
        }
        if self.cp_max_sweeps == 0 || self.jive_max_iter == 0 || self.fabp_max_iter == 0 {
            return bad("iteration limits must be at least 1".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_text() {
        let c = RunConfig::from_text(
            "# comment\naspects = tta, tags\nk=7\nr_joint = auto\nr_individual = 2,3\nnormalization = zscore\narticles_per_domain = 0\n",
        )
        .unwrap();
        assert_eq!(c.aspects, [AspectKind::Tta, AspectKind::Tags]);
        assert_eq!(c.k, 7);
        assert_eq!(c.r_joint, None);
        assert_eq!(c.r_individual, Some(vec![2, 3]));
        assert_eq!(c.normalization, Normalization::ZScore);
        assert_eq!(c.articles_per_domain, None);
    }

    #[test]
    fn bad_line_reports_number() {
        match RunConfig::from_text("k = 3\nnonsense\n") {
            Err(Error::Ingestion { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            RunConfig::from_text("label_fraction = 1.0"),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn rank_orderings() {
        let mut c = RunConfig::default();
        assert_eq!((c.rank_tta, c.rank_hta), (10, 40));
        c.set("rank_order", "tta40_hta10").unwrap();
        assert_eq!((c.rank_tta, c.rank_hta), (40, 10));
    }

    #[test]
    fn every_key_is_settable() {
        let samples = [
            ("aspects", "tta"),
            ("external", "a.csv"),
            ("rank_order", "tta10_hta40"),
            ("remove_stopwords", "true"),
            ("normalization", "none"),
            ("r_joint", "3"),
            ("r_individual", "auto"),
            ("edge_weight", "gaussian"),
            ("balance", "off"),
            ("positive_class", "real"),
            ("report", "r.json"),
            ("trials_csv", "t.csv"),
            ("timings", "x.json"),
            ("cp_tol", "1e-7"),
            ("alpha", "0.1"),
            ("jive_eps", "1e-5"),
            ("homophily", "0.1"),
            ("fabp_tol", "1e-10"),
            ("fabp_guard", "false"),
            ("label_fraction", "0.2"),
        ];
        for key in RunConfig::KEYS {
            let value = samples
                .iter()
                .find(|(k, _)| k == key)
                .map_or("3", |(_, v)| v);
            RunConfig::default()
                .set(key, value)
                .unwrap_or_else(|e| panic!("{key}: {e}"));
        }
    }
}

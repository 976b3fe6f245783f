use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::protocol::{mask_labels, sample_corpus, Confusion};
use crate::aspects::{
    build_hashtag_vocabulary, build_hta, build_tags, build_tta, build_vocabulary_with,
    ArticleRecord, AspectKind, AspectModel, ExternalPairs, Label, TextOptions,
};
use crate::decompose::{
    jive, joint_embedding, level1_decompose, normalize_columns, ArticleEmbedding, JiveOptions,
    JiveResult,
};
use crate::error::{Error, Result};
use crate::inference::{build_knn, classify, fabp, priors_from_labels, BeliefState, FabpOptions};
use crate::linalg::DenseMatrix;
use crate::seed::derive_seed;
use crate::tensor::CpOptions;

/// Builds the configured aspects over `corpus`, in configuration order with
/// external aspects last.
pub fn build_aspects(
    config: &RunConfig,
    corpus: &[ArticleRecord],
    external: &[ExternalPairs],
) -> Result<Vec<AspectModel>> {
    let text = TextOptions {
        window: config.window,
        remove_stopwords: config.remove_stopwords,
    };
    let needs_vocab = config
        .aspects
        .iter()
        .any(|k| matches!(k, AspectKind::Tta | AspectKind::Hta));
    let vocab = if needs_vocab {
        build_vocabulary_with(corpus, config.min_count, config.remove_stopwords)
    } else {
        Default::default()
    };
    let mut out = Vec::new();
    for &kind in &config.aspects {
        let model = match kind {
            AspectKind::Tta => build_tta(corpus, &vocab, &text),
            AspectKind::Hta => {
                let tags = build_hashtag_vocabulary(corpus, config.hashtag_min_count);
                build_hta(corpus, &vocab, &tags, &text)
            }
            AspectKind::Tags => Ok(build_tags(corpus).0),
            AspectKind::External => Err(Error::parameter("external aspects come from files")),
        };
        out.push(model.map_err(|e| e.in_aspect(kind.as_str()))?);
    }
    let ids: Vec<String> = corpus.iter().map(|r| r.id.clone()).collect();
    out.extend(external.iter().map(|p| p.to_model(&ids).0));
    Ok(out)
}

pub fn ranks_for(config: &RunConfig, models: &[AspectModel]) -> Vec<usize> {
    models.iter().map(|m| config.rank_for(m.kind)).collect()
}

pub fn cp_options(config: &RunConfig) -> CpOptions {
    CpOptions {
        max_sweeps: config.cp_max_sweeps,
        tol: config.cp_tol,
        ..CpOptions::default()
    }
}

pub fn jive_options(config: &RunConfig, seed: u64) -> JiveOptions {
    JiveOptions {
        r_joint: config.r_joint,
        r_individual: config.r_individual.clone(),
        alpha: config.alpha,
        n_perm: config.n_perm,
        eps: config.jive_eps,
        max_iter: config.jive_max_iter,
        normalization: config.normalization,
        seed,
    }
}

pub fn fabp_options(config: &RunConfig) -> FabpOptions {
    FabpOptions {
        homophily: config.homophily,
        max_iter: config.fabp_max_iter,
        tol: config.fabp_tol,
        guard_convergence: config.fabp_guard,
    }
}

/// Article embedding used for the graph: the joint coordinates when there
/// are several aspects, the normalized level-1 embedding otherwise.
pub fn fuse_embeddings(
    config: &RunConfig,
    embeddings: &[ArticleEmbedding],
    seed: u64,
) -> Result<(DenseMatrix, Option<JiveResult>)> {
    match embeddings {
        [] => Err(Error::parameter("no embeddings")),
        [single] => Ok((
            normalize_columns(&single.matrix, config.normalization),
            None,
        )),
        many => {
            let res = jive(many, &jive_options(config, seed))?;
            Ok((joint_embedding(&res)?, Some(res)))
        }
    }
}

/// Graph construction and propagation from an embedding and revealed labels.
pub fn propagate(
    config: &RunConfig,
    embedding: &DenseMatrix,
    known: &[Option<Label>],
) -> Result<BeliefState> {
    let graph = build_knn(embedding, config.k, config.edge_weight)?;
    let opts = fabp_options(config);
    let priors = priors_from_labels(known, opts.prior_magnitude());
    fabp(&graph, &priors, &opts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub ok: bool,
    pub error: Option<String>,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub confusion: Confusion,
    pub ties: usize,
    pub n_articles: usize,
    pub n_known: usize,
    pub n_hidden: usize,
    pub r_joint: Option<usize>,
    pub r_individual: Option<Vec<usize>>,
    pub jive_converged: Option<bool>,
    pub jive_iterations: Option<usize>,
    pub fabp_converged: bool,
    pub fabp_iterations: usize,
}

/// Wall-clock seconds per stage. Kept out of the report so reports are
/// reproducible byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialTimings {
    pub trial: usize,
    pub stages: Vec<(String, f64)>,
}

struct Clock {
    last: Instant,
    stages: Vec<(String, f64)>,
}

impl Clock {
    fn new() -> Self {
        Self {
            last: Instant::now(),
            stages: Vec::new(),
        }
    }

    fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        self.stages
            .push((stage.into(), (now - self.last).as_secs_f64()));
        self.last = now;
    }
}

fn failed(trial: usize, seed: u64, err: &Error) -> TrialRecord {
    TrialRecord {
        trial,
        seed,
        ok: false,
        error: Some(err.to_string()),
        f1: 0.0,
        precision: 0.0,
        recall: 0.0,
        confusion: Confusion::default(),
        ties: 0,
        n_articles: 0,
        n_known: 0,
        n_hidden: 0,
        r_joint: None,
        r_individual: None,
        jive_converged: None,
        jive_iterations: None,
        fabp_converged: false,
        fabp_iterations: 0,
    }
}

/// One pass of sample, mask, aspects, decomposition, propagation and
/// scoring on the hidden articles. Errors carry the failing stage.
pub fn run_trial(
    config: &RunConfig,
    corpus: &[ArticleRecord],
    external: &[ExternalPairs],
    trial: usize,
) -> Result<(TrialRecord, TrialTimings)> {
    let seed = derive_seed(config.seed, trial as u64);
    let mut clock = Clock::new();

    let picked = sample_corpus(corpus, config.articles_per_domain, config.balance, seed)
        .map_err(|e| e.in_stage("sample"))?;
    let subset: Vec<ArticleRecord> = picked.iter().map(|&i| corpus[i].clone()).collect();
    let truth: Vec<Option<Label>> = subset.iter().map(|r| r.label).collect();
    let split = mask_labels(&truth, config.label_fraction, seed).map_err(|e| e.in_stage("mask"))?;
    clock.lap("sample");

    let models = build_aspects(config, &subset, external).map_err(|e| e.in_stage("aspects"))?;
    clock.lap("aspects");

    let embeddings = level1_decompose(
        &models,
        &ranks_for(config, &models),
        derive_seed(seed, 1),
        &cp_options(config),
    )
    .map_err(|e| e.in_stage("level1"))?;
    clock.lap("level1");

    let (embedding, jive_res) = fuse_embeddings(config, &embeddings, derive_seed(seed, 2))
        .map_err(|e| e.in_stage("joint"))?;
    clock.lap("joint");

    let mut known = vec![None; subset.len()];
    for &i in &split.known {
        known[i] = truth[i];
    }
    let beliefs = propagate(config, &embedding, &known).map_err(|e| e.in_stage("propagate"))?;
    clock.lap("propagate");

    let cls = classify(&beliefs.beliefs);
    let pred: Vec<Label> = split.hidden.iter().map(|&i| cls.labels[i]).collect();
    let want: Vec<Label> = split
        .hidden
        .iter()
        .map(|&i| truth[i].expect("hidden are labeled"))
        .collect();
    let confusion = Confusion::from_labels(&pred, &want, config.positive_class)
        .map_err(|e| e.in_stage("evaluate"))?;
    let ties = split
        .hidden
        .iter()
        .filter(|&&i| beliefs.beliefs[i] == 0.0)
        .count();
    clock.lap("evaluate");

    let record = TrialRecord {
        trial,
        seed,
        ok: true,
        error: None,
        f1: confusion.f1(),
        precision: confusion.precision(),
        recall: confusion.recall(),
        confusion,
        ties,
        n_articles: subset.len(),
        n_known: split.known.len(),
        n_hidden: split.hidden.len(),
        r_joint: jive_res.as_ref().map(|j| j.r_joint),
        r_individual: jive_res.as_ref().map(|j| j.r_individual.clone()),
        jive_converged: jive_res.as_ref().map(|j| j.converged),
        jive_iterations: jive_res.as_ref().map(|j| j.iterations),
        fabp_converged: beliefs.converged,
        fabp_iterations: beliefs.iterations,
    };
    Ok((
        record,
        TrialTimings {
            trial,
            stages: clock.stages,
        },
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: RunConfig,
    pub trials: Vec<TrialRecord>,
    pub n_ok: usize,
    pub n_failed: usize,
    /// Population mean and standard deviation over successful trials.
    pub f1_mean: f64,
    pub f1_std: f64,
    pub precision_mean: f64,
    pub recall_mean: f64,
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

impl ExperimentReport {
    pub fn from_trials(config: RunConfig, trials: Vec<TrialRecord>) -> Self {
        let ok: Vec<&TrialRecord> = trials.iter().filter(|t| t.ok).collect();
        let f1: Vec<f64> = ok.iter().map(|t| t.f1).collect();
        let (f1_mean, f1_std) = mean_std(&f1);
        let precision_mean = mean_std(&ok.iter().map(|t| t.precision).collect::<Vec<_>>()).0;
        let recall_mean = mean_std(&ok.iter().map(|t| t.recall).collect::<Vec<_>>()).0;
        Self {
            n_ok: ok.len(),
            n_failed: trials.len() - ok.len(),
            config,
            trials,
            f1_mean,
            f1_std,
            precision_mean,
            recall_mean,
        }
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        std::fs::write(path, s)?;
        Ok(())
    }

    /// One row per trial.
    pub fn write_trials_csv(&self, w: impl std::io::Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "trial",
            "seed",
            "ok",
            "f1",
            "precision",
            "recall",
            "tp",
            "fp",
            "fn",
            "tn",
            "ties",
            "n_articles",
            "n_known",
            "n_hidden",
            "r_joint",
            "error",
        ])
        .map_err(crate::inference::csv_err)?;
        for t in &self.trials {
            let c = t.confusion;
            out.write_record([
                t.trial.to_string(),
                t.seed.to_string(),
                t.ok.to_string(),
                t.f1.to_string(),
                t.precision.to_string(),
                t.recall.to_string(),
                c.tp.to_string(),
                c.fp.to_string(),
                c.fn_.to_string(),
                c.tn.to_string(),
                t.ties.to_string(),
                t.n_articles.to_string(),
                t.n_known.to_string(),
                t.n_hidden.to_string(),
                t.r_joint.map_or(String::new(), |r| r.to_string()),
                t.error.clone().unwrap_or_default(),
            ])
            .map_err(crate::inference::csv_err)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Runs `config.trials` independent trials, in parallel. Fails only when
/// every trial fails, with the first trial's error.
pub fn run_experiment(
    config: &RunConfig,
    corpus: &[ArticleRecord],
    external: &[ExternalPairs],
) -> Result<(ExperimentReport, Vec<TrialTimings>)> {
    config.validate()?;
    let results: Vec<Result<(TrialRecord, TrialTimings)>> = (0..config.trials)
        .into_par_iter()
        .map(|t| run_trial(config, corpus, external, t))
        .collect();
    if results.iter().all(|r| r.is_err()) {
        return Err(results
            .into_iter()
            .next()
            .expect("trials >= 1")
            .unwrap_err());
    }
    let mut records = Vec::with_capacity(results.len());
    let mut timings = Vec::new();
    for (t, r) in results.into_iter().enumerate() {
        match r {
            Ok((rec, tim)) => {
                records.push(rec);
                timings.push(tim);
            }
            Err(e) => records.push(failed(t, derive_seed(config.seed, t as u64), &e)),
        }
    }
    Ok((
        ExperimentReport::from_trials(config.clone(), records),
        timings,
    ))
}

//! `misinfo`: build aspects, decompose, propagate labels and score runs.
//!
//! Exit status is 0 on success, 2 for bad input, 3 for numerical failure
//! and 4 for protocol errors such as a class with no revealed labels.

mod flags;

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use misinfo_core::aspects::{load_corpus, ExternalPairs};
use misinfo_core::decompose::level1_decompose;
use misinfo_core::inference::{build_knn, classify, fabp, priors_from_labels, write_beliefs_csv};
use misinfo_core::io::{load_aspects, load_embedding, save_aspects, save_embedding};
use misinfo_core::pipeline::{
    build_aspects, cp_options, fabp_options, fuse_embeddings, mask_labels, ranks_for,
    run_experiment, Confusion,
};
use misinfo_core::seed::derive_seed;
use misinfo_core::synth::{generate, SyntheticSpec};
use misinfo_core::{ArticleRecord, Error, ErrorClass, Label, Result, RunConfig};
use serde::Serialize;

use flags::ConfigFlags;

#[derive(Debug, Parser)]
#[command(
    name = "misinfo",
    version,
    about = "Scarce-label misinformation detection from multi-aspect decompositions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    settings: ConfigFlags,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build the configured aspect models over a whole corpus.
    BuildAspects {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Level-1 decompositions plus the joint step; writes the article
    /// embedding.
    Decompose {
        /// Aspect container written by `build-aspects`.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// K-NN graph and belief propagation over an embedding.
    Infer {
        #[arg(long)]
        embedding: PathBuf,
        /// CSV `article_id,label` of revealed labels.
        #[arg(long, conflicts_with = "corpus", required_unless_present = "corpus")]
        labels: Option<PathBuf>,
        /// Corpus whose labels are masked with `label_fraction` and `seed`.
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Also write the graph as `u v weight` lines.
        #[arg(long)]
        edges: Option<PathBuf>,
    },
    /// Scores a beliefs CSV on the rows that were not labeled.
    Evaluate {
        #[arg(long)]
        beliefs: PathBuf,
        /// Labels CSV, or a `.jsonl` corpus.
        #[arg(long)]
        truth: PathBuf,
    },
    /// Repeated end-to-end trials on a corpus.
    Run {
        #[arg(long)]
        corpus: PathBuf,
        /// `key=v1,v2,...`: one experiment per value. Output files get a
        /// `.key=value` suffix.
        #[arg(long)]
        sweep: Option<String>,
    },
    /// Writes a synthetic two-class corpus.
    Generate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 600)]
        n_articles: usize,
    },
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("MISINFO_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().map_err(|_| {
        Error::parameter(format!(
            "MISINFO_THREADS: expected a thread count, got {raw:?}"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::parameter(format!("thread pool: {e}")))
}

fn load_external(config: &RunConfig, corpus: &[ArticleRecord]) -> Result<Vec<ExternalPairs>> {
    let ids: Vec<String> = corpus.iter().map(|r| r.id.clone()).collect();
    config
        .external
        .iter()
        .map(|p| ExternalPairs::load(p, &ids))
        .collect()
}

fn build_aspects_cmd(config: &RunConfig, corpus: &Path, out: &Path) -> Result<()> {
    let corpus = load_corpus(corpus)?;
    let external = load_external(config, &corpus)?;
    let models = build_aspects(config, &corpus, &external)?;
    save_aspects(out, &models)?;
    for m in &models {
        eprintln!("{}: {:?}", m.name, shape_of(m));
    }
    Ok(())
}

fn shape_of(m: &misinfo_core::AspectModel) -> Vec<usize> {
    match (m.tensor(), m.matrix()) {
        (Some(t), _) => t.dims().to_vec(),
        (_, Some(x)) => vec![x.rows(), x.cols()],
        _ => Vec::new(),
    }
}

fn decompose_cmd(config: &RunConfig, aspects: &Path, out: &Path) -> Result<()> {
    let models = load_aspects(aspects)?;
    let ids = models
        .first()
        .map(|m| m.article_ids.clone())
        .ok_or_else(|| Error::parameter("aspect file holds no aspects"))?;
    let ranks = ranks_for(config, &models);
    let embeddings = level1_decompose(
        &models,
        &ranks,
        derive_seed(config.seed, 1),
        &cp_options(config),
    )?;
    let (embedding, joint) = fuse_embeddings(config, &embeddings, derive_seed(config.seed, 2))?;
    let names: Vec<String> = models.iter().map(|m| m.name.clone()).collect();
    save_embedding(out, &embedding, &ids, &names, &ranks, joint.as_ref())?;
    match &joint {
        Some(j) => eprintln!(
            "joint rank {}, individual ranks {:?}, {} iterations, converged {}",
            j.r_joint, j.r_individual, j.iterations, j.converged
        ),
        None => eprintln!("single aspect; embedding has {} columns", embedding.cols()),
    }
    Ok(())
}

#[derive(Debug, serde::Deserialize)]
struct LabelRow {
    article_id: String,
    #[serde(default)]
    label: String,
}

fn read_labels_csv(path: &Path) -> Result<HashMap<String, Option<Label>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_input)?;
    let mut out = HashMap::new();
    for (idx, row) in rdr.deserialize::<LabelRow>().enumerate() {
        let line = idx + 2;
        let row = row.map_err(|e| Error::Ingestion {
            line,
            message: e.to_string(),
        })?;
        let label = if row.label.is_empty() {
            None
        } else {
            Some(row.label.parse().map_err(|_| Error::Ingestion {
                line,
                message: format!("unknown label {:?}", row.label),
            })?)
        };
        out.insert(row.article_id, label);
    }
    Ok(out)
}

fn csv_input(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Format(format!("{other:?}")),
    }
}

fn truth_labels(path: &Path) -> Result<HashMap<String, Option<Label>>> {
    if path
        .extension()
        .is_some_and(|e| e == "jsonl" || e == "json")
    {
        Ok(load_corpus(path)?
            .into_iter()
            .map(|r| (r.id, r.label))
            .collect())
    } else {
        read_labels_csv(path)
    }
}

fn infer_cmd(
    config: &RunConfig,
    embedding: &Path,
    labels: Option<&Path>,
    corpus: Option<&Path>,
    out: &Path,
    edges: Option<&Path>,
) -> Result<()> {
    let (x, meta) = load_embedding(embedding)?;
    let known: Vec<Option<Label>> = match (labels, corpus) {
        (Some(path), _) => {
            let map = read_labels_csv(path)?;
            let known: Vec<Option<Label>> = meta
                .article_ids
                .iter()
                .map(|id| map.get(id).copied().flatten())
                .collect();
            for class in [Label::Fake, Label::Real] {
                if !known.contains(&Some(class)) {
                    return Err(Error::Protocol(format!(
                        "{}: no {class:?} article is labeled",
                        path.display()
                    )));
                }
            }
            known
        }
        (None, Some(path)) => {
            let map: HashMap<String, Option<Label>> = load_corpus(path)?
                .into_iter()
                .map(|r| (r.id, r.label))
                .collect();
            let truth: Vec<Option<Label>> = meta
                .article_ids
                .iter()
                .map(|id| {
                    map.get(id).copied().ok_or_else(|| {
                        Error::Alignment(format!("article {id} missing from corpus"))
                    })
                })
                .collect::<Result<_>>()?;
            let split = mask_labels(&truth, config.label_fraction, config.seed)?;
            let mut known = vec![None; truth.len()];
            for i in split.known {
                known[i] = truth[i];
            }
            known
        }
        (None, None) => return Err(Error::parameter("either --labels or --corpus is required")),
    };
    let graph = build_knn(&x, config.k, config.edge_weight)?;
    if let Some(path) = edges {
        graph.write_edge_list(BufWriter::new(File::create(path)?))?;
    }
    let opts = fabp_options(config);
    let state = fabp(
        &graph,
        &priors_from_labels(&known, opts.prior_magnitude()),
        &opts,
    )?;
    let cls = classify(&state.beliefs);
    write_beliefs_csv(
        &meta.article_ids,
        &state,
        &cls.labels,
        BufWriter::new(File::create(out)?),
    )?;
    eprintln!(
        "{} articles, {} labeled, homophily {}, converged {} after {} iterations, {} ties",
        x.rows(),
        known.iter().filter(|l| l.is_some()).count(),
        state.homophily,
        state.converged,
        state.iterations,
        cls.ties
    );
    Ok(())
}

#[derive(Debug, serde::Deserialize)]
struct BeliefRow {
    article_id: String,
    predicted_label: String,
    was_labeled: bool,
}

#[derive(Debug, Serialize)]
struct Metrics {
    n: usize,
    confusion: Confusion,
    precision: f64,
    recall: f64,
    f1: f64,
}

fn evaluate_cmd(config: &RunConfig, beliefs: &Path, truth: &Path) -> Result<Metrics> {
    let truth = truth_labels(truth)?;
    let mut rdr = csv::Reader::from_path(beliefs).map_err(csv_input)?;
    let mut pred = Vec::new();
    let mut want = Vec::new();
    for (idx, row) in rdr.deserialize::<BeliefRow>().enumerate() {
        let row = row.map_err(|e| Error::Ingestion {
            line: idx + 2,
            message: e.to_string(),
        })?;
        if row.was_labeled {
            continue;
        }
        if let Some(Some(t)) = truth.get(&row.article_id) {
            pred.push(row.predicted_label.parse::<Label>()?);
            want.push(*t);
        }
    }
    if pred.is_empty() {
        return Err(Error::Protocol(
            "no unlabeled article has a known truth".into(),
        ));
    }
    let confusion = Confusion::from_labels(&pred, &want, config.positive_class)?;
    Ok(Metrics {
        n: pred.len(),
        confusion,
        precision: confusion.precision(),
        recall: confusion.recall(),
        f1: confusion.f1(),
    })
}

fn suffixed(path: &Path, tag: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}.{tag}.{}", ext.to_string_lossy()),
        None => format!("{stem}.{tag}"),
    };
    path.with_file_name(name)
}

fn run_once(config: &RunConfig, corpus: &[ArticleRecord], tag: Option<&str>) -> Result<()> {
    let external = load_external(config, corpus)?;
    let (report, timings) = run_experiment(config, corpus, &external)?;
    let place = |p: &PathBuf| tag.map_or_else(|| p.clone(), |t| suffixed(p, t));
    if let Some(p) = &config.report {
        report.write_json(place(p))?;
    }
    if let Some(p) = &config.trials_csv {
        report.write_trials_csv(BufWriter::new(File::create(place(p))?))?;
    }
    if let Some(p) = &config.timings {
        let mut w = BufWriter::new(File::create(place(p))?);
        serde_json::to_writer_pretty(&mut w, &timings)?;
        w.write_all(b"\n")?;
    }
    for t in report.trials.iter().filter(|t| !t.ok) {
        eprintln!(
            "trial {} failed: {}",
            t.trial,
            t.error.as_deref().unwrap_or("")
        );
    }
    println!(
        "{}f1 {:.4} +- {:.4} precision {:.4} recall {:.4} ({} ok, {} failed)",
        tag.map_or(String::new(), |t| format!("{t} ")),
        report.f1_mean,
        report.f1_std,
        report.precision_mean,
        report.recall_mean,
        report.n_ok,
        report.n_failed
    );
    Ok(())
}

fn run_cmd(config: &RunConfig, corpus: &Path, sweep: Option<&str>) -> Result<()> {
    let corpus = load_corpus(corpus)?;
    let Some(spec) = sweep else {
        return run_once(config, &corpus, None);
    };
    let (key, values) = spec
        .split_once('=')
        .ok_or_else(|| Error::parameter(format!("sweep {spec:?} is not key=v1,v2,...")))?;
    let key = key.trim();
    for value in values.split(',').map(str::trim).filter(|v| !v.is_empty()) {
        let mut c = config.clone();
        c.set(key, value)?;
        c.validate()?;
        run_once(&c, &corpus, Some(&format!("{key}={value}")))?;
    }
    Ok(())
}

fn generate_cmd(config: &RunConfig, out: &Path, n_articles: usize) -> Result<()> {
    let spec = SyntheticSpec {
        n_articles,
        seed: config.seed,
        ..Default::default()
    };
    let corpus = generate(&spec);
    let mut w = BufWriter::new(File::create(out)?);
    misinfo_core::aspects::write_corpus(&corpus, &mut w)?;
    w.flush()?;
    Ok(())
}

fn inputs(command: &Command) -> Vec<&Path> {
    match command {
        Command::BuildAspects { corpus, .. } | Command::Run { corpus, .. } => vec![corpus],
        Command::Decompose { input, .. } => vec![input],
        Command::Infer {
            embedding,
            labels,
            corpus,
            ..
        } => [Some(embedding), labels.as_ref(), corpus.as_ref()]
            .into_iter()
            .flatten()
            .map(PathBuf::as_path)
            .collect(),
        Command::Evaluate { beliefs, truth } => vec![beliefs, truth],
        Command::Generate { .. } => Vec::new(),
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    configure_threads()?;
    let config = cli.settings.resolve()?;
    let missing = inputs(&cli.command)
        .into_iter()
        .chain(cli.settings.config.as_deref())
        .chain(config.external.iter().map(PathBuf::as_path))
        .find(|p| !p.is_file());
    if let Some(p) = missing {
        return Err(Error::parameter(format!("{}: no such file", p.display())));
    }
    match &cli.command {
        Command::BuildAspects { corpus, out } => build_aspects_cmd(&config, corpus, out),
        Command::Decompose { input, out } => decompose_cmd(&config, input, out),
        Command::Infer {
            embedding,
            labels,
            corpus,
            out,
            edges,
        } => infer_cmd(
            &config,
            embedding,
            labels.as_deref(),
            corpus.as_deref(),
            out,
            edges.as_deref(),
        ),
        Command::Evaluate { beliefs, truth } => {
            let m = evaluate_cmd(&config, beliefs, truth)?;
            println!("{}", serde_json::to_string_pretty(&m)?);
            Ok(())
        }
        Command::Run { corpus, sweep } => run_cmd(&config, corpus, sweep.as_deref()),
        Command::Generate { out, n_articles } => generate_cmd(&config, out, *n_articles),
    }
}

fn exit_code(class: ErrorClass) -> u8 {
    match class {
        ErrorClass::Input => 2,
        ErrorClass::Numerical => 3,
        ErrorClass::Protocol => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.class()))
        }
    }
}

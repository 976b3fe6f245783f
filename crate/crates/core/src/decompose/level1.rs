use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aspects::{check_alignment, AspectData, AspectKind, AspectModel};
use crate::error::{Error, Result};
use crate::linalg::{truncated_svd, DenseMatrix};
use crate::seed::derive_seed;
use crate::tensor::{cp_als, CpOptions};

/// Per-article coordinates from one aspect, `N x r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArticleEmbedding {
    pub name: String,
    pub kind: AspectKind,
    pub matrix: DenseMatrix,
}

impl ArticleEmbedding {
    pub fn rank(&self) -> usize {
        self.matrix.cols()
    }

    pub fn rows(&self) -> usize {
        self.matrix.rows()
    }
}

/// First-level decomposition of each aspect on its own.
///
/// Tensors contribute the unit-column article factor of a CP model (the
/// component weights are dropped); matrices contribute `U diag(S)` of a
/// truncated SVD. Aspect `i` is seeded with `derive_seed(seed, i)`.
pub fn level1_decompose(
    models: &[AspectModel],
    ranks: &[usize],
    seed: u64,
    cp: &CpOptions,
) -> Result<Vec<ArticleEmbedding>> {
    if models.len() != ranks.len() {
        return Err(Error::parameter(format!(
            "{} aspects but {} ranks",
            models.len(),
            ranks.len()
        )));
    }
    check_alignment(models)?;
    models
        .par_iter()
        .zip(ranks.par_iter())
        .enumerate()
        .map(|(idx, (model, &rank))| {
            embed_one(model, rank, derive_seed(seed, idx as u64), cp)
                .map_err(|e| e.in_aspect(&model.name))
        })
        .collect()
}

fn embed_one(
    model: &AspectModel,
    rank: usize,
    seed: u64,
    cp: &CpOptions,
) -> Result<ArticleEmbedding> {
    if rank == 0 {
        return Err(Error::parameter("rank must be at least 1"));
    }
    let matrix = match &model.data {
        AspectData::Tensor(t) => {
            if t.dims()[2] != model.n_articles() {
                return Err(Error::Alignment(format!(
                    "article mode has {} slices for {} ids",
                    t.dims()[2],
                    model.n_articles()
                )));
            }
            cp_als(t, rank, seed, cp)?.c
        }
        AspectData::Matrix(m) => {
            if m.rows() != model.n_articles() {
                return Err(Error::Alignment(format!(
                    "matrix has {} rows for {} ids",
                    m.rows(),
                    model.n_articles()
                )));
            }
            if m.cols() == 0 || m.frobenius_norm() == 0.0 {
                return Err(Error::Degenerate(format!(
                    "{}x{} matrix aspect carries no signal",
                    m.rows(),
                    m.cols()
                )));
            }
            truncated_svd(m, rank)?.scores()
        }
    };
    Ok(ArticleEmbedding {
        name: model.name.clone(),
        kind: model.kind,
        matrix,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    None,
    #[default]
    UnitColumn,
    /// Population z-score; constant columns become zero.
    ZScore,
}

impl std::str::FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "none" => Ok(Normalization::None),
            "unit_column" | "unit" => Ok(Normalization::UnitColumn),
            "zscore" | "z_score" => Ok(Normalization::ZScore),
            other => Err(Error::parameter(format!("unknown normalization {other:?}"))),
        }
    }
}

pub fn normalize_columns(m: &DenseMatrix, how: Normalization) -> DenseMatrix {
    match how {
        Normalization::None => m.clone(),
        Normalization::UnitColumn => {
            let scales: Vec<f64> = m
                .column_norms()
                .iter()
                .map(|&n| if n > 0.0 { 1.0 / n } else { 0.0 })
                .collect();
            m.scale_columns(&scales)
        }
        Normalization::ZScore => {
            let n = m.rows() as f64;
            let mut out = m.clone();
            for j in 0..m.cols() {
                let col = m.col(j);
                let mean = col.iter().sum::<f64>() / n;
                let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                let sd = var.sqrt();
                let centred: Vec<f64> = col
                    .iter()
                    .map(|v| if sd > 0.0 { (v - mean) / sd } else { 0.0 })
                    .collect();
                out.set_col(j, &centred);
            }
            out
        }
    }
}

/// Horizontal concatenation in the given order after per-column
/// normalization. Also returns the block boundaries `[0, r1, r1+r2, ...]`.
pub fn concat_embeddings(
    embeddings: &[ArticleEmbedding],
    how: Normalization,
) -> Result<(DenseMatrix, Vec<usize>)> {
    let Some(first) = embeddings.first() else {
        return Err(Error::parameter("no embeddings to concatenate"));
    };
    if let Some(bad) = embeddings.iter().find(|e| e.rows() != first.rows()) {
        return Err(Error::Alignment(format!(
            "embedding {} has {} rows, {} has {}",
            bad.name,
            bad.rows(),
            first.name,
            first.rows()
        )));
    }
    let normed: Vec<DenseMatrix> = embeddings
        .iter()
        .map(|e| normalize_columns(&e.matrix, how))
        .collect();
    let refs: Vec<&DenseMatrix> = normed.iter().collect();
    let mut bounds = vec![0];
    for e in embeddings {
        bounds.push(bounds.last().unwrap() + e.rank());
    }
    Ok((DenseMatrix::hstack(&refs)?, bounds))
}

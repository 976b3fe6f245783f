//! Joint and individual variation split of concatenated article embeddings.
//!
//! Articles are rows, so the structure shared across aspects lives in a
//! common column space of dimension `N`. `basis` spans that space and every
//! individual block is kept orthogonal to it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::level1::{concat_embeddings, ArticleEmbedding, Normalization};
use super::rank::{column_blocks, select_rank, PermutationTest};
use crate::error::{Error, Result};
use crate::linalg::{truncated_svd, DenseMatrix};
use crate::seed::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JiveOptions {
    /// Joint rank; chosen by permutation test when absent.
    pub r_joint: Option<usize>,
    /// One individual rank per aspect; chosen by permutation test on the
    /// first iteration when absent.
    pub r_individual: Option<Vec<usize>>,
    pub alpha: f64,
    pub n_perm: usize,
    /// Stop when the relative change of the residual drops below this.
    pub eps: f64,
    pub max_iter: usize,
    pub normalization: Normalization,
    pub seed: u64,
}

impl Default for JiveOptions {
    fn default() -> Self {
        Self {
            r_joint: None,
            r_individual: None,
            alpha: 0.05,
            n_perm: 100,
            eps: 1e-6,
            max_iter: 100,
            normalization: Normalization::UnitColumn,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JiveResult {
    pub names: Vec<String>,
    /// Column boundaries of the aspect blocks.
    pub bounds: Vec<usize>,
    /// Joint structure, `N x sum(r_i)`.
    pub joint: DenseMatrix,
    /// Individual structure per aspect, `N x r_i`.
    pub individual: Vec<DenseMatrix>,
    /// Orthonormal basis of the joint article space, `N x r_joint`.
    pub basis: DenseMatrix,
    pub r_joint: usize,
    pub r_individual: Vec<usize>,
    /// Squared Frobenius norm of the residual after every iteration.
    pub residual_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl JiveResult {
    pub fn joint_block(&self, i: usize) -> DenseMatrix {
        self.joint.columns(self.bounds[i], self.bounds[i + 1])
    }

    /// Largest `||basis^T A_i||_F` over the aspects.
    pub fn orthogonality_defect(&self) -> f64 {
        self.individual
            .iter()
            .map(|a| {
                self.basis
                    .t_matmul(a)
                    .expect("row counts agree")
                    .frobenius_norm()
            })
            .fold(0.0, f64::max)
    }
}

/// Residuals this small relative to the input are rounding noise, and
/// their relative change says nothing about convergence.
const RESIDUAL_FLOOR: f64 = 1e-24;

/// `(I - V V^T) M`.
fn project_out(v: &DenseMatrix, m: &DenseMatrix) -> DenseMatrix {
    if v.cols() == 0 {
        return m.clone();
    }
    let coef = v.t_matmul(m).expect("row counts agree");
    m.sub(&v.matmul(&coef).expect("shapes agree"))
        .expect("shapes agree")
}

fn low_rank(m: &DenseMatrix, rank: usize) -> Result<(DenseMatrix, DenseMatrix)> {
    if rank == 0 || m.frobenius_norm() == 0.0 {
        return Ok((
            DenseMatrix::zeros(m.rows(), m.cols()),
            DenseMatrix::zeros(m.rows(), 0),
        ));
    }
    let svd = truncated_svd(m, rank)?;
    Ok((svd.reconstruct(), svd.u))
}

/// Alternates a rank-`r_joint` fit of the concatenated embeddings minus the
/// individual parts with per-aspect rank-`r_i` fits of what remains,
/// projected off the joint space.
///
/// Never fails on non-convergence; check [`JiveResult::converged`].
pub fn jive(embeddings: &[ArticleEmbedding], opts: &JiveOptions) -> Result<JiveResult> {
    if embeddings.len() < 2 {
        return Err(Error::parameter(format!(
            "joint decomposition needs at least 2 aspects, got {}",
            embeddings.len()
        )));
    }
    if !(opts.eps > 0.0) || opts.max_iter == 0 {
        return Err(Error::parameter(
            "eps must be positive and max_iter at least 1",
        ));
    }
    let (x, bounds) = concat_embeddings(embeddings, opts.normalization)?;
    let energy = x.frobenius_norm_sq();
    let n = x.rows();
    let blocks: Vec<DenseMatrix> = bounds.windows(2).map(|w| x.columns(w[0], w[1])).collect();
    let test = |salt: u64| PermutationTest {
        alpha: opts.alpha,
        n_perm: opts.n_perm,
        seed: derive_seed(opts.seed, salt),
    };

    let r_joint = match opts.r_joint {
        Some(r) => r,
        None => select_rank(&x, &bounds, &test(0))?.rank,
    };
    if r_joint > n.min(x.cols()) {
        return Err(Error::dimension(format!(
            "joint rank {r_joint} exceeds min dimension of {}x{} embedding",
            n,
            x.cols()
        )));
    }
    let mut r_individual = match &opts.r_individual {
        Some(r) if r.len() != blocks.len() => {
            return Err(Error::parameter(format!(
                "{} individual ranks for {} aspects",
                r.len(),
                blocks.len()
            )))
        }
        Some(r) => {
            for (i, (&ri, b)) in r.iter().zip(&blocks).enumerate() {
                if ri > n.min(b.cols()) {
                    return Err(Error::dimension(format!(
                        "individual rank {ri} too large for aspect {}",
                        embeddings[i].name
                    )));
                }
            }
            Some(r.clone())
        }
        None => None,
    };

    let mut individual: Vec<DenseMatrix> = blocks
        .iter()
        .map(|b| DenseMatrix::zeros(n, b.cols()))
        .collect();
    let mut joint = DenseMatrix::zeros(n, x.cols());
    let mut basis = DenseMatrix::zeros(n, 0);
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for iter in 0..opts.max_iter {
        iterations = iter + 1;
        let a_concat = DenseMatrix::hstack(&individual.iter().collect::<Vec<_>>())?;
        (joint, basis) = low_rank(&x.sub(&a_concat)?, r_joint)?;

        let residual_blocks: Vec<DenseMatrix> = blocks
            .iter()
            .enumerate()
            .map(|(i, b)| b.sub(&joint.columns(bounds[i], bounds[i + 1])))
            .collect::<Result<_>>()?;

        let ranks = match &r_individual {
            Some(r) => r.clone(),
            None => {
                let chosen = residual_blocks
                    .par_iter()
                    .enumerate()
                    .map(|(i, r)| {
                        select_rank(r, &column_blocks(r.cols()), &test(1 + i as u64))
                            .map(|s| s.rank)
                    })
                    .collect::<Result<Vec<_>>>()?;
                r_individual = Some(chosen.clone());
                chosen
            }
        };

        individual = residual_blocks
            .par_iter()
            .zip(ranks.par_iter())
            .map(|(r, &ri)| {
                let (fit, _) = low_rank(&project_out(&basis, r), ri)?;
                // The fit already lies in the complement; project again so
                // rounding cannot leak into the joint space.
                Ok(project_out(&basis, &fit))
            })
            .collect::<Result<_>>()?;

        let resid: f64 = residual_blocks
            .iter()
            .zip(&individual)
            .map(|(r, a)| r.sub(a).map(|d| d.frobenius_norm_sq()))
            .sum::<Result<f64>>()?;
        let prev = history.last().copied();
        history.push(resid);
        if let Some(prev) = prev {
            let change = (prev - resid).abs() / prev.max(f64::MIN_POSITIVE);
            if change < opts.eps || resid <= RESIDUAL_FLOOR * energy {
                converged = true;
                break;
            }
        }
    }

    Ok(JiveResult {
        names: embeddings.iter().map(|e| e.name.clone()).collect(),
        bounds,
        joint,
        individual,
        basis,
        r_joint,
        r_individual: r_individual.unwrap_or_default(),
        residual_history: history,
        iterations,
        converged,
    })
}

/// Per-article coordinates in the joint space: `U diag(S)` of the
/// rank-`r_joint` SVD of the joint structure.
pub fn joint_embedding(result: &JiveResult) -> Result<DenseMatrix> {
    if result.r_joint == 0 {
        return Err(Error::EmptyEmbedding(
            "joint rank is 0; no shared structure was found significant. Set the joint rank explicitly"
                .into(),
        ));
    }
    if result.joint.frobenius_norm() == 0.0 {
        return Ok(DenseMatrix::zeros(result.joint.rows(), result.r_joint));
    }
    Ok(truncated_svd(&result.joint, result.r_joint)?.scores())
}

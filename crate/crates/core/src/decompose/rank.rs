use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{singular_values, DenseMatrix};
use crate::seed::rng_for;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PermutationTest {
    pub alpha: f64,
    pub n_perm: usize,
    pub seed: u64,
}

impl Default for PermutationTest {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            n_perm: 100,
            seed: 0,
        }
    }
}

/// Observed and permutation-threshold spectra behind a rank decision.
#[derive(Debug, Clone, PartialEq)]
pub struct RankSelection {
    pub rank: usize,
    pub observed: Vec<f64>,
    pub thresholds: Vec<f64>,
}

/// Boundaries `[0, 1, ..., cols]`: every column its own block.
pub fn column_blocks(cols: usize) -> Vec<usize> {
    (0..=cols).collect()
}

fn check_blocks(bounds: &[usize], cols: usize) -> Result<()> {
    let ok = bounds.len() >= 2
        && bounds[0] == 0
        && *bounds.last().unwrap() == cols
        && bounds.windows(2).all(|w| w[0] < w[1]);
    if ok {
        Ok(())
    } else {
        Err(Error::parameter(format!(
            "block boundaries {bounds:?} do not partition {cols} columns"
        )))
    }
}

/// Linear interpolation between order statistics.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Permutation test for the number of significant singular values.
///
/// Each trial shuffles the rows independently inside every column block,
/// which keeps each block's own structure and destroys the association
/// between blocks. The threshold for the `j`-th singular value is its
/// `100 (1 - alpha)` percentile over the trials; the rank is the length of
/// the leading run of observed values at or above their thresholds.
pub fn select_rank(
    x: &DenseMatrix,
    bounds: &[usize],
    test: &PermutationTest,
) -> Result<RankSelection> {
    check_blocks(bounds, x.cols())?;
    if !(test.alpha > 0.0 && test.alpha < 1.0) {
        return Err(Error::parameter(format!(
            "alpha {} outside (0, 1)",
            test.alpha
        )));
    }
    if test.n_perm == 0 {
        return Err(Error::parameter("n_perm must be at least 1"));
    }
    let observed = singular_values(x);
    let (n, p) = x.shape();

    let trials: Vec<Vec<f64>> = (0..test.n_perm)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_for(test.seed, t as u64);
            let mut data = vec![0.0; n * p];
            let mut order: Vec<usize> = (0..n).collect();
            for w in bounds.windows(2) {
                order.shuffle(&mut rng);
                for (dst, &src) in order.iter().enumerate() {
                    data[dst * p + w[0]..dst * p + w[1]].copy_from_slice(&x.row(src)[w[0]..w[1]]);
                }
            }
            singular_values(&DenseMatrix::from_vec(n, p, data).expect("finite input"))
        })
        .collect();

    let thresholds: Vec<f64> = (0..observed.len())
        .map(|j| {
            let mut col: Vec<f64> = trials.iter().map(|s| s[j]).collect();
            col.sort_by(f64::total_cmp);
            percentile(&col, 1.0 - test.alpha)
        })
        .collect();
    let rank = observed
        .iter()
        .zip(&thresholds)
        .take_while(|(o, t)| o >= t)
        .count();
    Ok(RankSelection {
        rank,
        observed,
        thresholds,
    })
}

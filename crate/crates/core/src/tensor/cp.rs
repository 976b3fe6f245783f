//! CP/PARAFAC decomposition by alternating least squares.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::kernels::{mttkrp, Mode};
use super::sparse::SparseTensor3;
use crate::error::{Error, Result};
use crate::linalg::{solve_normal_rows, DenseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpOptions {
    pub max_sweeps: usize,
    /// Stop once the fit changes by less than this between sweeps.
    pub tol: f64,
    /// Added to the diagonal of every normal-equation Gram.
    pub ridge: f64,
}

impl Default for CpOptions {
    fn default() -> Self {
        Self {
            max_sweeps: 100,
            tol: 1e-6,
            ridge: 1e-12,
        }
    }
}

/// Rank-`R` CP model `sum_r lambda_r a_r ∘ b_r ∘ c_r` with unit-norm factor
/// columns. Components are ordered by decreasing `lambda`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FactorSet {
    pub a: DenseMatrix,
    pub b: DenseMatrix,
    /// Third-mode factor; for aspect tensors its rows embed articles.
    pub c: DenseMatrix,
    pub lambda: Vec<f64>,
    pub fit: f64,
    /// Fit after every sweep, in order.
    pub fit_history: Vec<f64>,
    pub sweeps: usize,
    pub converged: bool,
}

impl FactorSet {
    pub fn rank(&self) -> usize {
        self.lambda.len()
    }

    pub fn factor(&self, mode: Mode) -> &DenseMatrix {
        match mode {
            Mode::First => &self.a,
            Mode::Second => &self.b,
            Mode::Third => &self.c,
        }
    }

    /// Model value at one coordinate.
    pub fn value_at(&self, i: usize, j: usize, k: usize) -> f64 {
        let (a, b, c) = (self.a.row(i), self.b.row(j), self.c.row(k));
        (0..self.rank())
            .map(|r| self.lambda[r] * a[r] * b[r] * c[r])
            .sum()
    }

    /// Materializes the model as a dense `[i][j][k]` array. Test-sized
    /// tensors only.
    pub fn to_dense(&self) -> Vec<Vec<Vec<f64>>> {
        let (i_dim, j_dim, k_dim) = (self.a.rows(), self.b.rows(), self.c.rows());
        (0..i_dim)
            .map(|i| {
                (0..j_dim)
                    .map(|j| (0..k_dim).map(|k| self.value_at(i, j, k)).collect())
                    .collect()
            })
            .collect()
    }
}

fn random_factor(rng: &mut ChaCha8Rng, rows: usize, rank: usize) -> DenseMatrix {
    DenseMatrix::from_fn(rows, rank, |_, _| rng.random::<f64>())
}

fn hadamard(x: &DenseMatrix, y: &DenseMatrix) -> DenseMatrix {
    DenseMatrix::from_fn(x.rows(), x.cols(), |i, j| x[(i, j)] * y[(i, j)])
}

/// Scales every column to unit norm and returns the removed norms. A zero
/// column is replaced by a constant unit vector with weight 0.
fn normalize_columns(f: &mut DenseMatrix) -> Vec<f64> {
    let norms = f.column_norms();
    let rows = f.rows();
    for i in 0..rows {
        for (v, &n) in f.row_mut(i).iter_mut().zip(&norms) {
            if n > 0.0 {
                *v /= n;
            } else {
                *v = 1.0 / (rows as f64).sqrt();
            }
        }
    }
    norms
}

/// Above this many cell-rank products the residual uses the Gram identity.
const EXACT_RESIDUAL_WORK: usize = 1 << 22;

fn residual_norm_sq(x: &SparseTensor3, model: &FactorSet) -> f64 {
    let mut on_support = 0.0;
    let mut model_on_support = 0.0;
    for e in x.entries() {
        let xh = model.value_at(e.i, e.j, e.k);
        on_support += (e.value - xh) * (e.value - xh);
        model_on_support += xh * xh;
    }
    if x.is_fully_populated() {
        return on_support;
    }
    let dims = x.dims();
    let cells = dims.iter().product::<usize>();
    if cells.saturating_mul(model.rank()) <= EXACT_RESIDUAL_WORK {
        // ||Xhat||^2 - sum over the support cancels catastrophically once
        // the fit approaches 1; enumerate the empty cells instead.
        let mut off_support = 0.0;
        let mut next = x.entries().iter().peekable();
        for k in 0..dims[2] {
            for i in 0..dims[0] {
                for j in 0..dims[1] {
                    if next.peek().is_some_and(|e| (e.k, e.i, e.j) == (k, i, j)) {
                        next.next();
                        continue;
                    }
                    let xh = model.value_at(i, j, k);
                    off_support += xh * xh;
                }
            }
        }
        return on_support + off_support;
    }
    // ||Xhat||^2 = lambda^T (A^T A * B^T B * C^T C) lambda
    let g = hadamard(&hadamard(&model.a.gram(), &model.b.gram()), &model.c.gram());
    let lam = &model.lambda;
    let mut model_sq = 0.0;
    for p in 0..lam.len() {
        for q in 0..lam.len() {
            model_sq += lam[p] * g[(p, q)] * lam[q];
        }
    }
    on_support + (model_sq - model_on_support).max(0.0)
}

/// Fits a rank-`rank` CP model to `x` by alternating least squares.
///
/// Initialization is uniform on `[0, 1)` from `seed`, so equal inputs and
/// seeds give bit-identical output. Factor columns are renormalized after
/// every update with the scale carried in `lambda`.
pub fn cp_als(x: &SparseTensor3, rank: usize, seed: u64, opts: &CpOptions) -> Result<FactorSet> {
    if rank == 0 {
        return Err(Error::parameter("CP rank must be at least 1"));
    }
    if opts.max_sweeps == 0 {
        return Err(Error::parameter("max_sweeps must be at least 1"));
    }
    let norm_x = x.norm();
    if norm_x == 0.0 {
        return Err(Error::Degenerate("CP-ALS on an all-zero tensor".into()));
    }

    let dims = x.dims();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut factors = [
        random_factor(&mut rng, dims[0], rank),
        random_factor(&mut rng, dims[1], rank),
        random_factor(&mut rng, dims[2], rank),
    ];
    for f in factors.iter_mut() {
        normalize_columns(f);
    }
    let mut grams = [factors[0].gram(), factors[1].gram(), factors[2].gram()];
    let mut lambda = vec![1.0; rank];

    let mut history = Vec::with_capacity(opts.max_sweeps);
    let mut fit_old = 0.0;
    let mut converged = false;
    let mut sweeps = 0;

    for sweep in 0..opts.max_sweeps {
        sweeps = sweep + 1;
        for mode in Mode::ALL {
            let (m1, m2) = mode.others();
            let rhs = mttkrp(x, &factors[m1.index()], &factors[m2.index()], mode)?;
            let v = hadamard(&grams[m1.index()], &grams[m2.index()]);
            let mut updated = solve_normal_rows(&v, &rhs, opts.ridge);
            lambda = normalize_columns(&mut updated);
            grams[mode.index()] = updated.gram();
            factors[mode.index()] = updated;
        }

        let model = FactorSet {
            a: factors[0].clone(),
            b: factors[1].clone(),
            c: factors[2].clone(),
            lambda: lambda.clone(),
            fit: 0.0,
            fit_history: Vec::new(),
            sweeps,
            converged: false,
        };
        let fit = (1.0 - residual_norm_sq(x, &model).sqrt() / norm_x).clamp(0.0, 1.0);
        history.push(fit);
        if sweep > 0 && (fit - fit_old).abs() < opts.tol {
            converged = true;
            break;
        }
        fit_old = fit;
    }

    // order components by weight
    let mut order: Vec<usize> = (0..rank).collect();
    order.sort_by(|&p, &q| lambda[q].total_cmp(&lambda[p]).then(p.cmp(&q)));
    let permute = |f: &DenseMatrix| DenseMatrix::from_fn(f.rows(), rank, |i, j| f[(i, order[j])]);
    let [a, b, c] = &factors;
    Ok(FactorSet {
        a: permute(a),
        b: permute(b),
        c: permute(c),
        lambda: order.iter().map(|&r| lambda[r]).collect(),
        fit: *history.last().expect("at least one sweep"),
        fit_history: history,
        sweeps,
        converged,
    })
}

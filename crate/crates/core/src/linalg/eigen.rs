//! Small dense symmetric kernels: Jacobi eigensolver, Cholesky and a
//! ridge-regularized pseudo-inverse solve for normal equations.

use super::matrix::{dot, DenseMatrix};

/// Eigen-decomposition of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    /// Eigenvalues, nonincreasing.
    pub values: Vec<f64>,
    /// Eigenvectors stored as columns, matching `values`.
    pub vectors: DenseMatrix,
}

/// Cyclic Jacobi rotations until the off-diagonal mass is negligible.
///
/// Only the upper triangle of `a` is read. Intended for the small (tens of
/// rows) Gram and normal-equation matrices this crate produces.
pub fn symmetric_eigen(a: &DenseMatrix) -> SymmetricEigen {
    let n = a.rows();
    assert_eq!(n, a.cols(), "symmetric_eigen needs a square matrix");
    let mut m = DenseMatrix::from_fn(n, n, |i, j| if i <= j { a[(i, j)] } else { a[(j, i)] });
    let mut v = DenseMatrix::identity(n);

    let total: f64 = m.frobenius_norm_sq();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[(i, j)] * m[(i, j)];
            }
        }
        if off <= f64::EPSILON * f64::EPSILON * total || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                m[(p, p)] = app - t * apq;
                m[(q, q)] = aqq + t * apq;
                m[(p, q)] = 0.0;
                m[(q, p)] = 0.0;
                for k in 0..n {
                    if k != p && k != q {
                        let akp = m[(k, p)];
                        let akq = m[(k, q)];
                        let nkp = c * akp - s * akq;
                        let nkq = s * akp + c * akq;
                        m[(k, p)] = nkp;
                        m[(p, k)] = nkp;
                        m[(k, q)] = nkq;
                        m[(q, k)] = nkq;
                    }
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| m[(y, y)].total_cmp(&m[(x, x)]));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let vectors = DenseMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    SymmetricEigen { values, vectors }
}

/// In-place Cholesky factor (lower triangle). Returns `None` if the matrix
/// is not numerically positive definite.
pub fn cholesky(a: &DenseMatrix) -> Option<DenseMatrix> {
    let n = a.rows();
    let mut l = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d <= 0.0 || !d.is_finite() {
            return None;
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Some(l)
}

fn cholesky_solve_in_place(l: &DenseMatrix, b: &mut [f64]) {
    let n = l.rows();
    for i in 0..n {
        let s = b[i] - dot(&l.row(i)[..i], &b[..i]);
        b[i] = s / l[(i, i)];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s -= l[(k, i)] * b[k];
        }
        b[i] = s / l[(i, i)];
    }
}

/// Solves `X * (G + ridge*I) = M` for `X`, with `G` symmetric positive
/// semidefinite. This is the least-squares update of one CP factor.
///
/// Cholesky is tried first; if the regularized Gram is still not positive
/// definite the solve falls back to an eigenvalue pseudo-inverse that
/// drops directions below a relative cutoff.
pub fn solve_normal_rows(gram: &DenseMatrix, rhs: &DenseMatrix, ridge: f64) -> DenseMatrix {
    let r = gram.rows();
    debug_assert_eq!(rhs.cols(), r);
    let mut reg = gram.clone();
    for i in 0..r {
        reg[(i, i)] += ridge;
    }
    let mut out = rhs.clone();
    if let Some(l) = cholesky(&reg) {
        for i in 0..out.rows() {
            cholesky_solve_in_place(&l, out.row_mut(i));
        }
        if out.all_finite() {
            return out;
        }
    }

    let eig = symmetric_eigen(&reg);
    let top = eig.values.first().copied().unwrap_or(0.0).abs();
    let cutoff = top * (r as f64) * f64::EPSILON;
    let inv: Vec<f64> = eig
        .values
        .iter()
        .map(|&l| if l > cutoff { 1.0 / l } else { 0.0 })
        .collect();
    // pinv = V diag(inv) V^T
    let pinv = DenseMatrix::from_fn(r, r, |i, j| {
        (0..r)
            .map(|k| eig.vectors[(i, k)] * inv[k] * eig.vectors[(j, k)])
            .sum()
    });
    rhs.matmul(&pinv).expect("shapes checked")
}

/// Modified Gram-Schmidt with one re-orthogonalization pass. Columns that
/// collapse numerically are replaced by a deterministic completion so the
/// result always has orthonormal columns.
pub fn orthonormalize_columns(m: &DenseMatrix) -> DenseMatrix {
    let (rows, cols) = m.shape();
    assert!(
        cols <= rows,
        "cannot orthonormalize {cols} columns in R^{rows}"
    );
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(cols);
    let mut next_unit = 0usize;
    for j in 0..cols {
        let mut v = m.col(j);
        let scale = super::matrix::norm2(&v);
        orthogonalize_against(&mut v, &basis);
        let mut n = super::matrix::norm2(&v);
        if !(n > 1e-10 * scale) {
            // cols <= rows, so some canonical unit vector survives
            loop {
                v = vec![0.0; rows];
                v[next_unit] = 1.0;
                next_unit += 1;
                orthogonalize_against(&mut v, &basis);
                n = super::matrix::norm2(&v);
                if n > 1e-8 {
                    break;
                }
            }
        }
        v.iter_mut().for_each(|x| *x /= n);
        basis.push(v);
    }
    DenseMatrix::from_columns(rows, &basis)
}

/// Two passes of classical Gram-Schmidt against an orthonormal set.
pub(crate) fn orthogonalize_against(v: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for b in basis {
            let c = dot(v, b);
            super::matrix::axpy(-c, b, v);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobi_diagonalizes() {
        let a = DenseMatrix::from_rows(&[[4.0, 1.0, 0.5], [1.0, 3.0, 0.2], [0.5, 0.2, 1.0]]);
        let e = symmetric_eigen(&a);
        assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
        // A v = lambda v
        for k in 0..3 {
            let v = e.vectors.col(k);
            let av = a.mul_vec(&v);
            for i in 0..3 {
                assert!((av[i] - e.values[k] * v[i]).abs() < 1e-12);
            }
        }
        let vtv = e.vectors.gram();
        assert!(vtv.max_abs_diff(&DenseMatrix::identity(3)) < 1e-12);
    }

    #[test]
    fn normal_solve_handles_singular_gram() {
        // Rank-1 Gram: Cholesky on the tiny ridge still succeeds or the
        // pseudo-inverse fallback kicks in; either way the result is finite.
        let g = DenseMatrix::from_rows(&[[1.0, 1.0], [1.0, 1.0]]);
        let m = DenseMatrix::from_rows(&[[2.0, 2.0]]);
        let x = solve_normal_rows(&g, &m, 1e-12);
        assert!(x.all_finite());
        let back = x.matmul(&g).unwrap();
        assert!(back.max_abs_diff(&m) < 1e-6);
    }

    #[test]
    fn orthonormalize_completes_degenerate_columns() {
        let m = DenseMatrix::from_rows(&[[1.0, 2.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]]);
        let q = orthonormalize_columns(&m);
        assert!(q.gram().max_abs_diff(&DenseMatrix::identity(3)) < 1e-12);
    }
}

//! Truncated singular value decomposition.
//!
//! Two routes: a dense one (Householder QR followed by one-sided Jacobi on
//! the triangular factor) for operands whose short side is at most
//! [`DENSE_LIMIT`], and Golub-Kahan-Lanczos bidiagonalization with full
//! reorthogonalization for larger ones.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::eigen::{orthogonalize_against, symmetric_eigen};
use super::matrix::{dot, norm2, DenseMatrix};
use crate::error::{Error, Result};

/// Short-side size up to which the dense route is used.
pub const DENSE_LIMIT: usize = 64;

const LANCZOS_SEED: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SvdResult {
    /// Left singular vectors, `m x r`.
    pub u: DenseMatrix,
    /// Singular values, nonincreasing.
    pub s: Vec<f64>,
    /// Right singular vectors, `n x r`.
    pub v: DenseMatrix,
}

impl SvdResult {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    /// `U diag(S) V^T`.
    pub fn reconstruct(&self) -> DenseMatrix {
        let us = self.u.scale_columns(&self.s);
        us.matmul(&self.v.transpose()).expect("factor shapes agree")
    }

    /// `U diag(S)`: row coordinates in the right singular basis.
    pub fn scores(&self) -> DenseMatrix {
        self.u.scale_columns(&self.s)
    }
}

/// Best rank-`rank` approximation of `x`.
///
/// Singular vectors are sign-normalized so that the largest-magnitude
/// entry of every right singular vector is positive.
pub fn truncated_svd(x: &DenseMatrix, rank: usize) -> Result<SvdResult> {
    let (m, n) = x.shape();
    let short = m.min(n);
    if rank == 0 {
        return Err(Error::parameter("truncated SVD rank must be at least 1"));
    }
    if rank > short {
        return Err(Error::dimension(format!(
            "rank {rank} exceeds min dimension of {m}x{n} matrix"
        )));
    }
    let mut out = if short <= DENSE_LIMIT {
        dense_svd(x, rank)
    } else {
        lanczos_svd(x, rank)
    };
    fix_signs(&mut out);
    Ok(out)
}

/// All `min(m, n)` singular values, nonincreasing, from the eigenvalues of
/// the smaller Gram matrix. Cheaper than [`truncated_svd`] and accurate
/// enough for significance tests; not used where vectors are needed.
pub fn singular_values(x: &DenseMatrix) -> Vec<f64> {
    let g = if x.rows() >= x.cols() {
        x.gram()
    } else {
        x.transpose().gram()
    };
    symmetric_eigen(&g)
        .values
        .into_iter()
        .map(|l| l.max(0.0).sqrt())
        .collect()
}

fn fix_signs(svd: &mut SvdResult) {
    for j in 0..svd.s.len() {
        let mut best = 0.0f64;
        let mut sign = 1.0;
        for i in 0..svd.v.rows() {
            let val = svd.v[(i, j)];
            if val.abs() > best {
                best = val.abs();
                sign = val.signum();
            }
        }
        if sign < 0.0 {
            for i in 0..svd.v.rows() {
                svd.v[(i, j)] = -svd.v[(i, j)];
            }
            for i in 0..svd.u.rows() {
                svd.u[(i, j)] = -svd.u[(i, j)];
            }
        }
    }
}

fn columns_of(x: &DenseMatrix) -> Vec<Vec<f64>> {
    (0..x.cols()).map(|j| x.col(j)).collect()
}

fn dense_svd(x: &DenseMatrix, rank: usize) -> SvdResult {
    if x.rows() < x.cols() {
        let t = dense_svd(&x.transpose(), rank);
        return SvdResult {
            u: t.v,
            s: t.s,
            v: t.u,
        };
    }
    let (m, n) = x.shape();
    let (q, r) = thin_qr(x);
    let (ur, s, v) = one_sided_jacobi(columns_of(&r), n);

    // U = Q * U_r, truncated
    let mut u = DenseMatrix::zeros(m, rank);
    for j in 0..rank {
        for (k, &c) in ur[j].iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            for i in 0..m {
                u[(i, j)] += q[k][i] * c;
            }
        }
    }
    let v = DenseMatrix::from_fn(n, rank, |i, j| v[j][i]);
    SvdResult {
        u,
        s: s[..rank].to_vec(),
        v,
    }
}

/// Householder thin QR of a tall matrix: returns the `n` columns of `Q` and
/// the `n x n` upper-triangular `R`. Rank-deficient input still yields an
/// orthonormal `Q`.
fn thin_qr(x: &DenseMatrix) -> (Vec<Vec<f64>>, DenseMatrix) {
    let (m, n) = x.shape();
    let mut a = columns_of(x);
    let mut reflectors: Vec<Option<Vec<f64>>> = Vec::with_capacity(n);
    for j in 0..n {
        let norm_x = norm2(&a[j][j..]);
        if norm_x == 0.0 {
            reflectors.push(None);
            continue;
        }
        let alpha = if a[j][j] > 0.0 { -norm_x } else { norm_x };
        let mut v = a[j][j..].to_vec();
        v[0] -= alpha;
        let vn = norm2(&v);
        if vn == 0.0 {
            reflectors.push(None);
            continue;
        }
        v.iter_mut().for_each(|e| *e /= vn);
        for col in a.iter_mut().skip(j) {
            let d = 2.0 * dot(&v, &col[j..]);
            for (c, vi) in col[j..].iter_mut().zip(&v) {
                *c -= d * vi;
            }
        }
        reflectors.push(Some(v));
    }
    let r = DenseMatrix::from_fn(n, n, |i, j| if i <= j { a[j][i] } else { 0.0 });

    let mut q: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; m];
            e[j] = 1.0;
            e
        })
        .collect();
    for (j, refl) in reflectors.iter().enumerate().rev() {
        if let Some(v) = refl {
            for col in q.iter_mut() {
                let d = 2.0 * dot(v, &col[j..]);
                for (c, vi) in col[j..].iter_mut().zip(v) {
                    *c -= d * vi;
                }
            }
        }
    }
    (q, r)
}

/// One-sided (Hestenes) Jacobi on the columns of a matrix with `m >= n`.
/// Returns left vectors as columns (length `m`), singular values sorted
/// nonincreasing and right vectors as columns (length `n`).
fn one_sided_jacobi(mut a: Vec<Vec<f64>>, m: usize) -> (Vec<Vec<f64>>, Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();
    let tol = (m.max(1) as f64) * f64::EPSILON;

    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = dot(&a[p], &a[p]);
                let beta = dot(&a[q], &a[q]);
                let gamma = dot(&a[p], &a[q]);
                if gamma == 0.0 || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut a, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut sv: Vec<(f64, usize)> = a.iter().enumerate().map(|(j, c)| (norm2(c), j)).collect();
    sv.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
    let smax = sv.first().map_or(0.0, |p| p.0);

    let mut left: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut needs_completion = Vec::new();
    for (slot, &(s, j)) in sv.iter().enumerate() {
        if s.is_normal() && s > smax * 1e-150 {
            left.push(a[j].iter().map(|x| x / s).collect());
        } else {
            left.push(vec![0.0; m]);
            needs_completion.push(slot);
        }
    }
    complete_basis(&mut left, &needs_completion, m);

    let s = sv.iter().map(|p| p.0).collect();
    let right = sv.iter().map(|&(_, j)| v[j].clone()).collect();
    (left, s, right)
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (lo, hi) = cols.split_at_mut(q);
    let cp = &mut lo[p];
    let cq = &mut hi[0];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let xp = *x;
        let yq = *y;
        *x = c * xp - s * yq;
        *y = s * xp + c * yq;
    }
}

/// Fills the listed slots with unit vectors orthogonal to every other
/// column, keeping the whole set orthonormal.
fn complete_basis(cols: &mut [Vec<f64>], slots: &[usize], m: usize) {
    if slots.is_empty() {
        return;
    }
    let mut basis: Vec<Vec<f64>> = cols
        .iter()
        .enumerate()
        .filter(|(i, _)| !slots.contains(i))
        .map(|(_, c)| c.clone())
        .collect();
    let mut next = 0usize;
    for &slot in slots {
        loop {
            let mut e = vec![0.0; m];
            e[next % m] = 1.0;
            next += 1;
            orthogonalize_against(&mut e, &basis);
            let nrm = norm2(&e);
            if nrm > 1e-8 {
                e.iter_mut().for_each(|x| *x /= nrm);
                cols[slot] = e.clone();
                basis.push(e);
                break;
            }
        }
    }
}

fn random_unit_orthogonal(
    rng: &mut ChaCha8Rng,
    dim: usize,
    basis: &[Vec<f64>],
) -> Option<Vec<f64>> {
    if basis.len() >= dim {
        return None;
    }
    for _ in 0..8 {
        let mut w: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() - 0.5).collect();
        orthogonalize_against(&mut w, basis);
        let nrm = norm2(&w);
        if nrm > 1e-8 {
            w.iter_mut().for_each(|x| *x /= nrm);
            return Some(w);
        }
    }
    None
}

/// Golub-Kahan-Lanczos with full reorthogonalization. The Krylov space is
/// extended until the top `rank` Ritz triples have residual below a small
/// multiple of the leading singular value, or the space is exhausted (in
/// which case the result is exact up to rounding).
fn lanczos_svd(x: &DenseMatrix, rank: usize) -> SvdResult {
    let (m, n) = x.shape();
    let kmax = m.min(n);
    let anorm = x.frobenius_norm();
    let mut rng = ChaCha8Rng::seed_from_u64(LANCZOS_SEED);

    if anorm == 0.0 {
        let mut u = vec![vec![0.0; m]; rank];
        let mut v = vec![vec![0.0; n]; rank];
        let slots: Vec<usize> = (0..rank).collect();
        complete_basis(&mut u, &slots, m);
        complete_basis(&mut v, &slots, n);
        return SvdResult {
            u: DenseMatrix::from_columns(m, &u),
            s: vec![0.0; rank],
            v: DenseMatrix::from_columns(n, &v),
        };
    }

    let breakdown = anorm * 1e-14;
    let mut us: Vec<Vec<f64>> = Vec::new();
    let mut vs: Vec<Vec<f64>> = vec![random_unit_orthogonal(&mut rng, n, &[]).expect("n >= 1")];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();

    let mut result = None;
    for j in 0..kmax {
        let mut u = x.mul_vec(&vs[j]);
        if j > 0 {
            let b = betas[j - 1];
            for (ui, pi) in u.iter_mut().zip(&us[j - 1]) {
                *ui -= b * pi;
            }
        }
        orthogonalize_against(&mut u, &us);
        let mut alpha = norm2(&u);
        if alpha <= breakdown {
            alpha = 0.0;
            u = random_unit_orthogonal(&mut rng, m, &us).unwrap_or_else(|| vec![0.0; m]);
        } else {
            u.iter_mut().for_each(|e| *e /= alpha);
        }
        us.push(u);
        alphas.push(alpha);

        let mut w = x.t_mul_vec(&us[j]);
        for (wi, vi) in w.iter_mut().zip(&vs[j]) {
            *wi -= alpha * vi;
        }
        orthogonalize_against(&mut w, &vs);
        let mut beta = norm2(&w);
        let k = j + 1;
        let exhausted = k == kmax;

        if k >= rank && ((k - rank).is_multiple_of(4) || exhausted || beta <= breakdown) {
            let b = bidiagonal(&alphas, &betas);
            let (p, s, q) = one_sided_jacobi(columns_of(&b), k);
            let tol = 1e-12 * s[0].max(f64::MIN_POSITIVE);
            let resid_beta = if beta <= breakdown { 0.0 } else { beta };
            let converged = (0..rank).all(|i| (resid_beta * p[i][k - 1]).abs() <= tol);
            if converged || exhausted {
                result = Some(ritz_vectors(&us, &vs, &p, &s, &q, rank, m, n));
                break;
            }
        }

        if beta <= breakdown {
            beta = 0.0;
            match random_unit_orthogonal(&mut rng, n, &vs) {
                Some(v) => w = v,
                None => {
                    let b = bidiagonal(&alphas, &betas);
                    let (p, s, q) = one_sided_jacobi(columns_of(&b), k);
                    result = Some(ritz_vectors(&us, &vs, &p, &s, &q, rank, m, n));
                    break;
                }
            }
        } else {
            w.iter_mut().for_each(|e| *e /= beta);
        }
        betas.push(beta);
        vs.push(w);
    }
    result.expect("Lanczos loop always terminates with a result")
}

fn bidiagonal(alphas: &[f64], betas: &[f64]) -> DenseMatrix {
    let k = alphas.len();
    let mut b = DenseMatrix::zeros(k, k);
    for i in 0..k {
        b[(i, i)] = alphas[i];
        if i + 1 < k {
            b[(i, i + 1)] = betas[i];
        }
    }
    b
}

#[allow(clippy::too_many_arguments)]
fn ritz_vectors(
    us: &[Vec<f64>],
    vs: &[Vec<f64>],
    p: &[Vec<f64>],
    s: &[f64],
    q: &[Vec<f64>],
    rank: usize,
    m: usize,
    n: usize,
) -> SvdResult {
    let k = p.len();
    let mut u = DenseMatrix::zeros(m, rank);
    let mut v = DenseMatrix::zeros(n, rank);
    for c in 0..rank {
        for t in 0..k {
            let pc = p[c][t];
            if pc != 0.0 {
                for i in 0..m {
                    u[(i, c)] += us[t][i] * pc;
                }
            }
            let qc = q[c][t];
            if qc != 0.0 {
                for i in 0..n {
                    v[(i, c)] += vs[t][i] * qc;
                }
            }
        }
    }
    SvdResult {
        u,
        s: s[..rank].to_vec(),
        v,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_orthonormal(m: &DenseMatrix, tol: f64) {
        let g = m.gram();
        assert!(
            g.max_abs_diff(&DenseMatrix::identity(m.cols())) <= tol,
            "orthogonality defect {}",
            g.max_abs_diff(&DenseMatrix::identity(m.cols()))
        );
    }

    #[test]
    fn diagonal_matrix_rank_two() {
        let x = DenseMatrix::from_diag(&[3.0, 2.0, 1.0]);
        let svd = truncated_svd(&x, 2).unwrap();
        assert!((svd.s[0] - 3.0).abs() < 1e-14 && (svd.s[1] - 2.0).abs() < 1e-14);
        let err = x.sub(&svd.reconstruct()).unwrap().frobenius_norm_sq();
        assert!((err - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identity_full_rank() {
        let x = DenseMatrix::identity(2);
        let svd = truncated_svd(&x, 2).unwrap();
        assert!((svd.s[0] - 1.0).abs() < 1e-15 && (svd.s[1] - 1.0).abs() < 1e-15);
        assert!(x.sub(&svd.reconstruct()).unwrap().frobenius_norm() < 1e-14);
    }

    #[test]
    fn rank_bounds() {
        let x = DenseMatrix::zeros(3, 2);
        assert!(matches!(truncated_svd(&x, 3), Err(Error::Dimension(_))));
        assert!(truncated_svd(&x, 0).is_err());
    }

    #[test]
    fn zero_matrix_still_orthonormal() {
        let x = DenseMatrix::zeros(5, 3);
        let svd = truncated_svd(&x, 3).unwrap();
        assert!(svd.s.iter().all(|&s| s == 0.0));
        check_orthonormal(&svd.u, 1e-12);
        check_orthonormal(&svd.v, 1e-12);
    }

    #[test]
    fn lanczos_route_matches_dense_route() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = DenseMatrix::from_fn(150, 90, |_, _| rng.random::<f64>() - 0.5);
        let lz = truncated_svd(&x, 6).unwrap();
        let dn = dense_svd(&x, 6);
        for i in 0..6 {
            assert!((lz.s[i] - dn.s[i]).abs() <= 1e-9 * dn.s[0], "{i}");
        }
        check_orthonormal(&lz.u, 1e-10);
        check_orthonormal(&lz.v, 1e-10);
    }

    #[test]
    fn lanczos_handles_exact_low_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = DenseMatrix::from_fn(120, 2, |_, _| rng.random::<f64>());
        let b = DenseMatrix::from_fn(2, 80, |_, _| rng.random::<f64>());
        let x = a.matmul(&b).unwrap();
        let svd = truncated_svd(&x, 5).unwrap();
        assert!(svd.s[2] < 1e-10 * svd.s[0]);
        check_orthonormal(&svd.u, 1e-10);
        check_orthonormal(&svd.v, 1e-10);
        let err = x.sub(&svd.reconstruct()).unwrap().frobenius_norm();
        assert!(err < 1e-10 * x.frobenius_norm());
    }

    #[test]
    fn wide_input_goes_through_transpose() {
        let x = DenseMatrix::from_rows(&[[1.0, 0.0, 0.0, 2.0], [0.0, 3.0, 0.0, 0.0]]);
        let svd = truncated_svd(&x, 2).unwrap();
        assert_eq!(svd.u.shape(), (2, 2));
        assert_eq!(svd.v.shape(), (4, 2));
        assert!(x.sub(&svd.reconstruct()).unwrap().frobenius_norm() < 1e-14);
    }

    #[test]
    fn signs_are_canonical() {
        let x = DenseMatrix::from_rows(&[[-2.0, 0.1], [0.3, -1.0], [0.0, 0.5]]);
        let svd = truncated_svd(&x, 2).unwrap();
        for j in 0..2 {
            let col = svd.v.col(j);
            let top = col
                .iter()
                .copied()
                .fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
            assert!(top > 0.0);
        }
    }
}

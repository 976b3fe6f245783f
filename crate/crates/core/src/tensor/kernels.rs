//! Products that drive each ALS update.

use super::sparse::SparseTensor3;
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

/// Tensor mode, in the usual 1-based naming.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    First,
    Second,
    Third,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::First, Mode::Second, Mode::Third];

    pub fn index(self) -> usize {
        match self {
            Mode::First => 0,
            Mode::Second => 1,
            Mode::Third => 2,
        }
    }

    /// The two remaining modes in increasing order.
    pub fn others(self) -> (Mode, Mode) {
        match self {
            Mode::First => (Mode::Second, Mode::Third),
            Mode::Second => (Mode::First, Mode::Third),
            Mode::Third => (Mode::First, Mode::Second),
        }
    }
}

/// Column-wise Kronecker product. Row `i * J + j` of the result holds
/// `a[i, :] * b[j, :]` elementwise.
pub fn khatri_rao(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.cols() != b.cols() {
        return Err(Error::dimension(format!(
            "Khatri-Rao operands have {} and {} columns",
            a.cols(),
            b.cols()
        )));
    }
    let r = a.cols();
    let mut out = DenseMatrix::zeros(a.rows() * b.rows(), r);
    for i in 0..a.rows() {
        let ar = a.row(i);
        for j in 0..b.rows() {
            let br = b.row(j);
            let o = out.row_mut(i * b.rows() + j);
            for c in 0..r {
                o[c] = ar[c] * br[c];
            }
        }
    }
    Ok(out)
}

/// Matricized tensor times Khatri-Rao product, `X_(mode) (F2 ⊙ F1)`, where
/// `f1` and `f2` are the factors of the two non-target modes in increasing
/// mode order. Works directly on the nonzeros.
pub fn mttkrp(
    x: &SparseTensor3,
    f1: &DenseMatrix,
    f2: &DenseMatrix,
    mode: Mode,
) -> Result<DenseMatrix> {
    let dims = x.dims();
    let (m1, m2) = mode.others();
    if f1.rows() != dims[m1.index()] || f2.rows() != dims[m2.index()] {
        return Err(Error::dimension(format!(
            "factors {}x{} and {}x{} do not match modes {:?} of tensor {dims:?}",
            f1.rows(),
            f1.cols(),
            f2.rows(),
            f2.cols(),
            (m1.index() + 1, m2.index() + 1)
        )));
    }
    if f1.cols() != f2.cols() {
        return Err(Error::dimension(format!(
            "factor column counts differ: {} vs {}",
            f1.cols(),
            f2.cols()
        )));
    }
    let r = f1.cols();
    let mut out = DenseMatrix::zeros(dims[mode.index()], r);
    for e in x.entries() {
        let idx = [e.i, e.j, e.k];
        let a = f1.row(idx[m1.index()]);
        let b = f2.row(idx[m2.index()]);
        let o = out.row_mut(idx[mode.index()]);
        for c in 0..r {
            o[c] += e.value * a[c] * b[c];
        }
    }
    Ok(out)
}

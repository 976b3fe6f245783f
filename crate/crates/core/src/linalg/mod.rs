//! Dense linear algebra used by the decompositions.

mod eigen;
mod matrix;
mod svd;

pub use eigen::{
    cholesky, orthonormalize_columns, solve_normal_rows, symmetric_eigen, SymmetricEigen,
};
pub use matrix::{axpy, dot, norm2, DenseMatrix};
pub use svd::{singular_values, truncated_svd, SvdResult, DENSE_LIMIT};

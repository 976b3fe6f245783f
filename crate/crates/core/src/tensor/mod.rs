//! Sparse three-mode tensors and their CP factorization.

mod cp;
mod kernels;
mod sparse;

pub use cp::{cp_als, CpOptions, FactorSet};
pub use kernels::{khatri_rao, mttkrp, Mode};
pub use sparse::{Entry, SparseTensor3};

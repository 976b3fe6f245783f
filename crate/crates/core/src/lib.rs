//! Multi-aspect tensor decomposition and label propagation for detecting
//! misinformative articles from a small share of labels.

pub mod aspects;
pub mod decompose;
pub mod error;
pub mod inference;
pub mod io;
pub mod linalg;
pub mod pipeline;
pub mod seed;
pub mod synth;
pub mod tensor;

pub use aspects::{ArticleRecord, AspectKind, AspectModel, Label};
pub use decompose::{ArticleEmbedding, JiveResult};
pub use error::{Error, ErrorClass, Result};
pub use inference::{BeliefState, KnnGraph};
pub use linalg::{truncated_svd, DenseMatrix, SvdResult};
pub use pipeline::RunConfig;
pub use tensor::{cp_als, khatri_rao, mttkrp, CpOptions, FactorSet, Mode, SparseTensor3};

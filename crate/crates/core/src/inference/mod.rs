//! Label propagation over a similarity graph of articles.

mod fabp;
mod graph;

pub(crate) use fabp::csv_err;
pub use fabp::{
    classify, fabp, homophily_bound, priors_from_labels, write_beliefs_csv, BeliefState,
    Classification, FabpOptions,
};
pub use graph::{build_knn, knn_indices, Edge, EdgeWeight, KnnGraph};

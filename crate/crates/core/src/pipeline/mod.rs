//! End-to-end experiment: sampling, label masking, the two-level
//! decomposition, propagation and scoring.

mod config;
mod protocol;
mod run;

pub use config::RunConfig;
pub use protocol::{f1_score, mask_labels, sample_corpus, Confusion, LabelSplit};
pub use run::{
    build_aspects, cp_options, fabp_options, fuse_embeddings, jive_options, mean_std, propagate,
    ranks_for, run_experiment, run_trial, ExperimentReport, TrialRecord, TrialTimings,
};

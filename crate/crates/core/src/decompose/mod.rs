//! Two-level decomposition: each aspect on its own, then a joint and
//! individual split of the stacked article embeddings.

mod jive;
mod level1;
mod rank;

pub use jive::{jive, joint_embedding, JiveOptions, JiveResult};
pub use level1::{
    concat_embeddings, level1_decompose, normalize_columns, ArticleEmbedding, Normalization,
};
pub use rank::{column_blocks, select_rank, PermutationTest, RankSelection};

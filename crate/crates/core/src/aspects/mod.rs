//! Aspect models built from article records: term co-occurrence and
//! hashtag-term tensors, the HTML tag count matrix, and externally supplied
//! interaction matrices.

mod build;
mod record;
mod text;

pub use build::{
    build_hta, build_tags, build_tta, check_alignment, load_external_matrix, read_external_matrix,
    AspectData, AspectKind, AspectModel, ExternalPairs, TextOptions,
};
pub use record::{load_corpus, read_corpus, write_corpus, ArticleRecord, Label};
pub use text::{
    build_hashtag_vocabulary, build_vocabulary, build_vocabulary_with, normalize_hashtag, tokenize,
    tokenize_filtered, Vocabulary, STOPWORDS,
};

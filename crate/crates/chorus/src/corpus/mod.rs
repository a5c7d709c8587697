//! Dataset ingestion, vocabulary, batching, and synthetic corpus generation.

mod batch;
mod dataset;
mod synthetic;
mod vocab;

pub use batch::{batch_iter, Batch};
pub use dataset::{
    comment_bow, encode_article, load_stop_words, read_jsonl, write_jsonl, Article,
    CommentBoW, Dataset, RawArticle,
};
pub use synthetic::{generate_synthetic, SyntheticSpec};
pub use vocab::{build_vocab, Vocabulary, BOS, EOS, N_SPECIALS, PAD, UNK};

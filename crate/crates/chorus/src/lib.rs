//! Reader-aware diverse news comment generation.
//!
//! The model is an attention seq2seq backbone over article bodies, extended
//! with two components that make its comments diverse and on-point:
//!
//! * a **variational clustering module** ([`topic`]) that learns K latent
//!   "reader topics" from comment bag-of-words vectors and conditions the
//!   decoder on a topic vector, and
//! * a **saliency gate** ([`saliency`]) that scores each body token against
//!   the title and masks attention onto the selected tokens, trained through
//!   a Gumbel-Softmax relaxation with an L1 sparsity penalty.
//!
//! Decoding picks a topic from the article-side selector (or the top-n
//! topics for diverse generation) and beam-searches a comment per topic.
//! [`metrics`] implements the usual comment-quality and diversity measures
//! (ROUGE-L, CIDEr, Distinct-n, and per-article M-Distinct-n).
//!
//! Everything runs on a small `f64` reverse-mode autodiff tape ([`graph`]);
//! there is no GPU path, and the intended scale is synthetic or small
//! user-supplied corpora. Start with the `examples/` directory: each example
//! exercises one capability end to end.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod error;
pub mod graph;
pub mod infer;
pub mod metrics;
pub mod model;
pub mod saliency;
pub mod topic;
pub mod train;

pub mod backbone;
pub mod fusion;

pub use config::Config;
pub use error::{Error, Result};

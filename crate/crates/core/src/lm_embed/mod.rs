//! Word representations for tweets.
//!
//! A tweet becomes the mean of its static word vectors concatenated with the mean
//! of its contextual vectors. Contextual vectors come from a small bidirectional
//! LSTM language model trained on the working corpus: a forward stack reads
//! `<bos> x1 .. xn` and predicts each next token, a backward stack reads
//! `<eos> xn .. x1` and predicts each previous one, and both share the input
//! embedding and output softmax. The training objective is the sum of the two
//! directional negative log-likelihoods.

mod bilm;
mod embedder;
mod mixing;
mod static_table;
mod vocab;

use std::path::PathBuf;

use thiserror::Error;

use crate::numnet::NumError;

pub use bilm::{lm_nll, lm_train, perplexity, BiLm, LmConfig, NllParts, TrainLog};
pub use embedder::{embed_corpus, TweetEmbedder};
pub use mixing::{fit_mixing, Mixing, MixingMode};
pub use static_table::{load_static_embeddings, write_glove, OovPolicy, StaticEmbeddingTable};
pub use vocab::{build_vocab, Vocab, BOS, EOS, PAD, UNK};

#[derive(Debug, Error)]
pub enum LmError {
    #[error("corpus has no tokens")]
    EmptyCorpus,
    #[error("empty token sequence")]
    EmptySequence,
    #[error("{path}: line {line}: expected {expected} values, found {found}")]
    InconsistentDimension {
        path: PathBuf,
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("{path}: {reason}")]
    UnreadableFile { path: PathBuf, reason: String },
    #[error("invalid language-model configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Numerical(#[from] NumError),
}

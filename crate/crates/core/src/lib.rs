//! Profile-routed social bot detection.
//!
//! The pipeline runs from raw tweets to a stacked ensemble:
//!
//! 1. [`preprocess`] cleans tweet text, tokenizes it and extracts surface counts.
//! 2. [`lm_embed`] trains a small bidirectional LSTM language model and turns each
//!    tweet into a pooled static + contextual vector.
//! 3. [`profiler`] estimates four binary profile attributes (age, gender, education,
//!    personality) per tweet and aggregates them per account.
//! 4. [`ensemble`] trains the baselines, the per-band "multiple" classifiers and the
//!    eight-branch model with a stacked final classifier.
//! 5. [`evalx`] scores everything (accuracy, F1, MCC, AUC) and exports error samples.
//!
//! [`syngen`] produces seeded synthetic corpora with controllable structure, and
//! [`numnet`] is the numerical core shared by every trainable component.

pub mod corpus;
pub mod ensemble;
pub mod evalx;
pub mod features;
pub mod lm_embed;
pub mod numnet;
pub mod par;
pub mod pipeline;
pub mod preprocess;
pub mod profiler;
pub mod rng;
pub mod syngen;

pub use corpus::{AccountRecord, BotClass, Corpus, TweetRecord};
pub use par::Parallelism;

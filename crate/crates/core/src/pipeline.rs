//! End-to-end glue: split, embed, featurize, train and score.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{split_corpus, Corpus, CorpusError, SplitSpec};
use crate::ensemble::{self, aggregate_accounts, EnsembleError, Prediction, TrainConfig, TrainedModel, Unit};
use crate::evalx::{self, compute_metrics, test_fingerprint, EvalError, MetricsReport};
use crate::features::{build_items, FeatureError, Item};
use crate::lm_embed::{embed_corpus, LmConfig, LmError, MixingMode, TweetEmbedder};
use crate::profiler::ProfileError;
use crate::syngen::SynthError;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Lm(#[from] LmError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error("{0}")]
    Items(String),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Synth(#[from] SynthError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelVariant {
    Logreg,
    Ffnn,
    Multiple,
    Full,
}

impl ModelVariant {
    pub const ALL: [ModelVariant; 4] = [ModelVariant::Logreg, ModelVariant::Ffnn, ModelVariant::Multiple, ModelVariant::Full];

    pub fn name(self) -> &'static str {
        match self {
            ModelVariant::Logreg => "logreg",
            ModelVariant::Ffnn => "ffnn",
            ModelVariant::Multiple => "multiple",
            ModelVariant::Full => "full",
        }
    }
}

impl fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelVariant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        ModelVariant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| format!("unknown model `{s}` (expected logreg, ffnn, multiple or full)"))
    }
}

pub fn train_model(variant: ModelVariant, items: &[Item], cfg: &TrainConfig) -> Result<TrainedModel, EnsembleError> {
    match variant {
        ModelVariant::Logreg => ensemble::train_logreg(items, cfg),
        ModelVariant::Ffnn => ensemble::train_single_ffnn(items, cfg),
        ModelVariant::Multiple => ensemble::train_multiple(items, cfg),
        ModelVariant::Full => ensemble::train_full(items, cfg),
    }
}

/// Embeds every tweet of `corpus` and attaches labels, surface counts, metadata
/// and the stored account profiles.
pub fn items_for(embedder: &TweetEmbedder, corpus: &Corpus, cfg: &TrainConfig) -> Result<Vec<Item>, PipelineError> {
    let vectors = embed_corpus(embedder, corpus, cfg.parallelism)?;
    build_items(corpus, &vectors).map_err(PipelineError::Items)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub tweet: MetricsReport,
    pub account: MetricsReport,
}

impl Evaluation {
    pub fn report(&self, unit: Unit) -> &MetricsReport {
        match unit {
            Unit::Tweet => &self.tweet,
            Unit::Account => &self.account,
        }
    }
}

/// Tweet-level and account-level metrics of `model` on `items`.
pub fn evaluate(model: &TrainedModel, items: &[Item], cfg: &TrainConfig) -> Result<(Evaluation, Vec<Prediction>), PipelineError> {
    let preds = model.predict_items(items, cfg.parallelism)?;
    let truth: BTreeMap<&str, bool> = items.iter().map(|i| (i.account_id.as_str(), i.is_bot())).collect();
    let tweet_scores: Vec<(f64, bool)> = preds.iter().zip(items).map(|(p, i)| (p.prob_bot, i.is_bot())).collect();
    let accounts = aggregate_accounts(&preds, model.threshold());
    let account_scores: Vec<(f64, bool)> = accounts.iter().map(|p| (p.prob_bot, truth[p.account_id.as_str()])).collect();
    let tweet_fp = test_fingerprint(items.iter().map(|i| (i.tweet_id.as_str(), i.is_bot())));
    let account_fp = test_fingerprint(truth.iter().map(|(a, &b)| (*a, b)));
    let name = model.name();
    let eval = Evaluation {
        tweet: compute_metrics(&tweet_scores, model.threshold())?.tagged(name, Unit::Tweet, &tweet_fp),
        account: compute_metrics(&account_scores, model.threshold())?.tagged(name, Unit::Account, &account_fp),
    };
    Ok((eval, preds))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub lm: LmConfig,
    pub mixing: MixingMode,
    pub static_vectors: Option<PathBuf>,
    pub split: SplitSpec,
    pub train: TrainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            lm: LmConfig::default(),
            mixing: MixingMode::Learned,
            static_vectors: None,
            split: SplitSpec::random(0.7, 0),
            train: TrainConfig::default(),
        }
    }
}

/// Splits `corpus` (which must carry profiles), trains the embedder on the
/// training side only, then trains and scores each requested model.
pub fn run_experiment(
    corpus: &Corpus,
    variants: &[ModelVariant],
    cfg: &ExperimentConfig,
) -> Result<BTreeMap<ModelVariant, Evaluation>, PipelineError> {
    let (train, test) = split_corpus(corpus, &cfg.split)?;
    let (embedder, _) = TweetEmbedder::train(
        &train,
        &cfg.lm,
        cfg.static_vectors.as_deref(),
        cfg.mixing,
        cfg.train.parallelism,
    )?;
    let train_items = items_for(&embedder, &train, &cfg.train)?;
    let test_items = items_for(&embedder, &test, &cfg.train)?;
    let mut out = BTreeMap::new();
    for &v in variants {
        let model = train_model(v, &train_items, &cfg.train)?;
        out.insert(v, evaluate(&model, &test_items, &cfg.train)?.0);
    }
    Ok(out)
}

/// Ranks evaluations of several models on one test set.
pub fn compare(evals: &[&Evaluation], unit: Unit) -> Result<Vec<MetricsReport>, EvalError> {
    let reports: Vec<MetricsReport> = evals.iter().map(|e| e.report(unit).clone()).collect();
    evalx::compare_classifiers(&reports)
}

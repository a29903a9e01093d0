//! Bot classifiers: linear and FFNN baselines, per-band "multiple" models and the
//! eight-branch model with a stacked final classifier.
//!
//! All models are trained on tweets. Account-level predictions average the tweet
//! probabilities of each account ([`aggregate_accounts`]).

mod classifier;
mod ffnn;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use classifier::{fit_classifier, Classifier, ClassifierConfigs, FinalVariant, LinearSgd, SgdConfig, SgdLoss};
pub use ffnn::{FfnnClassifier, FfnnConfig};

use crate::corpus::Corpus;
use crate::features::{FeatureConfig, FeatureError, FeatureLayout, Item};
use crate::numnet::{LogisticRegression, NumError};
use crate::par::{self, Parallelism};
use crate::profiler::{Attribute, ProfileVector};
use crate::rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnsembleError {
    #[error("training set for {0} contains a single class")]
    SingleClassTrainingSet(String),
    #[error("partition {0} is empty")]
    EmptyPartition(BranchKey),
    #[error("account {0} has no profile")]
    MissingProfile(String),
    #[error("no training items")]
    EmptyTrainingSet,
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Numerical(#[from] NumError),
}

type Result<T> = std::result::Result<T, EnsembleError>;

/// One of the eight (attribute, band) pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BranchKey {
    pub attribute: Attribute,
    pub band: u8,
}

impl BranchKey {
    pub fn all() -> [BranchKey; 8] {
        let mut keys = [BranchKey {
            attribute: Attribute::Age,
            band: 0,
        }; 8];
        for (i, a) in Attribute::ALL.into_iter().enumerate() {
            keys[2 * i] = BranchKey { attribute: a, band: 0 };
            keys[2 * i + 1] = BranchKey { attribute: a, band: 1 };
        }
        keys
    }

    /// The four branches an item with this profile is routed to.
    pub fn route(profile: &ProfileVector) -> [BranchKey; 4] {
        Attribute::ALL.map(|a| BranchKey {
            attribute: a,
            band: profile.band(a),
        })
    }

    fn index(self) -> usize {
        2 * self.attribute.index() + self.band as usize
    }
}

impl fmt::Display for BranchKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.attribute, self.attribute.band_name(self.band))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Unit {
    #[default]
    Tweet,
    Account,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    /// Tweet id or account id, depending on `unit`.
    pub id: String,
    pub account_id: String,
    pub prob_bot: f64,
    pub label: bool,
    pub branch_probs: Vec<(BranchKey, f64)>,
    pub unit: Unit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub features: FeatureConfig,
    pub classifiers: ClassifierConfigs,
    pub final_variant: FinalVariant,
    pub multiple_attribute: Attribute,
    /// Weight each class by `n / (2 n_class)` in the loss.
    pub class_weighting: bool,
    pub threshold: f64,
    pub seed: u64,
    pub parallelism: Parallelism,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            features: FeatureConfig::default(),
            classifiers: ClassifierConfigs::default(),
            final_variant: FinalVariant::Ffnn,
            multiple_attribute: Attribute::Gender,
            class_weighting: false,
            threshold: 0.5,
            seed: 0,
            parallelism: Parallelism::Parallel,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SingleKind {
    Logreg,
    Ffnn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleModel {
    pub kind: SingleKind,
    pub layout: FeatureLayout,
    pub classifier: Classifier,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultipleModel {
    pub attribute: Attribute,
    pub layout: FeatureLayout,
    /// Indexed by band.
    pub models: Vec<FfnnClassifier>,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub key: BranchKey,
    pub model: FfnnClassifier,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullModel {
    pub layout: FeatureLayout,
    /// In [`BranchKey::all`] order.
    pub branches: Vec<Branch>,
    pub final_variant: FinalVariant,
    pub final_classifier: Classifier,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum TrainedModel {
    Single(SingleModel),
    Multiple(MultipleModel),
    Full(FullModel),
}

/// Length of the final classifier input.
pub const STACK_DIM: usize = 16;

/// Routed branch probabilities, then the one-hot bands of all four attributes,
/// then their confidences.
pub fn stack_features(branch_probs: &[f64; 4], profile: &ProfileVector) -> [f64; STACK_DIM] {
    let mut s = [0.0; STACK_DIM];
    s[..4].copy_from_slice(branch_probs);
    for (i, a) in Attribute::ALL.into_iter().enumerate() {
        s[4 + 2 * i + profile.band(a) as usize] = 1.0;
        s[12 + i] = profile.confidence(a);
    }
    s
}

fn profile_of(item: &Item) -> Result<ProfileVector> {
    item.profile.ok_or_else(|| EnsembleError::MissingProfile(item.account_id.clone()))
}

fn decide(p: f64, threshold: f64) -> bool {
    p >= threshold
}

impl FullModel {
    pub fn branch(&self, key: BranchKey) -> &FfnnClassifier {
        &self.branches[key.index()].model
    }

    pub fn branch_mut(&mut self, key: BranchKey) -> &mut FfnnClassifier {
        &mut self.branches[key.index()].model
    }

    fn routed(&self, x: &[f64], profile: &ProfileVector) -> [(BranchKey, f64); 4] {
        BranchKey::route(profile).map(|k| (k, self.branch(k).predict_proba(x)))
    }
}

impl TrainedModel {
    pub fn layout(&self) -> &FeatureLayout {
        match self {
            TrainedModel::Single(m) => &m.layout,
            TrainedModel::Multiple(m) => &m.layout,
            TrainedModel::Full(m) => &m.layout,
        }
    }

    pub fn threshold(&self) -> f64 {
        match self {
            TrainedModel::Single(m) => m.threshold,
            TrainedModel::Multiple(m) => m.threshold,
            TrainedModel::Full(m) => m.threshold,
        }
    }

    pub fn set_threshold(&mut self, t: f64) {
        match self {
            TrainedModel::Single(m) => m.threshold = t,
            TrainedModel::Multiple(m) => m.threshold = t,
            TrainedModel::Full(m) => m.threshold = t,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TrainedModel::Single(SingleModel {
                kind: SingleKind::Logreg, ..
            }) => "logreg",
            TrainedModel::Single(_) => "ffnn",
            TrainedModel::Multiple(_) => "multiple",
            TrainedModel::Full(_) => "full",
        }
    }

    /// Tweet-level prediction.
    pub fn predict(&self, item: &Item) -> Result<Prediction> {
        let x = self.layout().transform(item)?;
        let (prob, branch_probs) = match self {
            TrainedModel::Single(m) => (m.classifier.predict_proba(&x), Vec::new()),
            TrainedModel::Multiple(m) => {
                let band = profile_of(item)?.band(m.attribute);
                let key = BranchKey {
                    attribute: m.attribute,
                    band,
                };
                let p = m.models[band as usize].predict_proba(&x);
                (p, vec![(key, p)])
            }
            TrainedModel::Full(m) => {
                let profile = profile_of(item)?;
                let routed = m.routed(&x, &profile);
                let stack = stack_features(&routed.map(|(_, p)| p), &profile);
                (m.final_classifier.predict_proba(&stack), routed.to_vec())
            }
        };
        Ok(Prediction {
            id: item.tweet_id.clone(),
            account_id: item.account_id.clone(),
            prob_bot: prob,
            label: decide(prob, self.threshold()),
            branch_probs,
            unit: Unit::Tweet,
        })
    }

    pub fn predict_items(&self, items: &[Item], mode: Parallelism) -> Result<Vec<Prediction>> {
        par::try_map(mode, items, |it| self.predict(it))
    }
}

/// Mean tweet probability per account, accounts in id order.
pub fn aggregate_accounts(tweet_preds: &[Prediction], threshold: f64) -> Vec<Prediction> {
    let mut groups: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for p in tweet_preds {
        groups.entry(&p.account_id).or_default().push(p.prob_bot);
    }
    groups
        .into_iter()
        .map(|(acc, probs)| {
            let prob = probs.iter().sum::<f64>() / probs.len() as f64;
            Prediction {
                id: acc.to_string(),
                account_id: acc.to_string(),
                prob_bot: prob,
                label: decide(prob, threshold),
                branch_probs: Vec::new(),
                unit: Unit::Account,
            }
        })
        .collect()
}

/// Splits a corpus into the accounts of band 0 and band 1 of `attribute`.
pub fn partition_by_band(corpus: &Corpus, attribute: Attribute) -> Result<(Corpus, Corpus)> {
    let mut sides: [BTreeSet<&str>; 2] = [BTreeSet::new(), BTreeSet::new()];
    for a in corpus.accounts() {
        let p = a.profile.ok_or_else(|| EnsembleError::MissingProfile(a.account_id.clone()))?;
        sides[p.band(attribute) as usize].insert(&a.account_id);
    }
    Ok((corpus.subset(&sides[0]), corpus.subset(&sides[1])))
}

// ---------------------------------------------------------------------------
// Training

struct Design {
    xs: Vec<Vec<f64>>,
    ys: Vec<f64>,
    ws: Vec<f64>,
}

impl Design {
    fn select(&self, idx: &[usize]) -> Design {
        Design {
            xs: idx.iter().map(|&i| self.xs[i].clone()).collect(),
            ys: idx.iter().map(|&i| self.ys[i]).collect(),
            ws: idx.iter().map(|&i| self.ws[i]).collect(),
        }
    }

    fn require_two_classes(&self, what: &str) -> Result<()> {
        let pos = self.ys.iter().filter(|&&y| y == 1.0).count();
        if pos == 0 || pos == self.ys.len() {
            return Err(EnsembleError::SingleClassTrainingSet(what.to_string()));
        }
        Ok(())
    }
}

fn class_weights(ys: &[f64], enabled: bool) -> Vec<f64> {
    if !enabled {
        return vec![1.0; ys.len()];
    }
    let n = ys.len() as f64;
    let pos = ys.iter().filter(|&&y| y == 1.0).count() as f64;
    ys.iter()
        .map(|&y| {
            let nc = if y == 1.0 { pos } else { n - pos };
            n / (2.0 * nc.max(1.0))
        })
        .collect()
}

fn prepare(items: &[Item], cfg: &TrainConfig) -> Result<(FeatureLayout, Design)> {
    if items.is_empty() {
        return Err(EnsembleError::EmptyTrainingSet);
    }
    let text_dim = items[0].text.len();
    let layout = FeatureLayout::fit(cfg.features.clone(), text_dim, items)?;
    let xs = par::try_map(cfg.parallelism, items, |it| layout.transform(it))?;
    let ys: Vec<f64> = items.iter().map(|it| it.label).collect();
    let ws = class_weights(&ys, cfg.class_weighting);
    Ok((layout, Design { xs, ys, ws }))
}

fn ffnn_seeded(cfg: &TrainConfig, label: &str) -> FfnnConfig {
    FfnnConfig {
        seed: rng::derive_str(cfg.seed, label),
        ..cfg.classifiers.ffnn
    }
}

pub fn train_logreg(items: &[Item], cfg: &TrainConfig) -> Result<TrainedModel> {
    let (layout, d) = prepare(items, cfg)?;
    d.require_two_classes("logreg")?;
    let lc = crate::numnet::LogisticConfig {
        seed: rng::derive_str(cfg.seed, "logreg"),
        ..cfg.classifiers.logistic
    };
    let m = LogisticRegression::train(&d.xs, &d.ys, &d.ws, &lc)?;
    Ok(TrainedModel::Single(SingleModel {
        kind: SingleKind::Logreg,
        layout,
        classifier: Classifier::LogisticRegression(m),
        threshold: cfg.threshold,
    }))
}

pub fn train_single_ffnn(items: &[Item], cfg: &TrainConfig) -> Result<TrainedModel> {
    let (layout, d) = prepare(items, cfg)?;
    d.require_two_classes("ffnn")?;
    let m = FfnnClassifier::train(&d.xs, &d.ys, &d.ws, &ffnn_seeded(cfg, "single-ffnn"))?;
    Ok(TrainedModel::Single(SingleModel {
        kind: SingleKind::Ffnn,
        layout,
        classifier: Classifier::Ffnn(m),
        threshold: cfg.threshold,
    }))
}

fn band_indices(items: &[Item], subset: &[usize], key: BranchKey) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for &i in subset {
        if profile_of(&items[i])?.band(key.attribute) == key.band {
            out.push(i);
        }
    }
    if out.is_empty() {
        return Err(EnsembleError::EmptyPartition(key));
    }
    Ok(out)
}

fn train_branch(items: &[Item], d: &Design, subset: &[usize], key: BranchKey, cfg: &TrainConfig, tag: &str) -> Result<FfnnClassifier> {
    let idx = band_indices(items, subset, key)?;
    let part = d.select(&idx);
    part.require_two_classes(&format!("branch {key}"))?;
    Ok(FfnnClassifier::train(&part.xs, &part.ys, &part.ws, &ffnn_seeded(cfg, &format!("{tag}-{key}")))?)
}

pub fn train_multiple(items: &[Item], cfg: &TrainConfig) -> Result<TrainedModel> {
    let (layout, d) = prepare(items, cfg)?;
    let all: Vec<usize> = (0..items.len()).collect();
    let attr = cfg.multiple_attribute;
    let models = par::try_map(cfg.parallelism, &[0u8, 1], |&band| {
        train_branch(items, &d, &all, BranchKey { attribute: attr, band }, cfg, "multiple")
    })?;
    Ok(TrainedModel::Multiple(MultipleModel {
        attribute: attr,
        layout,
        models,
        threshold: cfg.threshold,
    }))
}

fn train_branches(items: &[Item], d: &Design, subset: &[usize], cfg: &TrainConfig, tag: &str) -> Result<Vec<Branch>> {
    par::try_map(cfg.parallelism, &BranchKey::all(), |&key| {
        Ok(Branch {
            key,
            model: train_branch(items, d, subset, key, cfg, tag)?,
        })
    })
}

/// Two account-level folds, stratified by label.
fn account_folds(items: &[Item], seed: u64) -> [Vec<usize>; 2] {
    let mut accounts: [BTreeSet<&str>; 2] = [BTreeSet::new(), BTreeSet::new()];
    for it in items {
        accounts[it.is_bot() as usize].insert(&it.account_id);
    }
    let mut fold_of: BTreeMap<&str, usize> = BTreeMap::new();
    let mut r = rng::seeded(rng::derive_str(seed, "stack-folds"));
    // Offsetting the second class keeps odd class sizes from piling onto fold 0.
    for (offset, class) in accounts.into_iter().enumerate() {
        let mut ids: Vec<&str> = class.into_iter().collect();
        ids.shuffle(&mut r);
        for (k, id) in ids.into_iter().enumerate() {
            fold_of.insert(id, (k + offset) % 2);
        }
    }
    let mut folds = [Vec::new(), Vec::new()];
    for (i, it) in items.iter().enumerate() {
        folds[fold_of[it.account_id.as_str()]].push(i);
    }
    folds
}

/// Eight branch FFNNs plus a final classifier on out-of-fold stack features.
///
/// Stack features for the final classifier come from 2-fold cross-fitting over
/// accounts: each fold is scored by branches trained on the other fold only. The
/// deployed branches are then retrained on the whole training set.
pub fn train_full(items: &[Item], cfg: &TrainConfig) -> Result<TrainedModel> {
    let (layout, d) = prepare(items, cfg)?;
    for it in items {
        profile_of(it)?;
    }
    let all: Vec<usize> = (0..items.len()).collect();
    let folds = account_folds(items, cfg.seed);

    let mut stack_x = vec![Vec::new(); items.len()];
    for k in 0..2 {
        let branches = train_branches(items, &d, &folds[1 - k], cfg, &format!("fold{k}"))?;
        let fold_model = FullModel {
            layout: layout.clone(),
            branches,
            final_variant: cfg.final_variant,
            final_classifier: Classifier::LinearSgd(LinearSgd {
                w: Vec::new(),
                b: 0.0,
                loss: SgdLoss::Log,
            }),
            threshold: cfg.threshold,
        };
        let feats = par::map(cfg.parallelism, &folds[k], |&i| {
            let profile = items[i].profile.expect("checked above");
            let routed = fold_model.routed(&d.xs[i], &profile);
            stack_features(&routed.map(|(_, p)| p), &profile).to_vec()
        });
        for (&i, f) in folds[k].iter().zip(feats) {
            stack_x[i] = f;
        }
    }
    let stack = Design {
        xs: stack_x,
        ys: d.ys.clone(),
        ws: d.ws.clone(),
    };
    stack.require_two_classes("final classifier")?;
    let final_classifier = fit_classifier(
        cfg.final_variant,
        &stack.xs,
        &stack.ys,
        &stack.ws,
        &cfg.classifiers,
        rng::derive_str(cfg.seed, "final"),
    )?;
    let branches = train_branches(items, &d, &all, cfg, "full")?;
    Ok(TrainedModel::Full(FullModel {
        layout,
        branches,
        final_variant: cfg.final_variant,
        final_classifier,
        threshold: cfg.threshold,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn branch_keys_and_routing() {
        let keys = BranchKey::all();
        assert_eq!(keys.iter().collect::<BTreeSet<_>>().len(), 8);
        for (i, k) in keys.iter().enumerate() {
            assert_eq!(k.index(), i);
        }
        let p = ProfileVector::new([0, 0, 0, 0], [0.9; 4]);
        let names: Vec<String> = BranchKey::route(&p).iter().map(|k| k.to_string()).collect();
        assert_eq!(names, ["age:under25", "gender:male", "education:educated", "personality:introvert"]);
    }

    #[test]
    fn stack_layout() {
        let p = ProfileVector::new([1, 0, 1, 0], [0.6, 0.7, 0.8, 0.9]);
        let s = stack_features(&[0.1, 0.2, 0.3, 0.4], &p);
        assert_eq!(&s[..4], &[0.1, 0.2, 0.3, 0.4]);
        assert_eq!(&s[4..12], &[0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0]);
        assert_eq!(&s[12..], &[0.6, 0.7, 0.8, 0.9]);
    }

    #[test]
    fn account_probability_is_tweet_mean() {
        let mk = |id: &str, acc: &str, p: f64| Prediction {
            id: id.into(),
            account_id: acc.into(),
            prob_bot: p,
            label: p >= 0.5,
            branch_probs: vec![],
            unit: Unit::Tweet,
        };
        let out = aggregate_accounts(&[mk("1", "b", 0.2), mk("2", "a", 0.9), mk("3", "b", 0.6)], 0.5);
        assert_eq!(out.len(), 2);
        assert_eq!((out[0].id.as_str(), out[0].prob_bot), ("a", 0.9));
        assert!((out[1].prob_bot - 0.4).abs() < 1e-15);
        assert!(!out[1].label);
        assert_eq!(out[1].unit, Unit::Account);
    }

    #[test]
    fn class_weights_balance() {
        let w = class_weights(&[1.0, 0.0, 0.0, 0.0], true);
        assert_eq!(w, vec![2.0, 2.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0]);
        assert_eq!(class_weights(&[1.0, 0.0], false), vec![1.0, 1.0]);
    }
}

//! Profile attributes per tweet and per account.
//!
//! Each of the four attributes is binary. A [`ProfileSource`] gives a two-band
//! distribution per attribute for every tweet, and an account profile is the
//! per-attribute mean of those distributions, reduced to its argmax band and the
//! winning probability.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{AccountRecord, Corpus, TweetRecord};
use crate::numnet::{LogisticConfig, LogisticRegression, NumError, Standardizer};
use crate::par::{self, Parallelism};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProfileError {
    #[error("account {0} has no stored profile for the oracle source")]
    MissingOracleLabels(String),
    #[error("heuristic profiler has not been trained")]
    UntrainedHeuristic,
    #[error("cannot aggregate an empty estimate list")]
    EmptyEstimateList,
    #[error("tweet vector required by the heuristic source is missing for tweet {0}")]
    MissingVector(String),
    #[error("no training tweets carry profile labels")]
    NoTrainingLabels,
    #[error(transparent)]
    Numerical(#[from] NumError),
    #[error("external profiler: {0}")]
    External(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Attribute {
    Age,
    Gender,
    Education,
    Personality,
}

impl Attribute {
    pub const ALL: [Attribute; 4] = [Attribute::Age, Attribute::Gender, Attribute::Education, Attribute::Personality];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Attribute::Age => "age",
            Attribute::Gender => "gender",
            Attribute::Education => "education",
            Attribute::Personality => "personality",
        }
    }

    pub fn bands(self) -> [&'static str; 2] {
        match self {
            Attribute::Age => ["under25", "over25"],
            Attribute::Gender => ["male", "female"],
            Attribute::Education => ["educated", "not_educated"],
            Attribute::Personality => ["introvert", "extrovert"],
        }
    }

    pub fn band_name(self, band: u8) -> &'static str {
        self.bands()[band as usize]
    }

    pub fn parse_band(self, s: &str) -> Result<u8, String> {
        let s = s.trim().to_ascii_lowercase();
        self.bands()
            .iter()
            .position(|b| *b == s)
            .map(|i| i as u8)
            .ok_or_else(|| format!("unknown {} band `{s}` (expected {} or {})", self.name(), self.bands()[0], self.bands()[1]))
    }

    pub fn parse(s: &str) -> Result<Attribute, String> {
        Attribute::ALL
            .into_iter()
            .find(|a| a.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| format!("unknown attribute `{s}`"))
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Per attribute, a distribution over its two bands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TweetProfileEstimate {
    pub dist: [[f64; 2]; 4],
}

impl TweetProfileEstimate {
    /// Builds an estimate from the probability of band 0 per attribute.
    pub fn from_first_band(p0: [f64; 4]) -> Self {
        TweetProfileEstimate {
            dist: p0.map(|p| [p, 1.0 - p]),
        }
    }

    pub fn get(&self, attr: Attribute) -> [f64; 2] {
        self.dist[attr.index()]
    }

    pub fn is_normalized(&self) -> bool {
        self.dist.iter().all(|d| d[0] >= 0.0 && d[1] >= 0.0 && (d[0] + d[1] - 1.0).abs() <= 1e-9)
    }
}

/// Chosen band and its aggregated confidence for each attribute.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileVector {
    pub bands: [u8; 4],
    pub confidence: [f64; 4],
}

impl ProfileVector {
    pub fn new(bands: [u8; 4], confidence: [f64; 4]) -> Self {
        ProfileVector { bands, confidence }
    }

    pub fn band(&self, attr: Attribute) -> u8 {
        self.bands[attr.index()]
    }

    pub fn confidence(&self, attr: Attribute) -> f64 {
        self.confidence[attr.index()]
    }
}

/// Request/response contract for a hosted profiling service: the cleaned tweet
/// text goes in, one two-band distribution per attribute comes back.
pub trait ExternalAdapter: Send + Sync {
    fn estimate(&self, cleaned_text: &str) -> Result<TweetProfileEstimate, ProfileError>;
}

pub enum ProfileSource<'a> {
    /// Replays the profile stored with each account.
    Oracle,
    Heuristic(&'a HeuristicProfiler),
    External(&'a dyn ExternalAdapter),
}

/// Four independent logistic classifiers, one per attribute, over tweet vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeuristicProfiler {
    pub dim: usize,
    pub standardizer: Standardizer,
    /// Each model predicts the probability of band 1.
    pub models: Option<Vec<LogisticRegression>>,
}

impl HeuristicProfiler {
    pub fn untrained(dim: usize) -> Self {
        HeuristicProfiler {
            dim,
            standardizer: Standardizer::identity(dim),
            models: None,
        }
    }

    pub fn is_trained(&self) -> bool {
        self.models.is_some()
    }

    /// Fits one classifier per attribute on `(tweet vector, account bands)` pairs.
    pub fn train(
        vectors: &[Vec<f64>],
        bands: &[[u8; 4]],
        cfg: &LogisticConfig,
        mode: Parallelism,
    ) -> Result<Self, ProfileError> {
        if vectors.is_empty() {
            return Err(ProfileError::NoTrainingLabels);
        }
        let dim = vectors[0].len();
        let standardizer = Standardizer::fit(vectors, dim)?;
        let xs: Vec<Vec<f64>> = vectors.iter().map(|v| standardizer.apply(v)).collect();
        let weights = vec![1.0; xs.len()];
        let models = par::try_map(mode, &Attribute::ALL, |attr| {
            let ys: Vec<f64> = bands.iter().map(|b| b[attr.index()] as f64).collect();
            let cfg = LogisticConfig {
                seed: crate::rng::derive(cfg.seed, attr.index() as u64),
                ..*cfg
            };
            LogisticRegression::train(&xs, &ys, &weights, &cfg)
        })?;
        Ok(HeuristicProfiler {
            dim,
            standardizer,
            models: Some(models),
        })
    }

    /// Trains on every tweet of the accounts in `corpus` that carry a profile.
    pub fn train_on_corpus(
        corpus: &Corpus,
        vectors: &BTreeMap<String, Vec<f64>>,
        cfg: &LogisticConfig,
        mode: Parallelism,
    ) -> Result<Self, ProfileError> {
        let mut xs = Vec::new();
        let mut bands = Vec::new();
        for t in corpus.tweets() {
            let Some(profile) = corpus.account(&t.account_id).and_then(|a| a.profile) else {
                continue;
            };
            let v = vectors.get(&t.tweet_id).ok_or_else(|| ProfileError::MissingVector(t.tweet_id.clone()))?;
            xs.push(v.clone());
            bands.push(profile.bands);
        }
        Self::train(&xs, &bands, cfg, mode)
    }

    pub fn estimate(&self, vector: &[f64]) -> Result<TweetProfileEstimate, ProfileError> {
        let models = self.models.as_ref().ok_or(ProfileError::UntrainedHeuristic)?;
        crate::numnet::check_len("heuristic_estimate", self.dim, vector.len())?;
        let x = self.standardizer.apply(vector);
        let mut p0 = [0.0; 4];
        for (p, m) in p0.iter_mut().zip(models) {
            *p = 1.0 - m.predict_proba(&x);
        }
        Ok(TweetProfileEstimate::from_first_band(p0))
    }
}

pub fn estimate_tweet_profile(
    tweet: &TweetRecord,
    account: &AccountRecord,
    vector: Option<&[f64]>,
    source: &ProfileSource<'_>,
) -> Result<TweetProfileEstimate, ProfileError> {
    match source {
        ProfileSource::Oracle => {
            let p = account
                .profile
                .ok_or_else(|| ProfileError::MissingOracleLabels(account.account_id.clone()))?;
            let mut dist = [[0.0; 2]; 4];
            for (i, d) in dist.iter_mut().enumerate() {
                let c = p.confidence[i];
                *d = if p.bands[i] == 0 { [c, 1.0 - c] } else { [1.0 - c, c] };
            }
            Ok(TweetProfileEstimate { dist })
        }
        ProfileSource::Heuristic(h) => {
            if !h.is_trained() {
                return Err(ProfileError::UntrainedHeuristic);
            }
            let v = vector.ok_or_else(|| ProfileError::MissingVector(tweet.tweet_id.clone()))?;
            h.estimate(v)
        }
        ProfileSource::External(ext) => ext.estimate(&tweet.cleaned_text),
    }
}

/// Mean distribution per attribute, argmax band (ties to band 0) and its mass.
///
/// The band-0 column is summed in sorted order and band 1 is taken as its
/// complement, so the result is exactly independent of the order of `estimates`.
pub fn aggregate_account_profile(estimates: &[TweetProfileEstimate]) -> Result<ProfileVector, ProfileError> {
    if estimates.is_empty() {
        return Err(ProfileError::EmptyEstimateList);
    }
    let n = estimates.len() as f64;
    let mut bands = [0u8; 4];
    let mut confidence = [0.0; 4];
    for i in 0..4 {
        let mut col: Vec<f64> = estimates.iter().map(|e| e.dist[i][0] / (e.dist[i][0] + e.dist[i][1])).collect();
        col.sort_by(f64::total_cmp);
        let m0 = col.iter().sum::<f64>() / n;
        let m1 = 1.0 - m0;
        if m0 >= m1 {
            bands[i] = 0;
            confidence[i] = m0;
        } else {
            bands[i] = 1;
            confidence[i] = m1;
        }
    }
    Ok(ProfileVector { bands, confidence })
}

/// Estimates every tweet and returns a copy of `corpus` with aggregated
/// account profiles. `vectors` (keyed by tweet id) is required by the heuristic
/// source only.
pub fn assign_profiles(
    corpus: &Corpus,
    source: &ProfileSource<'_>,
    vectors: Option<&BTreeMap<String, Vec<f64>>>,
) -> Result<Corpus, ProfileError> {
    let mut profiles = BTreeMap::new();
    for account in corpus.accounts() {
        let estimates = corpus
            .tweets_of(account)
            .map(|t| {
                let v = vectors.and_then(|m| m.get(&t.tweet_id)).map(Vec::as_slice);
                estimate_tweet_profile(t, account, v, source)
            })
            .collect::<Result<Vec<_>, _>>()?;
        profiles.insert(account.account_id.clone(), aggregate_account_profile(&estimates)?);
    }
    Ok(corpus.with_profiles(&profiles))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gender(p0: f64) -> TweetProfileEstimate {
        TweetProfileEstimate::from_first_band([0.5, p0, 0.5, 0.5])
    }

    #[test]
    fn mean_and_argmax() {
        let p = aggregate_account_profile(&[gender(0.6), gender(0.2)]).unwrap();
        assert_eq!(p.band(Attribute::Gender), 1);
        assert!((p.confidence(Attribute::Gender) - 0.6).abs() < 1e-12);
    }

    #[test]
    fn identical_estimates_are_idempotent() {
        let e = TweetProfileEstimate::from_first_band([0.9, 0.5, 0.5, 0.5]);
        let p = aggregate_account_profile(&[e; 5]).unwrap();
        assert_eq!(p.band(Attribute::Age), 0);
        assert!((p.confidence(Attribute::Age) - 0.9).abs() < 1e-12);
    }

    #[test]
    fn exact_tie_goes_to_first_band() {
        let p = aggregate_account_profile(&[gender(0.5)]).unwrap();
        assert_eq!(p.bands, [0, 0, 0, 0]);
        assert_eq!(p.confidence, [0.5; 4]);
        assert_eq!(aggregate_account_profile(&[]), Err(ProfileError::EmptyEstimateList));
    }

    #[test]
    fn untrained_heuristic_is_rejected() {
        let h = HeuristicProfiler::untrained(3);
        assert_eq!(h.estimate(&[0.0; 3]), Err(ProfileError::UntrainedHeuristic));
    }

    #[test]
    fn band_names_round_trip() {
        for a in Attribute::ALL {
            for b in 0..2u8 {
                assert_eq!(a.parse_band(a.band_name(b)), Ok(b));
            }
            assert_eq!(Attribute::parse(a.name()), Ok(a));
        }
        assert!(Attribute::Age.parse_band("teen").is_err());
    }

    fn estimate_strategy() -> impl Strategy<Value = TweetProfileEstimate> {
        prop::array::uniform4(0.0f64..=1.0).prop_map(TweetProfileEstimate::from_first_band)
    }

    proptest! {
        #[test]
        fn aggregation_is_permutation_invariant(
            mut es in prop::collection::vec(estimate_strategy(), 1..30),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            let a = aggregate_account_profile(&es).unwrap();
            es.shuffle(&mut crate::rng::seeded(seed));
            let b = aggregate_account_profile(&es).unwrap();
            prop_assert_eq!(a, b);
            for c in a.confidence {
                prop_assert!((0.5..=1.0).contains(&c));
            }
        }
    }
}

//! Classifier inputs: per-tweet items and the block layout that turns them into
//! standardized feature vectors.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{AccountMetadata, Corpus};
use crate::numnet::{NumError, Standardizer};
use crate::preprocess::SurfaceFeatures;
use crate::profiler::{Attribute, ProfileVector};

/// One tweet with everything any model may consume.
#[derive(Debug, Clone, PartialEq)]
pub struct Item {
    pub tweet_id: String,
    pub account_id: String,
    /// 1.0 for bot, 0.0 for human.
    pub label: f64,
    pub text: Vec<f64>,
    pub surface: [f64; SurfaceFeatures::DIM],
    pub metadata: Option<[f64; AccountMetadata::DIM]>,
    pub profile: Option<ProfileVector>,
}

impl Item {
    pub fn is_bot(&self) -> bool {
        self.label == 1.0
    }
}

/// Builds one item per tweet. `vectors` must hold a tweet vector for every tweet.
pub fn build_items(corpus: &Corpus, vectors: &BTreeMap<String, Vec<f64>>) -> Result<Vec<Item>, String> {
    corpus
        .tweets()
        .map(|t| {
            let account = corpus.account(&t.account_id).expect("validated corpus");
            let text = vectors
                .get(&t.tweet_id)
                .ok_or_else(|| format!("no tweet vector for tweet {}", t.tweet_id))?
                .clone();
            Ok(Item {
                tweet_id: t.tweet_id.clone(),
                account_id: t.account_id.clone(),
                label: if account.is_bot() { 1.0 } else { 0.0 },
                text,
                surface: t.surface.to_vec(),
                metadata: account.metadata.map(|m| m.to_vec()),
                profile: account.profile,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub surface: bool,
    /// Account metadata columns. Off by default: text-only regime.
    pub metadata: bool,
    /// Attributes whose one-hot band and confidence are appended.
    pub profile: Vec<Attribute>,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            surface: true,
            metadata: false,
            profile: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FeatureError {
    #[error("account {0} has no profile but the layout uses profile features")]
    MissingProfile(String),
    #[error("account {0} has no metadata but the layout uses metadata features")]
    MissingMetadata(String),
    #[error("tweet {tweet}: text vector has length {got}, layout expects {expected}")]
    TextDimension { tweet: String, expected: usize, got: usize },
    #[error(transparent)]
    Numerical(#[from] NumError),
}

/// Active blocks plus the standardizer fitted on training items.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub config: FeatureConfig,
    pub text_dim: usize,
    pub standardizer: Standardizer,
}

impl FeatureLayout {
    pub fn dim_of(config: &FeatureConfig, text_dim: usize) -> usize {
        text_dim
            + if config.surface { SurfaceFeatures::DIM } else { 0 }
            + if config.metadata { AccountMetadata::DIM } else { 0 }
            + 3 * config.profile.len()
    }

    pub fn dim(&self) -> usize {
        Self::dim_of(&self.config, self.text_dim)
    }

    /// Concatenates the active blocks without scaling.
    pub fn assemble(config: &FeatureConfig, text_dim: usize, item: &Item) -> Result<Vec<f64>, FeatureError> {
        if item.text.len() != text_dim {
            return Err(FeatureError::TextDimension {
                tweet: item.tweet_id.clone(),
                expected: text_dim,
                got: item.text.len(),
            });
        }
        let mut x = Vec::with_capacity(Self::dim_of(config, text_dim));
        x.extend_from_slice(&item.text);
        if config.surface {
            x.extend_from_slice(&item.surface);
        }
        if config.metadata {
            let m = item.metadata.ok_or_else(|| FeatureError::MissingMetadata(item.account_id.clone()))?;
            x.extend_from_slice(&m);
        }
        if !config.profile.is_empty() {
            let p = item.profile.ok_or_else(|| FeatureError::MissingProfile(item.account_id.clone()))?;
            for &a in &config.profile {
                let band = p.band(a);
                x.extend_from_slice(&[f64::from(u8::from(band == 0)), f64::from(band), p.confidence(a)]);
            }
        }
        Ok(x)
    }

    pub fn fit(config: FeatureConfig, text_dim: usize, train: &[Item]) -> Result<Self, FeatureError> {
        let rows = train
            .iter()
            .map(|it| Self::assemble(&config, text_dim, it))
            .collect::<Result<Vec<_>, _>>()?;
        let dim = Self::dim_of(&config, text_dim);
        Ok(FeatureLayout {
            standardizer: Standardizer::fit(&rows, dim)?,
            config,
            text_dim,
        })
    }

    pub fn transform(&self, item: &Item) -> Result<Vec<f64>, FeatureError> {
        Ok(self.standardizer.apply(&Self::assemble(&self.config, self.text_dim, item)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn item(profile: Option<ProfileVector>) -> Item {
        Item {
            tweet_id: "t".into(),
            account_id: "a".into(),
            label: 1.0,
            text: vec![0.5, -0.5],
            surface: [0.0, 1.0, 0.0, 1.0, 2.0, 3.0],
            metadata: None,
            profile,
        }
    }

    #[test]
    fn blocks_follow_the_config() {
        let p = ProfileVector::new([0, 1, 0, 0], [0.9, 0.7, 0.6, 0.8]);
        let cfg = FeatureConfig {
            surface: true,
            metadata: false,
            profile: vec![Attribute::Gender],
        };
        let x = FeatureLayout::assemble(&cfg, 2, &item(Some(p))).unwrap();
        assert_eq!(x, vec![0.5, -0.5, 0.0, 1.0, 0.0, 1.0, 2.0, 3.0, 0.0, 1.0, 0.7]);
        assert_eq!(x.len(), FeatureLayout::dim_of(&cfg, 2));
    }

    #[test]
    fn missing_blocks_are_errors() {
        let cfg = FeatureConfig {
            profile: vec![Attribute::Age],
            ..FeatureConfig::default()
        };
        assert_eq!(
            FeatureLayout::assemble(&cfg, 2, &item(None)),
            Err(FeatureError::MissingProfile("a".into()))
        );
        let cfg = FeatureConfig {
            metadata: true,
            ..FeatureConfig::default()
        };
        assert!(matches!(FeatureLayout::assemble(&cfg, 2, &item(None)), Err(FeatureError::MissingMetadata(_))));
        assert!(matches!(
            FeatureLayout::assemble(&FeatureConfig::default(), 3, &item(None)),
            Err(FeatureError::TextDimension { .. })
        ));
    }
}

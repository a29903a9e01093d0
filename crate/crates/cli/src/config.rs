//! Plain `key=value` run configuration.
//!
//! Every key has a default; files and `--set` overrides may only assign known
//! keys. The resolved configuration is written verbatim into each run directory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use botprof::corpus::{CorpusFormat, SplitSpec};
use botprof::ensemble::{ClassifierConfigs, FfnnConfig, FinalVariant, SgdConfig, SgdLoss, TrainConfig, Unit};
use botprof::features::FeatureConfig;
use botprof::lm_embed::{LmConfig, MixingMode};
use botprof::numnet::LogisticConfig;
use botprof::profiler::Attribute;
use botprof::syngen::GenConfig;
use botprof::Parallelism;

use crate::error::CliError;

const DEFAULTS: &[(&str, &str)] = &[
    ("seed", "0"),
    ("parallel", "true"),
    ("corpus", ""),
    ("corpus.format", "auto"),
    ("vectors", ""),
    ("embedder", ""),
    ("model", ""),
    ("split.train_fraction", "0.7"),
    ("split.seed", "0"),
    ("lm.embedding_dim", "64"),
    ("lm.hidden", "64"),
    ("lm.layers", "2"),
    ("lm.epochs", "5"),
    ("lm.lr", "0.005"),
    ("lm.batch", "32"),
    ("lm.min_freq", "2"),
    ("lm.clip", "5"),
    ("lm.lr_final_fraction", "0.1"),
    ("lm.mixing", "learned"),
    ("profile.source", "oracle"),
    ("features.surface", "true"),
    ("features.metadata", "false"),
    ("features.profile", ""),
    ("ffnn.hidden1", "32"),
    ("ffnn.hidden2", "16"),
    ("ffnn.epochs", "10"),
    ("ffnn.lr", "0.003"),
    ("ffnn.batch", "32"),
    ("ffnn.l2", "0.01"),
    ("logreg.epochs", "60"),
    ("logreg.lr", "0.05"),
    ("logreg.batch", "64"),
    ("logreg.l2", "0.0001"),
    ("sgd.loss", "log"),
    ("sgd.epochs", "20"),
    ("sgd.lr", "0.01"),
    ("sgd.l2", "0.0001"),
    ("final", "ffnn"),
    ("multiple.attribute", "gender"),
    ("class_weighting", "false"),
    ("threshold", "0.5"),
    ("unit", "tweet"),
    ("synth.n_accounts", "200"),
    ("synth.tweets_min", "3"),
    ("synth.tweets_max", "6"),
    ("synth.bot_fraction", "0.5"),
    ("synth.separability", "0.6"),
    ("synth.band_conditioning", "1"),
    ("synth.band_priors", "0.5,0.5,0.5,0.5"),
    ("synth.vocab_size", "400"),
    ("synth.vectors_dim", "48"),
    ("synth.format", "csv"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileSourceKind {
    Oracle,
    Heuristic,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            values: DEFAULTS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        }
    }
}

fn strip_comment(line: &str) -> &str {
    line.split_once('#').map_or(line, |(a, _)| a)
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let key = key.trim();
        match self.values.get_mut(key) {
            Some(v) => {
                *v = value.trim().to_string();
                Ok(())
            }
            None => Err(CliError::Usage(format!("unknown config key `{key}`"))),
        }
    }

    pub fn apply_assignment(&mut self, assignment: &str) -> Result<(), CliError> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("expected key=value, got `{assignment}`")))?;
        self.set(k, v)
    }

    /// Applies a config file: one `key=value` per line, `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        for (i, raw) in text.lines().enumerate() {
            let line = strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            self.apply_assignment(line)
                .map_err(|e| CliError::Usage(format!("line {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        self.apply_text(&text)
    }

    /// Sorted `key=value` lines.
    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.values {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).expect("known key")
    }

    fn parse<T: FromStr>(&self, key: &str) -> Result<T, CliError> {
        let v = self.raw(key);
        v.parse()
            .map_err(|_| CliError::Usage(format!("invalid value `{v}` for `{key}`")))
    }

    fn flag(&self, key: &str) -> Result<bool, CliError> {
        match self.raw(key) {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            v => Err(CliError::Usage(format!("invalid boolean `{v}` for `{key}`"))),
        }
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        let v = self.raw(key);
        (!v.is_empty()).then(|| PathBuf::from(v))
    }

    pub fn require_path(&self, key: &str) -> Result<PathBuf, CliError> {
        self.path(key)
            .ok_or_else(|| CliError::Usage(format!("`{key}` must be set")))
    }

    pub fn seed(&self) -> Result<u64, CliError> {
        self.parse("seed")
    }

    pub fn parallelism(&self) -> Result<Parallelism, CliError> {
        Ok(Parallelism::from_flag(self.flag("parallel")?))
    }

    pub fn corpus_format(&self, path: &Path) -> Result<CorpusFormat, CliError> {
        match self.raw("corpus.format") {
            "auto" => CorpusFormat::from_path(path)
                .ok_or_else(|| CliError::Usage(format!("cannot infer corpus format of {}", path.display()))),
            v => v.parse().map_err(CliError::Usage),
        }
    }

    pub fn split(&self) -> Result<SplitSpec, CliError> {
        Ok(SplitSpec::random(self.parse("split.train_fraction")?, self.parse("split.seed")?))
    }

    pub fn lm(&self) -> Result<LmConfig, CliError> {
        let cfg = LmConfig {
            embedding_dim: self.parse("lm.embedding_dim")?,
            hidden: self.parse("lm.hidden")?,
            layers: self.parse("lm.layers")?,
            epochs: self.parse("lm.epochs")?,
            lr: self.parse("lm.lr")?,
            batch: self.parse("lm.batch")?,
            min_freq: self.parse("lm.min_freq")?,
            clip: self.parse("lm.clip")?,
            lr_final_fraction: self.parse("lm.lr_final_fraction")?,
            seed: self.seed()?,
        };
        cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(cfg)
    }

    pub fn mixing(&self) -> Result<MixingMode, CliError> {
        match self.raw("lm.mixing") {
            "learned" => Ok(MixingMode::Learned),
            "uniform" => Ok(MixingMode::Uniform),
            v => Err(CliError::Usage(format!("invalid value `{v}` for `lm.mixing`"))),
        }
    }

    pub fn profile_source(&self) -> Result<ProfileSourceKind, CliError> {
        match self.raw("profile.source") {
            "oracle" => Ok(ProfileSourceKind::Oracle),
            "heuristic" => Ok(ProfileSourceKind::Heuristic),
            v => Err(CliError::Usage(format!("invalid value `{v}` for `profile.source`"))),
        }
    }

    pub fn unit(&self) -> Result<Unit, CliError> {
        match self.raw("unit") {
            "tweet" => Ok(Unit::Tweet),
            "account" => Ok(Unit::Account),
            v => Err(CliError::Usage(format!("invalid value `{v}` for `unit`"))),
        }
    }

    fn attribute(&self, key: &str, v: &str) -> Result<Attribute, CliError> {
        Attribute::parse(v.trim()).map_err(|_| CliError::Usage(format!("invalid attribute `{v}` for `{key}`")))
    }

    pub fn logistic(&self) -> Result<LogisticConfig, CliError> {
        Ok(LogisticConfig {
            epochs: self.parse("logreg.epochs")?,
            lr: self.parse("logreg.lr")?,
            batch: self.parse("logreg.batch")?,
            l2: self.parse("logreg.l2")?,
            seed: self.seed()?,
        })
    }

    pub fn train(&self) -> Result<TrainConfig, CliError> {
        let profile = self
            .raw("features.profile")
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| self.attribute("features.profile", s))
            .collect::<Result<Vec<_>, _>>()?;
        let sgd_loss = match self.raw("sgd.loss") {
            "log" => SgdLoss::Log,
            "modified_huber" => SgdLoss::ModifiedHuber,
            v => return Err(CliError::Usage(format!("invalid value `{v}` for `sgd.loss`"))),
        };
        let threshold: f64 = self.parse("threshold")?;
        if !(0.0..=1.0).contains(&threshold) {
            return Err(CliError::Usage(format!("threshold {threshold} outside [0, 1]")));
        }
        Ok(TrainConfig {
            features: FeatureConfig {
                surface: self.flag("features.surface")?,
                metadata: self.flag("features.metadata")?,
                profile,
            },
            classifiers: ClassifierConfigs {
                ffnn: FfnnConfig {
                    hidden1: self.parse("ffnn.hidden1")?,
                    hidden2: self.parse("ffnn.hidden2")?,
                    epochs: self.parse("ffnn.epochs")?,
                    lr: self.parse("ffnn.lr")?,
                    batch: self.parse("ffnn.batch")?,
                    l2: self.parse("ffnn.l2")?,
                    seed: self.seed()?,
                },
                logistic: self.logistic()?,
                sgd: SgdConfig {
                    loss: sgd_loss,
                    epochs: self.parse("sgd.epochs")?,
                    lr: self.parse("sgd.lr")?,
                    l2: self.parse("sgd.l2")?,
                    seed: self.seed()?,
                },
            },
            final_variant: FinalVariant::parse(self.raw("final")).map_err(CliError::Usage)?,
            multiple_attribute: self.attribute("multiple.attribute", self.raw("multiple.attribute"))?,
            class_weighting: self.flag("class_weighting")?,
            threshold,
            seed: self.seed()?,
            parallelism: self.parallelism()?,
        })
    }

    pub fn synth(&self) -> Result<GenConfig, CliError> {
        let priors: Vec<f64> = self
            .raw("synth.band_priors")
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| CliError::Usage("`synth.band_priors` must be four numbers".into()))?;
        let band_priors: [f64; 4] = priors
            .try_into()
            .map_err(|_| CliError::Usage("`synth.band_priors` must be four numbers".into()))?;
        Ok(GenConfig {
            n_accounts: self.parse("synth.n_accounts")?,
            tweets_min: self.parse("synth.tweets_min")?,
            tweets_max: self.parse("synth.tweets_max")?,
            bot_fraction: self.parse("synth.bot_fraction")?,
            separability: self.parse("synth.separability")?,
            band_conditioning: self.parse("synth.band_conditioning")?,
            band_priors,
            vocab_size: self.parse("synth.vocab_size")?,
            seed: self.seed()?,
        })
    }

    pub fn synth_vectors_dim(&self) -> Result<usize, CliError> {
        self.parse("synth.vectors_dim")
    }

    pub fn synth_format(&self) -> Result<CorpusFormat, CliError> {
        self.raw("synth.format").parse().map_err(CliError::Usage)
    }
}

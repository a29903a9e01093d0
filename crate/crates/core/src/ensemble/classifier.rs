use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::ffnn::{FfnnClassifier, FfnnConfig};
use crate::numnet::loss::{clamp_prob, sigmoid};
use crate::numnet::{LogisticConfig, LogisticRegression, NumError, Params};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SgdLoss {
    Log,
    ModifiedHuber,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub loss: SgdLoss,
    pub epochs: usize,
    pub lr: f64,
    pub l2: f64,
    pub seed: u64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig {
            loss: SgdLoss::Log,
            epochs: 20,
            lr: 0.01,
            l2: 1e-4,
            seed: 0,
        }
    }
}

/// Linear model fitted by plain per-example SGD.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSgd {
    pub w: Vec<f64>,
    pub b: f64,
    pub loss: SgdLoss,
}

impl LinearSgd {
    fn decision(&self, x: &[f64]) -> f64 {
        self.w.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.b
    }

    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        let z = self.decision(x);
        clamp_prob(match self.loss {
            SgdLoss::Log => sigmoid(z),
            SgdLoss::ModifiedHuber => ((z + 1.0) / 2.0).clamp(0.0, 1.0),
        })
    }

    pub fn train(xs: &[Vec<f64>], ys: &[f64], weights: &[f64], cfg: &SgdConfig) -> Result<Self, NumError> {
        let dim = xs.first().map_or(0, Vec::len);
        let mut m = LinearSgd {
            w: vec![0.0; dim],
            b: 0.0,
            loss: cfg.loss,
        };
        let mut r = rng::seeded(rng::derive_str(cfg.seed, "sgd-shuffle"));
        let mut order: Vec<usize> = (0..xs.len()).collect();
        for _ in 0..cfg.epochs {
            order.shuffle(&mut r);
            for &i in &order {
                let z = m.decision(&xs[i]);
                // Derivative of the loss with respect to z, labels in {-1, +1}.
                let s = 2.0 * ys[i] - 1.0;
                let dz = match cfg.loss {
                    SgdLoss::Log => sigmoid(z) - ys[i],
                    SgdLoss::ModifiedHuber => {
                        let margin = s * z;
                        if margin >= 1.0 {
                            0.0
                        } else if margin >= -1.0 {
                            -2.0 * s * (1.0 - margin)
                        } else {
                            -4.0 * s
                        }
                    }
                } * weights[i];
                for (w, v) in m.w.iter_mut().zip(&xs[i]) {
                    *w -= cfg.lr * (dz * v + cfg.l2 * *w);
                }
                m.b -= cfg.lr * dz;
            }
        }
        if !(m.w.iter().all(|v| v.is_finite()) && m.b.is_finite()) {
            return Err(NumError::NonFiniteValue { op: "sgd_train" });
        }
        Ok(m)
    }
}

/// Final-stage classifier choices. New variants plug in here and in
/// [`fit_classifier`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinalVariant {
    #[default]
    Ffnn,
    LogisticRegression,
    LinearSgd,
}

impl FinalVariant {
    pub fn parse(s: &str) -> Result<Self, String> {
        match s {
            "ffnn" => Ok(FinalVariant::Ffnn),
            "logistic_regression" | "logreg" => Ok(FinalVariant::LogisticRegression),
            "linear_sgd" | "sgd" => Ok(FinalVariant::LinearSgd),
            other => Err(format!("unknown final classifier `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum Classifier {
    LogisticRegression(LogisticRegression),
    Ffnn(FfnnClassifier),
    LinearSgd(LinearSgd),
}

impl Classifier {
    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        match self {
            Classifier::LogisticRegression(m) => clamp_prob(m.predict_proba(x)),
            Classifier::Ffnn(m) => m.predict_proba(x),
            Classifier::LinearSgd(m) => m.predict_proba(x),
        }
    }

    pub fn all_finite(&self) -> bool {
        match self {
            Classifier::LogisticRegression(m) => m.all_finite(),
            Classifier::Ffnn(m) => m.all_finite(),
            Classifier::LinearSgd(m) => m.w.iter().all(|v| v.is_finite()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassifierConfigs {
    pub ffnn: FfnnConfig,
    pub logistic: LogisticConfig,
    pub sgd: SgdConfig,
}

pub fn fit_classifier(
    variant: FinalVariant,
    xs: &[Vec<f64>],
    ys: &[f64],
    weights: &[f64],
    cfgs: &ClassifierConfigs,
    seed: u64,
) -> Result<Classifier, NumError> {
    Ok(match variant {
        FinalVariant::Ffnn => Classifier::Ffnn(FfnnClassifier::train(xs, ys, weights, &FfnnConfig { seed, ..cfgs.ffnn })?),
        FinalVariant::LogisticRegression => Classifier::LogisticRegression(LogisticRegression::train(
            xs,
            ys,
            weights,
            &LogisticConfig { seed, ..cfgs.logistic },
        )?),
        FinalVariant::LinearSgd => {
            Classifier::LinearSgd(LinearSgd::train(xs, ys, weights, &SgdConfig { seed, ..cfgs.sgd })?)
        }
    })
}

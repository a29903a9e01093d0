use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::loss::{bce_with_logit, sigmoid};
use super::tensor::dot;
use super::{check_len, AdamConfig, AdamState, NumError, Params, Result, Tensor};
use crate::rng;

/// `p(y = 1 | x) = sigmoid(w·x + b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticRegression {
    pub w: Tensor,
    pub b: Tensor,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch: usize,
    pub l2: f64,
    pub seed: u64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig {
            epochs: 60,
            lr: 0.05,
            batch: 64,
            l2: 1e-4,
            seed: 0,
        }
    }
}

impl LogisticRegression {
    pub fn zeros(dim: usize) -> Self {
        LogisticRegression {
            w: Tensor::zeros(&[dim]),
            b: Tensor::zeros(&[1]),
        }
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    pub fn logit(&self, x: &[f64]) -> f64 {
        dot(self.w.data(), x) + self.b.data()[0]
    }

    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        sigmoid(self.logit(x))
    }

    /// Weighted mean BCE plus `l2/2 ||w||²`.
    pub fn loss(&self, xs: &[Vec<f64>], ys: &[f64], weights: &[f64], l2: f64) -> f64 {
        let total: f64 = weights.iter().sum();
        let data: f64 = xs
            .iter()
            .zip(ys)
            .zip(weights)
            .map(|((x, &y), &wt)| wt * bce_with_logit(self.logit(x), y))
            .sum();
        data / total + 0.5 * l2 * self.w.sum_sq()
    }

    fn accumulate(&self, x: &[f64], y: f64, wt: f64, grad: &mut LogisticRegression) {
        let d = wt * (self.predict_proba(x) - y);
        for (g, v) in grad.w.data_mut().iter_mut().zip(x) {
            *g += d * v;
        }
        grad.b.data_mut()[0] += d;
    }

    /// Mini-batch Adam on [`Self::loss`]. `weights` are per-example loss weights.
    pub fn train(xs: &[Vec<f64>], ys: &[f64], weights: &[f64], cfg: &LogisticConfig) -> Result<Self> {
        let dim = xs.first().map(|x| x.len()).unwrap_or(0);
        check_len("logistic_train", xs.len(), ys.len())?;
        check_len("logistic_train", xs.len(), weights.len())?;
        if xs.is_empty() || cfg.batch == 0 {
            return Err(NumError::InvalidConfig("logistic regression needs data and batch > 0".into()));
        }
        for x in xs {
            check_len("logistic_train", dim, x.len())?;
        }
        let mut model = LogisticRegression::zeros(dim);
        let mut opt = AdamState::new(AdamConfig::with_lr(cfg.lr), &model.params());
        let mut rng = rng::seeded(cfg.seed);
        let mut order: Vec<usize> = (0..xs.len()).collect();
        let mean_w = weights.iter().sum::<f64>() / xs.len() as f64;
        let mut grad = model.zeros_like();
        for _ in 0..cfg.epochs {
            order.shuffle(&mut rng);
            for chunk in order.chunks(cfg.batch) {
                grad.zero();
                for &i in chunk {
                    model.accumulate(&xs[i], ys[i], weights[i], &mut grad);
                }
                grad.scale_all(1.0 / (chunk.len() as f64 * mean_w));
                grad.w.axpy(cfg.l2, &model.w)?;
                opt.step(model.params_mut(), grad.params())?;
            }
        }
        if !model.all_finite() {
            return Err(NumError::NonFiniteValue { op: "logistic_train" });
        }
        Ok(model)
    }

    /// Exact full-data gradient of [`Self::loss`], used to check `accumulate`.
    pub fn full_gradient(&self, xs: &[Vec<f64>], ys: &[f64], weights: &[f64], l2: f64) -> Self {
        let total: f64 = weights.iter().sum();
        let mut g = self.zeros_like();
        for ((x, &y), &wt) in xs.iter().zip(ys).zip(weights) {
            self.accumulate(x, y, wt, &mut g);
        }
        g.scale_all(1.0 / total);
        g.w.axpy(l2, &self.w).expect("same shape");
        g
    }
}

impl Params for LogisticRegression {
    fn params(&self) -> Vec<&Tensor> {
        vec![&self.w, &self.b]
    }
    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.w, &mut self.b]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numnet::{grad_check, GradCheckConfig};
    use rand::Rng;

    fn blobs(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut r = rng::seeded(seed);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..n {
            let y = (i % 2) as f64;
            let c = if y == 1.0 { 1.5 } else { -1.5 };
            xs.push(vec![c + r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)]);
            ys.push(y);
        }
        (xs, ys)
    }

    #[test]
    fn gradient_is_exact() {
        let (xs, ys) = blobs(20, 1);
        let w = vec![1.0; 20];
        let mut m = LogisticRegression::zeros(2);
        m.w.data_mut().copy_from_slice(&[0.3, -0.2]);
        let g = m.full_gradient(&xs, &ys, &w, 0.1);
        grad_check(&m, &g, |m| m.loss(&xs, &ys, &w, 0.1), &GradCheckConfig::default()).unwrap();
    }

    #[test]
    fn separates_blobs_deterministically() {
        let (xs, ys) = blobs(200, 2);
        let w = vec![1.0; 200];
        let cfg = LogisticConfig::default();
        let a = LogisticRegression::train(&xs, &ys, &w, &cfg).unwrap();
        let b = LogisticRegression::train(&xs, &ys, &w, &cfg).unwrap();
        assert_eq!(a, b);
        let acc = xs.iter().zip(&ys).filter(|(x, &y)| (a.predict_proba(x) >= 0.5) == (y == 1.0)).count();
        assert!(acc >= 190, "accuracy {acc}/200");
    }
}

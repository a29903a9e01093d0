use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::numnet::loss::{bce_with_logit, clamp_prob, sigmoid};
use crate::numnet::{check_len, Activation, AdamConfig, AdamState, DenseLayer, NumError, Params, Result, Tensor};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FfnnConfig {
    pub hidden1: usize,
    pub hidden2: usize,
    pub epochs: usize,
    pub lr: f64,
    pub batch: usize,
    pub l2: f64,
    pub seed: u64,
}

impl Default for FfnnConfig {
    fn default() -> Self {
        FfnnConfig {
            hidden1: 32,
            hidden2: 16,
            epochs: 10,
            lr: 3e-3,
            batch: 32,
            l2: 1e-2,
            seed: 0,
        }
    }
}

/// Two ReLU hidden layers and a single sigmoid output unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FfnnClassifier {
    pub l1: DenseLayer,
    pub l2: DenseLayer,
    pub out: DenseLayer,
}

impl FfnnClassifier {
    pub fn init(input: usize, cfg: &FfnnConfig) -> Self {
        let mut r = rng::seeded(rng::derive_str(cfg.seed, "ffnn-init"));
        FfnnClassifier {
            l1: DenseLayer::init(input, cfg.hidden1, Activation::Relu, &mut r),
            l2: DenseLayer::init(cfg.hidden1, cfg.hidden2, Activation::Relu, &mut r),
            out: DenseLayer::init(cfg.hidden2, 1, Activation::Identity, &mut r),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.l1.input_dim()
    }

    pub fn logit(&self, x: &[f64]) -> f64 {
        let a1 = self.l1.forward_slice(x);
        let a2 = self.l2.forward_slice(&a1);
        self.out.forward_slice(&a2)[0]
    }

    /// Bot probability, kept strictly inside (0, 1).
    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        clamp_prob(sigmoid(self.logit(x)))
    }

    /// Weighted BCE of one example; gradients are added into `grad`.
    pub fn example_grad(&self, x: &[f64], y: f64, weight: f64, grad: &mut FfnnClassifier) -> f64 {
        let a1 = self.l1.forward_slice(x);
        let a2 = self.l2.forward_slice(&a1);
        let z = self.out.forward_slice(&a2);
        let dz = [weight * (sigmoid(z[0]) - y)];
        let d2 = self.out.backward_slice(&a2, &z, &dz, &mut grad.out);
        let d1 = self.l2.backward_slice(&a1, &a2, &d2, &mut grad.l2);
        self.l1.backward_slice(x, &a1, &d1, &mut grad.l1);
        weight * bce_with_logit(z[0], y)
    }

    /// Mean weighted BCE plus `l2/2` times the squared weight norm (biases excluded).
    pub fn loss(&self, xs: &[Vec<f64>], ys: &[f64], weights: &[f64], l2: f64) -> f64 {
        let total: f64 = weights.iter().sum();
        let data: f64 = xs
            .iter()
            .zip(ys)
            .zip(weights)
            .map(|((x, &y), &w)| w * bce_with_logit(self.logit(x), y))
            .sum();
        data / total + 0.5 * l2 * (self.l1.w.sum_sq() + self.l2.w.sum_sq() + self.out.w.sum_sq())
    }

    /// Exact gradient of [`Self::loss`].
    pub fn full_gradient(&self, xs: &[Vec<f64>], ys: &[f64], weights: &[f64], l2: f64) -> FfnnClassifier {
        let total: f64 = weights.iter().sum();
        let mut g = self.zeros_like();
        for ((x, &y), &w) in xs.iter().zip(ys).zip(weights) {
            self.example_grad(x, y, w, &mut g);
        }
        g.scale_all(1.0 / total);
        self.add_weight_decay(&mut g, l2);
        g
    }

    fn add_weight_decay(&self, g: &mut FfnnClassifier, l2: f64) {
        if l2 > 0.0 {
            g.l1.w.axpy(l2, &self.l1.w).expect("same shape");
            g.l2.w.axpy(l2, &self.l2.w).expect("same shape");
            g.out.w.axpy(l2, &self.out.w).expect("same shape");
        }
    }

    pub fn train(xs: &[Vec<f64>], ys: &[f64], weights: &[f64], cfg: &FfnnConfig) -> Result<Self> {
        check_len("ffnn_train", xs.len(), ys.len())?;
        check_len("ffnn_train", xs.len(), weights.len())?;
        if xs.is_empty() || cfg.batch == 0 || cfg.hidden1 == 0 || cfg.hidden2 == 0 {
            return Err(NumError::InvalidConfig("ffnn needs data, batch > 0 and non-empty hidden layers".into()));
        }
        let dim = xs[0].len();
        for x in xs {
            check_len("ffnn_train", dim, x.len())?;
        }
        let mut model = FfnnClassifier::init(dim, cfg);
        let mut opt = AdamState::new(AdamConfig::with_lr(cfg.lr), &model.params());
        let mut r = rng::seeded(rng::derive_str(cfg.seed, "ffnn-shuffle"));
        let mut order: Vec<usize> = (0..xs.len()).collect();
        let mean_w = weights.iter().sum::<f64>() / xs.len() as f64;
        let mut grad = model.zeros_like();
        for _ in 0..cfg.epochs {
            order.shuffle(&mut r);
            for chunk in order.chunks(cfg.batch) {
                grad.zero();
                for &i in chunk {
                    model.example_grad(&xs[i], ys[i], weights[i], &mut grad);
                }
                grad.scale_all(1.0 / (chunk.len() as f64 * mean_w));
                model.add_weight_decay(&mut grad, cfg.l2);
                opt.step(model.params_mut(), grad.params())?;
            }
        }
        if !model.all_finite() {
            return Err(NumError::NonFiniteValue { op: "ffnn_train" });
        }
        Ok(model)
    }
}

impl Params for FfnnClassifier {
    fn params(&self) -> Vec<&Tensor> {
        let mut v = self.l1.params();
        v.extend(self.l2.params());
        v.extend(self.out.params());
        v
    }
    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v = self.l1.params_mut();
        v.extend(self.l2.params_mut());
        v.extend(self.out.params_mut());
        v
    }
}

use serde::{Deserialize, Serialize};

use super::LmError;
use crate::numnet::loss::{bce_with_logit, sigmoid, softmax_in_place};
use crate::numnet::{AdamConfig, AdamState, Params, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MixingMode {
    Uniform,
    #[default]
    Learned,
}

/// Layer combination `gamma * Σ_l softmax(s)_l * layer_l`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mixing {
    pub s: Vec<f64>,
    pub gamma: f64,
}

impl Mixing {
    pub fn uniform(n_layers: usize) -> Self {
        Mixing {
            s: vec![0.0; n_layers],
            gamma: 1.0,
        }
    }

    pub fn weights(&self) -> Vec<f64> {
        let mut a = self.s.clone();
        softmax_in_place(&mut a);
        a
    }

    pub fn mix(&self, layers: &[&[f64]]) -> Vec<f64> {
        debug_assert_eq!(layers.len(), self.s.len());
        let a = self.weights();
        let mut out = vec![0.0; layers.first().map_or(0, |l| l.len())];
        for (w, layer) in a.iter().zip(layers) {
            for (o, v) in out.iter_mut().zip(*layer) {
                *o += self.gamma * w * v;
            }
        }
        out
    }
}

/// Logistic probe over the mixed vector; only `s` and `gamma` are kept.
#[derive(Debug, Clone)]
struct Probe {
    s: Tensor,
    gamma: Tensor,
    w: Tensor,
    b: Tensor,
}

impl Params for Probe {
    fn params(&self) -> Vec<&Tensor> {
        vec![&self.s, &self.gamma, &self.w, &self.b]
    }
    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.s, &mut self.gamma, &mut self.w, &mut self.b]
    }
}

const PROBE_L2: f64 = 1e-3;

impl Probe {
    fn mixing(&self) -> Mixing {
        Mixing {
            s: self.s.data().to_vec(),
            gamma: self.gamma.data()[0],
        }
    }

    fn loss_and_grad(&self, xs: &[Vec<Vec<f64>>], ys: &[f64], grad: Option<&mut Probe>) -> f64 {
        let mix = self.mixing();
        let a = mix.weights();
        let gamma = mix.gamma;
        let n = xs.len() as f64;
        let mut loss = 0.0;
        let mut grad = grad;
        for (layers, &y) in xs.iter().zip(ys) {
            let refs: Vec<&[f64]> = layers.iter().map(Vec::as_slice).collect();
            let mixed = mix.mix(&refs);
            let wu: f64 = self.w.data().iter().zip(&mixed).map(|(w, m)| w * m).sum();
            let z = wu + self.b.data()[0];
            loss += bce_with_logit(z, y) / n;
            if let Some(g) = grad.as_deref_mut() {
                let dz = (sigmoid(z) - y) / n;
                for (gw, m) in g.w.data_mut().iter_mut().zip(&mixed) {
                    *gw += dz * m;
                }
                g.b.data_mut()[0] += dz;
                // mixed = gamma * u, so w·u = wu / gamma.
                let wdot: Vec<f64> = layers
                    .iter()
                    .map(|l| l.iter().zip(self.w.data()).map(|(v, w)| v * w).sum())
                    .collect();
                let u_dot: f64 = a.iter().zip(&wdot).map(|(ai, d)| ai * d).sum();
                g.gamma.data_mut()[0] += dz * u_dot;
                let da: Vec<f64> = wdot.iter().map(|d| dz * gamma * d).collect();
                let mean_da: f64 = a.iter().zip(&da).map(|(ai, d)| ai * d).sum();
                for ((gs, ai), d) in g.s.data_mut().iter_mut().zip(&a).zip(&da) {
                    *gs += ai * (d - mean_da);
                }
            }
        }
        loss += 0.5 * PROBE_L2 * self.w.sum_sq();
        if let Some(g) = grad {
            g.w.axpy(PROBE_L2, &self.w).expect("same shape");
        }
        loss
    }
}

/// Fits the mixing scalars with a logistic probe on per-tweet layer means
/// (`xs[k][l]` is the mean layer-`l` vector of tweet `k`) against binary labels.
pub fn fit_mixing(xs: &[Vec<Vec<f64>>], ys: &[f64], epochs: usize, lr: f64) -> Result<Mixing, LmError> {
    let first = xs.first().ok_or(LmError::EmptyCorpus)?;
    let (layers, width) = (first.len(), first[0].len());
    let mut probe = Probe {
        s: Tensor::zeros(&[layers]),
        gamma: Tensor::vector(vec![1.0]),
        w: Tensor::zeros(&[width]),
        b: Tensor::zeros(&[1]),
    };
    let mut opt = AdamState::new(AdamConfig::with_lr(lr), &probe.params());
    let mut grad = probe.zeros_like();
    for _ in 0..epochs {
        grad.zero();
        probe.loss_and_grad(xs, ys, Some(&mut grad));
        opt.step(probe.params_mut(), grad.params())?;
    }
    if !probe.all_finite() {
        return Err(crate::numnet::NumError::NonFiniteValue { op: "fit_mixing" }.into());
    }
    Ok(probe.mixing())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numnet::{grad_check, GradCheckConfig};
    use crate::rng;
    use rand::Rng;

    fn data(seed: u64) -> (Vec<Vec<Vec<f64>>>, Vec<f64>) {
        let mut r = rng::seeded(seed);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for k in 0..60 {
            let y = (k % 2) as f64;
            // Only layer 2 carries the label.
            let noise = |r: &mut rng::Rng| (0..4).map(|_| r.random_range(-1.0..1.0)).collect::<Vec<f64>>();
            let mut l2 = noise(&mut r);
            l2[0] += if y == 1.0 { 2.0 } else { -2.0 };
            xs.push(vec![noise(&mut r), noise(&mut r), l2]);
            ys.push(y);
        }
        (xs, ys)
    }

    #[test]
    fn uniform_mix_is_plain_average() {
        let m = Mixing::uniform(3);
        let out = m.mix(&[&[3.0, 0.0], &[0.0, 3.0], &[3.0, 3.0]]);
        assert!((out[0] - 2.0).abs() < 1e-15 && (out[1] - 2.0).abs() < 1e-15);
        assert!((m.weights().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn probe_gradient_is_exact() {
        let (xs, ys) = data(1);
        let mut r = rng::seeded(2);
        let probe = Probe {
            s: Tensor::vector(vec![0.2, -0.1, 0.4]),
            gamma: Tensor::vector(vec![1.3]),
            w: Tensor::vector((0..4).map(|_| r.random_range(-1.0..1.0)).collect()),
            b: Tensor::vector(vec![0.1]),
        };
        let mut g = probe.zeros_like();
        probe.loss_and_grad(&xs, &ys, Some(&mut g));
        grad_check(&probe, &g, |p| p.loss_and_grad(&xs, &ys, None), &GradCheckConfig::default()).unwrap();
    }

    #[test]
    fn learned_mixing_favours_informative_layer() {
        let (xs, ys) = data(3);
        let m = fit_mixing(&xs, &ys, 200, 0.05).unwrap();
        let a = m.weights();
        assert!(a[2] > a[0] && a[2] > a[1], "{a:?}");
    }
}

use serde::{Deserialize, Serialize};

use super::{NumError, Result, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig {
            lr,
            ..Self::default()
        }
    }
}

/// Bias-corrected Adam. Moment tensors mirror the parameter list given to `new`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl AdamState {
    pub fn new(config: AdamConfig, params: &[&Tensor]) -> Self {
        AdamState {
            config,
            step: 0,
            m: params.iter().map(|p| p.zeros_like()).collect(),
            v: params.iter().map(|p| p.zeros_like()).collect(),
        }
    }

    pub fn step(&mut self, params: Vec<&mut Tensor>, grads: Vec<&Tensor>) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(NumError::ShapeMismatch {
                op: "adam_step",
                expected: vec![self.m.len()],
                got: vec![params.len(), grads.len()],
            });
        }
        for ((p, g), m) in params.iter().zip(&grads).zip(&self.m) {
            if p.shape() != m.shape() || g.shape() != m.shape() {
                return Err(NumError::ShapeMismatch {
                    op: "adam_step",
                    expected: m.shape().to_vec(),
                    got: g.shape().to_vec(),
                });
            }
        }
        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        for (((p, g), m), v) in params.into_iter().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            for (((pv, &gv), mv), vv) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *mv = beta1 * *mv + (1.0 - beta1) * gv;
                *vv = beta2 * *vv + (1.0 - beta2) * gv * gv;
                let m_hat = *mv / bc1;
                let v_hat = *vv / bc2;
                *pv -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> Tensor {
        Tensor::vector(vec![v])
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut p = Tensor::vector(vec![1.0, -2.0, 3.0]);
        let g = p.zeros_like();
        let mut st = AdamState::new(AdamConfig::default(), &[&p]);
        for _ in 0..5 {
            st.step(vec![&mut p], vec![&g]).unwrap();
        }
        assert_eq!(p.data(), &[1.0, -2.0, 3.0]);
    }

    #[test]
    fn first_step_closed_form() {
        let mut p = scalar(0.0);
        let cfg = AdamConfig::with_lr(0.1);
        let mut st = AdamState::new(cfg, &[&p]);
        st.step(vec![&mut p], vec![&scalar(1.0)]).unwrap();
        let expected = -0.1 * (1.0 / (1.0 + cfg.eps));
        assert!((p.data()[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn quadratic_bowl_converges() {
        let mut w = scalar(5.0);
        let mut st = AdamState::new(AdamConfig::with_lr(0.1), &[&w]);
        let mut losses = Vec::new();
        for _ in 0..200 {
            let g = scalar(2.0 * w.data()[0]);
            st.step(vec![&mut w], vec![&g]).unwrap();
            losses.push(w.data()[0].powi(2));
        }
        assert!(w.data()[0].abs() < 0.1, "w = {}", w.data()[0]);
        // Momentum makes Adam overshoot once it reaches the bottom, so the loss is
        // monotone only on the way down: from step 10 until it first falls below 1e-2.
        let settle = losses.iter().position(|&l| l < 1e-2).unwrap();
        assert!(settle > 10);
        for k in 10..settle {
            assert!(losses[k + 1] <= losses[k], "loss rose at step {k}");
        }
    }

    #[test]
    fn shape_mismatch() {
        let mut p = scalar(0.0);
        let mut st = AdamState::new(AdamConfig::default(), &[&p]);
        let g = Tensor::vector(vec![1.0, 2.0]);
        assert!(matches!(st.step(vec![&mut p], vec![&g]), Err(NumError::ShapeMismatch { .. })));
    }
}

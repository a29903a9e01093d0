use rand::Rng;
use serde::{Deserialize, Serialize};

use super::loss::sigmoid;
use super::{check_finite, check_len, init, NumError, Params, Result, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
    Sigmoid,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Sigmoid => sigmoid(z),
        }
    }

    /// Derivative expressed through the activation output `y`.
    #[inline]
    pub fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Sigmoid => y * (1.0 - y),
        }
    }
}

/// `y = act(W x + b)` with `W` of shape `[out, in]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub w: Tensor,
    pub b: Tensor,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn new(w: Tensor, b: Tensor, activation: Activation) -> Result<Self> {
        if w.shape().len() != 2 || b.shape() != [w.rows()] {
            return Err(NumError::ShapeMismatch {
                op: "dense",
                expected: vec![w.rows()],
                got: b.shape().to_vec(),
            });
        }
        Ok(DenseLayer { w, b, activation })
    }

    pub fn init<R: Rng + ?Sized>(input: usize, output: usize, activation: Activation, rng: &mut R) -> Self {
        DenseLayer {
            w: init::uniform_fan_in(&[output, input], input, rng),
            b: Tensor::zeros(&[output]),
            activation,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.w.rows()
    }

    /// Checked forward pass.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        check_len("dense_forward", self.input_dim(), x.len())?;
        check_finite("dense_forward", x.data())?;
        let y = self.forward_slice(x.data());
        check_finite("dense_forward", &y)?;
        Ok(Tensor::vector(y))
    }

    pub fn forward_slice(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.b.data().to_vec();
        self.w.matvec_acc(x, &mut y);
        for v in &mut y {
            *v = self.activation.apply(*v);
        }
        y
    }

    /// Accumulates parameter gradients into `grad` and returns `dL/dx`, given the
    /// forward input `x`, output `y` and upstream gradient `dy`.
    pub fn backward_slice(&self, x: &[f64], y: &[f64], dy: &[f64], grad: &mut DenseLayer) -> Vec<f64> {
        let dz: Vec<f64> = dy
            .iter()
            .zip(y)
            .map(|(&g, &yv)| g * self.activation.derivative_from_output(yv))
            .collect();
        grad.w.outer_acc(&dz, x);
        for (gb, d) in grad.b.data_mut().iter_mut().zip(&dz) {
            *gb += d;
        }
        let mut dx = vec![0.0; x.len()];
        self.w.matvec_t_acc(&dz, &mut dx);
        dx
    }

    /// Checked backward pass returning `(dx, parameter gradients)`.
    pub fn backward(&self, x: &Tensor, dy: &Tensor) -> Result<(Tensor, DenseLayer)> {
        check_len("dense_backward", self.input_dim(), x.len())?;
        check_len("dense_backward", self.output_dim(), dy.len())?;
        check_finite("dense_backward", dy.data())?;
        let y = self.forward(x)?;
        let mut grad = self.zeros_like();
        let dx = self.backward_slice(x.data(), y.data(), dy.data(), &mut grad);
        Ok((Tensor::vector(dx), grad))
    }
}

impl Params for DenseLayer {
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
    use crate::rng;

    #[test]
    fn identity_layer_passes_input_through() {
        let w = Tensor::from_vec(&[2, 2], vec![1., 0., 0., 1.]).unwrap();
        let l = DenseLayer::new(w, Tensor::zeros(&[2]), Activation::Identity).unwrap();
        assert_eq!(l.forward(&Tensor::vector(vec![3., -1.])).unwrap().data(), &[3., -1.]);
    }

    #[test]
    fn relu_clips_negative_preactivation() {
        let w = Tensor::from_vec(&[2, 2], vec![1., 0., 0., 1.]).unwrap();
        let l = DenseLayer::new(w, Tensor::zeros(&[2]), Activation::Relu).unwrap();
        assert_eq!(l.forward(&Tensor::vector(vec![-2., 5.])).unwrap().data(), &[0., 5.]);
    }

    #[test]
    fn errors_on_bad_input() {
        let l = DenseLayer::init(3, 2, Activation::Tanh, &mut rng::seeded(1));
        assert!(matches!(l.forward(&Tensor::vector(vec![1.0; 2])), Err(NumError::ShapeMismatch { .. })));
        assert!(matches!(
            l.forward(&Tensor::vector(vec![1.0, f64::NAN, 0.0])),
            Err(NumError::NonFiniteValue { .. })
        ));
    }

    #[test]
    fn random_4x3_layer_matches_finite_differences() {
        for act in [Activation::Identity, Activation::Tanh, Activation::Sigmoid] {
            let mut r = rng::seeded(42);
            let layer = DenseLayer::init(3, 4, act, &mut r);
            let x = Tensor::vector(vec![0.3, -0.7, 1.1]);
            let dy = Tensor::vector(vec![0.5, -1.0, 0.25, 2.0]);
            // Loss = <dy, f(x)>, so dL/dparams is exactly what backward returns.
            let loss = |l: &DenseLayer| {
                let y = l.forward(&x).unwrap();
                y.data().iter().zip(dy.data()).map(|(a, b)| a * b).sum::<f64>()
            };
            let (dx, grad) = layer.backward(&x, &dy).unwrap();
            let report = grad_check(&layer, &grad, loss, &GradCheckConfig::with_tolerance(1e-6)).unwrap();
            assert!(report.max_rel_err < 1e-6, "{act:?}: {report:?}");

            // Input gradient by central differences as well.
            for i in 0..3 {
                let mut xp = x.clone();
                xp.data_mut()[i] += 1e-5;
                let mut xm = x.clone();
                xm.data_mut()[i] -= 1e-5;
                let f = |x: &Tensor| {
                    layer.forward(x).unwrap().data().iter().zip(dy.data()).map(|(a, b)| a * b).sum::<f64>()
                };
                let num = (f(&xp) - f(&xm)) / 2e-5;
                assert!((num - dx.data()[i]).abs() < 1e-8);
            }
        }
    }
}

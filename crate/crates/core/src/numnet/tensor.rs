use serde::{Deserialize, Serialize};

use super::{NumError, Result};

/// Dense row-major `f64` array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TensorRepr")]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Deserialize)]
struct TensorRepr {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl TryFrom<TensorRepr> for Tensor {
    type Error = NumError;
    fn try_from(r: TensorRepr) -> Result<Self> {
        Tensor::from_vec(&r.shape, r.data)
    }
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(NumError::ShapeMismatch {
                op: "tensor",
                expected: shape.to_vec(),
                got: vec![data.len()],
            });
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Tensor {
            shape: vec![data.len()],
            data,
        }
    }

    pub fn zeros_like(&self) -> Self {
        Tensor::zeros(&self.shape)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rows(&self) -> usize {
        self.shape.first().copied().unwrap_or(0)
    }

    pub fn cols(&self) -> usize {
        if self.shape.len() < 2 {
            1
        } else {
            self.shape[1..].iter().product()
        }
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let c = self.cols();
        &self.data[r * c..(r + 1) * c]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        let c = self.cols();
        &mut self.data[r * c..(r + 1) * c]
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &Tensor) -> Result<()> {
        if self.shape != other.shape {
            return Err(NumError::ShapeMismatch {
                op: "axpy",
                expected: self.shape.clone(),
                got: other.shape.clone(),
            });
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
        Ok(())
    }

    pub fn scale(&mut self, alpha: f64) {
        self.data.iter_mut().for_each(|x| *x *= alpha);
    }

    pub fn sum_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    /// `out = W x` for a 2-D tensor `W`.
    pub fn matvec_into(&self, x: &[f64], out: &mut [f64]) {
        let c = self.cols();
        debug_assert_eq!(x.len(), c);
        debug_assert_eq!(out.len(), self.rows());
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(c)) {
            *o = dot(row, x);
        }
    }

    /// `out += W x`.
    pub fn matvec_acc(&self, x: &[f64], out: &mut [f64]) {
        let c = self.cols();
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(c)) {
            *o += dot(row, x);
        }
    }

    /// `out += Wᵀ v`.
    pub fn matvec_t_acc(&self, v: &[f64], out: &mut [f64]) {
        let c = self.cols();
        debug_assert_eq!(out.len(), c);
        for (&vi, row) in v.iter().zip(self.data.chunks_exact(c)) {
            if vi != 0.0 {
                for (o, w) in out.iter_mut().zip(row) {
                    *o += vi * w;
                }
            }
        }
    }

    /// `self += a bᵀ`.
    pub fn outer_acc(&mut self, a: &[f64], b: &[f64]) {
        let c = self.cols();
        debug_assert_eq!(b.len(), c);
        for (&ai, row) in a.iter().zip(self.data.chunks_exact_mut(c)) {
            if ai != 0.0 {
                for (r, bj) in row.iter_mut().zip(b) {
                    *r += ai * bj;
                }
            }
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A model (or a gradient of one) exposed as an ordered list of tensors.
///
/// Gradients use the same type as the model, so `params()` on a model and on its
/// gradient line up index by index.
pub trait Params {
    fn params(&self) -> Vec<&Tensor>;
    fn params_mut(&mut self) -> Vec<&mut Tensor>;

    fn num_params(&self) -> usize {
        self.params().iter().map(|t| t.len()).sum()
    }

    fn zero(&mut self) {
        self.params_mut().into_iter().for_each(|t| t.fill(0.0));
    }

    fn zeros_like(&self) -> Self
    where
        Self: Clone,
    {
        let mut z = self.clone();
        z.zero();
        z
    }

    /// `self += alpha * other` over every tensor.
    fn add_scaled(&mut self, alpha: f64, other: &Self) -> Result<()> {
        for (a, b) in self.params_mut().into_iter().zip(other.params()) {
            a.axpy(alpha, b)?;
        }
        Ok(())
    }

    fn all_finite(&self) -> bool {
        self.params().iter().all(|t| t.is_finite())
    }

    fn global_norm(&self) -> f64 {
        self.params().iter().map(|t| t.sum_sq()).sum::<f64>().sqrt()
    }

    fn scale_all(&mut self, alpha: f64) {
        self.params_mut().into_iter().for_each(|t| t.scale(alpha));
    }
}

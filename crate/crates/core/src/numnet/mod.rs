//! Numerical core: tensors, dense and LSTM layers with exact backward passes,
//! losses, Adam, logistic regression, seeded initialization, gradient checking
//! and checkpoints.
//!
//! Everything is `f64`. There is no autodiff graph; each layer implements its own
//! backward pass and [`gradcheck`] verifies it against central differences.

mod adam;
pub mod checkpoint;
mod dense;
pub mod gradcheck;
mod init;
pub mod loss;
mod logistic;
mod lstm;
mod standardize;
mod tensor;

use thiserror::Error;

pub use adam::{AdamConfig, AdamState};
pub use dense::{Activation, DenseLayer};
pub use gradcheck::{grad_check, GradCheckConfig, GradCheckReport};
pub use init::{uniform_fan_in, uniform_tensor};
pub use logistic::{LogisticConfig, LogisticRegression};
pub use lstm::{LstmCell, LstmTrace};
pub use standardize::Standardizer;
pub use tensor::{Params, Tensor};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumError {
    #[error("{op}: shape mismatch, expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        op: &'static str,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("{op}: non-finite value")]
    NonFiniteValue { op: &'static str },
    #[error(
        "gradient check failed: tensor {tensor} index {index}: analytic {analytic:e} vs numeric {numeric:e} (rel. err. {rel_err:e} > {tolerance:e})"
    )]
    ToleranceExceeded {
        tensor: usize,
        index: usize,
        analytic: f64,
        numeric: f64,
        rel_err: f64,
        tolerance: f64,
    },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

pub type Result<T> = std::result::Result<T, NumError>;

pub fn check_finite(op: &'static str, xs: &[f64]) -> Result<()> {
    if xs.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(NumError::NonFiniteValue { op })
    }
}

pub fn check_len(op: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(NumError::ShapeMismatch {
            op,
            expected: vec![expected],
            got: vec![got],
        })
    }
}


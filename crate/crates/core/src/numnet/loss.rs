//! Softmax and likelihood losses, stabilized by max-subtraction and by clamping
//! probabilities to `[PROB_FLOOR, 1 - PROB_FLOOR]`.

use super::{check_finite, NumError, Result};

pub const PROB_FLOOR: f64 = 1e-12;

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR)
}

pub fn softmax(z: &[f64]) -> Result<Vec<f64>> {
    check_finite("softmax", z)?;
    let mut out = z.to_vec();
    softmax_in_place(&mut out);
    Ok(out)
}

pub fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

/// `log softmax(z)[target]`, computed without forming probabilities.
pub fn log_softmax_at(z: &[f64], target: usize) -> f64 {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    z[target] - lse
}

/// `-ln p[target]` for a probability vector.
pub fn cross_entropy(probs: &[f64], target: usize) -> Result<f64> {
    check_finite("cross_entropy", probs)?;
    let p = *probs.get(target).ok_or(NumError::ShapeMismatch {
        op: "cross_entropy",
        expected: vec![probs.len()],
        got: vec![target],
    })?;
    Ok(-clamp_prob(p).ln())
}

/// `-(y ln p + (1 - y) ln(1 - p))`.
pub fn binary_cross_entropy(p: f64, y: f64) -> Result<f64> {
    if !p.is_finite() || !y.is_finite() {
        return Err(NumError::NonFiniteValue {
            op: "binary_cross_entropy",
        });
    }
    let p = clamp_prob(p);
    Ok(-(y * p.ln() + (1.0 - y) * (1.0 - p).ln()))
}

/// BCE taken on the logit, stable for large |z|: `softplus(z) - y z`.
pub fn bce_with_logit(z: f64, y: f64) -> f64 {
    let softplus = if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() };
    softplus - y * z
}

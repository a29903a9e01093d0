//! Central-difference gradient checking on a seeded sample of coordinates.

use rand::seq::index;

use super::{NumError, Params, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckConfig {
    pub step: f64,
    pub tolerance: f64,
    pub max_samples: usize,
    pub seed: u64,
    /// Lower bound on the denominator of the relative error, so coordinates whose
    /// true gradient is ~0 are judged on absolute error instead.
    pub floor: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            step: 1e-5,
            tolerance: 1e-5,
            max_samples: 200,
            seed: 0,
            floor: 1e-7,
        }
    }
}

impl GradCheckConfig {
    pub fn with_tolerance(tolerance: f64) -> Self {
        GradCheckConfig {
            tolerance,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub worst_tensor: usize,
    pub worst_index: usize,
    pub checked: usize,
}

pub fn relative_error(a: f64, n: f64, floor: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(floor)
}

/// Bound on the rounding error of `(lp - lm) / (2 step)` itself: each loss value
/// is only known to a few ulps, which matters when the loss is large and the
/// gradient coordinate tiny.
fn difference_noise(lp: f64, lm: f64, step: f64) -> f64 {
    4.0 * f64::EPSILON * (lp.abs() + lm.abs()) / (2.0 * step)
}

/// Compares `analytic` (laid out like `model`) against central differences of
/// `loss`. Returns `ToleranceExceeded` for the worst coordinate if it is over the
/// tolerance.
pub fn grad_check<M, F>(model: &M, analytic: &M, loss: F, cfg: &GradCheckConfig) -> Result<GradCheckReport>
where
    M: Params + Clone,
    F: Fn(&M) -> f64,
{
    let sizes: Vec<usize> = model.params().iter().map(|t| t.len()).collect();
    let grad_sizes: Vec<usize> = analytic.params().iter().map(|t| t.len()).collect();
    if sizes != grad_sizes {
        return Err(NumError::ShapeMismatch {
            op: "grad_check",
            expected: sizes,
            got: grad_sizes,
        });
    }
    let total: usize = sizes.iter().sum();
    let flat: Vec<usize> = if total <= cfg.max_samples {
        (0..total).collect()
    } else {
        let mut picked = index::sample(&mut rng::seeded(cfg.seed), total, cfg.max_samples).into_vec();
        picked.sort_unstable();
        picked
    };

    let locate = |mut k: usize| {
        for (t, &n) in sizes.iter().enumerate() {
            if k < n {
                return (t, k);
            }
            k -= n;
        }
        unreachable!("flat index within total")
    };

    let grads = analytic.params();
    let mut probe = model.clone();
    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst_tensor: 0,
        worst_index: 0,
        checked: 0,
    };
    let mut worst = (0.0, 0.0);
    for k in flat {
        let (t, i) = locate(k);
        let orig = probe.params()[t].data()[i];
        probe.params_mut()[t].data_mut()[i] = orig + cfg.step;
        let lp = loss(&probe);
        probe.params_mut()[t].data_mut()[i] = orig - cfg.step;
        let lm = loss(&probe);
        probe.params_mut()[t].data_mut()[i] = orig;
        let numeric = (lp - lm) / (2.0 * cfg.step);
        let a = grads[t].data()[i];
        let excess = ((a - numeric).abs() - difference_noise(lp, lm, cfg.step)).max(0.0);
        let rel = excess / a.abs().max(numeric.abs()).max(cfg.floor);
        if !rel.is_finite() {
            return Err(NumError::NonFiniteValue { op: "grad_check" });
        }
        report.checked += 1;
        if rel > report.max_rel_err {
            report.max_rel_err = rel;
            report.worst_tensor = t;
            report.worst_index = i;
            worst = (a, numeric);
        }
    }
    if report.max_rel_err > cfg.tolerance {
        return Err(NumError::ToleranceExceeded {
            tensor: report.worst_tensor,
            index: report.worst_index,
            analytic: worst.0,
            numeric: worst.1,
            rel_err: report.max_rel_err,
            tolerance: cfg.tolerance,
        });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numnet::Tensor;

    #[derive(Clone)]
    struct Quad(Tensor);
    impl Params for Quad {
        fn params(&self) -> Vec<&Tensor> {
            vec![&self.0]
        }
        fn params_mut(&mut self) -> Vec<&mut Tensor> {
            vec![&mut self.0]
        }
    }

    fn loss(q: &Quad) -> f64 {
        q.0.data().iter().enumerate().map(|(i, v)| (i as f64 + 1.0) * v * v * v).sum()
    }

    fn exact(q: &Quad) -> Quad {
        let g = q.0.data().iter().enumerate().map(|(i, v)| 3.0 * (i as f64 + 1.0) * v * v).collect();
        Quad(Tensor::vector(g))
    }

    #[test]
    fn exact_gradient_passes() {
        let q = Quad(Tensor::vector(vec![0.5, -1.2, 2.0, 0.1]));
        let r = grad_check(&q, &exact(&q), loss, &GradCheckConfig::default()).unwrap();
        assert_eq!(r.checked, 4);
        assert!(r.max_rel_err < 1e-8);
    }

    #[test]
    fn doubled_gradient_is_rejected() {
        let q = Quad(Tensor::vector(vec![0.5, -1.2, 2.0, 0.1]));
        let mut g = exact(&q);
        g.scale_all(2.0);
        let err = grad_check(&q, &g, loss, &GradCheckConfig::default()).unwrap_err();
        match err {
            NumError::ToleranceExceeded { rel_err, .. } => assert!((rel_err - 0.5).abs() < 1e-4),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn samples_at_most_max() {
        let q = Quad(Tensor::vector((0..1000).map(|i| 0.5 + (i as f64) * 1e-3).collect()));
        let r = grad_check(&q, &exact(&q), loss, &GradCheckConfig::with_tolerance(1e-4)).unwrap();
        assert_eq!(r.checked, 200);
    }
}

use serde::{Deserialize, Serialize};

use super::{check_len, Result};

/// Per-column z-scoring fitted on training rows. Constant columns pass through
/// centred but unscaled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn identity(dim: usize) -> Self {
        Standardizer {
            mean: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    pub fn fit(rows: &[Vec<f64>], dim: usize) -> Result<Self> {
        let mut mean = vec![0.0; dim];
        for r in rows {
            check_len("standardizer_fit", dim, r.len())?;
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        let n = rows.len().max(1) as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Standardizer { mean, scale })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fitted_columns_have_zero_mean_unit_variance() {
        let rows = vec![vec![1.0, 5.0], vec![3.0, 5.0], vec![5.0, 5.0]];
        let s = Standardizer::fit(&rows, 2).unwrap();
        let z: Vec<Vec<f64>> = rows.iter().map(|r| s.apply(r)).collect();
        let mean0: f64 = z.iter().map(|r| r[0]).sum::<f64>() / 3.0;
        let var0: f64 = z.iter().map(|r| r[0] * r[0]).sum::<f64>() / 3.0;
        assert!(mean0.abs() < 1e-12 && (var0 - 1.0).abs() < 1e-12);
        assert!(z.iter().all(|r| r[1] == 0.0));
        assert!(Standardizer::fit(&[vec![1.0]], 2).is_err());
    }
}

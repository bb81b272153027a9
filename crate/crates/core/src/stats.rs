//! Monte Carlo summaries with order-independent reductions.

use crate::quad::pairwise_sum;
use serde::{Deserialize, Serialize};

/// Sample mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
}

impl McEstimate {
    /// Mean and standard error of `values`. Both sums are pairwise, so the
    /// result depends only on the order of `values`.
    pub fn from_samples(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return McEstimate { mean: f64::NAN, stderr: f64::NAN, samples: 0 };
        }
        let mean = pairwise_sum(values) / n as f64;
        if n == 1 {
            return McEstimate { mean, stderr: 0.0, samples: 1 };
        }
        let sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
        let var = pairwise_sum(&sq) / (n - 1) as f64;
        McEstimate { mean, stderr: (var / n as f64).sqrt(), samples: n }
    }

    /// |self − other| in units of the combined standard error.
    pub fn z_score(&self, other: &McEstimate) -> f64 {
        let s = (self.stderr * self.stderr + other.stderr * other.stderr).sqrt();
        let d = (self.mean - other.mean).abs();
        if s > 0.0 {
            d / s
        } else if d == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }

    /// |mean − value| / stderr, treating a zero stderr as exact.
    pub fn deviation_from(&self, value: f64) -> f64 {
        self.z_score(&McEstimate { mean: value, stderr: 0.0, samples: 1 })
    }
}

/// Kish effective sample size (Σw)²/Σw².
pub fn effective_sample_size(weights: &[f64]) -> f64 {
    let s = pairwise_sum(weights);
    let sq: Vec<f64> = weights.iter().map(|w| w * w).collect();
    let s2 = pairwise_sum(&sq);
    if s2 > 0.0 {
        s * s / s2
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_stderr() {
        let e = McEstimate::from_samples(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(e.mean, 2.5);
        assert!((e.stderr - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert_eq!(McEstimate::from_samples(&[2.0; 10]).stderr, 0.0);
    }

    #[test]
    fn ess_bounds() {
        assert!((effective_sample_size(&[1.0; 8]) - 8.0).abs() < 1e-12);
        assert!((effective_sample_size(&[1.0, 0.0, 0.0]) - 1.0).abs() < 1e-12);
    }
}

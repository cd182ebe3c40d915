//! Sample statistics for Monte Carlo reductions.

use serde::{Deserialize, Serialize};

/// Mean and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self { mean: value, std_err: 0.0 }
    }

    /// Reduces samples in their given order.
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        if n == 0 {
            return Self { mean: 0.0, std_err: 0.0 };
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        if n == 1 {
            return Self { mean, std_err: 0.0 };
        }
        let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        Self { mean, std_err: (var / n as f64).sqrt() }
    }

    /// Distance from `target` in units of the standard error.
    pub fn z_score(&self, target: f64) -> f64 {
        let diff = self.mean - target;
        if self.std_err > 0.0 {
            diff / self.std_err
        } else if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY * diff.signum()
        }
    }
}

/// Ratio of means `E[num] / E[den]` with a delta-method standard error.
pub fn ratio_of_means(num: &[f64], den: &[f64]) -> Estimate {
    let n = num.len();
    let a = Estimate::from_samples(num);
    let b = Estimate::from_samples(den);
    let ratio = a.mean / b.mean;
    if n < 2 || b.mean == 0.0 {
        return Estimate { mean: ratio, std_err: 0.0 };
    }
    // Residuals of the linearised ratio.
    let resid: Vec<f64> = num.iter().zip(den).map(|(x, y)| (x - ratio * y) / b.mean).collect();
    Estimate { mean: ratio, std_err: Estimate::from_samples(&resid).std_err }
}

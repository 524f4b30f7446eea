use serde::{Deserialize, Serialize};

use super::gbm::softmax;
use super::params::Resolved;

/// Gaussian naive Bayes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNb {
    pub log_priors: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    /// Floored per-class variances.
    pub variances: Vec<Vec<f64>>,
}

impl GaussianNb {
    pub(crate) fn fit(x: &[Vec<f64>], y: &[usize], n_classes: usize, p: &Resolved) -> Self {
        let n = x.len();
        let d = x.first().map_or(0, Vec::len);
        let column_var = |j: usize| {
            let mean = x.iter().map(|r| r[j]).sum::<f64>() / n as f64;
            x.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n as f64
        };
        let max_var = (0..d).map(column_var).fold(0.0, f64::max);
        let smoothing = p.f64("var_smoothing");
        let floor = if max_var > 0.0 { smoothing * max_var } else { smoothing };

        let mut counts = vec![0usize; n_classes];
        let mut means = vec![vec![0.0; d]; n_classes];
        for (r, &c) in x.iter().zip(y) {
            counts[c] += 1;
            for j in 0..d {
                means[c][j] += r[j];
            }
        }
        for c in 0..n_classes {
            means[c].iter_mut().for_each(|m| *m /= counts[c] as f64);
        }
        let mut variances = vec![vec![0.0; d]; n_classes];
        for (r, &c) in x.iter().zip(y) {
            for j in 0..d {
                variances[c][j] += (r[j] - means[c][j]).powi(2);
            }
        }
        for c in 0..n_classes {
            variances[c]
                .iter_mut()
                .for_each(|v| *v = (*v / counts[c] as f64).max(floor));
        }
        GaussianNb {
            log_priors: counts.iter().map(|&k| (k as f64 / n as f64).ln()).collect(),
            means,
            variances,
        }
    }

    /// Unnormalized log posterior of each class.
    pub fn log_joint(&self, x: &[f64]) -> Vec<f64> {
        (0..self.log_priors.len())
            .map(|c| {
                self.log_priors[c]
                    + x.iter()
                        .enumerate()
                        .map(|(j, &v)| {
                            let var = self.variances[c][j];
                            -0.5 * (2.0 * std::f64::consts::PI * var).ln()
                                - (v - self.means[c][j]).powi(2) / (2.0 * var)
                        })
                        .sum::<f64>()
            })
            .collect()
    }

    pub(crate) fn scores(&self, x: &[f64]) -> Vec<f64> {
        softmax(&self.log_joint(x))
    }
}

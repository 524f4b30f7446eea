//! Gradient boosting on regression trees with logistic (two classes) or
//! softmax (more classes) deviance.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::params::Resolved;
use super::tree::{build, Columns, Criterion, Tree, TreeConfig};

const DENOMINATOR_FLOOR: f64 = 1e-12;

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Logistic deviance of label `y` in {0, 1} at raw score `score`.
pub fn logistic_loss(y: f64, score: f64) -> f64 {
    softplus(score) - y * score
}

/// Derivative of [`logistic_loss`] with respect to the score.
pub fn logistic_gradient(y: f64, score: f64) -> f64 {
    sigmoid(score) - y
}

fn log_sum_exp(scores: &[f64]) -> f64 {
    let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + scores.iter().map(|s| (s - m).exp()).sum::<f64>().ln()
}

pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(scores);
    scores.iter().map(|s| (s - lse).exp()).collect()
}

/// Multinomial deviance of true class `y` at raw scores `scores`.
pub fn softmax_loss(y: usize, scores: &[f64]) -> f64 {
    log_sum_exp(scores) - scores[y]
}

/// Gradient of [`softmax_loss`] with respect to every score.
pub fn softmax_gradient(y: usize, scores: &[f64]) -> Vec<f64> {
    let mut g = softmax(scores);
    g[y] -= 1.0;
    g
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientBoosting {
    pub learning_rate: f64,
    /// Initial raw score per output (one output for two classes).
    pub init: Vec<f64>,
    /// `stages[m][k]`: tree for output `k` at stage `m`.
    pub stages: Vec<Vec<Tree>>,
}

impl GradientBoosting {
    pub(crate) fn fit(x: &[Vec<f64>], y: &[usize], n_classes: usize, p: &Resolved) -> Self {
        let n = x.len();
        let cols = Columns::new(x);
        let config = TreeConfig {
            max_depth: p.limit("max_depth"),
            min_samples_split: 2,
            min_samples_leaf: p.usize("min_samples_leaf"),
            max_features: None,
        };
        let lr = p.f64("learning_rate");
        let n_out = if n_classes == 2 { 1 } else { n_classes };
        let mut counts = vec![0.0; n_classes];
        for &c in y {
            counts[c] += 1.0;
        }
        let prior = |c: usize| (counts[c] / n as f64).clamp(1e-12, 1.0 - 1e-12);
        let init: Vec<f64> = if n_out == 1 {
            vec![(prior(1) / (1.0 - prior(1))).ln()]
        } else {
            (0..n_classes).map(|c| prior(c).ln()).collect()
        };
        let mut scores: Vec<Vec<f64>> = vec![init.clone(); n];
        let ones = vec![1.0; n];
        let mut stages = Vec::new();
        for _ in 0..p.usize("n_estimators") {
            let trees: Vec<Tree> = if n_out == 1 {
                let yb: Vec<f64> = y.iter().map(|&c| c as f64).collect();
                let prob: Vec<f64> = scores.iter().map(|s| sigmoid(s[0])).collect();
                let residual: Vec<f64> = (0..n).map(|i| -logistic_gradient(yb[i], scores[i][0])).collect();
                vec![fit_stage_tree(&cols, &ones, &config, &residual, &|rows| {
                    let num: f64 = rows.iter().map(|&r| residual[r as usize]).sum();
                    let den: f64 = rows
                        .iter()
                        .map(|&r| prob[r as usize] * (1.0 - prob[r as usize]))
                        .sum();
                    num / den.max(DENOMINATOR_FLOOR)
                })]
            } else {
                let grads: Vec<Vec<f64>> = (0..n).map(|i| softmax_gradient(y[i], &scores[i])).collect();
                let scale = (n_classes - 1) as f64 / n_classes as f64;
                (0..n_classes)
                    .into_par_iter()
                    .map(|k| {
                        let residual: Vec<f64> = grads.iter().map(|g| -g[k]).collect();
                        fit_stage_tree(&cols, &ones, &config, &residual, &|rows| {
                            let num: f64 = rows.iter().map(|&r| residual[r as usize]).sum();
                            let den: f64 = rows
                                .iter()
                                .map(|&r| {
                                    let a = residual[r as usize].abs();
                                    a * (1.0 - a)
                                })
                                .sum();
                            scale * num / den.max(DENOMINATOR_FLOOR)
                        })
                    })
                    .collect()
            };
            for (i, s) in scores.iter_mut().enumerate() {
                for (k, t) in trees.iter().enumerate() {
                    s[k] += lr * t.leaf(&x[i])[0];
                }
            }
            stages.push(trees);
        }
        GradientBoosting {
            learning_rate: lr,
            init,
            stages,
        }
    }

    /// Raw scores after the first `n_stages` stages.
    pub fn raw_scores(&self, x: &[f64], n_stages: usize) -> Vec<f64> {
        let mut s = self.init.clone();
        for trees in self.stages.iter().take(n_stages) {
            for (k, t) in trees.iter().enumerate() {
                s[k] += self.learning_rate * t.leaf(x)[0];
            }
        }
        s
    }

    pub fn n_stages(&self) -> usize {
        self.stages.len()
    }

    pub(crate) fn scores(&self, x: &[f64]) -> Vec<f64> {
        let s = self.raw_scores(x, self.stages.len());
        if s.len() == 1 {
            let p = sigmoid(s[0]);
            vec![1.0 - p, p]
        } else {
            softmax(&s)
        }
    }
}

fn fit_stage_tree(
    cols: &Columns,
    weights: &[f64],
    config: &TreeConfig,
    residual: &[f64],
    leaf_value: &(dyn Fn(&[u32]) -> f64 + Sync),
) -> Tree {
    // regression trees here have no random choices
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    build(
        cols,
        weights,
        &Criterion::Mse { y: residual },
        config,
        &mut rng,
        &mut |rows| vec![leaf_value(rows)],
    )
}

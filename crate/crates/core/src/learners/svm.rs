//! Linear one-vs-rest SVM trained by Pegasos subgradient descent.
//!
//! The bias is an extra weight on a constant input of 1. Each epoch visits
//! the rows in a freshly shuffled order; after every epoch the primal
//! objective is evaluated and the best iterate so far is kept, so the
//! returned weights never lose to an earlier epoch.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::params::Resolved;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvm {
    /// One weight vector per output, bias last. Two-class problems have a
    /// single output scoring the second class.
    pub weights: Vec<Vec<f64>>,
    /// Best objective value reached after each epoch, per output.
    pub objective_history: Vec<Vec<f64>>,
}

fn margin(w: &[f64], x: &[f64]) -> f64 {
    let d = x.len();
    w[..d].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + w[d]
}

/// `lambda/2 |w|^2 + mean hinge loss` for labels in {-1, +1}.
pub fn svm_objective(w: &[f64], x: &[Vec<f64>], y: &[f64], lambda: f64) -> f64 {
    let reg = 0.5 * lambda * w.iter().map(|v| v * v).sum::<f64>();
    let hinge = x
        .iter()
        .zip(y)
        .map(|(xi, yi)| (1.0 - yi * margin(w, xi)).max(0.0))
        .sum::<f64>()
        / x.len() as f64;
    reg + hinge
}

fn train_binary(x: &[Vec<f64>], y: &[f64], lambda: f64, epochs: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let d = x.first().map_or(0, Vec::len);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = vec![0.0; d + 1];
    let mut best = w.clone();
    let mut best_obj = svm_objective(&w, x, y, lambda);
    let mut history = Vec::with_capacity(epochs);
    let radius = 1.0 / lambda.sqrt();
    let mut order: Vec<usize> = (0..x.len()).collect();
    let mut t = 0u64;
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let violated = y[i] * margin(&w, &x[i]) < 1.0;
            let shrink = 1.0 - eta * lambda;
            w.iter_mut().for_each(|v| *v *= shrink);
            if violated {
                for (wj, xj) in w.iter_mut().zip(&x[i]) {
                    *wj += eta * y[i] * xj;
                }
                w[d] += eta * y[i];
            }
            let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > radius {
                let s = radius / norm;
                w.iter_mut().for_each(|v| *v *= s);
            }
        }
        let obj = svm_objective(&w, x, y, lambda);
        if obj < best_obj {
            best_obj = obj;
            best.clone_from(&w);
        }
        history.push(best_obj);
    }
    (best, history)
}

impl LinearSvm {
    pub(crate) fn fit(x: &[Vec<f64>], y: &[usize], n_classes: usize, p: &Resolved, seed: u64) -> Self {
        let lambda = p.f64("lambda");
        let epochs = p.usize("epochs");
        let outputs: Vec<usize> = if n_classes == 2 { vec![1] } else { (0..n_classes).collect() };
        let fitted: Vec<(Vec<f64>, Vec<f64>)> = outputs
            .par_iter()
            .enumerate()
            .map(|(u, &class)| {
                let yy: Vec<f64> = y.iter().map(|&c| if c == class { 1.0 } else { -1.0 }).collect();
                train_binary(x, &yy, lambda, epochs, seed.wrapping_add(u as u64))
            })
            .collect();
        let (weights, objective_history) = fitted.into_iter().unzip();
        LinearSvm {
            weights,
            objective_history,
        }
    }

    /// Margin per class.
    pub(crate) fn scores(&self, x: &[f64]) -> Vec<f64> {
        if self.weights.len() == 1 {
            let m = margin(&self.weights[0], x);
            vec![-m, m]
        } else {
            self.weights.iter().map(|w| margin(w, x)).collect()
        }
    }
}

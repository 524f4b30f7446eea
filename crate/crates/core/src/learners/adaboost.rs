//! SAMME boosting of shallow trees.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::forest::argmax;
use super::params::Resolved;
use super::tree::{build, class_distribution, Columns, Criterion, Tree, TreeConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaBoost {
    pub n_classes: usize,
    pub stumps: Vec<Tree>,
    /// Vote weight of each stage.
    pub alphas: Vec<f64>,
    /// Weighted training error of each stage.
    pub errors: Vec<f64>,
}

impl AdaBoost {
    pub(crate) fn fit(x: &[Vec<f64>], y: &[usize], n_classes: usize, p: &Resolved) -> Self {
        let n = x.len();
        let k = n_classes as f64;
        let cols = Columns::new(x);
        let config = TreeConfig {
            max_depth: p.limit("max_depth"),
            ..TreeConfig::default()
        };
        let mut w = vec![1.0 / n as f64; n];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut model = AdaBoost {
            n_classes,
            stumps: Vec::new(),
            alphas: Vec::new(),
            errors: Vec::new(),
        };
        for _ in 0..p.usize("n_estimators") {
            let tree = build(
                &cols,
                &w,
                &Criterion::Gini { y, n_classes },
                &config,
                &mut rng,
                &mut |rows| class_distribution(rows, y, &w, n_classes),
            );
            let wrong: Vec<bool> = (0..n).map(|i| argmax(tree.leaf(&x[i])) != y[i]).collect();
            let total: f64 = w.iter().sum();
            let err = (0..n).filter(|&i| wrong[i]).map(|i| w[i]).sum::<f64>() / total;
            if err <= 0.0 {
                model.push(tree, 1.0, 0.0);
                break;
            }
            if err >= 1.0 - 1.0 / k {
                if model.stumps.is_empty() {
                    // no better than chance from the start: keep one vote
                    model.push(tree, 1.0, err);
                }
                break;
            }
            let alpha = ((1.0 - err) / err).ln() + (k - 1.0).ln();
            for i in 0..n {
                if wrong[i] {
                    w[i] *= alpha.exp();
                }
            }
            let s: f64 = w.iter().sum();
            w.iter_mut().for_each(|v| *v /= s);
            model.push(tree, alpha, err);
        }
        model
    }

    fn push(&mut self, tree: Tree, alpha: f64, err: f64) {
        self.stumps.push(tree);
        self.alphas.push(alpha);
        self.errors.push(err);
    }

    /// Share of the total stage weight voting for each class.
    pub(crate) fn scores(&self, x: &[f64]) -> Vec<f64> {
        let mut votes = vec![0.0; self.n_classes];
        for (t, a) in self.stumps.iter().zip(&self.alphas) {
            votes[argmax(t.leaf(x))] += a;
        }
        let total: f64 = self.alphas.iter().sum();
        votes.iter_mut().for_each(|v| *v /= total);
        votes
    }
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{build, class_distribution, Columns, Criterion, Tree, TreeConfig};
use super::params::Resolved;

/// Single CART classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub tree: Tree,
}

impl DecisionTree {
    pub(crate) fn fit(x: &[Vec<f64>], y: &[usize], n_classes: usize, p: &Resolved) -> Self {
        let cols = Columns::new(x);
        let config = TreeConfig {
            max_depth: p.limit("max_depth"),
            min_samples_split: p.usize("min_samples_split"),
            min_samples_leaf: p.usize("min_samples_leaf"),
            max_features: None,
        };
        let w = vec![1.0; x.len()];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let tree = build(
            &cols,
            &w,
            &Criterion::Gini { y, n_classes },
            &config,
            &mut rng,
            &mut |rows| class_distribution(rows, y, &w, n_classes),
        );
        DecisionTree { tree }
    }

    pub(crate) fn scores(&self, x: &[f64]) -> Vec<f64> {
        self.tree.leaf(x).to_vec()
    }
}

/// Bagged trees with per-split feature subsampling; each tree casts one
/// vote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub trees: Vec<Tree>,
    pub n_classes: usize,
}

pub(crate) fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

impl RandomForest {
    pub(crate) fn fit(x: &[Vec<f64>], y: &[usize], n_classes: usize, p: &Resolved, seed: u64) -> Self {
        let cols = Columns::new(x);
        let d = cols.n_features();
        let max_features = match p.limit("max_features") {
            Some(0) => (d as f64).sqrt().ceil() as usize,
            Some(m) => m.min(d),
            None => d,
        };
        let config = TreeConfig {
            max_depth: p.limit("max_depth"),
            min_samples_split: p.usize("min_samples_split"),
            min_samples_leaf: p.usize("min_samples_leaf"),
            max_features: Some(max_features),
        };
        let bootstrap = p.usize("bootstrap") == 1;
        let n = x.len();
        let trees = (0..p.usize("n_estimators"))
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(t as u64));
                let mut w = vec![0.0; n];
                if bootstrap {
                    for _ in 0..n {
                        w[rng.random_range(0..n)] += 1.0;
                    }
                } else {
                    w.fill(1.0);
                }
                build(
                    &cols,
                    &w,
                    &Criterion::Gini { y, n_classes },
                    &config,
                    &mut rng,
                    &mut |rows| class_distribution(rows, y, &w, n_classes),
                )
            })
            .collect();
        RandomForest { trees, n_classes }
    }

    /// Fraction of trees voting for each class.
    pub(crate) fn scores(&self, x: &[f64]) -> Vec<f64> {
        let mut votes = vec![0.0; self.n_classes];
        for t in &self.trees {
            votes[argmax(t.leaf(x))] += 1.0;
        }
        let n = self.trees.len() as f64;
        votes.iter_mut().for_each(|v| *v /= n);
        votes
    }
}

use serde::{Deserialize, Serialize};

use super::params::Resolved;

/// k-nearest neighbours under Euclidean distance over the stored training
/// matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Knn {
    pub k: usize,
    pub n_classes: usize,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<usize>,
}

impl Knn {
    pub(crate) fn fit(x: &[Vec<f64>], y: &[usize], n_classes: usize, p: &Resolved) -> Self {
        Knn {
            k: p.usize("k").min(x.len()),
            n_classes,
            x: x.to_vec(),
            y: y.to_vec(),
        }
    }

    /// Training row indices of the `k` nearest neighbours; equal distances
    /// are ordered by row index.
    pub fn neighbours(&self, q: &[f64]) -> Vec<usize> {
        let mut dist: Vec<(f64, usize)> = self
            .x
            .iter()
            .enumerate()
            .map(|(i, r)| (r.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), i))
            .collect();
        let key = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < dist.len() {
            dist.select_nth_unstable_by(self.k - 1, key);
            dist.truncate(self.k);
        }
        dist.sort_by(key);
        dist.into_iter().map(|(_, i)| i).collect()
    }

    /// Share of the neighbours in each class.
    pub(crate) fn scores(&self, q: &[f64]) -> Vec<f64> {
        let mut votes = vec![0.0; self.n_classes];
        for i in self.neighbours(q) {
            votes[self.y[i]] += 1.0;
        }
        votes.iter_mut().for_each(|v| *v /= self.k as f64);
        votes
    }
}

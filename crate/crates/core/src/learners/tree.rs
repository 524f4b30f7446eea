//! CART trees: binary axis-aligned splits found by an exhaustive scan over
//! midpoints of sorted distinct feature values.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    /// Class distribution for classification trees, a single value for
    /// regression trees.
    Leaf { value: Vec<f64> },
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Flat tree; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf(&self, x: &[f64]) -> &[f64] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(t: &Tree, i: usize) -> usize {
            match &t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(t, *left).max(walk(t, *right)),
            }
        }
        walk(self, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }
}

/// Training matrix stored by column, with each column's row order sorted by
/// value (ties by row index) computed once.
pub(crate) struct Columns {
    pub(crate) values: Vec<Vec<f64>>,
    order: Vec<Vec<u32>>,
    n_rows: usize,
}

impl Columns {
    pub(crate) fn new(rows: &[Vec<f64>]) -> Self {
        let n_rows = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        let values: Vec<Vec<f64>> = (0..d).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
        let order = values
            .iter()
            .map(|col| {
                let mut idx: Vec<u32> = (0..n_rows as u32).collect();
                idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
                idx
            })
            .collect();
        Columns {
            values,
            order,
            n_rows,
        }
    }

    pub(crate) fn n_features(&self) -> usize {
        self.values.len()
    }

    pub(crate) fn n_rows(&self) -> usize {
        self.n_rows
    }
}

pub(crate) enum Criterion<'a> {
    /// Gini impurity over class indices.
    Gini { y: &'a [usize], n_classes: usize },
    /// Squared error over real targets.
    Mse { y: &'a [f64] },
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct TreeConfig {
    pub(crate) max_depth: Option<usize>,
    pub(crate) min_samples_split: usize,
    pub(crate) min_samples_leaf: usize,
    /// Features examined per split; `None` examines all of them.
    pub(crate) max_features: Option<usize>,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
            max_features: None,
        }
    }
}

/// Running weighted statistics of one side of a candidate split.
#[derive(Clone)]
enum Stats {
    Gini { counts: Vec<f64>, sum_sq: f64, w: f64 },
    Mse { w: f64, s: f64, s2: f64 },
}

impl Stats {
    fn empty(c: &Criterion) -> Self {
        match c {
            Criterion::Gini { n_classes, .. } => Stats::Gini {
                counts: vec![0.0; *n_classes],
                sum_sq: 0.0,
                w: 0.0,
            },
            Criterion::Mse { .. } => Stats::Mse {
                w: 0.0,
                s: 0.0,
                s2: 0.0,
            },
        }
    }

    fn add(&mut self, c: &Criterion, row: usize, weight: f64, sign: f64) {
        match (self, c) {
            (Stats::Gini { counts, sum_sq, w }, Criterion::Gini { y, .. }) => {
                let k = y[row];
                let old = counts[k];
                counts[k] += sign * weight;
                *sum_sq += counts[k] * counts[k] - old * old;
                *w += sign * weight;
            }
            (Stats::Mse { w, s, s2 }, Criterion::Mse { y }) => {
                let v = y[row];
                *w += sign * weight;
                *s += sign * weight * v;
                *s2 += sign * weight * v * v;
            }
            _ => unreachable!("statistics match their criterion"),
        }
    }

    /// Total weighted impurity: W times the impurity of the side.
    fn cost(&self) -> f64 {
        match self {
            Stats::Gini { sum_sq, w, .. } => {
                if *w > 0.0 {
                    w - sum_sq / w
                } else {
                    0.0
                }
            }
            Stats::Mse { w, s, s2 } => {
                if *w > 0.0 {
                    (s2 - s * s / w).max(0.0)
                } else {
                    0.0
                }
            }
        }
    }
}

fn is_pure(c: &Criterion, rows: &[u32]) -> bool {
    match c {
        Criterion::Gini { y, .. } => rows.iter().all(|&r| y[r as usize] == y[rows[0] as usize]),
        Criterion::Mse { y } => rows.iter().all(|&r| y[r as usize] == y[rows[0] as usize]),
    }
}

struct Best {
    cost: f64,
    feature: usize,
    threshold: f64,
}

fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    if m < b {
        m
    } else {
        a
    }
}

/// Grow one tree. Rows with zero weight are left out. `leaf` maps the rows
/// reaching a leaf to its stored value.
pub(crate) fn build<R: Rng>(
    cols: &Columns,
    weights: &[f64],
    criterion: &Criterion,
    config: &TreeConfig,
    rng: &mut R,
    leaf: &mut dyn FnMut(&[u32]) -> Vec<f64>,
) -> Tree {
    let d = cols.n_features();
    let root: Vec<Vec<u32>> = cols
        .order
        .iter()
        .map(|o| o.iter().copied().filter(|&r| weights[r as usize] > 0.0).collect())
        .collect();
    let mut nodes = vec![Node::Leaf { value: Vec::new() }];
    let mut stack = vec![(0usize, root, 0usize)];
    let mut goes_left = vec![false; cols.n_rows()];
    let n_try = config.max_features.map_or(d, |m| m.clamp(1, d.max(1)));

    while let Some((id, sorted, depth)) = stack.pop() {
        let members: &[u32] = sorted.first().map_or(&[], Vec::as_slice);
        let n = members.len();
        let can_split = d > 0
            && n >= config.min_samples_split.max(2)
            && n >= 2 * config.min_samples_leaf
            && config.max_depth.is_none_or(|m| depth < m)
            && !is_pure(criterion, members);

        let best = if can_split {
            let features: Vec<usize> = if n_try < d {
                let mut f = sample(rng, d, n_try).into_vec();
                f.sort_unstable();
                f
            } else {
                (0..d).collect()
            };
            let mut total = Stats::empty(criterion);
            for &r in members {
                total.add(criterion, r as usize, weights[r as usize], 1.0);
            }
            let mut best: Option<Best> = None;
            for j in features {
                let col = &cols.values[j];
                let list = &sorted[j];
                let mut left = Stats::empty(criterion);
                let mut right = total.clone();
                for i in 0..n - 1 {
                    let r = list[i] as usize;
                    left.add(criterion, r, weights[r], 1.0);
                    right.add(criterion, r, weights[r], -1.0);
                    let (a, b) = (col[r], col[list[i + 1] as usize]);
                    if a == b || i + 1 < config.min_samples_leaf || n - i - 1 < config.min_samples_leaf {
                        continue;
                    }
                    let cost = left.cost() + right.cost();
                    if best.as_ref().is_none_or(|bst| cost < bst.cost) {
                        best = Some(Best {
                            cost,
                            feature: j,
                            threshold: midpoint(a, b),
                        });
                    }
                }
            }
            best
        } else {
            None
        };

        match best {
            None => nodes[id] = Node::Leaf { value: leaf(members) },
            Some(b) => {
                let col = &cols.values[b.feature];
                for &r in members {
                    goes_left[r as usize] = col[r as usize] <= b.threshold;
                }
                let mut lefts = Vec::with_capacity(d);
                let mut rights = Vec::with_capacity(d);
                for list in sorted {
                    let (l, r): (Vec<u32>, Vec<u32>) = list.into_iter().partition(|&r| goes_left[r as usize]);
                    lefts.push(l);
                    rights.push(r);
                }
                let (l, r) = (nodes.len(), nodes.len() + 1);
                nodes.push(Node::Leaf { value: Vec::new() });
                nodes.push(Node::Leaf { value: Vec::new() });
                nodes[id] = Node::Split {
                    feature: b.feature,
                    threshold: b.threshold,
                    left: l,
                    right: r,
                };
                stack.push((r, rights, depth + 1));
                stack.push((l, lefts, depth + 1));
            }
        }
    }
    Tree { nodes }
}

/// Weighted class distribution of `rows`, normalized to sum 1.
pub(crate) fn class_distribution(rows: &[u32], y: &[usize], weights: &[f64], n_classes: usize) -> Vec<f64> {
    let mut dist = vec![0.0; n_classes];
    for &r in rows {
        dist[y[r as usize]] += weights[r as usize];
    }
    let total: f64 = dist.iter().sum();
    if total > 0.0 {
        dist.iter_mut().for_each(|v| *v /= total);
    }
    dist
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn classification_tree(x: &[Vec<f64>], y: &[usize], k: usize, config: TreeConfig) -> Tree {
        let cols = Columns::new(x);
        let w = vec![1.0; x.len()];
        let crit = Criterion::Gini { y, n_classes: k };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        build(&cols, &w, &crit, &config, &mut rng, &mut |rows| {
            class_distribution(rows, y, &w, k)
        })
    }

    #[test]
    fn single_midpoint_split() {
        let x: Vec<Vec<f64>> = [1.0, 2.0, 3.0, 4.0].iter().map(|&v| vec![v]).collect();
        let t = classification_tree(&x, &[0, 0, 1, 1], 2, TreeConfig::default());
        assert_eq!(t.nodes.len(), 3);
        match &t.nodes[0] {
            Node::Split { feature, threshold, .. } => {
                assert_eq!(*feature, 0);
                assert_eq!(*threshold, 2.5);
            }
            other => panic!("expected split, got {other:?}"),
        }
        assert_eq!(t.leaf(&[1.0]), &[1.0, 0.0]);
        assert_eq!(t.leaf(&[4.0]), &[0.0, 1.0]);
    }

    #[test]
    fn zero_gain_root_still_separates_xor() {
        let x = vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]];
        let y = [0, 1, 1, 0];
        let t = classification_tree(&x, &y, 2, TreeConfig::default());
        for (xi, &yi) in x.iter().zip(&y) {
            assert_eq!(t.leaf(xi)[yi], 1.0);
        }
    }

    #[test]
    fn depth_and_leaf_limits() {
        let x: Vec<Vec<f64>> = (0..16).map(|v| vec![v as f64]).collect();
        let y: Vec<usize> = (0..16).map(|v| v % 2).collect();
        let t = classification_tree(
            &x,
            &y,
            2,
            TreeConfig {
                max_depth: Some(2),
                ..TreeConfig::default()
            },
        );
        assert!(t.depth() <= 2);
        let t = classification_tree(&x, &y, 2, TreeConfig { max_depth: Some(0), ..TreeConfig::default() });
        assert_eq!(t.nodes.len(), 1);
        let t = classification_tree(
            &x,
            &y,
            2,
            TreeConfig {
                min_samples_leaf: 5,
                ..TreeConfig::default()
            },
        );
        assert!(t.n_leaves() <= 3);
    }

    #[test]
    fn regression_tree_fits_step() {
        let x: Vec<Vec<f64>> = (0..10).map(|v| vec![v as f64]).collect();
        let y: Vec<f64> = (0..10).map(|v| if v < 6 { -1.0 } else { 2.0 }).collect();
        let cols = Columns::new(&x);
        let w = vec![1.0; 10];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let t = build(
            &cols,
            &w,
            &Criterion::Mse { y: &y },
            &TreeConfig { max_depth: Some(1), ..TreeConfig::default() },
            &mut rng,
            &mut |rows| vec![rows.iter().map(|&r| y[r as usize]).sum::<f64>() / rows.len() as f64],
        );
        assert_eq!(t.leaf(&[0.0]), &[-1.0]);
        assert_eq!(t.leaf(&[9.0]), &[2.0]);
    }

    #[test]
    fn midpoint_of_adjacent_floats_stays_left() {
        let a = 1.0f64;
        let b = f64::from_bits(a.to_bits() + 1);
        let m = midpoint(a, b);
        assert!(a <= m && m < b);
    }
}

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{compute_metrics_with_classes, Averaging};
use super::EvalError;
use crate::dataset::{LabeledDataset, Task, TARGETED};
use crate::learners::{fit, ClassifierSpec};

/// Score used to compare models during cross-validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scoring {
    #[default]
    Accuracy,
    /// F1 of the targeted class (binary task) or support-weighted F1.
    F1,
}

impl FromStr for Scoring {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "accuracy" => Ok(Scoring::Accuracy),
            "f1" => Ok(Scoring::F1),
            other => Err(format!("unknown scoring {other:?} (accuracy, f1)")),
        }
    }
}

impl fmt::Display for Scoring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scoring::Accuracy => "accuracy",
            Scoring::F1 => "f1",
        })
    }
}

/// Averaging used for a task unless overridden: the targeted class for
/// binary work, support-weighted for multi-class.
pub fn task_averaging(task: Task) -> Averaging {
    match task {
        Task::Binary => Averaging::Binary {
            positive: TARGETED.into(),
        },
        Task::Multiclass => Averaging::Weighted,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub fold_scores: Vec<f64>,
    pub mean: f64,
}

/// Stratified fold of every row.
///
/// Rows of each class (classes in label order) are shuffled by one
/// generator seeded with `seed`, the per-class lists are concatenated and
/// position `p` of the result goes to fold `p mod k`.
pub fn stratified_folds(labels: &[&str], k: usize, seed: u64) -> Result<Vec<usize>, EvalError> {
    if k < 2 {
        return Err(EvalError::InvalidFolds(k));
    }
    let mut by_class: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold = vec![0; labels.len()];
    let mut position = 0;
    for (class, mut rows) in by_class {
        if rows.len() < k {
            return Err(EvalError::ClassTooSmall {
                class: class.to_string(),
                rows: rows.len(),
                needed: k,
            });
        }
        rows.shuffle(&mut rng);
        for r in rows {
            fold[r] = position % k;
            position += 1;
        }
    }
    Ok(fold)
}

/// Score of `spec` on the held-out part of each fold, training on the
/// rest. Preprocessing statistics are refit on each training part.
pub fn cross_validate(
    spec: &ClassifierSpec,
    data: &LabeledDataset,
    k: usize,
    task: Task,
    seed: u64,
    scoring: Scoring,
) -> Result<CvResult, EvalError> {
    let labels = data.labels(task);
    let folds = stratified_folds(&labels, k, seed)?;
    let fold_scores = (0..k)
        .into_par_iter()
        .map(|f| {
            let train: Vec<usize> = (0..data.len()).filter(|&i| folds[i] != f).collect();
            let held: Vec<usize> = (0..data.len()).filter(|&i| folds[i] == f).collect();
            let model = fit(spec, &data.select(&train), task)?;
            let test = data.select(&held);
            let predicted = model.predict_dataset(&test)?;
            let truth = test.labels(task);
            Ok(match scoring {
                Scoring::Accuracy => {
                    truth.iter().zip(&predicted).filter(|(t, p)| **t == p.as_str()).count() as f64
                        / truth.len() as f64
                }
                Scoring::F1 => {
                    let mut classes = model.classes.clone();
                    for t in &truth {
                        if !classes.iter().any(|c| c == t) {
                            classes.push(t.to_string());
                        }
                    }
                    let averaging = task_averaging(task);
                    if let Averaging::Binary { positive } = &averaging {
                        if !classes.contains(positive) {
                            classes.push(positive.clone());
                        }
                    }
                    compute_metrics_with_classes(&truth, &predicted, classes, averaging)?.f1
                }
            })
        })
        .collect::<Result<Vec<f64>, EvalError>>()?;
    let mean = fold_scores.iter().sum::<f64>() / k as f64;
    Ok(CvResult { fold_scores, mean })
}

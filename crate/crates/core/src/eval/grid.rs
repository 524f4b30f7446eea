use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cv::{cross_validate, Scoring};
use super::EvalError;
use crate::dataset::{LabeledDataset, Task};
use crate::learners::{fit, ClassifierSpec, HyperValue, ModelKind, TrainedModel};

/// Candidate values per hyperparameter name.
pub type Grid = BTreeMap<String, Vec<HyperValue>>;

pub const DEFAULT_GRID_CAP: usize = 512;

/// Built-in search space of each kind.
pub fn default_grid(kind: ModelKind) -> Grid {
    use HyperValue::{Finite as F, Unbounded as Inf};
    let entries: Vec<(&str, Vec<HyperValue>)> = match kind {
        ModelKind::Dt => vec![("max_depth", vec![F(4.0), F(8.0), F(16.0), Inf])],
        ModelKind::Rf => vec![
            ("n_estimators", vec![F(100.0), F(300.0)]),
            ("max_depth", vec![F(8.0), F(16.0), Inf]),
        ],
        ModelKind::Gbm => vec![
            ("n_estimators", vec![F(100.0), F(300.0)]),
            ("learning_rate", vec![F(0.05), F(0.1)]),
            ("max_depth", vec![F(2.0), F(3.0)]),
        ],
        ModelKind::AdaB => vec![("n_estimators", vec![F(50.0), F(200.0)])],
        ModelKind::Svm => vec![("lambda", vec![F(1e-4), F(1e-2)]), ("epochs", vec![F(20.0)])],
        ModelKind::Nb => vec![],
        ModelKind::Knn => vec![("k", vec![F(3.0), F(5.0), F(11.0)])],
    };
    entries.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

/// Every combination of the grid. Names are taken in sorted order with the
/// last name varying fastest, values in the order given. An empty grid has
/// one combination: all defaults.
pub fn combinations(grid: &Grid) -> Result<Vec<BTreeMap<String, HyperValue>>, EvalError> {
    if let Some((name, _)) = grid.iter().find(|(_, v)| v.is_empty()) {
        return Err(EvalError::InvalidGrid(format!("no values for {name:?}")));
    }
    let mut out = vec![BTreeMap::new()];
    for (name, values) in grid {
        out = out
            .into_iter()
            .flat_map(|partial| {
                values.iter().map(move |v| {
                    let mut c = partial.clone();
                    c.insert(name.clone(), *v);
                    c
                })
            })
            .collect();
    }
    Ok(out)
}

pub fn grid_size(grid: &Grid) -> usize {
    grid.values().map(Vec::len).product()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub hyperparameters: BTreeMap<String, HyperValue>,
    pub fold_scores: Vec<f64>,
    pub mean: f64,
}

#[derive(Debug, Clone)]
pub struct GridResult {
    pub best: ClassifierSpec,
    pub best_index: usize,
    pub rows: Vec<GridRow>,
    /// The best spec refit on all of the search data.
    pub model: TrainedModel,
}

#[derive(Debug, Clone, Copy)]
pub struct GridOptions {
    pub k: usize,
    pub scoring: Scoring,
    pub cap: usize,
}

impl Default for GridOptions {
    fn default() -> Self {
        GridOptions {
            k: 5,
            scoring: Scoring::Accuracy,
            cap: DEFAULT_GRID_CAP,
        }
    }
}

/// Index of the highest mean; ties go to the earliest row.
pub fn best_index(rows: &[GridRow]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, r) in rows.iter().enumerate() {
        if best.is_none_or(|b| r.mean > rows[b].mean) {
            best = Some(i);
        }
    }
    best
}

/// Cross-validate every grid combination on top of `base`'s fixed
/// hyperparameters, pick the best and refit it on all of `data`.
pub fn grid_search(
    base: &ClassifierSpec,
    grid: &Grid,
    data: &LabeledDataset,
    task: Task,
    seed: u64,
    options: GridOptions,
) -> Result<GridResult, EvalError> {
    let size = grid_size(grid);
    if size > options.cap {
        return Err(EvalError::GridTooLarge { size, cap: options.cap });
    }
    let specs: Vec<ClassifierSpec> = combinations(grid)?
        .into_iter()
        .map(|combo| {
            let mut spec = base.clone();
            spec.hyperparameters.extend(combo);
            spec.validate()?;
            Ok(spec)
        })
        .collect::<Result<_, EvalError>>()?;
    let rows = specs
        .par_iter()
        .map(|spec| {
            let cv = cross_validate(spec, data, options.k, task, seed, options.scoring)?;
            Ok(GridRow {
                hyperparameters: spec.hyperparameters.clone(),
                fold_scores: cv.fold_scores,
                mean: cv.mean,
            })
        })
        .collect::<Result<Vec<_>, EvalError>>()?;
    let best_index = best_index(&rows).expect("at least one combination");
    let best = specs[best_index].clone();
    let model = fit(&best, data, task)?;
    Ok(GridResult {
        best,
        best_index,
        rows,
        model,
    })
}

/// Grid results as CSV: one column per hyperparameter, one per fold, then
/// the mean.
pub fn write_grid_csv<W: Write>(out: W, rows: &[GridRow]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    let names: Vec<&String> = rows.first().map(|r| r.hyperparameters.keys().collect()).unwrap_or_default();
    let k = rows.first().map_or(0, |r| r.fold_scores.len());
    let mut header: Vec<String> = names.iter().map(|s| s.to_string()).collect();
    header.extend((1..=k).map(|f| format!("fold_{f}")));
    header.push("mean".into());
    w.write_record(&header)?;
    for r in rows {
        let mut rec: Vec<String> = names
            .iter()
            .map(|n| r.hyperparameters.get(*n).map(|v| v.to_string()).unwrap_or_default())
            .collect();
        rec.extend(r.fold_scores.iter().map(|s| s.to_string()));
        rec.push(r.mean.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

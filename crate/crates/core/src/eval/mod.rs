//! Metrics, stratified cross-validation, grid search and the model
//! comparison report.

mod cv;
mod grid;
mod metrics;
mod suite;

pub use cv::{cross_validate, stratified_folds, task_averaging, CvResult, Scoring};
pub use grid::{
    best_index, combinations, default_grid, grid_search, grid_size, write_grid_csv, Grid, GridOptions, GridResult,
    GridRow, DEFAULT_GRID_CAP,
};
pub use metrics::{
    compute_metrics, compute_metrics_with_classes, f1_score, Averaging, AveragingMode, BinaryCounts, ClassMetrics,
    ConfusionMatrix, MetricsReport,
};
pub use suite::{
    evaluate_model, evaluate_suite, format_csv, format_table, ReportRow, SuiteEntry, SuiteOptions, SuiteReport,
    SuiteResult, REPORT_COLUMNS,
};

use thiserror::Error;

use crate::dataset::DatasetError;
use crate::learners::LearnError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{truth} true labels but {predicted} predictions")]
    LengthMismatch { truth: usize, predicted: usize },
    #[error("no rows to evaluate")]
    Empty,
    #[error("label {0:?} is not a known class")]
    UnknownLabel(String),
    #[error("class {class:?} has {rows} rows, cross-validation needs at least {needed}")]
    ClassTooSmall { class: String, rows: usize, needed: usize },
    #[error("cross-validation needs at least 2 folds, got {0}")]
    InvalidFolds(usize),
    #[error("grid has {size} combinations, the cap is {cap}")]
    GridTooLarge { size: usize, cap: usize },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

use serde::{Deserialize, Serialize};

use super::cv::task_averaging;
use super::grid::{grid_search, Grid, GridOptions, GridRow};
use super::metrics::{compute_metrics, Averaging, MetricsReport};
use super::EvalError;
use crate::dataset::{DatasetError, LabeledDataset, Partition, Task};
use crate::learners::{fit, ClassifierSpec, TrainedModel};

pub const REPORT_COLUMNS: [&str; 5] = ["Model", "Accuracy", "Precision", "Recall", "F1"];

/// One line of a results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub model: String,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl ReportRow {
    pub fn from_metrics(model: impl Into<String>, m: &MetricsReport) -> Self {
        ReportRow {
            model: model.into(),
            accuracy: m.accuracy,
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
        }
    }

    fn cells(&self) -> [String; 5] {
        [
            self.model.clone(),
            format!("{:.4}", self.accuracy),
            format!("{:.4}", self.precision),
            format!("{:.4}", self.recall),
            format!("{:.4}", self.f1),
        ]
    }
}

/// Aligned plain-text table: model names left-aligned, scores
/// right-aligned with four decimals.
pub fn format_table(rows: &[ReportRow]) -> String {
    let cells: Vec<[String; 5]> = rows.iter().map(ReportRow::cells).collect();
    let widths: Vec<usize> = (0..5)
        .map(|j| cells.iter().map(|c| c[j].len()).chain([REPORT_COLUMNS[j].len()]).max().unwrap_or(0))
        .collect();
    let line = |c: [&str; 5]| {
        let mut s = format!("{:<w$}", c[0], w = widths[0]);
        for j in 1..5 {
            s.push_str(&format!("  {:>w$}", c[j], w = widths[j]));
        }
        s.push('\n');
        s
    };
    let mut out = line(REPORT_COLUMNS);
    for c in &cells {
        out.push_str(&line([&c[0], &c[1], &c[2], &c[3], &c[4]]));
    }
    out
}

/// The same table as CSV.
pub fn format_csv(rows: &[ReportRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(REPORT_COLUMNS).expect("in-memory write");
    for r in rows {
        w.write_record(r.cells()).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory write")).expect("ascii table")
}

/// A model to evaluate: fixed hyperparameters in `spec`, optionally tuned
/// further over `grid`.
#[derive(Debug, Clone)]
pub struct SuiteEntry {
    pub spec: ClassifierSpec,
    pub grid: Option<Grid>,
}

#[derive(Debug, Clone, Default)]
pub struct SuiteOptions {
    pub grid: GridOptions,
    /// Overrides the task's averaging.
    pub averaging: Option<Averaging>,
}

#[derive(Debug, Clone)]
pub struct SuiteResult {
    pub row: ReportRow,
    pub spec: ClassifierSpec,
    pub metrics: MetricsReport,
    /// Grid rows, when the entry was tuned.
    pub grid_rows: Option<Vec<GridRow>>,
    pub model: TrainedModel,
}

#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub task: Task,
    pub averaging: Averaging,
    pub results: Vec<SuiteResult>,
}

impl SuiteReport {
    pub fn rows(&self) -> Vec<ReportRow> {
        self.results.iter().map(|r| r.row.clone()).collect()
    }

    pub fn to_text(&self) -> String {
        format_table(&self.rows())
    }

    pub fn to_csv(&self) -> String {
        format_csv(&self.rows())
    }
}

/// Metrics of `model` on every row of `test`.
pub fn evaluate_model(model: &TrainedModel, test: &LabeledDataset, averaging: Averaging) -> Result<MetricsReport, EvalError> {
    let predicted = model.predict_dataset(test)?;
    compute_metrics(&test.labels(model.task), &predicted, averaging)
}

/// Tune each entry on the TRAIN rows (when it has a grid), refit, and score
/// it once on the TEST rows.
pub fn evaluate_suite(
    entries: &[SuiteEntry],
    data: &LabeledDataset,
    task: Task,
    seed: u64,
    options: &SuiteOptions,
) -> Result<SuiteReport, EvalError> {
    if data.split.is_none() {
        return Err(DatasetError::InvalidRatios("dataset has no train/test split".into()).into());
    }
    let train = data.partition(Partition::Train);
    let test = data.partition(Partition::Test);
    let averaging = options.averaging.clone().unwrap_or_else(|| task_averaging(task));
    let mut results = Vec::with_capacity(entries.len());
    for entry in entries {
        let (spec, model, grid_rows) = match &entry.grid {
            Some(grid) => {
                let g = grid_search(&entry.spec, grid, &train, task, seed, options.grid)?;
                (g.best, g.model, Some(g.rows))
            }
            None => (entry.spec.clone(), fit(&entry.spec, &train, task)?, None),
        };
        let metrics = evaluate_model(&model, &test, averaging.clone())?;
        results.push(SuiteResult {
            row: ReportRow::from_metrics(spec.kind.display_name(), &metrics),
            spec,
            metrics,
            grid_rows,
            model,
        });
    }
    Ok(SuiteReport {
        task,
        averaging,
        results,
    })
}

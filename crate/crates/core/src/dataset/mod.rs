//! Labeled flow datasets.
//!
//! A [`LabeledDataset`] is a feature matrix (cells may be missing) plus a
//! binary targeted/untargeted label and, for targeted rows, the monitored
//! site the flow belongs to. Every operation returns a new dataset.

mod import;
mod io;
mod monitored;
mod preprocess;
pub(crate) mod split;

pub use import::{import_external_csv, ColumnTarget, ImportOptions};
pub use io::{
    read_dataset_csv, read_feature_rows, read_split_dir, write_dataset_csv, write_features_csv,
    write_split_dir, DATASET_LABEL_COLUMNS,
};
pub use monitored::{label, Matcher, MonitoredList};
pub use preprocess::{preprocess, MissingPolicy, PreprocessPolicy, ScalerKind, ScalerParams};
pub use split::{split, Ratios};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FEATURE_NAMES;

pub const SCHEMA_VERSION: u32 = 1;
pub const TARGETED: &str = "targeted";
/// Binary label of unmonitored traffic, and its class name in multi-class
/// tasks.
pub const UNTARGETED: &str = "untargeted";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("address {addr} matches several monitored sites: {sites:?}")]
    AmbiguousMatch { addr: String, sites: Vec<String> },
    #[error("no rows left after filtering")]
    EmptyAfterFilter,
    #[error("class {class:?} has {rows} rows, needs at least {needed}")]
    ClassTooSmall {
        class: String,
        rows: usize,
        needed: usize,
    },
    #[error("header mismatch: {0}")]
    HeaderMismatch(String),
    #[error("file has no data rows")]
    EmptyFile,
    #[error("invalid split ratios: {0}")]
    InvalidRatios(String),
    #[error("monitored list line {line}: {reason}")]
    InvalidMonitoredList { line: usize, reason: String },
    #[error("matchers {first} ({first_site}) and {second} ({second_site}) overlap")]
    OverlappingMatchers {
        first: String,
        first_site: String,
        second: String,
        second_site: String,
    },
    #[error("categorical column {column:?} has {count} distinct values (limit {limit})")]
    TooManyCategories {
        column: String,
        count: usize,
        limit: usize,
    },
    #[error("row {row}: {reason}")]
    InvalidRow { row: usize, reason: String },
    #[error("row {row} has a missing value in column {column:?} and no imputation was fitted")]
    MissingValue { row: usize, column: String },
    #[error("expected {expected} features, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BinaryLabel {
    Targeted,
    Untargeted,
}

impl BinaryLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            BinaryLabel::Targeted => TARGETED,
            BinaryLabel::Untargeted => UNTARGETED,
        }
    }
}

impl FromStr for BinaryLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            TARGETED => Ok(BinaryLabel::Targeted),
            UNTARGETED => Ok(BinaryLabel::Untargeted),
            other => Err(format!("unknown binary label {other:?}")),
        }
    }
}

/// Which label a classifier is trained against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    /// Targeted vs untargeted.
    Binary,
    /// Site label, with untargeted rows forming their own class.
    Multiclass,
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "binary" => Ok(Task::Binary),
            "multiclass" | "multi-class" | "site" => Ok(Task::Multiclass),
            other => Err(format!("unknown task {other:?}")),
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Binary => "binary",
            Task::Multiclass => "multiclass",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub features: Vec<Option<f64>>,
    pub binary: BinaryLabel,
    /// Set iff `binary` is targeted.
    pub site: Option<String>,
}

impl Row {
    pub fn targeted(features: Vec<Option<f64>>, site: impl Into<String>) -> Self {
        Row {
            features,
            binary: BinaryLabel::Targeted,
            site: Some(site.into()),
        }
    }

    pub fn untargeted(features: Vec<Option<f64>>) -> Self {
        Row {
            features,
            binary: BinaryLabel::Untargeted,
            site: None,
        }
    }

    pub fn label(&self, task: Task) -> &str {
        match task {
            Task::Binary => self.binary.as_str(),
            Task::Multiclass => self.site.as_deref().unwrap_or(UNTARGETED),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Partition {
    Train,
    Validation,
    Test,
}

impl Partition {
    pub const ALL: [Partition; 3] = [Partition::Train, Partition::Validation, Partition::Test];

    pub fn file_name(self) -> &'static str {
        match self {
            Partition::Train => "train.csv",
            Partition::Validation => "validation.csv",
            Partition::Test => "test.csv",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub schema_version: u32,
    pub feature_names: Vec<String>,
    pub rows: Vec<Row>,
    /// Partition of each row, when split.
    pub split: Option<Vec<Partition>>,
}

impl LabeledDataset {
    /// Build a dataset, checking row arity and the label invariant.
    pub fn new(feature_names: Vec<String>, rows: Vec<Row>) -> Result<Self, DatasetError> {
        for (i, row) in rows.iter().enumerate() {
            if row.features.len() != feature_names.len() {
                return Err(DatasetError::InvalidRow {
                    row: i,
                    reason: format!(
                        "{} features, schema has {}",
                        row.features.len(),
                        feature_names.len()
                    ),
                });
            }
            if row.site.is_some() != (row.binary == BinaryLabel::Targeted) {
                return Err(DatasetError::InvalidRow {
                    row: i,
                    reason: "site label must be present exactly for targeted rows".into(),
                });
            }
        }
        Ok(LabeledDataset {
            schema_version: SCHEMA_VERSION,
            feature_names,
            rows,
            split: None,
        })
    }

    /// Dataset over the standard flow feature schema.
    pub fn with_flow_schema(rows: Vec<Row>) -> Result<Self, DatasetError> {
        Self::new(FEATURE_NAMES.iter().map(|s| s.to_string()).collect(), rows)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn labels(&self, task: Task) -> Vec<&str> {
        self.rows.iter().map(|r| r.label(task)).collect()
    }

    pub fn has_missing(&self) -> bool {
        self.rows
            .iter()
            .any(|r| r.features.iter().any(Option::is_none))
    }

    /// New dataset with the given rows, in the given order. Split
    /// assignments follow their rows.
    pub fn select(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            schema_version: self.schema_version,
            feature_names: self.feature_names.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            split: self
                .split
                .as_ref()
                .map(|s| indices.iter().map(|&i| s[i]).collect()),
        }
    }

    /// Indices of rows in partition `p`; all rows when unsplit.
    pub fn partition_indices(&self, p: Partition) -> Vec<usize> {
        match &self.split {
            Some(s) => (0..self.rows.len()).filter(|&i| s[i] == p).collect(),
            None => (0..self.rows.len()).collect(),
        }
    }

    /// Rows of one partition as an unsplit dataset.
    pub fn partition(&self, p: Partition) -> LabeledDataset {
        let mut part = self.select(&self.partition_indices(p));
        part.split = None;
        part
    }

    /// Dense matrix of all features; fails on the first missing cell.
    pub fn matrix(&self) -> Result<Vec<Vec<f64>>, DatasetError> {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                r.features
                    .iter()
                    .enumerate()
                    .map(|(j, v)| {
                        v.ok_or_else(|| DatasetError::MissingValue {
                            row: i,
                            column: self.feature_names[j].clone(),
                        })
                    })
                    .collect()
            })
            .collect()
    }

    /// Count of rows per label, in label order.
    pub fn class_counts(&self, task: Task) -> Vec<(String, usize)> {
        let mut counts = std::collections::BTreeMap::<&str, usize>::new();
        for r in &self.rows {
            *counts.entry(r.label(task)).or_default() += 1;
        }
        counts.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_invariant_is_enforced() {
        let bad = Row {
            features: vec![Some(1.0)],
            binary: BinaryLabel::Untargeted,
            site: Some("x".into()),
        };
        assert!(LabeledDataset::new(vec!["a".into()], vec![bad]).is_err());
        let ok = Row::targeted(vec![Some(1.0)], "x");
        assert!(LabeledDataset::new(vec!["a".into()], vec![ok]).is_ok());
    }

    #[test]
    fn multiclass_label_of_untargeted_row() {
        let r = Row::untargeted(vec![]);
        assert_eq!(r.label(Task::Multiclass), UNTARGETED);
        assert_eq!(r.label(Task::Binary), UNTARGETED);
        let r = Row::targeted(vec![], "siteA");
        assert_eq!(r.label(Task::Multiclass), "siteA");
        assert_eq!(r.label(Task::Binary), TARGETED);
    }

    #[test]
    fn matrix_reports_missing_cell() {
        let ds = LabeledDataset::new(
            vec!["a".into(), "b".into()],
            vec![Row::untargeted(vec![Some(1.0), None])],
        )
        .unwrap();
        assert!(matches!(
            ds.matrix(),
            Err(DatasetError::MissingValue { row: 0, ref column }) if column == "b"
        ));
    }
}

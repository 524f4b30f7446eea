//! The seven classifiers behind one fit / predict contract.
//!
//! [`fit`] standardizes the training rows with the kind's default
//! preprocessing (median imputation for missing cells; z-scores for the
//! distance- and margin-based SVM and KNN), records the fitted
//! [`ScalerParams`] in the model and applies them again at prediction time.
//! Classes are ordered by first appearance in the training data; every
//! argmax breaks ties towards the lower class index.

mod adaboost;
mod forest;
pub mod gbm;
mod knn;
mod nb;
mod params;
mod svm;
mod tree;

pub use adaboost::AdaBoost;
pub use forest::{DecisionTree, RandomForest};
pub use gbm::GradientBoosting;
pub use knn::Knn;
pub use nb::GaussianNb;
pub use params::{param_names, validate, HyperValue};
pub use svm::{svm_objective, LinearSvm};
pub use tree::{Node, Tree};

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{
    preprocess, DatasetError, LabeledDataset, MissingPolicy, PreprocessPolicy, ScalerKind, ScalerParams, Task,
};
use forest::argmax;
use params::Resolved;

/// Identifier written into saved model documents.
pub const MODEL_FORMAT: &str = "wfkit-model";
pub const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "DT")]
    Dt,
    #[serde(rename = "RF")]
    Rf,
    #[serde(rename = "GBM")]
    Gbm,
    #[serde(rename = "ADAB")]
    AdaB,
    #[serde(rename = "SVM")]
    Svm,
    #[serde(rename = "NB")]
    Nb,
    #[serde(rename = "KNN")]
    Knn,
}

impl ModelKind {
    /// Every kind, in report order.
    pub const ALL: [ModelKind; 7] = [
        ModelKind::Dt,
        ModelKind::Rf,
        ModelKind::Gbm,
        ModelKind::AdaB,
        ModelKind::Svm,
        ModelKind::Nb,
        ModelKind::Knn,
    ];

    /// Name used in report tables.
    pub fn display_name(self) -> &'static str {
        match self {
            ModelKind::Dt => "DT",
            ModelKind::Rf => "RF",
            ModelKind::Gbm => "GBM",
            ModelKind::AdaB => "AdaB",
            ModelKind::Svm => "SVM",
            ModelKind::Nb => "NB",
            ModelKind::Knn => "KNN",
        }
    }

    /// Whether `predict_proba` is defined.
    pub fn has_probabilities(self) -> bool {
        self != ModelKind::Svm
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.display_name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown model kind {s:?} (expected one of DT, RF, GBM, AdaB, SVM, NB, KNN)"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSpec {
    pub kind: ModelKind,
    pub hyperparameters: BTreeMap<String, HyperValue>,
    pub seed: u64,
}

impl ClassifierSpec {
    /// Spec with every hyperparameter at its default.
    pub fn new(kind: ModelKind, seed: u64) -> Self {
        ClassifierSpec {
            kind,
            hyperparameters: BTreeMap::new(),
            seed,
        }
    }

    pub fn with(mut self, name: &str, value: impl Into<HyperValue>) -> Self {
        self.hyperparameters.insert(name.to_string(), value.into());
        self
    }

    pub fn validate(&self) -> Result<(), LearnError> {
        validate(self.kind, &self.hyperparameters)
    }
}

impl From<usize> for HyperValue {
    fn from(x: usize) -> Self {
        HyperValue::Finite(x as f64)
    }
}

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("degenerate training data: {0}")]
    DegenerateInput(String),
    #[error("invalid hyperparameter {name:?} for {kind}: {reason}")]
    InvalidHyperparameter {
        kind: ModelKind,
        name: String,
        reason: String,
    },
    #[error("rows have {got} features, model expects {expected}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("{0}")]
    Unsupported(String),
    #[error("model document has schema_version {found}, this build reads {supported}")]
    VersionMismatch { found: u64, supported: u32 },
    #[error("corrupt model document: {0}")]
    CorruptDocument(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

/// Fitted parameters of one model kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelState {
    DecisionTree(DecisionTree),
    RandomForest(RandomForest),
    GradientBoosting(GradientBoosting),
    AdaBoost(AdaBoost),
    LinearSvm(LinearSvm),
    GaussianNb(GaussianNb),
    Knn(Knn),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub spec: ClassifierSpec,
    pub task: Task,
    pub classes: Vec<String>,
    pub feature_names: Vec<String>,
    pub scaler: ScalerParams,
    pub state: ModelState,
}

/// Preprocessing [`fit`] applies for `kind`.
pub fn default_policy(kind: ModelKind) -> PreprocessPolicy {
    PreprocessPolicy {
        dedup: false,
        missing: MissingPolicy::ImputeMedian,
        scaler: match kind {
            ModelKind::Svm | ModelKind::Knn => ScalerKind::Zscore,
            _ => ScalerKind::None,
        },
    }
}

/// Train `spec` on every row of `train` against the `task` label.
pub fn fit(spec: &ClassifierSpec, train: &LabeledDataset, task: Task) -> Result<TrainedModel, LearnError> {
    fit_with_policy(spec, train, task, &default_policy(spec.kind))
}

pub fn fit_with_policy(
    spec: &ClassifierSpec,
    train: &LabeledDataset,
    task: Task,
    policy: &PreprocessPolicy,
) -> Result<TrainedModel, LearnError> {
    let p = Resolved::new(spec.kind, &spec.hyperparameters)?;
    if train.is_empty() {
        return Err(LearnError::DegenerateInput("no training rows".into()));
    }
    let mut ds = train.clone();
    ds.split = None;
    let (ds, scaler) = preprocess(&ds, policy).map_err(|e| match e {
        DatasetError::EmptyAfterFilter => LearnError::DegenerateInput("no rows survive preprocessing".into()),
        other => other.into(),
    })?;
    let mut classes: Vec<String> = Vec::new();
    let y: Vec<usize> = ds
        .rows
        .iter()
        .map(|r| {
            let label = r.label(task);
            match classes.iter().position(|c| c == label) {
                Some(i) => i,
                None => {
                    classes.push(label.to_string());
                    classes.len() - 1
                }
            }
        })
        .collect();
    if classes.len() < 2 {
        return Err(LearnError::DegenerateInput(format!(
            "{task} training data has a single class {:?}",
            classes[0]
        )));
    }
    let x = ds.matrix()?;
    let k = classes.len();
    let state = match spec.kind {
        ModelKind::Dt => ModelState::DecisionTree(DecisionTree::fit(&x, &y, k, &p)),
        ModelKind::Rf => ModelState::RandomForest(RandomForest::fit(&x, &y, k, &p, spec.seed)),
        ModelKind::Gbm => ModelState::GradientBoosting(GradientBoosting::fit(&x, &y, k, &p)),
        ModelKind::AdaB => ModelState::AdaBoost(AdaBoost::fit(&x, &y, k, &p)),
        ModelKind::Svm => ModelState::LinearSvm(LinearSvm::fit(&x, &y, k, &p, spec.seed)),
        ModelKind::Nb => ModelState::GaussianNb(GaussianNb::fit(&x, &y, k, &p)),
        ModelKind::Knn => ModelState::Knn(Knn::fit(&x, &y, k, &p)),
    };
    Ok(TrainedModel {
        spec: spec.clone(),
        task,
        classes,
        feature_names: ds.feature_names.clone(),
        scaler,
        state,
    })
}

#[derive(Deserialize)]
struct DocumentHeader {
    format: String,
    schema_version: u64,
}

#[derive(Serialize, Deserialize)]
struct ModelDocument {
    format: String,
    schema_version: u64,
    model: TrainedModel,
}

impl TrainedModel {
    pub fn n_features(&self) -> usize {
        self.scaler.n_features()
    }

    /// Per-class scores on already scaled values: probabilities, or
    /// margins for SVM.
    fn raw_scores(&self, x: &[f64]) -> Vec<f64> {
        match &self.state {
            ModelState::DecisionTree(m) => m.scores(x),
            ModelState::RandomForest(m) => m.scores(x),
            ModelState::GradientBoosting(m) => m.scores(x),
            ModelState::AdaBoost(m) => m.scores(x),
            ModelState::LinearSvm(m) => m.scores(x),
            ModelState::GaussianNb(m) => m.scores(x),
            ModelState::Knn(m) => m.scores(x),
        }
    }

    /// Scale raw rows the way the training rows were scaled.
    pub fn transform(&self, rows: &[Vec<Option<f64>>]) -> Result<Vec<Vec<f64>>, LearnError> {
        rows.iter()
            .enumerate()
            .map(|(i, r)| {
                if r.len() != self.n_features() {
                    return Err(LearnError::ArityMismatch {
                        expected: self.n_features(),
                        got: r.len(),
                    });
                }
                self.scaler.transform(r).map_err(|e| match e {
                    DatasetError::MissingValue { column, .. } => {
                        DatasetError::MissingValue { row: i, column }.into()
                    }
                    other => other.into(),
                })
            })
            .collect()
    }

    /// Per-class scores for each row: probabilities for every kind except
    /// SVM, whose scores are margins.
    pub fn decision_scores(&self, rows: &[Vec<Option<f64>>]) -> Result<Vec<Vec<f64>>, LearnError> {
        let x = self.transform(rows)?;
        Ok(x.par_iter().map(|r| self.raw_scores(r)).collect())
    }

    /// Predicted class index per row.
    pub fn predict_indices(&self, rows: &[Vec<Option<f64>>]) -> Result<Vec<usize>, LearnError> {
        Ok(self.decision_scores(rows)?.iter().map(|s| argmax(s)).collect())
    }

    /// Predicted class label per row.
    pub fn predict(&self, rows: &[Vec<Option<f64>>]) -> Result<Vec<String>, LearnError> {
        Ok(self
            .predict_indices(rows)?
            .into_iter()
            .map(|i| self.classes[i].clone())
            .collect())
    }

    pub fn predict_proba(&self, rows: &[Vec<Option<f64>>]) -> Result<Vec<Vec<f64>>, LearnError> {
        if !self.spec.kind.has_probabilities() {
            return Err(LearnError::Unsupported(format!(
                "{} exposes margins, not probabilities",
                self.spec.kind
            )));
        }
        self.decision_scores(rows)
    }

    /// Predicted labels for every row of `ds`.
    pub fn predict_dataset(&self, ds: &LabeledDataset) -> Result<Vec<String>, LearnError> {
        let rows: Vec<Vec<Option<f64>>> = ds.rows.iter().map(|r| r.features.clone()).collect();
        self.predict(&rows)
    }

    /// Serialize to the versioned JSON model document.
    pub fn save(&self) -> Vec<u8> {
        let doc = ModelDocument {
            format: MODEL_FORMAT.into(),
            schema_version: MODEL_SCHEMA_VERSION.into(),
            model: self.clone(),
        };
        let mut bytes = serde_json::to_vec_pretty(&doc).expect("model state is finite");
        bytes.push(b'\n');
        bytes
    }

    pub fn load(bytes: &[u8]) -> Result<TrainedModel, LearnError> {
        let header: DocumentHeader =
            serde_json::from_slice(bytes).map_err(|e| LearnError::CorruptDocument(e.to_string()))?;
        if header.format != MODEL_FORMAT {
            return Err(LearnError::CorruptDocument(format!(
                "format is {:?}, expected {MODEL_FORMAT:?}",
                header.format
            )));
        }
        if header.schema_version != u64::from(MODEL_SCHEMA_VERSION) {
            return Err(LearnError::VersionMismatch {
                found: header.schema_version,
                supported: MODEL_SCHEMA_VERSION,
            });
        }
        let doc: ModelDocument =
            serde_json::from_slice(bytes).map_err(|e| LearnError::CorruptDocument(e.to_string()))?;
        let m = doc.model;
        m.spec.validate()?;
        if m.classes.len() < 2 || m.scaler.scale.len() != m.n_features() || m.feature_names.len() != m.n_features() {
            return Err(LearnError::CorruptDocument("inconsistent model dimensions".into()));
        }
        Ok(m)
    }

    /// SVM convergence trace; `None` for other kinds.
    pub fn svm_objective_history(&self) -> Option<&[Vec<f64>]> {
        match &self.state {
            ModelState::LinearSvm(m) => Some(&m.objective_history),
            _ => None,
        }
    }
}

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::EvalError;

/// Square matrix of counts; entry `(i, j)` counts rows of true class `i`
/// predicted as class `j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

/// One-vs-rest counts of a single class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl ConfusionMatrix {
    /// Tally `(truth, predicted)` pairs over `classes`; labels outside the
    /// class list are rejected.
    pub fn from_labels<S: AsRef<str>, T: AsRef<str>>(
        truth: &[S],
        predicted: &[T],
        classes: Vec<String>,
    ) -> Result<Self, EvalError> {
        if truth.len() != predicted.len() {
            return Err(EvalError::LengthMismatch {
                truth: truth.len(),
                predicted: predicted.len(),
            });
        }
        let index = |label: &str| {
            classes
                .iter()
                .position(|c| c == label)
                .ok_or_else(|| EvalError::UnknownLabel(label.to_string()))
        };
        let mut counts = vec![vec![0u64; classes.len()]; classes.len()];
        for (t, p) in truth.iter().zip(predicted) {
            counts[index(t.as_ref())?][index(p.as_ref())?] += 1;
        }
        Ok(ConfusionMatrix { classes, counts })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn class_index(&self, label: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == label)
    }

    pub fn support(&self, i: usize) -> u64 {
        self.counts[i].iter().sum()
    }

    pub fn one_vs_rest(&self, i: usize) -> BinaryCounts {
        let tp = self.counts[i][i];
        let predicted: u64 = self.counts.iter().map(|r| r[i]).sum();
        let actual = self.support(i);
        BinaryCounts {
            tp,
            fp: predicted - tp,
            fn_: actual - tp,
            tn: self.total() + tp - predicted - actual,
        }
    }
}

impl fmt::Display for ConfusionMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let w = self
            .classes
            .iter()
            .map(String::len)
            .chain(self.counts.iter().flatten().map(|c| c.to_string().len()))
            .max()
            .unwrap_or(1)
            .max("truth\\pred".len());
        write!(f, "{:<w$}", "truth\\pred")?;
        for c in &self.classes {
            write!(f, "  {c:>w$}")?;
        }
        writeln!(f)?;
        for (c, row) in self.classes.iter().zip(&self.counts) {
            write!(f, "{c:<w$}")?;
            for v in row {
                write!(f, "  {v:>w$}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// How per-class scores are combined into one number.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    /// Scores of the declared positive class only.
    Binary { positive: String },
    /// Unweighted mean over classes.
    Macro,
    /// Mean over classes weighted by support.
    Weighted,
}

impl fmt::Display for Averaging {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Averaging::Binary { positive } => write!(f, "binary (positive: {positive})"),
            Averaging::Macro => f.write_str("macro"),
            Averaging::Weighted => f.write_str("weighted"),
        }
    }
}

/// Averaging mode name without its positive class: `binary`, `macro` or
/// `weighted`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AveragingMode {
    Binary,
    Macro,
    Weighted,
}

impl FromStr for AveragingMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "binary" | "binary_positive" => Ok(AveragingMode::Binary),
            "macro" => Ok(AveragingMode::Macro),
            "weighted" => Ok(AveragingMode::Weighted),
            other => Err(format!("unknown averaging {other:?} (binary, macro, weighted)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub averaging: Averaging,
    pub per_class: Vec<ClassMetrics>,
    pub confusion: ConfusionMatrix,
}

/// `num / den`, or 0 when the denominator is 0.
fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    ratio(2.0 * precision * recall, precision + recall)
}

impl MetricsReport {
    pub fn from_confusion(confusion: ConfusionMatrix, averaging: Averaging) -> Result<Self, EvalError> {
        let total = confusion.total();
        if total == 0 {
            return Err(EvalError::Empty);
        }
        let per_class: Vec<ClassMetrics> = (0..confusion.classes.len())
            .map(|i| {
                let c = confusion.one_vs_rest(i);
                let precision = ratio(c.tp as f64, (c.tp + c.fp) as f64);
                let recall = ratio(c.tp as f64, (c.tp + c.fn_) as f64);
                ClassMetrics {
                    class: confusion.classes[i].clone(),
                    precision,
                    recall,
                    f1: f1_score(precision, recall),
                    support: confusion.support(i),
                }
            })
            .collect();
        let accuracy = confusion.trace() as f64 / total as f64;
        let (precision, recall, f1) = match &averaging {
            Averaging::Binary { positive } => {
                let i = confusion
                    .class_index(positive)
                    .ok_or_else(|| EvalError::UnknownLabel(positive.clone()))?;
                let m = &per_class[i];
                (m.precision, m.recall, m.f1)
            }
            Averaging::Macro => {
                let k = per_class.len() as f64;
                (
                    per_class.iter().map(|m| m.precision).sum::<f64>() / k,
                    per_class.iter().map(|m| m.recall).sum::<f64>() / k,
                    per_class.iter().map(|m| m.f1).sum::<f64>() / k,
                )
            }
            Averaging::Weighted => {
                let n = total as f64;
                let avg = |f: fn(&ClassMetrics) -> f64| {
                    per_class.iter().map(|m| f(m) * m.support as f64).sum::<f64>() / n
                };
                (avg(|m| m.precision), avg(|m| m.recall), avg(|m| m.f1))
            }
        };
        Ok(MetricsReport {
            accuracy,
            precision,
            recall,
            f1,
            averaging,
            per_class,
            confusion,
        })
    }
}

/// Metrics of `predicted` against `truth`. Classes are the sorted union of
/// both label sets plus the positive class, if any.
pub fn compute_metrics<S: AsRef<str>, T: AsRef<str>>(
    truth: &[S],
    predicted: &[T],
    averaging: Averaging,
) -> Result<MetricsReport, EvalError> {
    let mut classes: BTreeSet<String> = truth
        .iter()
        .map(|s| s.as_ref().to_string())
        .chain(predicted.iter().map(|s| s.as_ref().to_string()))
        .collect();
    if let Averaging::Binary { positive } = &averaging {
        classes.insert(positive.clone());
    }
    compute_metrics_with_classes(truth, predicted, classes.into_iter().collect(), averaging)
}

/// Metrics over a fixed class list; labels outside it are an error.
pub fn compute_metrics_with_classes<S: AsRef<str>, T: AsRef<str>>(
    truth: &[S],
    predicted: &[T],
    classes: Vec<String>,
    averaging: Averaging,
) -> Result<MetricsReport, EvalError> {
    if truth.is_empty() && predicted.is_empty() {
        return Err(EvalError::Empty);
    }
    let confusion = ConfusionMatrix::from_labels(truth, predicted, classes)?;
    MetricsReport::from_confusion(confusion, averaging)
}

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{DatasetError, LabeledDataset, Partition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    Drop,
    ImputeMedian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalerKind {
    /// Subtract the mean, divide by the population standard deviation.
    Zscore,
    MinMax,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreprocessPolicy {
    pub dedup: bool,
    pub missing: MissingPolicy,
    pub scaler: ScalerKind,
}

impl Default for PreprocessPolicy {
    fn default() -> Self {
        PreprocessPolicy {
            dedup: true,
            missing: MissingPolicy::ImputeMedian,
            scaler: ScalerKind::Zscore,
        }
    }
}

/// Fitted preprocessing state, reusable on unseen rows.
///
/// Each feature maps to `(x - offset) / scale`; a zero scale marks a
/// constant training column, which maps to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub kind: ScalerKind,
    pub offset: Vec<f64>,
    pub scale: Vec<f64>,
    /// Per-feature replacement for missing cells, when imputation was fitted.
    pub impute: Option<Vec<f64>>,
}

impl ScalerParams {
    pub fn identity(n_features: usize) -> Self {
        ScalerParams {
            kind: ScalerKind::None,
            offset: vec![0.0; n_features],
            scale: vec![1.0; n_features],
            impute: None,
        }
    }

    pub fn n_features(&self) -> usize {
        self.offset.len()
    }

    fn scale_value(&self, j: usize, x: f64) -> f64 {
        if self.scale[j] == 0.0 {
            0.0
        } else {
            (x - self.offset[j]) / self.scale[j]
        }
    }

    /// Impute and scale one row.
    pub fn transform(&self, row: &[Option<f64>]) -> Result<Vec<f64>, DatasetError> {
        if row.len() != self.n_features() {
            return Err(DatasetError::ArityMismatch {
                expected: self.n_features(),
                got: row.len(),
            });
        }
        row.iter()
            .enumerate()
            .map(|(j, v)| {
                let x = match (v, &self.impute) {
                    (Some(x), _) => *x,
                    (None, Some(fill)) => fill[j],
                    (None, None) => {
                        return Err(DatasetError::MissingValue {
                            row: 0,
                            column: format!("#{j}"),
                        })
                    }
                };
                Ok(self.scale_value(j, x))
            })
            .collect()
    }

    /// Scale an already complete row.
    pub fn transform_dense(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, &x)| self.scale_value(j, x))
            .collect()
    }
}

pub(crate) fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    })
}

fn fit_indices(ds: &LabeledDataset) -> Vec<usize> {
    ds.partition_indices(Partition::Train)
}

/// Deduplicate, handle missing cells and scale.
///
/// Imputation medians and scaler statistics come from training rows only
/// when the dataset is split, from every row otherwise.
pub fn preprocess(
    ds: &LabeledDataset,
    policy: &PreprocessPolicy,
) -> Result<(LabeledDataset, ScalerParams), DatasetError> {
    let d = ds.n_features();
    let mut keep: Vec<usize> = (0..ds.len()).collect();
    if policy.dedup {
        let mut seen = HashSet::new();
        keep.retain(|&i| {
            let r = &ds.rows[i];
            let bits: Vec<Option<u64>> = r.features.iter().map(|v| v.map(f64::to_bits)).collect();
            seen.insert((bits, r.binary, r.site.clone()))
        });
    }
    if policy.missing == MissingPolicy::Drop {
        keep.retain(|&i| ds.rows[i].features.iter().all(Option::is_some));
    }
    let mut out = ds.select(&keep);
    if out.is_empty() {
        return Err(DatasetError::EmptyAfterFilter);
    }

    let fit_rows = fit_indices(&out);
    let impute = match policy.missing {
        MissingPolicy::Drop => None,
        MissingPolicy::ImputeMedian => {
            let medians: Vec<f64> = (0..d)
                .map(|j| {
                    let mut col: Vec<f64> =
                        fit_rows.iter().filter_map(|&i| out.rows[i].features[j]).collect();
                    median(&mut col).unwrap_or(0.0)
                })
                .collect();
            for row in &mut out.rows {
                for (v, m) in row.features.iter_mut().zip(&medians) {
                    v.get_or_insert(*m);
                }
            }
            Some(medians)
        }
    };

    let (offset, scale) = match policy.scaler {
        ScalerKind::None => (vec![0.0; d], vec![1.0; d]),
        ScalerKind::Zscore => {
            let n = fit_rows.len() as f64;
            let mut offset = vec![0.0; d];
            let mut scale = vec![0.0; d];
            for j in 0..d {
                let col = || fit_rows.iter().map(|&i| out.rows[i].features[j].unwrap_or(0.0));
                let mean = col().sum::<f64>() / n;
                let var = col().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
                offset[j] = mean;
                scale[j] = var.sqrt();
            }
            (offset, scale)
        }
        ScalerKind::MinMax => {
            let mut offset = vec![0.0; d];
            let mut scale = vec![0.0; d];
            for j in 0..d {
                let (lo, hi) = fit_rows
                    .iter()
                    .map(|&i| out.rows[i].features[j].unwrap_or(0.0))
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
                        (lo.min(x), hi.max(x))
                    });
                offset[j] = lo;
                scale[j] = hi - lo;
            }
            (offset, scale)
        }
    };
    let params = ScalerParams {
        kind: policy.scaler,
        offset,
        scale,
        impute,
    };
    for row in &mut out.rows {
        for (j, v) in row.features.iter_mut().enumerate() {
            if let Some(x) = v {
                *x = params.scale_value(j, *x);
            }
        }
    }
    Ok((out, params))
}

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DatasetError, LabeledDataset, Partition, Task};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ratios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for Ratios {
    fn default() -> Self {
        Ratios {
            train: 0.70,
            validation: 0.15,
            test: 0.15,
        }
    }
}

impl Ratios {
    pub fn new(train: f64, validation: f64, test: f64) -> Result<Self, DatasetError> {
        let r = Ratios {
            train,
            validation,
            test,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let parts = self.as_array();
        if parts.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
            return Err(DatasetError::InvalidRatios(format!(
                "ratios must be positive, got {self}"
            )));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(DatasetError::InvalidRatios(format!(
                "ratios sum to {sum}, expected 1"
            )));
        }
        Ok(())
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.train, self.validation, self.test]
    }
}

impl fmt::Display for Ratios {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.train, self.validation, self.test)
    }
}

impl FromStr for Ratios {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<f64> = s
            .split([',', '/'])
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| DatasetError::InvalidRatios(format!("{s:?}: {e}")))?;
        let [train, validation, test] = parts[..] else {
            return Err(DatasetError::InvalidRatios(format!(
                "{s:?}: expected three values"
            )));
        };
        // accept percentages such as 70/15/15
        let sum = train + validation + test;
        if (sum - 100.0).abs() < 1e-6 {
            return Ratios::new(train / 100.0, validation / 100.0, test / 100.0);
        }
        Ratios::new(train, validation, test)
    }
}

/// Split `n` items by `ratios` with largest-remainder rounding. Remainder
/// ties go to the earlier partition.
pub(crate) fn largest_remainder(n: usize, ratios: &[f64]) -> Vec<usize> {
    let quotas: Vec<f64> = ratios.iter().map(|r| n as f64 * r).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..ratios.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Stratified train/validation/test assignment.
///
/// Within each stratum (label of `stratify_on`, visited in label order) rows
/// are shuffled by a generator seeded from `seed`, then cut by
/// largest-remainder counts. A partition that would receive no rows of a
/// stratum takes one from the largest partition.
pub fn split(
    ds: &LabeledDataset,
    ratios: Ratios,
    stratify_on: Task,
    seed: u64,
) -> Result<LabeledDataset, DatasetError> {
    ratios.validate()?;
    let mut strata: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in ds.rows.iter().enumerate() {
        strata.entry(r.label(stratify_on)).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![Partition::Train; ds.len()];
    for (class, mut members) in strata {
        let n = members.len();
        if n < Partition::ALL.len() {
            return Err(DatasetError::ClassTooSmall {
                class: class.to_string(),
                rows: n,
                needed: Partition::ALL.len(),
            });
        }
        let mut counts = largest_remainder(n, &ratios.as_array());
        while let Some(empty) = counts.iter().position(|&c| c == 0) {
            let donor = (0..counts.len())
                .max_by(|&a, &b| counts[a].cmp(&counts[b]).then(b.cmp(&a)))
                .expect("non-empty");
            counts[donor] -= 1;
            counts[empty] += 1;
        }
        members.shuffle(&mut rng);
        let mut cursor = members.into_iter();
        for (p, &c) in Partition::ALL.iter().zip(&counts) {
            for i in cursor.by_ref().take(c) {
                assignment[i] = *p;
            }
        }
    }
    let mut out = ds.clone();
    out.split = Some(assignment);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Row;

    fn dataset(per_class: &[(&str, usize)]) -> LabeledDataset {
        let mut rows = Vec::new();
        for (site, n) in per_class {
            for i in 0..*n {
                rows.push(Row::targeted(vec![Some(i as f64)], *site));
            }
        }
        LabeledDataset::new(vec!["x".into()], rows).unwrap()
    }

    fn sizes(ds: &LabeledDataset, class: Option<&str>) -> [usize; 3] {
        let mut out = [0; 3];
        for (r, p) in ds.rows.iter().zip(ds.split.as_ref().unwrap()) {
            if class.is_none_or(|c| r.label(Task::Multiclass) == c) {
                out[*p as usize] += 1;
            }
        }
        out
    }

    #[test]
    fn exact_proportions() {
        let ds = dataset(&[("a", 100)]);
        let s = split(&ds, Ratios::new(0.8, 0.1, 0.1).unwrap(), Task::Multiclass, 1).unwrap();
        assert_eq!(sizes(&s, None), [80, 10, 10]);
    }

    #[test]
    fn remainder_tie_goes_to_validation() {
        assert_eq!(largest_remainder(50, &[0.7, 0.15, 0.15]), vec![35, 8, 7]);
        let ds = dataset(&[("a", 50), ("b", 50)]);
        let s = split(&ds, Ratios::default(), Task::Multiclass, 3).unwrap();
        assert_eq!(sizes(&s, Some("a")), [35, 8, 7]);
        assert_eq!(sizes(&s, Some("b")), [35, 8, 7]);
    }

    #[test]
    fn small_class_reaches_every_partition() {
        let ds = dataset(&[("a", 3), ("b", 40)]);
        let s = split(&ds, Ratios::default(), Task::Multiclass, 9).unwrap();
        assert_eq!(sizes(&s, Some("a")), [1, 1, 1]);
    }

    #[test]
    fn too_small_class() {
        let ds = dataset(&[("a", 2), ("b", 40)]);
        assert!(matches!(
            split(&ds, Ratios::default(), Task::Multiclass, 9),
            Err(DatasetError::ClassTooSmall { rows: 2, .. })
        ));
    }

    #[test]
    fn deterministic_for_seed() {
        let ds = dataset(&[("a", 37), ("b", 21)]);
        let x = split(&ds, Ratios::default(), Task::Multiclass, 42).unwrap();
        let y = split(&ds, Ratios::default(), Task::Multiclass, 42).unwrap();
        let z = split(&ds, Ratios::default(), Task::Multiclass, 43).unwrap();
        assert_eq!(x.split, y.split);
        assert_ne!(x.split, z.split);
    }

    #[test]
    fn ratio_parsing() {
        let r: Ratios = "70/15/15".parse().unwrap();
        assert!((r.train - 0.7).abs() < 1e-12);
        let r: Ratios = "0.8,0.1,0.1".parse().unwrap();
        assert_eq!(r.test, 0.1);
        assert!("0.5,0.5".parse::<Ratios>().is_err());
        assert!("0.5,0.5,0.5".parse::<Ratios>().is_err());
        assert!(Ratios::new(1.0, 0.0, 0.0).is_err());
    }
}

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{draw_flow, effective_models, validate_profiles, SiteProfile, SynthError};
use crate::dataset::split::largest_remainder;
use crate::dataset::{LabeledDataset, Row};
use crate::features::FeatureVector;

/// Sample a labeled feature dataset directly from the profiles.
///
/// Without `imbalance` every profile contributes `rows_per_class` rows.
/// With `imbalance = Some(f)` the same total is redistributed so that a
/// fraction `f` (rounded to the nearest row) comes from targeted profiles,
/// spread evenly over them, and the rest from untargeted ones.
///
/// Rows are grouped by profile in profile order. Profile `i` draws from its
/// own random stream, so its rows do not depend on the other profiles.
pub fn generate_dataset(
    profiles: &[SiteProfile],
    rows_per_class: usize,
    separability: f64,
    imbalance: Option<f64>,
    seed: u64,
) -> Result<LabeledDataset, SynthError> {
    validate_profiles(profiles)?;
    if !(separability.is_finite() && separability >= 0.0) {
        return Err(SynthError::InvalidArgument(format!(
            "separability must be finite and >= 0, got {separability}"
        )));
    }
    let counts = row_counts(profiles, rows_per_class, imbalance)?;
    let models = effective_models(profiles, separability);
    let groups: Vec<Vec<Row>> = (0..profiles.len())
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            (0..counts[i])
                .map(|_| {
                    let f = draw_flow(&models[i], &mut rng);
                    let fwd_length = (f.fwd_packets as f64 * f.fwd_size).round() as u64;
                    let bwd_length = (f.bwd_packets as f64 * f.bwd_size).round() as u64;
                    let fv = FeatureVector::from_counts(f.duration, f.fwd_packets, f.bwd_packets, fwd_length, bwd_length);
                    if profiles[i].targeted {
                        Row::targeted(fv.to_row(), profiles[i].site_label.clone())
                    } else {
                        Row::untargeted(fv.to_row())
                    }
                })
                .collect()
        })
        .collect();
    Ok(LabeledDataset::with_flow_schema(groups.into_iter().flatten().collect())?)
}

fn row_counts(profiles: &[SiteProfile], rows_per_class: usize, imbalance: Option<f64>) -> Result<Vec<usize>, SynthError> {
    let Some(fraction) = imbalance else {
        return Ok(vec![rows_per_class; profiles.len()]);
    };
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(SynthError::InvalidArgument(format!(
            "targeted fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let targeted: Vec<usize> = (0..profiles.len()).filter(|&i| profiles[i].targeted).collect();
    let background: Vec<usize> = (0..profiles.len()).filter(|&i| !profiles[i].targeted).collect();
    if targeted.is_empty() || background.is_empty() {
        return Err(SynthError::InvalidArgument(
            "an imbalanced dataset needs targeted and untargeted profiles".into(),
        ));
    }
    let total = rows_per_class * profiles.len();
    let n_targeted = (fraction * total as f64).round() as usize;
    let mut counts = vec![0; profiles.len()];
    for (group, n) in [(&targeted, n_targeted), (&background, total - n_targeted)] {
        let share = vec![1.0 / group.len() as f64; group.len()];
        for (&i, c) in group.iter().zip(largest_remainder(n, &share)) {
            counts[i] = c;
        }
    }
    Ok(counts)
}

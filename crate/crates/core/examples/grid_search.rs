//! Cross-validated grid search for a random forest; prints every
//! combination's fold scores and the chosen one.
//!
//! ```text
//! cargo run --release --example grid_search
//! ```

use std::collections::BTreeMap;

use wfkit::dataset::{split, Partition, Ratios, Task};
use wfkit::eval::{grid_search, write_grid_csv, GridOptions};
use wfkit::learners::{ClassifierSpec, HyperValue, ModelKind};
use wfkit::synth::{closed_world_profiles, generate_dataset};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = generate_dataset(&closed_world_profiles(5, 0), 80, 2.0, None, 3)?;
    let data = split(&data, Ratios::new(0.7, 0.15, 0.15)?, Task::Multiclass, 3)?;

    let grid = BTreeMap::from([
        ("n_estimators".to_string(), vec![HyperValue::Finite(25.0), HyperValue::Finite(100.0)]),
        ("max_depth".to_string(), vec![HyperValue::Finite(3.0), HyperValue::Finite(8.0), HyperValue::Unbounded]),
    ]);
    let base = ClassifierSpec::new(ModelKind::Rf, 3);
    let result = grid_search(&base, &grid, &data.partition(Partition::Train), Task::Multiclass, 3, GridOptions::default())?;

    write_grid_csv(std::io::stdout().lock(), &result.rows)?;
    println!("\nbest: {:?} (row {})", result.best.hyperparameters, result.best_index);
    Ok(())
}

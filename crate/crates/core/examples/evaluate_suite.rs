//! The binary experiment at a realistic class imbalance: every classifier
//! is trained on the same split and scored on the rare targeted class,
//! giving a table in the usual Model / Accuracy / Precision / Recall / F1
//! layout.
//!
//! ```text
//! cargo run --release --example evaluate_suite -- [binary|multiclass]
//! ```

use wfkit::dataset::{split, Ratios, Task};
use wfkit::eval::{evaluate_suite, SuiteEntry, SuiteOptions};
use wfkit::learners::{ClassifierSpec, ModelKind};
use wfkit::synth::{closed_world_profiles, generate_dataset};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let task: Task = std::env::args().nth(1).unwrap_or_else(|| "binary".into()).parse()?;
    // 4699 targeted against 17026 untargeted flows
    let targeted_share = 4699.0 / 21725.0;
    let data = generate_dataset(&closed_world_profiles(5, 15), 600, 2.5, Some(targeted_share), 7)?;
    let data = split(&data, Ratios::new(0.7, 0.15, 0.15)?, task, 7)?;

    let kinds: &[ModelKind] = match task {
        Task::Binary => &ModelKind::ALL,
        Task::Multiclass => &[ModelKind::Dt, ModelKind::Rf, ModelKind::Gbm, ModelKind::Knn],
    };
    let entries: Vec<SuiteEntry> =
        kinds.iter().map(|&k| SuiteEntry { spec: ClassifierSpec::new(k, 7), grid: None }).collect();
    let report = evaluate_suite(&entries, &data, task, 7, &SuiteOptions::default())?;
    print!("{}", report.to_text());
    Ok(())
}

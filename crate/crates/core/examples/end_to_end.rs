//! The whole pipeline in one process: synthetic capture, parsing, flow
//! assembly, features, labels, split, grid-searched models and a report.
//!
//! ```text
//! cargo run --release --example end_to_end
//! ```

use wfkit::capture::{ingest, CaptureReader};
use wfkit::dataset::{label, split, Partition, Ratios, Task};
use wfkit::eval::{default_grid, evaluate_suite, SuiteEntry, SuiteOptions};
use wfkit::features::featurize;
use wfkit::flow::{assemble, FlowConfig};
use wfkit::learners::{ClassifierSpec, ModelKind};
use wfkit::synth::{closed_world_profiles, generate_capture};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = 2024;
    let capture = generate_capture(&closed_world_profiles(6, 4), 10, seed)?;
    let summary = ingest(CaptureReader::new(capture.capture.as_slice())?)?;
    let flows = assemble(&summary.records, FlowConfig::default()).flows;
    let features: Vec<_> = flows.iter().map(featurize).collect();
    let dataset = label(&flows, &features, &capture.monitored)?;
    println!("{} packets -> {} flows {:?}", summary.records.len(), flows.len(), dataset.class_counts(Task::Binary));

    for task in [Task::Binary, Task::Multiclass] {
        let data = split(&dataset, Ratios::new(0.7, 0.15, 0.15)?, task, seed)?;
        let entries: Vec<SuiteEntry> = [ModelKind::Dt, ModelKind::Rf, ModelKind::Knn]
            .iter()
            .map(|&k| SuiteEntry { spec: ClassifierSpec::new(k, seed), grid: Some(default_grid(k)) })
            .collect();
        let report = evaluate_suite(&entries, &data, task, seed, &SuiteOptions::default())?;
        println!("\n{task} ({} test flows)", data.partition(Partition::Test).len());
        print!("{}", report.to_text());
        for r in &report.results {
            println!("  {} tuned to {:?}", r.spec.kind, r.spec.hyperparameters);
        }
    }
    Ok(())
}

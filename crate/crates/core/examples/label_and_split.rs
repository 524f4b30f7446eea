//! Label featurized flows against a monitored-site list, then make a
//! stratified 70/15/15 split and show the class balance of each part.
//!
//! ```text
//! cargo run --example label_and_split
//! ```

use wfkit::capture::{ingest, CaptureReader};
use wfkit::dataset::{label, split, MonitoredList, Partition, Ratios, Task};
use wfkit::features::featurize;
use wfkit::flow::{assemble, FlowConfig};
use wfkit::synth::{closed_world_profiles, generate_capture};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let capture = generate_capture(&closed_world_profiles(4, 4), 6, 12)?;
    let summary = ingest(CaptureReader::new(capture.capture.as_slice())?)?;
    let flows = assemble(&summary.records, FlowConfig::default()).flows;
    let features: Vec<_> = flows.iter().map(featurize).collect();

    // The list round-trips through its text form, as it would from a file.
    let text = capture.monitored.to_text();
    println!("monitored list:\n{text}");
    let monitored = MonitoredList::parse(&text)?;
    let dataset = label(&flows, &features, &monitored)?;

    let ds = split(&dataset, Ratios::new(0.7, 0.15, 0.15)?, Task::Multiclass, 12)?;
    for part in Partition::ALL {
        let rows = ds.partition(part);
        println!("{:<10} {:>4} rows  {:?}", part.file_name(), rows.len(), rows.class_counts(Task::Multiclass));
    }
    Ok(())
}

//! Compute the eight per-flow features for a synthetic capture and write
//! them as CSV to standard output.
//!
//! ```text
//! cargo run --example featurize_flows > features.csv
//! ```

use wfkit::capture::{ingest, CaptureReader};
use wfkit::dataset::write_features_csv;
use wfkit::features::{featurize, FeatureVector, FEATURE_NAMES};
use wfkit::flow::{assemble, FlowConfig};
use wfkit::synth::{closed_world_profiles, generate_capture};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let capture = generate_capture(&closed_world_profiles(3, 1), 2, 4)?;
    let summary = ingest(CaptureReader::new(capture.capture.as_slice())?)?;
    let flows = assemble(&summary.records, FlowConfig::default()).flows;
    let features: Vec<FeatureVector> = flows.iter().map(featurize).collect();

    eprintln!("{} flows, features: {}", features.len(), FEATURE_NAMES.join(", "));
    // A flow observed over 1.911063 s with 109 packets and 7953 bytes:
    let fv = FeatureVector::from_counts(1.911063, 109, 0, 7953, 0);
    eprintln!(
        "worked example: {:.2} B/s, {:.2} packets/s, {:.2} B average",
        fv.flow_bytes_per_s.unwrap_or_default(),
        fv.flow_packets_per_s.unwrap_or_default(),
        fv.avg_packet_size
    );
    write_features_csv(std::io::stdout().lock(), &features)?;
    Ok(())
}

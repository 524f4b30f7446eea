//! Group a capture's packets into bidirectional flows and print the
//! day-by-day packet and flow counts, once with TCP FIN/RST closing flows
//! and once with idle timeouts only.
//!
//! ```text
//! cargo run --example assemble_flows -- [CAPTURE]
//! ```

use wfkit::capture::{ingest, CaptureReader};
use wfkit::flow::{assemble, flow_stats, FlowConfig};
use wfkit::synth::{closed_world_profiles, generate_capture};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let bytes = match std::env::args().nth(1) {
        Some(path) => std::fs::read(path)?,
        None => generate_capture(&closed_world_profiles(4, 2), 3, 9)?.capture,
    };
    let summary = ingest(CaptureReader::new(bytes.as_slice())?)?;
    println!(
        "{} packets read, {} decoded, {} skipped, {} malformed\n",
        summary.raw_packets,
        summary.records.len(),
        summary.skipped,
        summary.malformed
    );

    for honor_tcp_close in [true, false] {
        let config = FlowConfig { honor_tcp_close, ..FlowConfig::default() };
        let assembly = assemble(&summary.records, config);
        println!("honor_tcp_close = {honor_tcp_close}");
        println!("{}\n", flow_stats(&assembly.flows));
        for f in assembly.flows.iter().take(3) {
            println!(
                "  {}:{} -> {}:{}  {:.3}s  fwd {} pkts / {} B  bwd {} pkts / {} B  ({:?})",
                f.initiator.addr,
                f.initiator.port,
                f.responder().addr,
                f.responder().port,
                f.last_ts - f.first_ts,
                f.fwd_packets,
                f.fwd_bytes,
                f.bwd_packets,
                f.bwd_bytes,
                f.termination
            );
        }
        println!();
    }
    Ok(())
}

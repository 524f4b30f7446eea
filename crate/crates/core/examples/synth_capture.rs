//! Generate a labeled pcapng capture and write it, with its monitored list
//! and per-flow ground truth, into a directory.
//!
//! ```text
//! cargo run --example synth_capture -- [OUT_DIR] [SEED]
//! ```

use std::path::PathBuf;

use wfkit::synth::{closed_world_profiles, generate_capture};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "synth-out".into()));
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(1);

    let profiles = closed_world_profiles(5, 2);
    let capture = generate_capture(&profiles, 3, seed)?;

    std::fs::create_dir_all(&out)?;
    std::fs::write(out.join("capture.pcapng"), &capture.capture)?;
    std::fs::write(out.join("monitored.txt"), capture.monitored.to_text())?;
    std::fs::write(out.join("ground_truth.csv"), capture.ground_truth_csv())?;

    println!("{} packets in {} flows written to {}", capture.packets, capture.ground_truth.len(), out.display());
    for p in &profiles {
        println!("  {:<14} targeted={:<5} servers {:?}", p.site_label, p.targeted, p.addresses);
    }
    Ok(())
}

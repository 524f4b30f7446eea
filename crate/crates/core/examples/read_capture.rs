//! Open a pcap or pcapng file, report its container format and decode the
//! first few packets. Without an argument a small synthetic capture is used.
//!
//! ```text
//! cargo run --example read_capture -- [CAPTURE]
//! ```

use wfkit::capture::{decode_packet, CaptureReader, Decoded};
use wfkit::synth::{closed_world_profiles, generate_capture};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let bytes = match std::env::args().nth(1) {
        Some(path) => std::fs::read(path)?,
        None => generate_capture(&closed_world_profiles(1, 0), 1, 1)?.capture,
    };
    let mut reader = CaptureReader::new(bytes.as_slice())?;
    println!("format {:?}, byte order {:?}", reader.format(), reader.byte_order());

    let mut shown = 0;
    let mut total = 0;
    while let Some(raw) = reader.next_packet()? {
        total += 1;
        if shown == 10 {
            continue;
        }
        let link = reader.interfaces()[raw.interface as usize].link_type;
        match decode_packet(&raw.data, raw.orig_len, link, raw.timestamp.seconds())? {
            Decoded::Packet(p) => {
                println!(
                    "{:.6}  {}:{} -> {}:{}  {:?} {} bytes flags {:?}",
                    p.timestamp, p.src_addr, p.src_port, p.dst_addr, p.dst_port, p.transport, p.wire_len, p.tcp_flags
                );
            }
            Decoded::Skip(reason) => println!("skipped: {reason:?}"),
        }
        shown += 1;
    }
    println!("{total} packets");
    Ok(())
}

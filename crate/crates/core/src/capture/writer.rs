use super::{
    ByteOrder, CaptureFormat, RawPacket, TsResolution, PCAPNG_BYTE_ORDER_MAGIC, PCAPNG_SHB_MAGIC, PCAP_MAGIC_MICROS,
    PCAP_MAGIC_NANOS,
};

const BLOCK_IDB: u32 = 0x0000_0001;
const BLOCK_EPB: u32 = 0x0000_0006;
const OPT_END: u16 = 0;
const OPT_IF_TSRESOL: u16 = 9;
const SNAP_LEN: u32 = 262_144;

/// Container settings for [`write_capture`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WriterOptions {
    pub format: CaptureFormat,
    pub byte_order: ByteOrder,
    pub link_type: u32,
    /// Interface clock for pcapng; classic pcap uses the resolution implied
    /// by its format and ignores this.
    pub ts_resolution: TsResolution,
}

impl WriterOptions {
    pub fn pcapng(byte_order: ByteOrder, link_type: u32) -> Self {
        WriterOptions {
            format: CaptureFormat::Pcapng,
            byte_order,
            link_type,
            ts_resolution: TsResolution::Decimal(9),
        }
    }

    /// Clock whose ticks the packet timestamps are expressed in.
    pub fn resolution(&self) -> TsResolution {
        match self.format {
            CaptureFormat::Pcapng => self.ts_resolution,
            CaptureFormat::PcapMicros => TsResolution::Decimal(6),
            CaptureFormat::PcapNanos => TsResolution::Decimal(9),
        }
    }
}

/// Serialize `packets` as a complete capture file.
///
/// Timestamps are written as stored (`timestamp.ticks` in units of
/// [`WriterOptions::resolution`]); the `resolution` field of each packet and
/// its `interface` are ignored because the file has a single interface.
/// pcapng output is one Section Header Block, one Interface Description
/// Block carrying `if_tsresol`, then one Enhanced Packet Block per packet.
pub fn write_capture(options: &WriterOptions, packets: &[RawPacket]) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + packets.iter().map(|p| p.data.len() + 32).sum::<usize>());
    match options.format {
        CaptureFormat::Pcapng => write_pcapng(&mut out, options, packets),
        CaptureFormat::PcapMicros | CaptureFormat::PcapNanos => write_pcap(&mut out, options, packets),
    }
    out
}

fn write_pcapng(out: &mut Vec<u8>, options: &WriterOptions, packets: &[RawPacket]) {
    let o = options.byte_order;
    // Section Header Block: magic, length, byte-order magic, version 1.0,
    // unknown section length, no options.
    out.extend_from_slice(&PCAPNG_SHB_MAGIC.to_be_bytes());
    o.put_u32(out, 28);
    o.put_u32(out, PCAPNG_BYTE_ORDER_MAGIC);
    o.put_u16(out, 1);
    o.put_u16(out, 0);
    o.put_u64(out, u64::MAX);
    o.put_u32(out, 28);

    // Interface Description Block with if_tsresol and end-of-options.
    let idb_len = 20 + 8 + 4;
    o.put_u32(out, BLOCK_IDB);
    o.put_u32(out, idb_len);
    o.put_u16(out, options.link_type as u16);
    o.put_u16(out, 0);
    o.put_u32(out, SNAP_LEN);
    o.put_u16(out, OPT_IF_TSRESOL);
    o.put_u16(out, 1);
    out.extend_from_slice(&[options.ts_resolution.to_option_byte(), 0, 0, 0]);
    o.put_u16(out, OPT_END);
    o.put_u16(out, 0);
    o.put_u32(out, idb_len);

    for p in packets {
        let padded = p.data.len().div_ceil(4) * 4;
        let len = (32 + padded) as u32;
        o.put_u32(out, BLOCK_EPB);
        o.put_u32(out, len);
        o.put_u32(out, 0);
        o.put_u32(out, (p.timestamp.ticks >> 32) as u32);
        o.put_u32(out, p.timestamp.ticks as u32);
        o.put_u32(out, p.data.len() as u32);
        o.put_u32(out, p.orig_len);
        out.extend_from_slice(&p.data);
        out.resize(out.len() + padded - p.data.len(), 0);
        o.put_u32(out, len);
    }
}

fn write_pcap(out: &mut Vec<u8>, options: &WriterOptions, packets: &[RawPacket]) {
    let o = options.byte_order;
    let (magic, per_sec) = match options.format {
        CaptureFormat::PcapNanos => (PCAP_MAGIC_NANOS, 1_000_000_000u64),
        _ => (PCAP_MAGIC_MICROS, 1_000_000u64),
    };
    o.put_u32(out, magic);
    o.put_u16(out, 2);
    o.put_u16(out, 4);
    o.put_u32(out, 0);
    o.put_u32(out, 0);
    o.put_u32(out, SNAP_LEN);
    o.put_u32(out, options.link_type);
    for p in packets {
        o.put_u32(out, (p.timestamp.ticks / per_sec) as u32);
        o.put_u32(out, (p.timestamp.ticks % per_sec) as u32);
        o.put_u32(out, p.data.len() as u32);
        o.put_u32(out, p.orig_len);
        out.extend_from_slice(&p.data);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capture::{CaptureReader, Timestamp, LINKTYPE_ETHERNET};

    fn packets(resolution: TsResolution) -> Vec<RawPacket> {
        [(1_700_000_000_123_456_789u64, 5usize), (1_700_000_001_000_000_001, 8), (1_700_000_002_999_999_999, 0)]
            .into_iter()
            .map(|(ticks, n)| RawPacket {
                data: (0..n as u8).collect(),
                orig_len: n as u32 + 3,
                timestamp: Timestamp { ticks, resolution },
                interface: 0,
            })
            .collect()
    }

    #[test]
    fn pcapng_three_blocks_round_trip() {
        for order in [ByteOrder::Little, ByteOrder::Big] {
            let options = WriterOptions::pcapng(order, LINKTYPE_ETHERNET);
            let written = packets(options.resolution());
            let bytes = write_capture(&options, &written);
            let mut reader = CaptureReader::new(bytes.as_slice()).unwrap();
            assert_eq!(reader.byte_order(), order);
            let read: Vec<RawPacket> = std::iter::from_fn(|| reader.next_packet().unwrap()).collect();
            assert_eq!(read, written);
        }
    }

    #[test]
    fn pcap_variants_round_trip() {
        for format in [CaptureFormat::PcapMicros, CaptureFormat::PcapNanos] {
            for order in [ByteOrder::Little, ByteOrder::Big] {
                let options = WriterOptions {
                    format,
                    byte_order: order,
                    link_type: LINKTYPE_ETHERNET,
                    ts_resolution: TsResolution::Decimal(9),
                };
                let mut written = packets(options.resolution());
                if format == CaptureFormat::PcapMicros {
                    for p in &mut written {
                        p.timestamp.ticks /= 1000;
                    }
                }
                let bytes = write_capture(&options, &written);
                let mut reader = CaptureReader::new(bytes.as_slice()).unwrap();
                assert_eq!(reader.format(), format);
                let read: Vec<RawPacket> = std::iter::from_fn(|| reader.next_packet().unwrap()).collect();
                assert_eq!(read, written);
            }
        }
    }
}

//! Capture file ingestion.
//!
//! Supports pcapng (Section Header, Interface Description, Enhanced and
//! Simple Packet blocks) and classic pcap in both its microsecond and
//! nanosecond flavours. The container is identified from its leading magic
//! bytes only; file extensions are never consulted.
//!
//! Reading is streaming: [`CaptureReader`] pulls one block at a time from any
//! [`std::io::Read`], so memory use is bounded by the largest block actually
//! present in the input. [`write_capture`] produces the same containers.

mod decode;
mod reader;
mod writer;

pub use decode::{decode_packet, Decoded, PacketRecord, SkipReason, TcpFlags, Transport};
pub use reader::{CaptureReader, RawPacket};
pub use writer::{write_capture, WriterOptions};

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Magic of the pcapng Section Header Block (palindromic, so order-free).
pub const PCAPNG_SHB_MAGIC: u32 = 0x0A0D_0D0A;
/// Byte-order magic carried inside every Section Header Block.
pub const PCAPNG_BYTE_ORDER_MAGIC: u32 = 0x1A2B_3C4D;
pub const PCAP_MAGIC_MICROS: u32 = 0xA1B2_C3D4;
pub const PCAP_MAGIC_NANOS: u32 = 0xA1B2_3C4D;

pub const LINKTYPE_ETHERNET: u32 = 1;
pub const LINKTYPE_RAW: u32 = 101;
pub const LINKTYPE_LINUX_SLL: u32 = 113;

#[derive(Debug, Error)]
pub enum CaptureError {
    #[error("not a supported capture format (magic {0:02x?})")]
    UnknownMagic([u8; 4]),
    #[error("block at offset {offset} extends past end of file")]
    TruncatedBlock { offset: u64 },
    #[error("block at offset {offset}: leading length {leading} != trailing length {trailing}")]
    LengthMismatch {
        offset: u64,
        leading: u32,
        trailing: u32,
    },
    #[error("packet block at offset {offset} references undeclared interface {interface}")]
    MissingInterface { offset: u64, interface: u32 },
    #[error("malformed block at offset {offset}: {reason}")]
    MalformedBlock { offset: u64, reason: String },
    #[error("malformed packet header: {0}")]
    MalformedHeader(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CaptureFormat {
    Pcapng,
    /// Classic pcap, microsecond timestamps.
    PcapMicros,
    /// Classic pcap, nanosecond timestamps.
    PcapNanos,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ByteOrder {
    Little,
    Big,
}

impl ByteOrder {
    pub(crate) fn u16(self, b: [u8; 2]) -> u16 {
        match self {
            ByteOrder::Little => u16::from_le_bytes(b),
            ByteOrder::Big => u16::from_be_bytes(b),
        }
    }

    pub(crate) fn u32(self, b: [u8; 4]) -> u32 {
        match self {
            ByteOrder::Little => u32::from_le_bytes(b),
            ByteOrder::Big => u32::from_be_bytes(b),
        }
    }

    pub fn put_u16(self, out: &mut Vec<u8>, v: u16) {
        match self {
            ByteOrder::Little => out.extend_from_slice(&v.to_le_bytes()),
            ByteOrder::Big => out.extend_from_slice(&v.to_be_bytes()),
        }
    }

    pub fn put_u32(self, out: &mut Vec<u8>, v: u32) {
        match self {
            ByteOrder::Little => out.extend_from_slice(&v.to_le_bytes()),
            ByteOrder::Big => out.extend_from_slice(&v.to_be_bytes()),
        }
    }

    pub fn put_u64(self, out: &mut Vec<u8>, v: u64) {
        match self {
            ByteOrder::Little => out.extend_from_slice(&v.to_le_bytes()),
            ByteOrder::Big => out.extend_from_slice(&v.to_be_bytes()),
        }
    }
}

/// Seconds-per-tick of an interface clock.
///
/// pcapng encodes this as a single `if_tsresol` byte: the low seven bits are
/// an exponent, the high bit selects base 2 instead of base 10.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TsResolution {
    /// 10^-n seconds per tick.
    Decimal(u8),
    /// 2^-n seconds per tick.
    Binary(u8),
}

impl Default for TsResolution {
    fn default() -> Self {
        TsResolution::Decimal(6)
    }
}

impl TsResolution {
    pub fn from_option_byte(b: u8) -> Self {
        if b & 0x80 != 0 {
            TsResolution::Binary(b & 0x7f)
        } else {
            TsResolution::Decimal(b)
        }
    }

    pub fn to_option_byte(self) -> u8 {
        match self {
            TsResolution::Decimal(n) => n & 0x7f,
            TsResolution::Binary(n) => 0x80 | (n & 0x7f),
        }
    }

    /// Ticks per second as an exact integer, when it fits in a u64.
    fn ticks_per_second(self) -> Option<u64> {
        match self {
            TsResolution::Decimal(n) => 10u64.checked_pow(u32::from(n)),
            TsResolution::Binary(n) => 2u64.checked_pow(u32::from(n)),
        }
    }

    pub fn seconds_per_tick(self) -> f64 {
        match self {
            TsResolution::Decimal(n) => 10f64.powi(-i32::from(n)),
            TsResolution::Binary(n) => 2f64.powi(-i32::from(n)),
        }
    }

    /// Convert a tick count to seconds, splitting whole and fractional
    /// seconds so large epoch values keep sub-microsecond precision.
    pub fn to_seconds(self, ticks: u64) -> f64 {
        match self.ticks_per_second() {
            Some(tps) if tps > 0 => {
                let whole = ticks / tps;
                let frac = ticks % tps;
                whole as f64 + frac as f64 / tps as f64
            }
            _ => ticks as f64 * self.seconds_per_tick(),
        }
    }
}

/// A timestamp exactly as stored in the capture: a tick count and the
/// resolution of the interface that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Timestamp {
    pub ticks: u64,
    pub resolution: TsResolution,
}

impl Timestamp {
    pub fn seconds(&self) -> f64 {
        self.resolution.to_seconds(self.ticks)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InterfaceInfo {
    /// IANA linktype registry value.
    pub link_type: u32,
    pub ts_resolution: TsResolution,
    pub snap_len: u32,
}

/// Identify the capture container from its first bytes.
///
/// pcapng needs the first 12 bytes so the byte-order magic can be read;
/// classic pcap needs 4.
pub fn detect_format(leading: &[u8]) -> Result<(CaptureFormat, ByteOrder), CaptureError> {
    if leading.len() < 4 {
        return Err(CaptureError::TruncatedBlock { offset: 0 });
    }
    let magic = [leading[0], leading[1], leading[2], leading[3]];
    if u32::from_be_bytes(magic) == PCAPNG_SHB_MAGIC {
        if leading.len() < 12 {
            return Err(CaptureError::TruncatedBlock { offset: 0 });
        }
        let bom = [leading[8], leading[9], leading[10], leading[11]];
        return if u32::from_le_bytes(bom) == PCAPNG_BYTE_ORDER_MAGIC {
            Ok((CaptureFormat::Pcapng, ByteOrder::Little))
        } else if u32::from_be_bytes(bom) == PCAPNG_BYTE_ORDER_MAGIC {
            Ok((CaptureFormat::Pcapng, ByteOrder::Big))
        } else {
            Err(CaptureError::UnknownMagic(magic))
        };
    }
    let le = u32::from_le_bytes(magic);
    let be = u32::from_be_bytes(magic);
    match (le, be) {
        (PCAP_MAGIC_MICROS, _) => Ok((CaptureFormat::PcapMicros, ByteOrder::Little)),
        (_, PCAP_MAGIC_MICROS) => Ok((CaptureFormat::PcapMicros, ByteOrder::Big)),
        (PCAP_MAGIC_NANOS, _) => Ok((CaptureFormat::PcapNanos, ByteOrder::Little)),
        (_, PCAP_MAGIC_NANOS) => Ok((CaptureFormat::PcapNanos, ByteOrder::Big)),
        _ => Err(CaptureError::UnknownMagic(magic)),
    }
}

/// Open a capture file for streaming.
pub fn open(path: impl AsRef<Path>) -> Result<CaptureReader<BufReader<File>>, CaptureError> {
    let file = File::open(path)?;
    CaptureReader::new(BufReader::new(file))
}

/// Summary of a full pass over a capture: decoded records plus what was
/// skipped.
#[derive(Debug, Default, Clone)]
pub struct IngestSummary {
    pub records: Vec<PacketRecord>,
    pub raw_packets: u64,
    pub skipped: u64,
    pub malformed: u64,
}

/// Read every packet from `reader` and decode it.
///
/// Frames that fail header validation are counted as malformed rather than
/// aborting the pass; container-level errors abort.
pub fn ingest<R: std::io::Read>(mut reader: CaptureReader<R>) -> Result<IngestSummary, CaptureError> {
    let mut summary = IngestSummary::default();
    while let Some(raw) = reader.next_packet()? {
        summary.raw_packets += 1;
        let link_type = reader.interfaces()[raw.interface as usize].link_type;
        match decode_packet(&raw.data, raw.orig_len, link_type, raw.timestamp.seconds()) {
            Ok(Decoded::Packet(rec)) => summary.records.push(rec),
            Ok(Decoded::Skip(_)) => summary.skipped += 1,
            Err(_) => summary.malformed += 1,
        }
    }
    Ok(summary)
}

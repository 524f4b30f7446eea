use std::io::Read;

use super::{
    detect_format, ByteOrder, CaptureError, CaptureFormat, InterfaceInfo, Timestamp, TsResolution,
    PCAPNG_SHB_MAGIC,
};

const BLOCK_IDB: u32 = 0x0000_0001;
const BLOCK_SPB: u32 = 0x0000_0003;
const BLOCK_EPB: u32 = 0x0000_0006;

const OPT_ENDOFOPT: u16 = 0;
const OPT_IF_TSRESOL: u16 = 9;

/// One captured frame as stored in the file, before any header decoding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawPacket {
    pub data: Vec<u8>,
    /// Original length on the wire (may exceed `data.len()` when snapped).
    pub orig_len: u32,
    pub timestamp: Timestamp,
    /// Index into [`CaptureReader::interfaces`].
    pub interface: u32,
}

/// Streaming reader over a pcapng or classic pcap byte stream.
pub struct CaptureReader<R> {
    inner: R,
    format: CaptureFormat,
    byte_order: ByteOrder,
    interfaces: Vec<InterfaceInfo>,
    offset: u64,
}

impl<R: Read> CaptureReader<R> {
    /// Read the file header (pcapng Section Header Block or pcap global
    /// header) and prepare to stream packets.
    pub fn new(inner: R) -> Result<Self, CaptureError> {
        let mut reader = CaptureReader {
            inner,
            format: CaptureFormat::Pcapng,
            byte_order: ByteOrder::Little,
            interfaces: Vec::new(),
            offset: 0,
        };
        let magic = reader.read_exact_at(4, 0)?;
        let magic4 = [magic[0], magic[1], magic[2], magic[3]];
        if u32::from_be_bytes(magic4) == PCAPNG_SHB_MAGIC {
            let rest = reader.read_exact_at(8, 0)?;
            let mut head = magic.clone();
            head.extend_from_slice(&rest);
            let (format, order) = detect_format(&head)?;
            reader.format = format;
            reader.byte_order = order;
            let total_len = order.u32([head[4], head[5], head[6], head[7]]);
            reader.finish_section_header(0, total_len)?;
        } else {
            let (format, order) = detect_format(&magic)?;
            reader.format = format;
            reader.byte_order = order;
            let rest = reader.read_exact_at(20, 0)?;
            let snap_len = order.u32([rest[12], rest[13], rest[14], rest[15]]);
            let network = order.u32([rest[16], rest[17], rest[18], rest[19]]);
            let ts_resolution = match format {
                CaptureFormat::PcapNanos => TsResolution::Decimal(9),
                _ => TsResolution::Decimal(6),
            };
            reader.interfaces.push(InterfaceInfo {
                // upper bits carry FCS metadata
                link_type: network & 0x0FFF_FFFF,
                ts_resolution,
                snap_len,
            });
        }
        Ok(reader)
    }

    pub fn format(&self) -> CaptureFormat {
        self.format
    }

    /// Byte order of the current section (pcapng) or file (pcap).
    pub fn byte_order(&self) -> ByteOrder {
        self.byte_order
    }

    pub fn interfaces(&self) -> &[InterfaceInfo] {
        &self.interfaces
    }

    /// Next packet in file order, or `None` at a clean end of file.
    pub fn next_packet(&mut self) -> Result<Option<RawPacket>, CaptureError> {
        match self.format {
            CaptureFormat::Pcapng => self.next_pcapng(),
            CaptureFormat::PcapMicros | CaptureFormat::PcapNanos => self.next_pcap(),
        }
    }

    /// Read exactly `n` bytes. Allocation grows with the bytes actually
    /// delivered, so a bogus huge length in a truncated file stays cheap.
    fn read_exact_at(&mut self, n: usize, block_offset: u64) -> Result<Vec<u8>, CaptureError> {
        let mut buf = Vec::new();
        let got = (&mut self.inner).take(n as u64).read_to_end(&mut buf)?;
        self.offset += got as u64;
        if got < n {
            return Err(CaptureError::TruncatedBlock {
                offset: block_offset,
            });
        }
        Ok(buf)
    }

    /// Read up to `n` bytes; `Ok(None)` if the stream is already at EOF.
    fn read_header_or_eof(&mut self, n: usize) -> Result<Option<Vec<u8>>, CaptureError> {
        let start = self.offset;
        let mut buf = Vec::with_capacity(n);
        let got = (&mut self.inner).take(n as u64).read_to_end(&mut buf)?;
        self.offset += got as u64;
        match got {
            0 => Ok(None),
            g if g < n => Err(CaptureError::TruncatedBlock { offset: start }),
            _ => Ok(Some(buf)),
        }
    }

    fn next_pcapng(&mut self) -> Result<Option<RawPacket>, CaptureError> {
        loop {
            let block_offset = self.offset;
            let Some(head) = self.read_header_or_eof(8)? else {
                return Ok(None);
            };
            let block_type = u32::from_be_bytes([head[0], head[1], head[2], head[3]]);
            if block_type == PCAPNG_SHB_MAGIC {
                let bom = self.read_exact_at(4, block_offset)?;
                let mut probe = head.clone();
                probe.extend_from_slice(&bom);
                let (_, order) = detect_format(&probe)?;
                self.byte_order = order;
                let total_len = order.u32([head[4], head[5], head[6], head[7]]);
                self.finish_section_header(block_offset, total_len)?;
                continue;
            }
            let order = self.byte_order;
            let block_type = order.u32([head[0], head[1], head[2], head[3]]);
            let total_len = order.u32([head[4], head[5], head[6], head[7]]);
            let body = self.read_block_body(block_offset, total_len, 8)?;
            match block_type {
                BLOCK_IDB => self.parse_idb(block_offset, &body)?,
                BLOCK_EPB => return self.parse_epb(block_offset, &body).map(Some),
                BLOCK_SPB => return self.parse_spb(block_offset, &body).map(Some),
                _ => {}
            }
        }
    }

    /// Read the remainder of a block whose first `consumed` bytes are gone,
    /// check the trailing length copy and return the body.
    fn read_block_body(
        &mut self,
        block_offset: u64,
        total_len: u32,
        consumed: u32,
    ) -> Result<Vec<u8>, CaptureError> {
        if total_len < consumed + 4 || total_len % 4 != 0 {
            return Err(CaptureError::MalformedBlock {
                offset: block_offset,
                reason: format!("invalid block total length {total_len}"),
            });
        }
        let body_len = (total_len - consumed - 4) as usize;
        let mut body = self.read_exact_at(body_len + 4, block_offset)?;
        let t = &body[body_len..];
        let trailing = self.byte_order.u32([t[0], t[1], t[2], t[3]]);
        if trailing != total_len {
            return Err(CaptureError::LengthMismatch {
                offset: block_offset,
                leading: total_len,
                trailing,
            });
        }
        body.truncate(body_len);
        Ok(body)
    }

    fn finish_section_header(&mut self, block_offset: u64, total_len: u32) -> Result<(), CaptureError> {
        if total_len < 28 {
            return Err(CaptureError::MalformedBlock {
                offset: block_offset,
                reason: format!("section header length {total_len} below minimum 28"),
            });
        }
        // version + section length + options; none of it affects decoding
        self.read_block_body(block_offset, total_len, 12)?;
        self.interfaces.clear();
        Ok(())
    }

    fn parse_idb(&mut self, block_offset: u64, body: &[u8]) -> Result<(), CaptureError> {
        if body.len() < 8 {
            return Err(CaptureError::MalformedBlock {
                offset: block_offset,
                reason: "interface description body shorter than 8 bytes".into(),
            });
        }
        let order = self.byte_order;
        let link_type = u32::from(order.u16([body[0], body[1]]));
        let snap_len = order.u32([body[4], body[5], body[6], body[7]]);
        let mut ts_resolution = TsResolution::default();
        let mut opts = &body[8..];
        while opts.len() >= 4 {
            let code = order.u16([opts[0], opts[1]]);
            let len = usize::from(order.u16([opts[2], opts[3]]));
            if code == OPT_ENDOFOPT {
                break;
            }
            let padded = (len + 3) & !3;
            if opts.len() < 4 + padded {
                return Err(CaptureError::MalformedBlock {
                    offset: block_offset,
                    reason: format!("option {code} overruns block body"),
                });
            }
            if code == OPT_IF_TSRESOL && len >= 1 {
                ts_resolution = TsResolution::from_option_byte(opts[4]);
            }
            opts = &opts[4 + padded..];
        }
        self.interfaces.push(InterfaceInfo {
            link_type,
            ts_resolution,
            snap_len,
        });
        Ok(())
    }

    fn parse_epb(&mut self, block_offset: u64, body: &[u8]) -> Result<RawPacket, CaptureError> {
        if body.len() < 20 {
            return Err(CaptureError::MalformedBlock {
                offset: block_offset,
                reason: "enhanced packet body shorter than 20 bytes".into(),
            });
        }
        let order = self.byte_order;
        let word = |i: usize| order.u32([body[i], body[i + 1], body[i + 2], body[i + 3]]);
        let interface = word(0);
        let ts_high = word(4);
        let ts_low = word(8);
        let cap_len = word(12) as usize;
        let orig_len = word(16);
        let Some(iface) = self.interfaces.get(interface as usize) else {
            return Err(CaptureError::MissingInterface {
                offset: block_offset,
                interface,
            });
        };
        if body.len() - 20 < cap_len {
            return Err(CaptureError::MalformedBlock {
                offset: block_offset,
                reason: format!("captured length {cap_len} overruns block body"),
            });
        }
        Ok(RawPacket {
            data: body[20..20 + cap_len].to_vec(),
            orig_len,
            timestamp: Timestamp {
                ticks: (u64::from(ts_high) << 32) | u64::from(ts_low),
                resolution: iface.ts_resolution,
            },
            interface,
        })
    }

    fn parse_spb(&mut self, block_offset: u64, body: &[u8]) -> Result<RawPacket, CaptureError> {
        if body.len() < 4 {
            return Err(CaptureError::MalformedBlock {
                offset: block_offset,
                reason: "simple packet body shorter than 4 bytes".into(),
            });
        }
        let Some(iface) = self.interfaces.first() else {
            return Err(CaptureError::MissingInterface {
                offset: block_offset,
                interface: 0,
            });
        };
        let orig_len = self.byte_order.u32([body[0], body[1], body[2], body[3]]);
        let mut cap_len = (orig_len as usize).min(body.len() - 4);
        if iface.snap_len > 0 {
            cap_len = cap_len.min(iface.snap_len as usize);
        }
        Ok(RawPacket {
            data: body[4..4 + cap_len].to_vec(),
            orig_len,
            // simple packet blocks carry no timestamp
            timestamp: Timestamp {
                ticks: 0,
                resolution: iface.ts_resolution,
            },
            interface: 0,
        })
    }

    fn next_pcap(&mut self) -> Result<Option<RawPacket>, CaptureError> {
        let record_offset = self.offset;
        let Some(head) = self.read_header_or_eof(16)? else {
            return Ok(None);
        };
        let order = self.byte_order;
        let word = |i: usize| order.u32([head[i], head[i + 1], head[i + 2], head[i + 3]]);
        let ts_sec = u64::from(word(0));
        let ts_frac = u64::from(word(4));
        let incl_len = word(8) as usize;
        let orig_len = word(12);
        let data = self.read_exact_at(incl_len, record_offset)?;
        let iface = self.interfaces[0];
        let per_sec = match self.format {
            CaptureFormat::PcapNanos => 1_000_000_000,
            _ => 1_000_000,
        };
        Ok(Some(RawPacket {
            data,
            orig_len,
            timestamp: Timestamp {
                ticks: ts_sec * per_sec + ts_frac,
                resolution: iface.ts_resolution,
            },
            interface: 0,
        }))
    }
}

impl<R: Read> Iterator for CaptureReader<R> {
    type Item = Result<RawPacket, CaptureError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_packet().transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capture::PCAPNG_BYTE_ORDER_MAGIC;

    fn shb_le() -> Vec<u8> {
        let mut b = Vec::new();
        b.extend_from_slice(&PCAPNG_SHB_MAGIC.to_le_bytes());
        b.extend_from_slice(&28u32.to_le_bytes());
        b.extend_from_slice(&PCAPNG_BYTE_ORDER_MAGIC.to_le_bytes());
        b.extend_from_slice(&1u16.to_le_bytes());
        b.extend_from_slice(&0u16.to_le_bytes());
        b.extend_from_slice(&(-1i64).to_le_bytes());
        b.extend_from_slice(&28u32.to_le_bytes());
        b
    }

    fn idb_le(link: u16) -> Vec<u8> {
        let mut b = Vec::new();
        b.extend_from_slice(&1u32.to_le_bytes());
        b.extend_from_slice(&20u32.to_le_bytes());
        b.extend_from_slice(&link.to_le_bytes());
        b.extend_from_slice(&0u16.to_le_bytes());
        b.extend_from_slice(&65535u32.to_le_bytes());
        b.extend_from_slice(&20u32.to_le_bytes());
        b
    }

    fn epb_le(iface: u32, ticks: u64, data: &[u8], trailing: Option<u32>) -> Vec<u8> {
        let padded = (data.len() + 3) & !3;
        let total = (32 + padded) as u32;
        let mut b = Vec::new();
        b.extend_from_slice(&6u32.to_le_bytes());
        b.extend_from_slice(&total.to_le_bytes());
        b.extend_from_slice(&iface.to_le_bytes());
        b.extend_from_slice(&((ticks >> 32) as u32).to_le_bytes());
        b.extend_from_slice(&(ticks as u32).to_le_bytes());
        b.extend_from_slice(&(data.len() as u32).to_le_bytes());
        b.extend_from_slice(&(data.len() as u32).to_le_bytes());
        b.extend_from_slice(data);
        b.resize(b.len() + padded - data.len(), 0);
        b.extend_from_slice(&trailing.unwrap_or(total).to_le_bytes());
        b
    }

    fn read_all(bytes: &[u8]) -> Result<Vec<RawPacket>, CaptureError> {
        CaptureReader::new(bytes)?.collect()
    }

    #[test]
    fn section_header_only_is_empty() {
        assert!(read_all(&shb_le()).unwrap().is_empty());
    }

    #[test]
    fn epb_timestamp_assembly() {
        let mut f = shb_le();
        f.extend(idb_le(1));
        let ticks = (7u64 << 32) | 0x1234_5678;
        f.extend(epb_le(0, ticks, &[1, 2, 3, 4, 5], None));
        let pkts = read_all(&f).unwrap();
        assert_eq!(pkts.len(), 1);
        assert_eq!(pkts[0].timestamp.ticks, ticks);
        assert_eq!(pkts[0].data, vec![1, 2, 3, 4, 5]);
    }

    #[test]
    fn trailing_length_mismatch() {
        let mut f = shb_le();
        f.extend(idb_le(1));
        f.extend(epb_le(0, 1, &[0; 8], Some(44)));
        assert!(matches!(
            read_all(&f),
            Err(CaptureError::LengthMismatch {
                leading: 40,
                trailing: 44,
                ..
            })
        ));
    }

    #[test]
    fn epb_without_interface() {
        let mut f = shb_le();
        f.extend(epb_le(0, 1, &[0; 8], None));
        assert!(matches!(
            read_all(&f),
            Err(CaptureError::MissingInterface { interface: 0, .. })
        ));
        let mut f = shb_le();
        f.extend(idb_le(1));
        f.extend(epb_le(3, 1, &[0; 8], None));
        assert!(matches!(
            read_all(&f),
            Err(CaptureError::MissingInterface { interface: 3, .. })
        ));
    }

    #[test]
    fn unknown_blocks_are_skipped() {
        let mut f = shb_le();
        f.extend(idb_le(1));
        // name resolution block with an empty record list
        f.extend_from_slice(&4u32.to_le_bytes());
        f.extend_from_slice(&16u32.to_le_bytes());
        f.extend_from_slice(&[0, 0, 0, 0]);
        f.extend_from_slice(&16u32.to_le_bytes());
        f.extend(epb_le(0, 9, &[0xAA; 3], None));
        let pkts = read_all(&f).unwrap();
        assert_eq!(pkts.len(), 1);
        assert_eq!(pkts[0].data, vec![0xAA; 3]);
    }

    #[test]
    fn truncated_block() {
        let mut f = shb_le();
        f.extend(idb_le(1));
        f.extend(epb_le(0, 9, &[0xAA; 30], None));
        f.truncate(f.len() - 5);
        assert!(matches!(
            read_all(&f),
            Err(CaptureError::TruncatedBlock { offset: 48 })
        ));
    }

    #[test]
    fn simple_packet_block_uses_first_interface() {
        let mut f = shb_le();
        f.extend(idb_le(101));
        f.extend_from_slice(&3u32.to_le_bytes());
        f.extend_from_slice(&24u32.to_le_bytes());
        f.extend_from_slice(&6u32.to_le_bytes());
        f.extend_from_slice(&[9, 8, 7, 6, 5, 4, 0, 0]);
        f.extend_from_slice(&24u32.to_le_bytes());
        let pkts = read_all(&f).unwrap();
        assert_eq!(pkts[0].data, vec![9, 8, 7, 6, 5, 4]);
        assert_eq!(pkts[0].orig_len, 6);
    }

    #[test]
    fn classic_pcap_nanos_big_endian() {
        let mut f = Vec::new();
        f.extend_from_slice(&0xA1B2_3C4Du32.to_be_bytes());
        f.extend_from_slice(&2u16.to_be_bytes());
        f.extend_from_slice(&4u16.to_be_bytes());
        f.extend_from_slice(&[0; 8]);
        f.extend_from_slice(&65535u32.to_be_bytes());
        f.extend_from_slice(&1u32.to_be_bytes());
        f.extend_from_slice(&10u32.to_be_bytes());
        f.extend_from_slice(&500u32.to_be_bytes());
        f.extend_from_slice(&2u32.to_be_bytes());
        f.extend_from_slice(&60u32.to_be_bytes());
        f.extend_from_slice(&[1, 2]);
        let mut r = CaptureReader::new(&f[..]).unwrap();
        assert_eq!(r.format(), CaptureFormat::PcapNanos);
        assert_eq!(r.byte_order(), ByteOrder::Big);
        assert_eq!(r.interfaces()[0].link_type, 1);
        let p = r.next_packet().unwrap().unwrap();
        assert_eq!(p.timestamp.ticks, 10_000_000_500);
        assert_eq!(p.orig_len, 60);
        assert!((p.timestamp.seconds() - 10.0000005).abs() < 1e-12);
        assert!(r.next_packet().unwrap().is_none());
    }
}

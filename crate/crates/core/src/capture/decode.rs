use std::net::{IpAddr, Ipv4Addr, Ipv6Addr};

use bitflags::bitflags;
use serde::{Deserialize, Serialize};

use super::{CaptureError, LINKTYPE_ETHERNET, LINKTYPE_LINUX_SLL, LINKTYPE_RAW};

const ETHERTYPE_IPV4: u16 = 0x0800;
const ETHERTYPE_IPV6: u16 = 0x86DD;
const ETHERTYPE_VLAN: u16 = 0x8100;

const PROTO_TCP: u8 = 6;
const PROTO_UDP: u8 = 17;

/// IPv6 next-header values that introduce an extension header.
const IPV6_EXTENSION_HEADERS: [u8; 10] = [0, 43, 44, 51, 60, 135, 139, 140, 253, 254];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Transport {
    Tcp,
    Udp,
    Other,
}

bitflags! {
    #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
    pub struct TcpFlags: u8 {
        const FIN = 0x01;
        const SYN = 0x02;
        const RST = 0x04;
        const PSH = 0x08;
        const ACK = 0x10;
        const URG = 0x20;
        const ECE = 0x40;
        const CWR = 0x80;
    }
}

/// One decoded packet.
#[derive(Debug, Clone, PartialEq)]
pub struct PacketRecord {
    /// Seconds since the epoch.
    pub timestamp: f64,
    pub src_addr: IpAddr,
    pub dst_addr: IpAddr,
    pub src_port: u16,
    pub dst_port: u16,
    pub transport: Transport,
    /// Original frame length on the wire.
    pub wire_len: u32,
    /// Transport payload bytes, from the declared IP/UDP lengths.
    pub payload_len: u32,
    /// Present iff `transport` is TCP.
    pub tcp_flags: Option<TcpFlags>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkipReason {
    UnsupportedLinkType(u32),
    NonIp,
    VlanStack,
    Fragment,
    Ipv6ExtensionHeader(u8),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Decoded {
    Packet(PacketRecord),
    Skip(SkipReason),
}

fn malformed(msg: impl Into<String>) -> CaptureError {
    CaptureError::MalformedHeader(msg.into())
}

fn be16(b: &[u8], at: usize) -> u16 {
    u16::from_be_bytes([b[at], b[at + 1]])
}

/// Decode link, network and transport headers of one frame.
///
/// `orig_len` is the frame's length on the wire; when the frame was snapped
/// the payload length is still derived from the declared IP and UDP lengths.
pub fn decode_packet(
    frame: &[u8],
    orig_len: u32,
    link_type: u32,
    timestamp: f64,
) -> Result<Decoded, CaptureError> {
    let wire_len = orig_len.max(frame.len() as u32);
    let (ethertype, l3_offset) = match link_type {
        LINKTYPE_ETHERNET => {
            if frame.len() < 14 {
                return Err(malformed("ethernet header truncated"));
            }
            match be16(frame, 12) {
                ETHERTYPE_VLAN => {
                    if frame.len() < 18 {
                        return Err(malformed("802.1Q tag truncated"));
                    }
                    let inner = be16(frame, 16);
                    if inner == ETHERTYPE_VLAN || inner == 0x88A8 {
                        return Ok(Decoded::Skip(SkipReason::VlanStack));
                    }
                    (inner, 18)
                }
                other => (other, 14),
            }
        }
        LINKTYPE_LINUX_SLL => {
            if frame.len() < 16 {
                return Err(malformed("linux cooked header truncated"));
            }
            (be16(frame, 14), 16)
        }
        LINKTYPE_RAW => {
            let Some(first) = frame.first() else {
                return Err(malformed("empty raw IP frame"));
            };
            match first >> 4 {
                4 => (ETHERTYPE_IPV4, 0),
                6 => (ETHERTYPE_IPV6, 0),
                _ => return Ok(Decoded::Skip(SkipReason::NonIp)),
            }
        }
        other => return Ok(Decoded::Skip(SkipReason::UnsupportedLinkType(other))),
    };
    let l3 = &frame[l3_offset..];
    let l3_wire = wire_len.saturating_sub(l3_offset as u32);
    let ip = match ethertype {
        ETHERTYPE_IPV4 => decode_ipv4(l3, l3_wire)?,
        ETHERTYPE_IPV6 => decode_ipv6(l3, l3_wire)?,
        _ => return Ok(Decoded::Skip(SkipReason::NonIp)),
    };
    let ip = match ip {
        Ok(ip) => ip,
        Err(reason) => return Ok(Decoded::Skip(reason)),
    };
    let transport = &l3[ip.header_len..];
    let record = |transport, src_port, dst_port, payload_len, tcp_flags| PacketRecord {
        timestamp,
        src_addr: ip.src,
        dst_addr: ip.dst,
        src_port,
        dst_port,
        transport,
        wire_len,
        payload_len,
        tcp_flags,
    };
    let rec = match ip.protocol {
        PROTO_TCP => {
            if transport.len() < 20 {
                return Err(malformed("tcp header truncated"));
            }
            let data_offset = usize::from(transport[12] >> 4) * 4;
            if data_offset < 20 {
                return Err(malformed(format!("tcp data offset {data_offset} below 20")));
            }
            if transport.len() < data_offset {
                return Err(malformed("tcp options truncated"));
            }
            if ip.payload_len < data_offset as u32 {
                return Err(malformed("tcp header exceeds ip payload length"));
            }
            record(
                Transport::Tcp,
                be16(transport, 0),
                be16(transport, 2),
                ip.payload_len - data_offset as u32,
                Some(TcpFlags::from_bits_retain(transport[13])),
            )
        }
        PROTO_UDP => {
            if transport.len() < 8 {
                return Err(malformed("udp header truncated"));
            }
            let udp_len = u32::from(be16(transport, 4));
            if udp_len < 8 {
                return Err(malformed(format!("udp length {udp_len} below 8")));
            }
            if udp_len > ip.payload_len {
                return Err(malformed("udp length exceeds ip payload length"));
            }
            record(
                Transport::Udp,
                be16(transport, 0),
                be16(transport, 2),
                udp_len - 8,
                None,
            )
        }
        _ => record(Transport::Other, 0, 0, ip.payload_len, None),
    };
    Ok(Decoded::Packet(rec))
}

struct IpHeader {
    src: IpAddr,
    dst: IpAddr,
    protocol: u8,
    header_len: usize,
    /// Declared bytes after the IP header.
    payload_len: u32,
}

type IpDecode = Result<Result<IpHeader, SkipReason>, CaptureError>;

fn decode_ipv4(b: &[u8], wire: u32) -> IpDecode {
    if b.len() < 20 {
        return Err(malformed("ipv4 header truncated"));
    }
    if b[0] >> 4 != 4 {
        return Err(malformed(format!("ipv4 version field {}", b[0] >> 4)));
    }
    let header_len = usize::from(b[0] & 0x0f) * 4;
    if header_len < 20 {
        return Err(malformed(format!("ipv4 header length {header_len} below 20")));
    }
    if b.len() < header_len {
        return Err(malformed("ipv4 options truncated"));
    }
    let total_len = u32::from(be16(b, 2));
    if total_len < header_len as u32 {
        return Err(malformed("ipv4 total length below header length"));
    }
    if total_len > wire {
        return Err(malformed(format!(
            "ipv4 total length {total_len} exceeds {wire} available bytes"
        )));
    }
    if be16(b, 6) & 0x1fff != 0 {
        return Ok(Err(SkipReason::Fragment));
    }
    Ok(Ok(IpHeader {
        src: IpAddr::V4(Ipv4Addr::new(b[12], b[13], b[14], b[15])),
        dst: IpAddr::V4(Ipv4Addr::new(b[16], b[17], b[18], b[19])),
        protocol: b[9],
        header_len,
        payload_len: total_len - header_len as u32,
    }))
}

fn decode_ipv6(b: &[u8], wire: u32) -> IpDecode {
    if b.len() < 40 {
        return Err(malformed("ipv6 header truncated"));
    }
    if b[0] >> 4 != 6 {
        return Err(malformed(format!("ipv6 version field {}", b[0] >> 4)));
    }
    let payload_len = u32::from(be16(b, 4));
    if 40 + payload_len > wire {
        return Err(malformed(format!(
            "ipv6 payload length {payload_len} exceeds available bytes"
        )));
    }
    let next = b[6];
    if IPV6_EXTENSION_HEADERS.contains(&next) {
        return Ok(Err(SkipReason::Ipv6ExtensionHeader(next)));
    }
    let mut src = [0u8; 16];
    let mut dst = [0u8; 16];
    src.copy_from_slice(&b[8..24]);
    dst.copy_from_slice(&b[24..40]);
    Ok(Ok(IpHeader {
        src: IpAddr::V6(Ipv6Addr::from(src)),
        dst: IpAddr::V6(Ipv6Addr::from(dst)),
        protocol: next,
        header_len: 40,
        payload_len,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eth(ethertype: u16) -> Vec<u8> {
        let mut f = vec![0x02, 0, 0, 0, 0, 1, 0x02, 0, 0, 0, 0, 2];
        f.extend_from_slice(&ethertype.to_be_bytes());
        f
    }

    fn ipv4(proto: u8, total_len: u16) -> Vec<u8> {
        let mut h = vec![0x45, 0];
        h.extend_from_slice(&total_len.to_be_bytes());
        h.extend_from_slice(&[0, 0, 0x40, 0, 64, proto, 0, 0]);
        h.extend_from_slice(&[10, 0, 0, 1, 93, 184, 216, 34]);
        h
    }

    fn tcp(flags: u8) -> Vec<u8> {
        let mut t = vec![0xC3, 0x50, 0x01, 0xBB];
        t.extend_from_slice(&[0; 8]);
        t.push(5 << 4);
        t.push(flags);
        t.extend_from_slice(&[0xFF, 0xFF, 0, 0, 0, 0]);
        t
    }

    #[test]
    fn tcp_syn_header_only() {
        let mut f = eth(ETHERTYPE_IPV4);
        f.extend(ipv4(6, 40));
        f.extend(tcp(0x02));
        let Decoded::Packet(p) = decode_packet(&f, f.len() as u32, 1, 1.0).unwrap() else {
            panic!("expected packet");
        };
        assert_eq!(p.payload_len, 0);
        assert_eq!(p.wire_len, 54);
        assert_eq!(p.transport, Transport::Tcp);
        assert!(p.tcp_flags.unwrap().contains(TcpFlags::SYN));
        assert_eq!((p.src_port, p.dst_port), (50000, 443));
        assert_eq!(p.dst_addr, "93.184.216.34".parse::<IpAddr>().unwrap());
    }

    #[test]
    fn udp_payload_from_udp_length() {
        let mut f = eth(ETHERTYPE_IPV4);
        f.extend(ipv4(17, 128));
        f.extend_from_slice(&[0x00, 0x35, 0x30, 0x39]);
        f.extend_from_slice(&108u16.to_be_bytes());
        f.extend_from_slice(&[0, 0]);
        f.resize(14 + 128, 0);
        let Decoded::Packet(p) = decode_packet(&f, f.len() as u32, 1, 0.0).unwrap() else {
            panic!("expected packet");
        };
        assert_eq!(p.payload_len, 100);
        assert_eq!(p.tcp_flags, None);
        assert_eq!(p.transport, Transport::Udp);
    }

    #[test]
    fn arp_is_skipped() {
        let mut f = eth(0x0806);
        f.extend_from_slice(&[0; 28]);
        assert_eq!(
            decode_packet(&f, f.len() as u32, 1, 0.0).unwrap(),
            Decoded::Skip(SkipReason::NonIp)
        );
    }

    #[test]
    fn vlan_tag_is_unwrapped() {
        let mut f = eth(ETHERTYPE_VLAN);
        f.extend_from_slice(&[0x00, 0x64]);
        f.extend_from_slice(&ETHERTYPE_IPV4.to_be_bytes());
        f.extend(ipv4(6, 40));
        f.extend(tcp(0x10));
        assert!(matches!(
            decode_packet(&f, f.len() as u32, 1, 0.0).unwrap(),
            Decoded::Packet(_)
        ));
    }

    #[test]
    fn snapped_frame_uses_declared_lengths() {
        let mut f = eth(ETHERTYPE_IPV4);
        f.extend(ipv4(6, 1040));
        f.extend(tcp(0x18));
        // only headers captured; 1000 payload bytes were on the wire
        let Decoded::Packet(p) = decode_packet(&f, 1054, 1, 0.0).unwrap() else {
            panic!("expected packet");
        };
        assert_eq!(p.payload_len, 1000);
        assert_eq!(p.wire_len, 1054);
    }

    #[test]
    fn declared_length_beyond_wire_is_malformed() {
        let mut f = eth(ETHERTYPE_IPV4);
        f.extend(ipv4(6, 400));
        f.extend(tcp(0x10));
        assert!(matches!(
            decode_packet(&f, f.len() as u32, 1, 0.0),
            Err(CaptureError::MalformedHeader(_))
        ));
    }

    #[test]
    fn non_tcp_udp_is_other() {
        let mut f = eth(ETHERTYPE_IPV4);
        f.extend(ipv4(1, 28));
        f.extend_from_slice(&[8, 0, 0, 0, 0, 0, 0, 0]);
        let Decoded::Packet(p) = decode_packet(&f, f.len() as u32, 1, 0.0).unwrap() else {
            panic!("expected packet");
        };
        assert_eq!(p.transport, Transport::Other);
        assert_eq!((p.src_port, p.dst_port), (0, 0));
        assert_eq!(p.payload_len, 8);
    }

    #[test]
    fn later_fragments_are_skipped() {
        let mut f = eth(ETHERTYPE_IPV4);
        let mut ip = ipv4(17, 28);
        ip[6] = 0x00;
        ip[7] = 0x10;
        f.extend(ip);
        f.extend_from_slice(&[0; 8]);
        assert_eq!(
            decode_packet(&f, f.len() as u32, 1, 0.0).unwrap(),
            Decoded::Skip(SkipReason::Fragment)
        );
    }

    #[test]
    fn ipv6_extension_header_is_skipped() {
        let mut f = vec![0x60, 0, 0, 0, 0, 8, 0, 64];
        f.extend_from_slice(&[0; 32]);
        f.extend_from_slice(&[17, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!(
            decode_packet(&f, f.len() as u32, LINKTYPE_RAW, 0.0).unwrap(),
            Decoded::Skip(SkipReason::Ipv6ExtensionHeader(0))
        );
    }

    #[test]
    fn ipv6_udp_over_linux_sll() {
        let mut f = vec![0u8; 14];
        f.extend_from_slice(&ETHERTYPE_IPV6.to_be_bytes());
        f.extend_from_slice(&[0x60, 0, 0, 0, 0, 12, 17, 64]);
        f.extend_from_slice(&[0x20, 0x01, 0x0d, 0xb8]);
        f.extend_from_slice(&[0; 12]);
        f.extend_from_slice(&[0x20, 0x01, 0x0d, 0xb8]);
        f.extend_from_slice(&[0; 11]);
        f.push(1);
        f.extend_from_slice(&[0x04, 0xD2, 0x00, 0x35, 0x00, 0x0C, 0, 0, 1, 2, 3, 4]);
        let Decoded::Packet(p) = decode_packet(&f, f.len() as u32, LINKTYPE_LINUX_SLL, 0.0).unwrap()
        else {
            panic!("expected packet");
        };
        assert_eq!(p.payload_len, 4);
        assert_eq!(p.dst_addr, "2001:db8::1".parse::<IpAddr>().unwrap());
    }

    #[test]
    fn unsupported_link_type() {
        assert_eq!(
            decode_packet(&[0; 64], 64, 105, 0.0).unwrap(),
            Decoded::Skip(SkipReason::UnsupportedLinkType(105))
        );
    }
}

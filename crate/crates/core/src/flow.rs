//! Bidirectional flow assembly.
//!
//! Packets are grouped by a canonical five-tuple so both directions of a
//! conversation land in one [`Flow`]. The direction of a flow's first packet
//! is its forward direction.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::io;
use std::net::IpAddr;

use chrono::{DateTime, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::capture::{PacketRecord, TcpFlags, Transport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Endpoint {
    pub addr: IpAddr,
    pub port: u16,
}

/// Canonically ordered five-tuple: `a <= b` under address-then-port order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FlowKey {
    pub a: Endpoint,
    pub b: Endpoint,
    pub transport: Transport,
}

impl FlowKey {
    /// Key for a packet plus the packet's source endpoint, or `None` for
    /// transports that do not form flows.
    pub fn for_packet(p: &PacketRecord) -> Option<(FlowKey, Endpoint)> {
        if p.transport == Transport::Other {
            return None;
        }
        let src = Endpoint {
            addr: p.src_addr,
            port: p.src_port,
        };
        let dst = Endpoint {
            addr: p.dst_addr,
            port: p.dst_port,
        };
        let (a, b) = if src <= dst { (src, dst) } else { (dst, src) };
        Some((
            FlowKey {
                a,
                b,
                transport: p.transport,
            },
            src,
        ))
    }

    pub fn contains(&self, addr: IpAddr) -> bool {
        self.a.addr == addr || self.b.addr == addr
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Termination {
    IdleTimeout,
    ActiveTimeout,
    TcpClose,
    EndOfCapture,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Flow {
    pub key: FlowKey,
    /// Source of the first packet; defines the forward direction.
    pub initiator: Endpoint,
    pub first_ts: f64,
    pub last_ts: f64,
    pub fwd_packets: u64,
    pub bwd_packets: u64,
    /// Wire bytes of forward packets.
    pub fwd_bytes: u64,
    pub bwd_bytes: u64,
    pub fwd_payload_bytes: u64,
    pub bwd_payload_bytes: u64,
    pub termination: Termination,
}

impl Flow {
    fn open(key: FlowKey, p: &PacketRecord, src: Endpoint) -> Self {
        Flow {
            key,
            initiator: src,
            first_ts: p.timestamp,
            last_ts: p.timestamp,
            fwd_packets: 1,
            bwd_packets: 0,
            fwd_bytes: u64::from(p.wire_len),
            bwd_bytes: 0,
            fwd_payload_bytes: u64::from(p.payload_len),
            bwd_payload_bytes: 0,
            termination: Termination::EndOfCapture,
        }
    }

    pub fn total_packets(&self) -> u64 {
        self.fwd_packets + self.bwd_packets
    }

    /// Endpoint opposite the initiator.
    pub fn responder(&self) -> Endpoint {
        if self.key.a == self.initiator {
            self.key.b
        } else {
            self.key.a
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    /// Seconds of silence after which a flow is closed.
    pub idle_timeout: f64,
    /// Maximum flow age in seconds.
    pub active_timeout: f64,
    /// Close TCP flows on RST or on FIN seen in both directions.
    pub honor_tcp_close: bool,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            idle_timeout: 120.0,
            active_timeout: 3600.0,
            honor_tcp_close: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assembly {
    pub flows: Vec<Flow>,
    /// Packets that could not join a flow (non TCP/UDP).
    pub dropped: u64,
}

struct OpenFlow {
    flow: Flow,
    fin_fwd: bool,
    fin_bwd: bool,
}

/// Stateful assembler over a time-ordered packet stream.
///
/// Idle and active timeouts are evaluated lazily, when the next packet for
/// the same key arrives or at [`FlowAssembler::finish`].
pub struct FlowAssembler {
    config: FlowConfig,
    open: BTreeMap<FlowKey, OpenFlow>,
    done: Vec<Flow>,
    dropped: u64,
}

impl FlowAssembler {
    pub fn new(config: FlowConfig) -> Self {
        FlowAssembler {
            config,
            open: BTreeMap::new(),
            done: Vec::new(),
            dropped: 0,
        }
    }

    pub fn push(&mut self, p: &PacketRecord) {
        let Some((key, src)) = FlowKey::for_packet(p) else {
            self.dropped += 1;
            return;
        };
        if let Some(state) = self.open.get(&key) {
            let expired = if p.timestamp - state.flow.last_ts > self.config.idle_timeout {
                Some(Termination::IdleTimeout)
            } else if p.timestamp - state.flow.first_ts > self.config.active_timeout {
                Some(Termination::ActiveTimeout)
            } else {
                None
            };
            if let Some(reason) = expired {
                let mut old = self.open.remove(&key).expect("present").flow;
                old.termination = reason;
                self.done.push(old);
            }
        }
        let forward = match self.open.get(&key) {
            Some(state) => src == state.flow.initiator,
            None => true,
        };
        let state = match self.open.entry(key) {
            Entry::Vacant(slot) => slot.insert(OpenFlow {
                flow: Flow::open(key, p, src),
                fin_fwd: false,
                fin_bwd: false,
            }),
            Entry::Occupied(slot) => {
                let state = slot.into_mut();
                let flow = &mut state.flow;
                flow.last_ts = flow.last_ts.max(p.timestamp);
                flow.first_ts = flow.first_ts.min(p.timestamp);
                if forward {
                    flow.fwd_packets += 1;
                    flow.fwd_bytes += u64::from(p.wire_len);
                    flow.fwd_payload_bytes += u64::from(p.payload_len);
                } else {
                    flow.bwd_packets += 1;
                    flow.bwd_bytes += u64::from(p.wire_len);
                    flow.bwd_payload_bytes += u64::from(p.payload_len);
                }
                state
            }
        };
        if !self.config.honor_tcp_close || key.transport != Transport::Tcp {
            return;
        }
        let flags = p.tcp_flags.unwrap_or_default();
        if flags.contains(TcpFlags::FIN) {
            if forward {
                state.fin_fwd = true;
            } else {
                state.fin_bwd = true;
            }
        }
        if flags.contains(TcpFlags::RST) || (state.fin_fwd && state.fin_bwd) {
            let mut closed = self.open.remove(&key).expect("present").flow;
            closed.termination = Termination::TcpClose;
            self.done.push(closed);
        }
    }

    pub fn finish(mut self) -> Assembly {
        let mut flows = std::mem::take(&mut self.done);
        flows.extend(self.open.into_values().map(|s| s.flow));
        flows.sort_by(|x, y| x.first_ts.total_cmp(&y.first_ts).then(x.key.cmp(&y.key)));
        Assembly {
            flows,
            dropped: self.dropped,
        }
    }
}

/// Assemble flows from a packet sequence.
///
/// Packets are stably ordered by timestamp first, so captures with
/// out-of-order records group the same way as sorted ones.
pub fn assemble(packets: &[PacketRecord], config: FlowConfig) -> Assembly {
    let mut order: Vec<usize> = (0..packets.len()).collect();
    order.sort_by(|&i, &j| packets[i].timestamp.total_cmp(&packets[j].timestamp));
    let mut assembler = FlowAssembler::new(config);
    for i in order {
        assembler.push(&packets[i]);
    }
    assembler.finish()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DayStats {
    pub date: NaiveDate,
    pub packets: u64,
    pub flows: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct FlowStats {
    pub packet_total: u64,
    pub flow_total: u64,
    pub per_day: Vec<DayStats>,
}

/// Packet and flow totals, bucketed by the UTC date of each flow's start.
pub fn flow_stats(flows: &[Flow]) -> FlowStats {
    let mut days: BTreeMap<NaiveDate, (u64, u64)> = BTreeMap::new();
    let mut stats = FlowStats::default();
    for f in flows {
        let packets = f.total_packets();
        stats.packet_total += packets;
        stats.flow_total += 1;
        let secs = f.first_ts.floor() as i64;
        let date = DateTime::from_timestamp(secs, 0)
            .map(|d| d.date_naive())
            .unwrap_or(NaiveDate::MIN);
        let entry = days.entry(date).or_default();
        entry.0 += packets;
        entry.1 += 1;
    }
    stats.per_day = days
        .into_iter()
        .map(|(date, (packets, flows))| DayStats {
            date,
            packets,
            flows,
        })
        .collect();
    stats
}

impl std::fmt::Display for FlowStats {
    /// Day-by-day table with packet and flow counts and a total row.
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "{:<20} {:>14} {:>12}", "Time", "Packet number", "Flow number")?;
        for (i, d) in self.per_day.iter().enumerate() {
            let label = format!("Day {} ({})", i + 1, d.date);
            writeln!(f, "{:<20} {:>14} {:>12}", label, d.packets, d.flows)?;
        }
        write!(
            f,
            "{:<20} {:>14} {:>12}",
            "Total", self.packet_total, self.flow_total
        )
    }
}

/// Column order of the flow CSV dump.
pub const FLOW_CSV_COLUMNS: [&str; 16] = [
    "addr_a",
    "port_a",
    "addr_b",
    "port_b",
    "transport",
    "initiator_addr",
    "initiator_port",
    "first_ts",
    "last_ts",
    "fwd_packets",
    "bwd_packets",
    "fwd_bytes",
    "bwd_bytes",
    "fwd_payload_bytes",
    "bwd_payload_bytes",
    "termination",
];

#[derive(Debug, Serialize, Deserialize)]
struct FlowRow {
    addr_a: IpAddr,
    port_a: u16,
    addr_b: IpAddr,
    port_b: u16,
    transport: String,
    initiator_addr: IpAddr,
    initiator_port: u16,
    first_ts: f64,
    last_ts: f64,
    fwd_packets: u64,
    bwd_packets: u64,
    fwd_bytes: u64,
    bwd_bytes: u64,
    fwd_payload_bytes: u64,
    bwd_payload_bytes: u64,
    termination: Termination,
}

#[derive(Debug, thiserror::Error)]
pub enum FlowCsvError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("row {row}: {reason}")]
    Invalid { row: usize, reason: String },
}

pub fn write_flows_csv<W: io::Write>(out: W, flows: &[Flow]) -> Result<(), csv::Error> {
    // header written explicitly so an empty dump still has one
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(FLOW_CSV_COLUMNS)?;
    for f in flows {
        w.serialize(FlowRow {
            addr_a: f.key.a.addr,
            port_a: f.key.a.port,
            addr_b: f.key.b.addr,
            port_b: f.key.b.port,
            transport: match f.key.transport {
                Transport::Tcp => "TCP".into(),
                Transport::Udp => "UDP".into(),
                Transport::Other => "OTHER".into(),
            },
            initiator_addr: f.initiator.addr,
            initiator_port: f.initiator.port,
            first_ts: f.first_ts,
            last_ts: f.last_ts,
            fwd_packets: f.fwd_packets,
            bwd_packets: f.bwd_packets,
            fwd_bytes: f.fwd_bytes,
            bwd_bytes: f.bwd_bytes,
            fwd_payload_bytes: f.fwd_payload_bytes,
            bwd_payload_bytes: f.bwd_payload_bytes,
            termination: f.termination,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_flows_csv<R: io::Read>(input: R) -> Result<Vec<Flow>, FlowCsvError> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().ne(FLOW_CSV_COLUMNS.iter().copied()) {
        return Err(FlowCsvError::Invalid {
            row: 0,
            reason: format!("unexpected header {:?}", header.iter().collect::<Vec<_>>()),
        });
    }
    let mut flows = Vec::new();
    for (i, row) in r.deserialize::<FlowRow>().enumerate() {
        let row = row?;
        let transport = match row.transport.as_str() {
            "TCP" => Transport::Tcp,
            "UDP" => Transport::Udp,
            other => {
                return Err(FlowCsvError::Invalid {
                    row: i + 1,
                    reason: format!("unknown transport {other}"),
                })
            }
        };
        let a = Endpoint {
            addr: row.addr_a,
            port: row.port_a,
        };
        let b = Endpoint {
            addr: row.addr_b,
            port: row.port_b,
        };
        let initiator = Endpoint {
            addr: row.initiator_addr,
            port: row.initiator_port,
        };
        if a > b || (initiator != a && initiator != b) {
            return Err(FlowCsvError::Invalid {
                row: i + 1,
                reason: "key is not canonical or initiator is not an endpoint".into(),
            });
        }
        flows.push(Flow {
            key: FlowKey { a, b, transport },
            initiator,
            first_ts: row.first_ts,
            last_ts: row.last_ts,
            fwd_packets: row.fwd_packets,
            bwd_packets: row.bwd_packets,
            fwd_bytes: row.fwd_bytes,
            bwd_bytes: row.bwd_bytes,
            fwd_payload_bytes: row.fwd_payload_bytes,
            bwd_payload_bytes: row.bwd_payload_bytes,
            termination: row.termination,
        });
    }
    Ok(flows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pkt(t: f64, src: (&str, u16), dst: (&str, u16), len: u32, flags: TcpFlags) -> PacketRecord {
        PacketRecord {
            timestamp: t,
            src_addr: src.0.parse().unwrap(),
            dst_addr: dst.0.parse().unwrap(),
            src_port: src.1,
            dst_port: dst.1,
            transport: Transport::Tcp,
            wire_len: len,
            payload_len: len.saturating_sub(54),
            tcp_flags: Some(flags),
        }
    }

    const C: (&str, u16) = ("10.0.0.2", 40000);
    const S: (&str, u16) = ("1.2.3.4", 443);

    fn conversation() -> Vec<PacketRecord> {
        vec![
            pkt(0.0, C, S, 54, TcpFlags::SYN),
            pkt(0.1, S, C, 54, TcpFlags::SYN | TcpFlags::ACK),
            pkt(0.2, C, S, 300, TcpFlags::ACK),
            pkt(0.5, S, C, 1500, TcpFlags::ACK),
            pkt(0.6, C, S, 54, TcpFlags::FIN | TcpFlags::ACK),
            pkt(0.7, S, C, 54, TcpFlags::FIN | TcpFlags::ACK),
        ]
    }

    #[test]
    fn both_directions_share_a_flow() {
        let flows = assemble(&conversation(), FlowConfig::default()).flows;
        assert_eq!(flows.len(), 1);
        let f = &flows[0];
        assert_eq!(f.initiator.port, 40000);
        assert_eq!((f.fwd_packets, f.bwd_packets), (3, 3));
        assert_eq!((f.fwd_bytes, f.bwd_bytes), (408, 1608));
        assert_eq!(f.termination, Termination::TcpClose);
        assert!((f.last_ts - f.first_ts - 0.7).abs() < 1e-12);
    }

    #[test]
    fn packet_after_close_opens_new_flow() {
        let mut p = conversation();
        p.push(pkt(0.8, C, S, 54, TcpFlags::ACK));
        assert_eq!(assemble(&p, FlowConfig::default()).flows.len(), 2);
        let off = FlowConfig {
            honor_tcp_close: false,
            ..FlowConfig::default()
        };
        let flows = assemble(&p, off).flows;
        assert_eq!(flows.len(), 1);
        assert_eq!(flows[0].termination, Termination::EndOfCapture);
    }

    #[test]
    fn idle_gap_splits() {
        let p = vec![pkt(0.0, C, S, 60, TcpFlags::ACK), pkt(2.5, S, C, 60, TcpFlags::ACK)];
        let config = FlowConfig {
            idle_timeout: 1.0,
            ..FlowConfig::default()
        };
        let flows = assemble(&p, config).flows;
        assert_eq!(flows.len(), 2);
        assert_eq!(flows[0].termination, Termination::IdleTimeout);
        // the second flow's initiator is the server
        assert_eq!(flows[1].initiator.port, 443);
    }

    #[test]
    fn stats_bucket_by_day() {
        let mut p = conversation();
        for q in &mut p {
            q.timestamp += 1_704_067_200.0;
        }
        let s = flow_stats(&assemble(&p, FlowConfig::default()).flows);
        assert_eq!((s.packet_total, s.flow_total), (6, 1));
        assert_eq!(s.per_day[0].date.to_string(), "2024-01-01");
    }

    #[test]
    fn csv_round_trip() {
        let flows = assemble(&conversation(), FlowConfig::default()).flows;
        let mut buf = Vec::new();
        write_flows_csv(&mut buf, &flows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert_eq!(read_flows_csv(buf.as_slice()).unwrap(), flows);

        let mut empty = Vec::new();
        write_flows_csv(&mut empty, &[]).unwrap();
        assert_eq!(String::from_utf8(empty.clone()).unwrap(), format!("{}\n", FLOW_CSV_COLUMNS.join(",")));
        assert!(read_flows_csv(empty.as_slice()).unwrap().is_empty());
    }
}

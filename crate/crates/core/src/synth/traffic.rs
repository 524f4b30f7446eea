use std::net::{IpAddr, Ipv4Addr};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::{draw_flow, effective_models, validate_profiles, FlowDraw, SiteProfile, SynthError, MAX_FRAME, MIN_FRAME};
use crate::capture::{
    write_capture, ByteOrder, RawPacket, TcpFlags, Timestamp, TsResolution, WriterOptions, LINKTYPE_ETHERNET,
};
use crate::dataset::{Matcher, MonitoredList};

/// 2024-01-01T00:00:00Z, in nanoseconds.
const EPOCH_NS: u64 = 1_704_067_200_000_000_000;
/// Flows of one visit start this far apart (plus jitter below half of it).
const FLOW_SPACING_NS: u64 = 100_000_000;
const VISIT_GAP_NS: u64 = 1_000_000_000;
/// Minimum gap between consecutive packets of one conversation.
const MIN_STEP_NS: u64 = 10_000;
/// Conversations are capped below the default idle timeout so every
/// conversation stays a single flow.
const MAX_DURATION_S: f64 = 100.0;
const CLIENT_BASE: Ipv4Addr = Ipv4Addr::new(10, 0, 0, 2);
const CLIENT_PORT_BASE: u16 = 40_000;
const PORTS_PER_CLIENT: usize = 20_000;
const SERVER_PORT: u16 = 443;
const CLIENT_MAC: [u8; 6] = [0x02, 0, 0, 0, 0, 0x02];
const GATEWAY_MAC: [u8; 6] = [0x02, 0, 0, 0, 0, 0x01];
/// Log-space spread of individual packet sizes around the flow's size.
const PACKET_SIZE_JITTER: f64 = 0.1;

/// A generated capture and everything needed to check what is recovered
/// from it.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthCapture {
    /// The capture file.
    pub capture: Vec<u8>,
    /// Addresses of the targeted profiles.
    pub monitored: MonitoredList,
    /// Label of each TCP conversation, in the order flow assembly reports
    /// flows (by first packet time). Untargeted conversations carry the
    /// untargeted label.
    pub ground_truth: Vec<String>,
    pub packets: usize,
}

impl SynthCapture {
    /// Ground truth as `flow_index,site_label` CSV.
    pub fn ground_truth_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["flow_index", "site_label"]).expect("in-memory write");
        for (i, label) in self.ground_truth.iter().enumerate() {
            w.write_record([i.to_string().as_str(), label]).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory write")).expect("labels are utf-8")
    }
}

/// Little-endian pcapng with nanosecond timestamps; see
/// [`generate_capture_with`].
pub fn generate_capture(profiles: &[SiteProfile], visits: usize, seed: u64) -> Result<SynthCapture, SynthError> {
    generate_capture_with(profiles, visits, seed, &WriterOptions::pcapng(ByteOrder::Little, LINKTYPE_ETHERNET))
}

/// Simulate `visits` visits to every profile, in shuffled order, and write
/// the traffic as an Ethernet capture.
///
/// Each visit opens a number of TCP conversations drawn from the profile's
/// `flows_per_visit`, each to one of its addresses on port 443: a
/// three-way handshake, the sampled data packets (the first from the
/// client, the rest in random order), then a FIN from each side. Every
/// conversation uses its own client address/port pair, so it is exactly
/// one flow under any idle timeout of at least 100 s, and with TCP-close
/// handling on or off. Visits are generated in parallel from per-visit
/// random streams; the output does not depend on the thread count.
pub fn generate_capture_with(
    profiles: &[SiteProfile],
    visits: usize,
    seed: u64,
    options: &WriterOptions,
) -> Result<SynthCapture, SynthError> {
    validate_profiles(profiles)?;
    if visits == 0 {
        return Err(SynthError::InvalidArgument("visits must be at least 1".into()));
    }
    if options.link_type != LINKTYPE_ETHERNET {
        return Err(SynthError::InvalidArgument("only Ethernet captures are generated".into()));
    }
    let servers: Vec<Vec<Ipv4Addr>> = profiles
        .iter()
        .map(|p| {
            p.addresses
                .iter()
                .map(|a| match a {
                    IpAddr::V4(v4) => Ok(*v4),
                    IpAddr::V6(_) => Err(SynthError::InvalidProfile {
                        site: p.site_label.clone(),
                        reason: format!("capture generation supports IPv4 addresses only, got {a}"),
                    }),
                })
                .collect()
        })
        .collect::<Result<_, _>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..profiles.len()).flat_map(|p| std::iter::repeat_n(p, visits)).collect();
    order.shuffle(&mut rng);
    struct Visit {
        profile: usize,
        flows: usize,
        start_ns: u64,
        first_conversation: usize,
    }
    let mut plan = Vec::with_capacity(order.len());
    let (mut start_ns, mut conversation) = (EPOCH_NS, 0);
    for profile in order {
        let (lo, hi) = profiles[profile].flows_per_visit;
        let flows = rng.random_range(lo..=hi) as usize;
        plan.push(Visit {
            profile,
            flows,
            start_ns,
            first_conversation: conversation,
        });
        start_ns += flows as u64 * FLOW_SPACING_NS + VISIT_GAP_NS;
        conversation += flows;
    }

    let models = effective_models(profiles, 1.0);
    let per_visit: Vec<Vec<Vec<(u64, Vec<u8>)>>> = plan
        .par_iter()
        .enumerate()
        .map(|(v, visit)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(v as u64 + 1);
            let addresses = &servers[visit.profile];
            (0..visit.flows)
                .map(|j| {
                    let start = visit.start_ns + j as u64 * FLOW_SPACING_NS + rng.random_range(0..FLOW_SPACING_NS / 2);
                    let server = addresses[rng.random_range(0..addresses.len())];
                    let draw = draw_flow(&models[visit.profile], &mut rng);
                    conversation_frames(visit.first_conversation + j, start, server, &draw, &mut rng)
                })
                .collect()
        })
        .collect();

    let ground_truth: Vec<String> = plan
        .iter()
        .flat_map(|v| std::iter::repeat_n(profiles[v.profile].truth_label().to_string(), v.flows))
        .collect();
    let mut frames: Vec<(u64, Vec<u8>)> = per_visit.into_iter().flatten().flatten().collect();
    frames.sort_by_key(|(ns, _)| *ns);
    let resolution = options.resolution();
    let packets: Vec<RawPacket> = frames
        .into_iter()
        .map(|(ns, data)| RawPacket {
            orig_len: data.len() as u32,
            data,
            timestamp: Timestamp {
                ticks: ns_to_ticks(ns, resolution),
                resolution,
            },
            interface: 0,
        })
        .collect();
    let monitored = MonitoredList::new(
        profiles
            .iter()
            .filter(|p| p.targeted)
            .map(|p| (p.site_label.clone(), p.addresses.iter().map(|a| Matcher::host(*a)).collect()))
            .collect(),
    )?;
    Ok(SynthCapture {
        capture: write_capture(options, &packets),
        monitored,
        ground_truth,
        packets: packets.len(),
    })
}

/// Nanoseconds since the epoch expressed in ticks of `resolution`,
/// truncating; saturates where the tick count does not fit.
pub(crate) fn ns_to_ticks(ns: u64, resolution: TsResolution) -> u64 {
    let ns = u128::from(ns);
    let ticks = match resolution {
        TsResolution::Decimal(n) if n <= 9 => Some(ns / 10u128.pow(u32::from(9 - n))),
        TsResolution::Decimal(n) => 10u128.checked_pow(u32::from(n - 9)).and_then(|f| ns.checked_mul(f)),
        TsResolution::Binary(n) => 2u128
            .checked_pow(u32::from(n))
            .and_then(|f| ns.checked_mul(f))
            .map(|v| v / 1_000_000_000),
    };
    ticks.map_or(u64::MAX, |t| u64::try_from(t).unwrap_or(u64::MAX))
}

#[derive(Clone, Copy, PartialEq)]
enum Dir {
    Fwd,
    Bwd,
}

/// Frames of one TCP conversation with their capture times in
/// nanoseconds.
fn conversation_frames(
    index: usize,
    start_ns: u64,
    server: Ipv4Addr,
    draw: &FlowDraw,
    rng: &mut ChaCha8Rng,
) -> Vec<(u64, Vec<u8>)> {
    let client = Ipv4Addr::from(u32::from(CLIENT_BASE) + (index / PORTS_PER_CLIENT) as u32);
    let client_port = CLIENT_PORT_BASE + (index % PORTS_PER_CLIENT) as u16;

    let mut data: Vec<Dir> = std::iter::repeat_n(Dir::Fwd, draw.fwd_packets as usize - 1)
        .chain(std::iter::repeat_n(Dir::Bwd, draw.bwd_packets as usize))
        .collect();
    data.shuffle(rng);
    let mut script: Vec<(Dir, TcpFlags, u32)> = vec![
        (Dir::Fwd, TcpFlags::SYN, 0),
        (Dir::Bwd, TcpFlags::SYN | TcpFlags::ACK, 0),
        (Dir::Fwd, TcpFlags::ACK, 0),
    ];
    for dir in std::iter::once(Dir::Fwd).chain(data) {
        let mean = if dir == Dir::Fwd { draw.fwd_size } else { draw.bwd_size };
        let jitter: f64 = rng.sample(StandardNormal);
        let size = (mean * (PACKET_SIZE_JITTER * jitter).exp())
            .round()
            .clamp((MIN_FRAME + 1) as f64, MAX_FRAME as f64) as u64;
        script.push((dir, TcpFlags::PSH | TcpFlags::ACK, (size - MIN_FRAME) as u32));
    }
    script.push((Dir::Fwd, TcpFlags::FIN | TcpFlags::ACK, 0));
    script.push((Dir::Bwd, TcpFlags::FIN | TcpFlags::ACK, 0));

    let span_ns = (draw.duration.min(MAX_DURATION_S) * 1e9) as u64;
    let steps = (script.len() - 1) as u64;
    let mut seq = [rng.random::<u32>(), rng.random::<u32>()];
    let mut ip_id = [rng.random::<u16>(), rng.random::<u16>()];
    let mut last = 0u64;
    script
        .iter()
        .enumerate()
        .map(|(k, &(dir, flags, payload))| {
            let mut t = start_ns + span_ns * k as u64 / steps;
            if k > 0 {
                t = t.max(last + MIN_STEP_NS);
            }
            last = t;
            let (s, r) = if dir == Dir::Fwd { (0, 1) } else { (1, 0) };
            let ack = if flags.contains(TcpFlags::ACK) { seq[r] } else { 0 };
            let (src, dst, sport, dport) = if dir == Dir::Fwd {
                (client, server, client_port, SERVER_PORT)
            } else {
                (server, client, SERVER_PORT, client_port)
            };
            let frame = tcp_frame(src, dst, sport, dport, seq[s], ack, flags, payload, ip_id[s], dir);
            let consumed = payload + u32::from(flags.intersects(TcpFlags::SYN | TcpFlags::FIN));
            seq[s] = seq[s].wrapping_add(consumed);
            ip_id[s] = ip_id[s].wrapping_add(1);
            (t, frame)
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn tcp_frame(
    src: Ipv4Addr,
    dst: Ipv4Addr,
    src_port: u16,
    dst_port: u16,
    seq: u32,
    ack: u32,
    flags: TcpFlags,
    payload: u32,
    ip_id: u16,
    dir: Dir,
) -> Vec<u8> {
    let ip_len = 20 + 20 + payload as usize;
    let mut f = Vec::with_capacity(14 + ip_len);
    let (dst_mac, src_mac) = if dir == Dir::Fwd {
        (GATEWAY_MAC, CLIENT_MAC)
    } else {
        (CLIENT_MAC, GATEWAY_MAC)
    };
    f.extend_from_slice(&dst_mac);
    f.extend_from_slice(&src_mac);
    f.extend_from_slice(&0x0800u16.to_be_bytes());

    let ip_start = f.len();
    f.extend_from_slice(&[0x45, 0]);
    f.extend_from_slice(&(ip_len as u16).to_be_bytes());
    f.extend_from_slice(&ip_id.to_be_bytes());
    f.extend_from_slice(&0x4000u16.to_be_bytes());
    f.extend_from_slice(&[64, 6, 0, 0]);
    f.extend_from_slice(&src.octets());
    f.extend_from_slice(&dst.octets());
    let ip_sum = checksum(&f[ip_start..], 0);
    f[ip_start + 10..ip_start + 12].copy_from_slice(&ip_sum.to_be_bytes());

    let tcp_start = f.len();
    f.extend_from_slice(&src_port.to_be_bytes());
    f.extend_from_slice(&dst_port.to_be_bytes());
    f.extend_from_slice(&seq.to_be_bytes());
    f.extend_from_slice(&ack.to_be_bytes());
    f.extend_from_slice(&[5 << 4, flags.bits()]);
    f.extend_from_slice(&u16::MAX.to_be_bytes());
    f.extend_from_slice(&[0, 0, 0, 0]);
    f.resize(f.len() + payload as usize, 0);
    let tcp_len = (20 + payload) as u16;
    let pseudo = [&src.octets()[..], &dst.octets()[..], &[0, 6], &tcp_len.to_be_bytes()].concat();
    let tcp_sum = checksum(&f[tcp_start..], sum_words(&pseudo));
    f[tcp_start + 16..tcp_start + 18].copy_from_slice(&tcp_sum.to_be_bytes());
    f
}

fn sum_words(bytes: &[u8]) -> u32 {
    bytes
        .chunks(2)
        .map(|c| u32::from(u16::from_be_bytes([c[0], *c.get(1).unwrap_or(&0)])))
        .sum()
}

/// Internet checksum of `bytes` with a pre-summed pseudo header.
fn checksum(bytes: &[u8], initial: u32) -> u16 {
    let mut sum = u64::from(initial) + u64::from(sum_words(bytes));
    while sum >> 16 != 0 {
        sum = (sum & 0xFFFF) + (sum >> 16);
    }
    !(sum as u16)
}

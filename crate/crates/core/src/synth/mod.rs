//! Synthetic closed-world traffic with known ground truth.
//!
//! Every flow is drawn from a per-site model of five log-normal latent
//! quantities: duration, forward and backward packet counts, and forward
//! and backward packet sizes. The same model backs both outputs of this
//! module: pcapng captures of complete TCP conversations
//! ([`generate_capture`]) and labeled feature datasets sampled directly
//! ([`generate_dataset`]).

mod dataset;
mod traffic;

pub use dataset::generate_dataset;
pub use traffic::{generate_capture, generate_capture_with, SynthCapture};

use std::net::{IpAddr, Ipv4Addr};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{DatasetError, UNTARGETED};

/// Number of latent quantities per flow.
pub const LATENT_DIMS: usize = 5;

/// Smallest frame the generator emits: Ethernet + IPv4 + TCP headers.
pub const MIN_FRAME: u64 = 54;
/// Largest frame: a full Ethernet MTU.
pub const MAX_FRAME: u64 = 1514;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid profile {site:?}: {reason}")]
    InvalidProfile { site: String, reason: String },
    #[error("invalid generator argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

/// Parameters of `exp(N(mu, sigma²))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogNormalParams {
    pub mu: f64,
    pub sigma: f64,
}

impl LogNormalParams {
    pub fn new(median: f64, sigma: f64) -> Self {
        LogNormalParams {
            mu: median.ln(),
            sigma,
        }
    }

    pub fn mean(&self) -> f64 {
        (self.mu + self.sigma * self.sigma / 2.0).exp()
    }
}

/// Per-flow distributions of one site.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowModel {
    /// Seconds.
    pub duration: LogNormalParams,
    /// Forward data packets; rounded, at least 1.
    pub fwd_packets: LogNormalParams,
    pub bwd_packets: LogNormalParams,
    /// Wire bytes per forward data packet.
    pub fwd_packet_size: LogNormalParams,
    pub bwd_packet_size: LogNormalParams,
}

impl FlowModel {
    pub fn dims(&self) -> [LogNormalParams; LATENT_DIMS] {
        [
            self.duration,
            self.fwd_packets,
            self.bwd_packets,
            self.fwd_packet_size,
            self.bwd_packet_size,
        ]
    }

    pub fn from_dims(d: [LogNormalParams; LATENT_DIMS]) -> Self {
        FlowModel {
            duration: d[0],
            fwd_packets: d[1],
            bwd_packets: d[2],
            fwd_packet_size: d[3],
            bwd_packet_size: d[4],
        }
    }
}

/// One site (or one source of background traffic) and how its flows look.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteProfile {
    pub site_label: String,
    /// Monitored site, as opposed to background traffic.
    pub targeted: bool,
    /// Server addresses; each flow uses one of them.
    pub addresses: Vec<IpAddr>,
    /// Inclusive range of flows opened per visit.
    pub flows_per_visit: (u32, u32),
    pub flow: FlowModel,
    /// Multiplier on every `sigma` when sampling.
    pub noise_scale: f64,
}

impl SiteProfile {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |reason: &str| SynthError::InvalidProfile {
            site: self.site_label.clone(),
            reason: reason.into(),
        };
        if self.site_label.is_empty() || self.site_label.contains([',', '\n']) {
            return Err(bad("label must be non-empty without commas or newlines"));
        }
        if self.targeted && self.site_label.eq_ignore_ascii_case(UNTARGETED) {
            return Err(bad("a targeted site cannot use the untargeted label"));
        }
        if self.addresses.is_empty() {
            return Err(bad("no addresses"));
        }
        let (lo, hi) = self.flows_per_visit;
        if lo == 0 || lo > hi {
            return Err(bad("flows_per_visit must be a range with 1 <= lo <= hi"));
        }
        if !(self.noise_scale.is_finite() && self.noise_scale >= 0.0) {
            return Err(bad("noise_scale must be finite and >= 0"));
        }
        if self
            .flow
            .dims()
            .iter()
            .any(|p| !p.mu.is_finite() || !p.sigma.is_finite() || p.sigma < 0.0)
        {
            return Err(bad("distribution parameters must be finite with sigma >= 0"));
        }
        Ok(())
    }

    /// Label written to ground-truth files.
    pub fn truth_label(&self) -> &str {
        if self.targeted {
            &self.site_label
        } else {
            UNTARGETED
        }
    }
}

/// Medians and log-space spreads of the reference flow model.
const BASE_MEDIANS: [f64; LATENT_DIMS] = [2.0, 20.0, 30.0, 150.0, 500.0];
const BASE_SIGMAS: [f64; LATENT_DIMS] = [0.3, 0.3, 0.3, 0.1, 0.1];

/// Offset direction of profile `i` from the reference model, in units of
/// each dimension's sigma. The first 32 are the distinct corners of the
/// unit cube; later ones walk the remaining points of {-1, 0, 1}^5 and then
/// repeat at growing scale, so every profile gets its own centre.
fn signature(i: usize) -> [f64; LATENT_DIMS] {
    let mut points: Vec<[f64; LATENT_DIMS]> = (0..3usize.pow(LATENT_DIMS as u32))
        .map(|mut n| {
            let mut p = [0.0; LATENT_DIMS];
            for v in &mut p {
                *v = (n % 3) as f64 - 1.0;
                n /= 3;
            }
            p
        })
        .filter(|p| p.iter().any(|&v| v != 0.0))
        .collect();
    points.sort_by_key(|p| (p.iter().filter(|&&v| v == 0.0).count(), corner_rank(p)));
    let scale = (1 + i / points.len()) as f64;
    points[i % points.len()].map(|v| v * scale)
}

/// Corner coordinates read as bits, so corners come in binary order.
fn corner_rank(p: &[f64; LATENT_DIMS]) -> usize {
    p.iter().enumerate().fold(0, |acc, (d, &v)| acc | (usize::from(v > 0.0) << d))
}

/// A closed world of `n_sites` monitored sites plus `n_background`
/// untargeted traffic sources.
///
/// Profile `i` has latent medians offset from a common reference by one
/// sigma per dimension in a direction unique to it, so the sites differ in
/// the mean of every flow feature; [`generate_dataset`]'s `separability`
/// stretches these offsets. Sites use addresses in 100.64.0.0/10,
/// background sources in 198.18.0.0/15.
pub fn closed_world_profiles(n_sites: usize, n_background: usize) -> Vec<SiteProfile> {
    let width = (n_sites.max(n_background).max(1)).to_string().len().max(2);
    (0..n_sites + n_background)
        .map(|i| {
            let targeted = i < n_sites;
            let local = if targeted { i } else { i - n_sites };
            let (label, base) = if targeted {
                (format!("site{:0width$}", local + 1), Ipv4Addr::new(100, 64, 0, 0))
            } else {
                (format!("background{:0width$}", local + 1), Ipv4Addr::new(198, 18, 0, 0))
            };
            let host = |k: u32| IpAddr::V4(Ipv4Addr::from(u32::from(base) + 256 * local as u32 + k));
            let sig = signature(i);
            let dims = std::array::from_fn(|d| LogNormalParams {
                mu: BASE_MEDIANS[d].ln() + sig[d] * BASE_SIGMAS[d],
                sigma: BASE_SIGMAS[d],
            });
            SiteProfile {
                site_label: label,
                targeted,
                addresses: vec![host(1), host(2)],
                flows_per_visit: (2, 5),
                flow: FlowModel::from_dims(dims),
                noise_scale: 1.0,
            }
        })
        .collect()
}

/// Flow models with the distance of each profile's `mu` from the across
/// profile centre multiplied by `separability`. At 0 every profile shares
/// the centre, so all are identically distributed.
pub fn effective_models(profiles: &[SiteProfile], separability: f64) -> Vec<FlowModel> {
    let n = profiles.len().max(1) as f64;
    let centre: [f64; LATENT_DIMS] =
        std::array::from_fn(|d| profiles.iter().map(|p| p.flow.dims()[d].mu).sum::<f64>() / n);
    profiles
        .iter()
        .map(|p| {
            let dims = p.flow.dims();
            FlowModel::from_dims(std::array::from_fn(|d| LogNormalParams {
                mu: centre[d] + separability * (dims[d].mu - centre[d]),
                sigma: dims[d].sigma * p.noise_scale,
            }))
        })
        .collect()
}

/// One realised flow in the latent space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct FlowDraw {
    pub duration: f64,
    pub fwd_packets: u64,
    pub bwd_packets: u64,
    pub fwd_size: f64,
    pub bwd_size: f64,
}

pub(crate) fn draw_flow<R: rand::Rng>(model: &FlowModel, rng: &mut R) -> FlowDraw {
    use rand_distr::StandardNormal;
    let mut z = [0.0; LATENT_DIMS];
    for (v, p) in z.iter_mut().zip(model.dims()) {
        let n: f64 = rng.sample(StandardNormal);
        *v = (p.mu + p.sigma * n).exp();
    }
    FlowDraw {
        duration: z[0].max(1e-6),
        fwd_packets: (z[1].round() as u64).max(1),
        bwd_packets: (z[2].round() as u64).max(1),
        fwd_size: z[3].clamp(MIN_FRAME as f64, MAX_FRAME as f64),
        bwd_size: z[4].clamp(MIN_FRAME as f64, MAX_FRAME as f64),
    }
}

pub(crate) fn validate_profiles(profiles: &[SiteProfile]) -> Result<(), SynthError> {
    if profiles.is_empty() {
        return Err(SynthError::InvalidArgument("at least one profile is required".into()));
    }
    for (i, p) in profiles.iter().enumerate() {
        p.validate()?;
        if profiles[..i].iter().any(|q| q.site_label == p.site_label) {
            return Err(SynthError::InvalidProfile {
                site: p.site_label.clone(),
                reason: "duplicate label".into(),
            });
        }
        for q in &profiles[..i] {
            if let Some(a) = p.addresses.iter().find(|a| q.addresses.contains(a)) {
                return Err(SynthError::InvalidProfile {
                    site: p.site_label.clone(),
                    reason: format!("address {a} also belongs to {:?}", q.site_label),
                });
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn signatures_are_distinct() {
        let sigs: Vec<_> = (0..300).map(signature).collect();
        for (i, a) in sigs.iter().enumerate() {
            assert!(sigs[..i].iter().all(|b| b != a), "duplicate signature {i}");
        }
        assert!(sigs[..32].iter().all(|s| s.iter().all(|v| v.abs() == 1.0)));
    }

    #[test]
    fn profiles_validate() {
        let ps = closed_world_profiles(20, 3);
        assert_eq!(ps.len(), 23);
        validate_profiles(&ps).unwrap();
        assert_eq!(ps[0].site_label, "site01");
        assert_eq!(ps[22].site_label, "background03");
        assert_eq!(ps[22].truth_label(), UNTARGETED);
        let mut bad = ps[0].clone();
        bad.flows_per_visit = (3, 2);
        assert!(bad.validate().is_err());
        bad = ps[0].clone();
        bad.flow.duration.sigma = f64::NAN;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn zero_separability_collapses_models() {
        let ps = closed_world_profiles(4, 0);
        let ms = effective_models(&ps, 0.0);
        assert!(ms.windows(2).all(|w| w[0] == w[1]));
        let ms = effective_models(&ps, 1.0);
        for (m, p) in ms.iter().zip(&ps) {
            assert!((m.duration.mu - p.flow.duration.mu).abs() < 1e-12);
        }
    }
}

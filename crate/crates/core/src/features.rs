//! Per-flow feature vectors.
//!
//! Byte counts use wire lengths (headers included). Rate features are
//! undefined for zero-duration flows and are carried as `None` so that the
//! missing-value policy is applied explicitly downstream.

use serde::{Deserialize, Serialize};

use crate::flow::Flow;

/// Column names of the feature schema, in storage order.
pub const FEATURE_NAMES: [&str; 8] = [
    "flow_duration",
    "fwd_packets",
    "bwd_packets",
    "fwd_length",
    "bwd_length",
    "flow_bytes_per_s",
    "flow_packets_per_s",
    "avg_packet_size",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    /// Seconds between the first and last packet.
    pub flow_duration: f64,
    pub fwd_packets: u64,
    pub bwd_packets: u64,
    /// Sum of forward wire lengths.
    pub fwd_length: u64,
    pub bwd_length: u64,
    pub flow_bytes_per_s: Option<f64>,
    pub flow_packets_per_s: Option<f64>,
    pub avg_packet_size: f64,
}

impl FeatureVector {
    /// Build a vector from the raw counters, deriving the rate and size
    /// columns.
    pub fn from_counts(
        flow_duration: f64,
        fwd_packets: u64,
        bwd_packets: u64,
        fwd_length: u64,
        bwd_length: u64,
    ) -> Self {
        let total_bytes = (fwd_length + bwd_length) as f64;
        let total_packets = (fwd_packets + bwd_packets) as f64;
        let (bytes_per_s, packets_per_s) = if flow_duration > 0.0 {
            (
                Some(total_bytes / flow_duration),
                Some(total_packets / flow_duration),
            )
        } else {
            (None, None)
        };
        FeatureVector {
            flow_duration,
            fwd_packets,
            bwd_packets,
            fwd_length,
            bwd_length,
            flow_bytes_per_s: bytes_per_s,
            flow_packets_per_s: packets_per_s,
            avg_packet_size: if total_packets > 0.0 {
                total_bytes / total_packets
            } else {
                0.0
            },
        }
    }

    pub fn to_row(&self) -> Vec<Option<f64>> {
        vec![
            Some(self.flow_duration),
            Some(self.fwd_packets as f64),
            Some(self.bwd_packets as f64),
            Some(self.fwd_length as f64),
            Some(self.bwd_length as f64),
            self.flow_bytes_per_s,
            self.flow_packets_per_s,
            Some(self.avg_packet_size),
        ]
    }
}

pub fn featurize(flow: &Flow) -> FeatureVector {
    FeatureVector::from_counts(
        flow.last_ts - flow.first_ts,
        flow.fwd_packets,
        flow.bwd_packets,
        flow.fwd_bytes,
        flow.bwd_bytes,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn round2(x: f64) -> f64 {
        (x * 100.0).round() / 100.0
    }

    #[test]
    fn single_direction_rows() {
        let v = FeatureVector::from_counts(1.911063, 109, 0, 7953, 0);
        assert_eq!(round2(v.flow_bytes_per_s.unwrap()), 4161.56);
        assert_eq!(round2(v.flow_packets_per_s.unwrap()), 57.04);
        assert_eq!(round2(v.avg_packet_size), 72.96);

        let v = FeatureVector::from_counts(0.138093, 7, 0, 957, 0);
        assert_eq!(round2(v.flow_bytes_per_s.unwrap()), 6930.11);
        assert_eq!(round2(v.flow_packets_per_s.unwrap()), 50.69);
        assert_eq!(round2(v.avg_packet_size), 136.71);
    }

    #[test]
    fn zero_duration_rates_are_missing() {
        let v = FeatureVector::from_counts(0.0, 1, 0, 60, 0);
        assert_eq!(v.flow_bytes_per_s, None);
        assert_eq!(v.flow_packets_per_s, None);
        assert_eq!(v.avg_packet_size, 60.0);
        let row = v.to_row();
        assert_eq!(row.len(), FEATURE_NAMES.len());
        assert_eq!(row[5], None);
    }

    #[test]
    fn average_uses_both_directions() {
        let v = FeatureVector::from_counts(2.0, 3, 1, 300, 700);
        assert_eq!(v.avg_packet_size, 250.0);
        assert_eq!(v.flow_bytes_per_s, Some(500.0));
        assert_eq!(v.flow_packets_per_s, Some(2.0));
    }
}

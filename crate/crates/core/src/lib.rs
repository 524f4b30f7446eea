//! Website-fingerprinting traffic analysis.
//!
//! The crate follows traffic from capture file to classifier report:
//!
//! - [`capture`] reads pcapng and classic pcap files and decodes
//!   Ethernet/IP/TCP/UDP headers.
//! - [`flow`] groups packets into bidirectional flows.
//! - [`features`] computes the per-flow feature vector.
//! - [`dataset`] attaches monitored-site labels, splits and preprocesses.
//! - [`learners`] trains and persists seven classifier families.
//! - [`eval`] computes metrics, cross-validates, grid-searches and formats
//!   the comparison report.
//! - [`synth`] generates synthetic captures and datasets with known labels.
//! - [`cli`] chains the stages as file-based subcommands.

pub mod capture;
pub mod cli;
pub mod dataset;
pub mod eval;
pub mod features;
pub mod flow;
pub mod learners;
pub mod synth;

//! Deterministic discrete-event simulator of a network of nodes running
//! On Tangle Voting over a peer-to-peer overlay.
//!
//! * [`config`] – run configuration (TOML/JSON) and validation.
//! * [`topology`] – complete and Watts-Strogatz overlays.
//! * [`queue`] – the deterministic event queue.
//! * [`arena`] – block and contested-transaction store shared by all views.
//! * [`view`] – per-node solidification, tips, Approval and Witness Weight.
//! * [`engine`] – the event loop, issuance, gossip and reality selection.
//! * [`adversary`] – attack strategies and conflict fixtures.
//! * [`metrics`] – run reports and output files.

// `!(x > 0.0)` style checks deliberately reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adversary;
pub mod arena;
pub mod config;
pub mod engine;
pub mod metrics;
pub mod queue;
mod report;
pub mod topology;
pub mod view;

pub use adversary::{safety_partition, PartitionPlan};
pub use config::{AdversaryConfig, ConfigError, SimConfig};
pub use engine::{run, run_traced, Sim, TraceEvent};
pub use metrics::RunReport;

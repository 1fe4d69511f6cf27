//! A self-contained cycle-driven network-on-chip simulator with a
//! directory-based MESI coherence layer, a coherence traffic analyzer, and a
//! reinforcement-learning optimizer that jointly picks the topology and
//! learns per-link routing weights from combined network + coherence metrics.
//!
//! Start with the runnable examples (`cargo run --example build_topologies`,
//! `train_small`, ...) or the `cohesim` binary's `run`/`train`/`analyze`/
//! `topologies` subcommands.

pub mod ccta;
pub mod coherence;
pub mod commands;
pub mod config;
pub mod energy;
pub mod neural;
pub mod noc;
pub mod optimizer;
pub mod sim;
pub mod topology;
pub mod workload;

pub use sim::{MetricsSnapshot, SimConfig, SimError, SystemSim};
pub use topology::{build_topology, enumerate_links, validate, NetworkGraph, TopologyKind};

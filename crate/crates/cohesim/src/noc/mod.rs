//! Cycle-driven flit-level network: wormhole switching over four virtual
//! channels per port with credit-based flow control and table routing.
//!
//! Timing model: one cycle to cross a switch onto a link, one cycle on the
//! link, and one cycle of injection, so an uncontended packet takes
//! `1 + 2*hops + (flits - 1)` cycles from creation to the tail leaving at the
//! destination. Contention shows up as delay on top of that baseline.

pub mod network;
pub mod routing;

pub use network::{CycleEvents, Network, NetworkConfig};
pub use routing::{bfs_levels, compute_routing_tables, xy_routing_table, RoutingTables};

use crate::coherence::msg::CoherenceMessage;
use std::fmt;

pub const VCS_PER_PORT: usize = 4;
pub const VC_DEPTH: usize = 4;
/// Cycles without any flit movement (while flits are buffered) before the
/// watchdog declares a suspected deadlock.
pub const WATCHDOG_CYCLES: u64 = 10_000;

/// Message classes, each with its own virtual-channel set to keep the
/// protocol's request/forward/response dependency chain deadlock-free.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VirtualNet {
    Request = 0,
    Forward = 1,
    Response = 2,
}

impl VirtualNet {
    /// VC indices owned by this class: request 1, forward 1, response 2.
    pub fn vcs(self) -> &'static [usize] {
        match self {
            VirtualNet::Request => &[0],
            VirtualNet::Forward => &[1],
            VirtualNet::Response => &[2, 3],
        }
    }
}

pub type PacketId = u64;

#[derive(Debug, Clone)]
pub struct Packet {
    pub id: PacketId,
    pub src: usize,
    pub dst: usize,
    pub vnet: VirtualNet,
    pub flit_count: u8,
    pub creation_cycle: u64,
    pub injection_cycle: Option<u64>,
    pub ejection_cycle: Option<u64>,
    pub msg: Option<CoherenceMessage>,
    /// Routing-table path length for (src, dst), fixed at creation.
    pub route_hops: u32,
    /// Up*/down* phase bit: set once the head takes its first down-hop.
    pub(crate) descending: bool,
    /// Traversed node sequence (head flit), recorded when path checking is on.
    pub(crate) trace: Vec<usize>,
}

impl Packet {
    /// Idle-network latency for this packet's route and length.
    pub fn zero_load(&self) -> u64 {
        1 + 2 * self.route_hops as u64 + (self.flit_count as u64 - 1)
    }

    pub fn latency(&self) -> Option<u64> {
        self.ejection_cycle.map(|e| e - self.creation_cycle)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NocError {
    NotAMesh,
    Unreachable { src: usize, dst: usize },
    DeadlockSuspected { cycle: u64 },
}

impl fmt::Display for NocError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NocError::NotAMesh => write!(f, "xy routing requires a mesh"),
            NocError::Unreachable { src, dst } => {
                write!(f, "no legal route from {src} to {dst}")
            }
            NocError::DeadlockSuspected { cycle } => {
                write!(f, "deadlock suspected at cycle {cycle}: no flit moved for {WATCHDOG_CYCLES} cycles")
            }
        }
    }
}

impl std::error::Error for NocError {}

/// Windowed network metrics; `empty` flags a window with no ejected packets,
/// in which case the averages are reported as zero.
#[derive(Debug, Clone, Default)]
pub struct NocMetrics {
    pub latency_avg: f64,
    pub delay_avg: f64,
    pub link_utilization: f64,
    pub injected: u64,
    pub ejected: u64,
    /// Flits over each canonical link (both directions) inside the window.
    pub link_flits: Vec<u64>,
    pub window: (u64, u64),
    pub empty: bool,
}

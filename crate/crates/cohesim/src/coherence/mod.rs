//! Directory-based MESI coherence: per-core private L1 controllers and
//! address-interleaved home (directory + L2 slice) controllers, exchanging
//! typed messages over the network.
//!
//! Controllers are pure state machines: they consume a CPU request or a
//! message and report outgoing messages plus transaction lifecycle events
//! through [`ProtocolCtx`]. The cycle loop owns delivery order, so protocol
//! behavior is deterministic and independent of any attached instrumentation.

pub mod directory;
pub mod l1;
pub mod msg;

pub use directory::{DirState, DirectoryEntry, HomeSlice, MEM_FETCH_LATENCY};
pub use l1::{CacheLineEntry, CpuOp, CpuOutcome, L1Cache, L1Config, Stable, Transient};
pub use msg::{align_line, home_of, CoherenceMessage, MsgKind, LINE_BYTES, MEMORY_BYTES};

use std::collections::BTreeMap;
use std::fmt;

/// The transaction classes the traffic analyzer distinguishes. Writebacks are
/// tracked too so every message belongs to a live transaction; they are
/// excluded from the three timing aggregates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TxnType {
    WriteHitS,
    ReadMiss,
    WriteMiss,
    Writeback,
}

impl TxnType {
    pub fn name(self) -> &'static str {
        match self {
            TxnType::WriteHitS => "WriteHitS",
            TxnType::ReadMiss => "ReadMiss",
            TxnType::WriteMiss => "WriteMiss",
            TxnType::Writeback => "Writeback",
        }
    }
}

impl std::str::FromStr for TxnType {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "WriteHitS" => Ok(TxnType::WriteHitS),
            "ReadMiss" => Ok(TxnType::ReadMiss),
            "WriteMiss" => Ok(TxnType::WriteMiss),
            "Writeback" => Ok(TxnType::Writeback),
            other => Err(format!("unknown transaction type {other}")),
        }
    }
}

/// What a controller did in response to one input.
#[derive(Debug, Clone, PartialEq)]
pub enum ProtocolEvent {
    TxnStart {
        txn: u64,
        ttype: TxnType,
        core: usize,
        addr: u64,
    },
    TxnEnd {
        txn: u64,
    },
    Send(CoherenceMessage),
    /// A line changed stable state at this core (consumed by the SWMR check).
    Touched {
        core: usize,
        addr: u64,
    },
}

/// Serialization-order reference memory for the data-value invariant. Writes
/// bump a global version at the point they perform; reads must observe the
/// current version for their address.
#[derive(Debug, Default, Clone)]
pub struct DataOracle {
    version: u64,
    mem: BTreeMap<u64, u64>,
}

impl DataOracle {
    pub fn write(&mut self, addr: u64) -> u64 {
        self.version += 1;
        self.mem.insert(addr, self.version);
        self.version
    }

    pub fn expected(&self, addr: u64) -> u64 {
        self.mem.get(&addr).copied().unwrap_or(0)
    }

    pub fn check_read(&self, core: usize, addr: u64, seen: u64) -> Result<(), CoherenceError> {
        let want = self.expected(addr);
        if seen == want {
            Ok(())
        } else {
            Err(CoherenceError::DataMismatch {
                core,
                addr,
                expected: want,
                got: seen,
            })
        }
    }
}

/// Shared per-cycle context threaded through controller calls.
pub struct ProtocolCtx<'a> {
    pub cycle: u64,
    pub next_txn: &'a mut u64,
    pub events: &'a mut Vec<ProtocolEvent>,
    pub oracle: &'a mut DataOracle,
    /// Core node ids, for address-interleaved home lookup.
    pub core_nodes: &'a [usize],
}

impl ProtocolCtx<'_> {
    pub fn alloc_txn(&mut self) -> u64 {
        let id = *self.next_txn;
        *self.next_txn += 1;
        id
    }

    pub fn send(&mut self, msg: CoherenceMessage) {
        self.events.push(ProtocolEvent::Send(msg));
    }

    pub fn home_of(&self, addr: u64) -> usize {
        home_of(addr, self.core_nodes)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CoherenceError {
    ProtocolViolation {
        node: usize,
        state: String,
        kind: MsgKind,
        addr: u64,
    },
    DataMismatch {
        core: usize,
        addr: u64,
        expected: u64,
        got: u64,
    },
}

impl fmt::Display for CoherenceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoherenceError::ProtocolViolation { node, state, kind, addr } => write!(
                f,
                "protocol violation at node {node}: {kind:?} in state {state} for addr {addr:#x}"
            ),
            CoherenceError::DataMismatch { core, addr, expected, got } => write!(
                f,
                "data value mismatch at core {core} addr {addr:#x}: expected v{expected}, got v{got}"
            ),
        }
    }
}

impl std::error::Error for CoherenceError {}

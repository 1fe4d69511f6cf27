//! The home controller: a directory slice plus the shared L2 slice for the
//! addresses interleaved onto this node.
//!
//! Requests that conflict with an in-flight transaction on the same line are
//! queued FIFO behind the busy entry. A line's first touch costs a fixed
//! 100-cycle local memory fetch with no network traffic; afterwards the
//! inclusive L2 slice always hits.

use super::msg::{CoherenceMessage, MsgKind};
use super::{CoherenceError, ProtocolCtx};
use std::collections::{BTreeMap, BTreeSet, VecDeque};

pub const MEM_FETCH_LATENCY: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DirState {
    I,
    S,
    /// One core holds the line in E or M; the directory cannot tell which.
    Owned,
}

#[derive(Debug, Clone, Default)]
pub struct DirectoryEntry {
    pub state: Option<DirState>,
    pub owner: Option<usize>,
    /// Bit per core index; may include stale sharers that evicted silently.
    pub sharers: u64,
    pub busy: bool,
    pub pending: VecDeque<CoherenceMessage>,
}

impl DirectoryEntry {
    pub fn state(&self) -> DirState {
        self.state.unwrap_or(DirState::I)
    }
}

#[derive(Debug)]
pub struct HomeSlice {
    pub node: usize,
    entries: BTreeMap<u64, DirectoryEntry>,
    /// Lines the L2 slice has fetched from memory at least once.
    l2_present: BTreeSet<u64>,
    /// L2/memory copy of each line's data version.
    l2_data: BTreeMap<u64, u64>,
    /// In-flight memory fetches; fixed latency keeps this FIFO-ordered.
    fetches: VecDeque<(u64, CoherenceMessage)>,
    core_count: usize,
}

impl HomeSlice {
    pub fn new(node: usize, core_count: usize) -> HomeSlice {
        HomeSlice {
            node,
            entries: BTreeMap::new(),
            l2_present: BTreeSet::new(),
            l2_data: BTreeMap::new(),
            fetches: VecDeque::new(),
            core_count,
        }
    }

    pub fn entry(&self, addr: u64) -> Option<&DirectoryEntry> {
        self.entries.get(&addr)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&u64, &DirectoryEntry)> {
        self.entries.iter()
    }

    pub fn is_quiet(&self) -> bool {
        self.fetches.is_empty()
            && self
                .entries
                .values()
                .all(|e| !e.busy && e.pending.is_empty())
    }

    fn l2_version(&self, addr: u64) -> u64 {
        self.l2_data.get(&addr).copied().unwrap_or(0)
    }

    pub fn receive(
        &mut self,
        msg: CoherenceMessage,
        ctx: &mut ProtocolCtx,
    ) -> Result<(), CoherenceError> {
        match msg.kind {
            MsgKind::GetS | MsgKind::GetM | MsgKind::PutM | MsgKind::PutE => {
                let entry = self.entries.entry(msg.addr).or_default();
                if entry.busy {
                    entry.pending.push_back(msg);
                    Ok(())
                } else {
                    self.process_request(msg, ctx)
                }
            }
            MsgKind::DataOwnerToDir => {
                let addr = msg.addr;
                self.l2_present.insert(addr);
                self.l2_data.insert(addr, msg.data.unwrap());
                let entry = self.entries.get_mut(&addr).unwrap();
                debug_assert!(entry.busy);
                // The previous owner degraded to S; the requester joins it.
                let old_owner = entry.owner.take().unwrap();
                entry.state = Some(DirState::S);
                entry.sharers |= 1 << old_owner;
                entry.sharers |= 1 << msg.requester;
                entry.busy = false;
                self.drain_pending(addr, ctx)
            }
            other => Err(CoherenceError::ProtocolViolation {
                node: self.node,
                state: "directory".into(),
                kind: other,
                addr: msg.addr,
            }),
        }
    }

    /// Memory fetches that completed at `cycle` produce their grant now.
    pub fn tick(&mut self, cycle: u64, ctx: &mut ProtocolCtx) -> Result<(), CoherenceError> {
        while let Some(&(ready, _)) = self.fetches.front() {
            if ready > cycle {
                break;
            }
            let (_, msg) = self.fetches.pop_front().unwrap();
            let addr = msg.addr;
            self.l2_present.insert(addr);
            self.grant_from_home(&msg, ctx);
            let entry = self.entries.get_mut(&addr).unwrap();
            entry.busy = false;
            self.drain_pending(addr, ctx)?;
        }
        Ok(())
    }

    fn drain_pending(&mut self, addr: u64, ctx: &mut ProtocolCtx) -> Result<(), CoherenceError> {
        loop {
            let entry = self.entries.get_mut(&addr).unwrap();
            if entry.busy {
                return Ok(());
            }
            let Some(next) = entry.pending.pop_front() else {
                return Ok(());
            };
            self.process_request(next, ctx)?;
        }
    }

    /// Grant to an uncached line from the L2 slice: reads get an exclusive
    /// copy, writes a zero-ack one; either way the requester becomes owner.
    fn grant_from_home(&mut self, msg: &CoherenceMessage, ctx: &mut ProtocolCtx) {
        let entry = self.entries.get_mut(&msg.addr).unwrap();
        entry.state = Some(DirState::Owned);
        entry.owner = Some(msg.requester);
        entry.sharers = 0;
        ctx.send(CoherenceMessage {
            kind: MsgKind::Data {
                acks: 0,
                exclusive: msg.kind == MsgKind::GetS,
            },
            addr: msg.addr,
            requester: msg.requester,
            txn: msg.txn,
            src: self.node,
            dst: msg.requester,
            data: Some(self.l2_version(msg.addr)),
        });
    }

    fn process_request(
        &mut self,
        msg: CoherenceMessage,
        ctx: &mut ProtocolCtx,
    ) -> Result<(), CoherenceError> {
        let addr = msg.addr;
        let node = self.node;
        let state = self
            .entries
            .get(&addr)
            .map(|e| e.state())
            .unwrap_or(DirState::I);
        match (state, msg.kind) {
            (DirState::I, MsgKind::GetS | MsgKind::GetM) => {
                if self.l2_present.contains(&addr) {
                    self.grant_from_home(&msg, ctx);
                } else {
                    let entry = self.entries.get_mut(&addr).unwrap();
                    entry.busy = true;
                    self.fetches.push_back((ctx.cycle + MEM_FETCH_LATENCY, msg));
                }
                Ok(())
            }
            (DirState::S, MsgKind::GetS) => {
                let version = self.l2_version(addr);
                let entry = self.entries.get_mut(&addr).unwrap();
                entry.sharers |= 1 << msg.requester;
                ctx.send(CoherenceMessage {
                    kind: MsgKind::Data {
                        acks: 0,
                        exclusive: false,
                    },
                    addr,
                    requester: msg.requester,
                    txn: msg.txn,
                    src: node,
                    dst: msg.requester,
                    data: Some(version),
                });
                Ok(())
            }
            (DirState::S, MsgKind::GetM) => {
                let version = self.l2_version(addr);
                let entry = self.entries.get_mut(&addr).unwrap();
                let requester_bit = 1u64 << msg.requester;
                let was_sharer = entry.sharers & requester_bit != 0;
                let others = entry.sharers & !requester_bit;
                let k = others.count_ones();
                for core in 0..self.core_count {
                    if others & (1 << core) != 0 {
                        ctx.send(CoherenceMessage {
                            kind: MsgKind::Inv,
                            addr,
                            requester: msg.requester,
                            txn: msg.txn,
                            src: node,
                            dst: core,
                            data: None,
                        });
                    }
                }
                let entry = self.entries.get_mut(&addr).unwrap();
                entry.state = Some(DirState::Owned);
                entry.owner = Some(msg.requester);
                entry.sharers = 0;
                let kind = if was_sharer {
                    MsgKind::AckCount(k)
                } else {
                    MsgKind::Data {
                        acks: k,
                        exclusive: false,
                    }
                };
                ctx.send(CoherenceMessage {
                    kind,
                    addr,
                    requester: msg.requester,
                    txn: msg.txn,
                    src: node,
                    dst: msg.requester,
                    data: if was_sharer { None } else { Some(version) },
                });
                Ok(())
            }
            (DirState::Owned, MsgKind::GetS) => {
                let entry = self.entries.get_mut(&addr).unwrap();
                let owner = entry.owner.unwrap();
                debug_assert_ne!(owner, msg.requester);
                entry.busy = true; // until DataOwnerToDir arrives
                ctx.send(CoherenceMessage {
                    kind: MsgKind::FwdGetS,
                    addr,
                    requester: msg.requester,
                    txn: msg.txn,
                    src: node,
                    dst: owner,
                    data: None,
                });
                Ok(())
            }
            (DirState::Owned, MsgKind::GetM) => {
                let entry = self.entries.get_mut(&addr).unwrap();
                let owner = entry.owner.unwrap();
                debug_assert_ne!(owner, msg.requester);
                entry.owner = Some(msg.requester);
                ctx.send(CoherenceMessage {
                    kind: MsgKind::FwdGetM,
                    addr,
                    requester: msg.requester,
                    txn: msg.txn,
                    src: node,
                    dst: owner,
                    data: None,
                });
                Ok(())
            }
            (state, MsgKind::PutM | MsgKind::PutE) => {
                let entry = self.entries.get_mut(&addr).unwrap();
                let from_owner = state == DirState::Owned && entry.owner == Some(msg.src);
                if from_owner {
                    entry.state = Some(DirState::I);
                    entry.owner = None;
                    entry.sharers = 0;
                    if msg.kind == MsgKind::PutM {
                        self.l2_data.insert(addr, msg.data.unwrap());
                    }
                    self.l2_present.insert(addr);
                } else if state == DirState::S {
                    // Stale writeback from a core that already lost the line.
                    entry.sharers &= !(1 << msg.src);
                    if entry.sharers == 0 {
                        entry.state = Some(DirState::I);
                    }
                }
                ctx.send(CoherenceMessage {
                    kind: MsgKind::WBAck,
                    addr,
                    requester: msg.requester,
                    txn: msg.txn,
                    src: node,
                    dst: msg.src,
                    data: None,
                });
                Ok(())
            }
            (s, k) => Err(CoherenceError::ProtocolViolation {
                node,
                state: format!("dir {s:?}"),
                kind: k,
                addr,
            }),
        }
    }
}

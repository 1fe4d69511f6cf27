//! Private L1 cache controller: 64 KB, 4-way, 64 B lines, LRU, with the MESI
//! stable states and the transient states that bridge in-flight transactions.
//!
//! Forward-class messages that catch a line mid-transaction (a response
//! overtaken on a different virtual network) are parked in a per-core stall
//! buffer and replayed after the next transition of that line. Responses are
//! never stalled, which keeps the forward-waits-on-response chain acyclic.

use super::msg::{CoherenceMessage, MsgKind};
use super::{CoherenceError, ProtocolCtx, ProtocolEvent, TxnType};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stable {
    M,
    E,
    S,
    I,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transient {
    None,
    IsD,
    ImAd,
    ImA,
    SmAd,
    SmA,
    MiA,
    EiA,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CpuOp {
    Read,
    Write,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CpuOutcome {
    Hit,
    MissIssued {
        txn: u64,
        ttype: TxnType,
    },
    /// Line (or its set) is busy with a transaction; retry next cycle.
    Blocked,
}

#[derive(Debug, Clone, Copy)]
pub struct L1Config {
    pub size_bytes: usize,
    pub line_bytes: usize,
    pub associativity: usize,
}

impl Default for L1Config {
    fn default() -> Self {
        L1Config {
            size_bytes: 64 * 1024,
            line_bytes: 64,
            associativity: 4,
        }
    }
}

impl L1Config {
    pub fn sets(&self) -> usize {
        self.size_bytes / (self.line_bytes * self.associativity)
    }
}

#[derive(Debug, Clone)]
pub struct CacheLineEntry {
    pub addr: u64,
    pub stable: Stable,
    pub transient: Transient,
    pub expected_acks: Option<u32>,
    pub received_acks: u32,
    /// Data version carried by the line (testing oracle field).
    pub data: u64,
    pub lru: u64,
    /// Live transaction on this line, if any.
    pub txn: Option<u64>,
}

#[derive(Debug, Clone, Copy)]
struct PendingOp {
    op: CpuOp,
    addr: u64,
}

#[derive(Debug)]
pub struct L1Cache {
    pub core: usize,
    config: L1Config,
    ways: Vec<Option<CacheLineEntry>>,
    lru_tick: u64,
    /// The one outstanding CPU miss (in-order core).
    pending: Option<PendingOp>,
    stalled: Vec<CoherenceMessage>,
}

impl L1Cache {
    pub fn new(core: usize, config: L1Config) -> L1Cache {
        L1Cache {
            core,
            config,
            ways: vec![None; config.sets() * config.associativity],
            lru_tick: 0,
            pending: None,
            stalled: Vec::new(),
        }
    }

    fn set_range(&self, addr: u64) -> std::ops::Range<usize> {
        let set = (addr / self.config.line_bytes as u64) as usize % self.config.sets();
        let base = set * self.config.associativity;
        base..base + self.config.associativity
    }

    fn find(&self, addr: u64) -> Option<usize> {
        self.set_range(addr)
            .find(|&i| matches!(&self.ways[i], Some(l) if l.addr == addr))
    }

    pub fn line(&self, addr: u64) -> Option<&CacheLineEntry> {
        self.find(addr).and_then(|i| self.ways[i].as_ref())
    }

    /// Stable state as seen by the SWMR check: transient lines do not count.
    pub fn stable_state(&self, addr: u64) -> Stable {
        match self.line(addr) {
            Some(l) if l.transient == Transient::None => l.stable,
            _ => Stable::I,
        }
    }

    pub fn has_outstanding_miss(&self) -> bool {
        self.pending.is_some()
    }

    /// All resident lines, for state digests and drain checks.
    pub fn lines(&self) -> impl Iterator<Item = &CacheLineEntry> {
        self.ways.iter().filter_map(|w| w.as_ref())
    }

    fn touch_lru(&mut self, idx: usize) {
        self.lru_tick += 1;
        if let Some(l) = self.ways[idx].as_mut() {
            l.lru = self.lru_tick;
        }
    }

    pub fn cpu_request(
        &mut self,
        op: CpuOp,
        addr: u64,
        ctx: &mut ProtocolCtx,
    ) -> Result<CpuOutcome, CoherenceError> {
        debug_assert_eq!(addr % self.config.line_bytes as u64, 0);
        if let Some(idx) = self.find(addr) {
            let line = self.ways[idx].as_ref().unwrap();
            if line.transient != Transient::None {
                return Ok(CpuOutcome::Blocked);
            }
            match (op, line.stable) {
                (CpuOp::Read, Stable::M | Stable::E | Stable::S) => {
                    let line = self.ways[idx].as_ref().unwrap();
                    ctx.oracle.check_read(self.core, addr, line.data)?;
                    self.touch_lru(idx);
                    Ok(CpuOutcome::Hit)
                }
                (CpuOp::Write, Stable::M | Stable::E) => {
                    // A write to E upgrades silently.
                    let version = ctx.oracle.write(addr);
                    let core = self.core;
                    let line = self.ways[idx].as_mut().unwrap();
                    if line.stable == Stable::E {
                        line.stable = Stable::M;
                        ctx.events.push(ProtocolEvent::Touched { core, addr });
                    }
                    line.data = version;
                    self.touch_lru(idx);
                    Ok(CpuOutcome::Hit)
                }
                (CpuOp::Write, Stable::S) => {
                    // Upgrade: invalidate the other sharers before writing.
                    let txn = ctx.alloc_txn();
                    let line = self.ways[idx].as_mut().unwrap();
                    line.transient = Transient::SmAd;
                    line.txn = Some(txn);
                    line.expected_acks = None;
                    line.received_acks = 0;
                    self.touch_lru(idx);
                    self.pending = Some(PendingOp { op, addr });
                    ctx.events.push(ProtocolEvent::TxnStart {
                        txn,
                        ttype: TxnType::WriteHitS,
                        core: self.core,
                        addr,
                    });
                    self.issue_request(MsgKind::GetM, addr, txn, ctx);
                    Ok(CpuOutcome::MissIssued {
                        txn,
                        ttype: TxnType::WriteHitS,
                    })
                }
                (_, Stable::I) => unreachable!("I lines are removed from the array"),
            }
        } else {
            let Some(idx) = self.alloc_way(addr, ctx)? else {
                return Ok(CpuOutcome::Blocked);
            };
            let txn = ctx.alloc_txn();
            let (ttype, kind, transient) = match op {
                CpuOp::Read => (TxnType::ReadMiss, MsgKind::GetS, Transient::IsD),
                CpuOp::Write => (TxnType::WriteMiss, MsgKind::GetM, Transient::ImAd),
            };
            self.lru_tick += 1;
            self.ways[idx] = Some(CacheLineEntry {
                addr,
                stable: Stable::I,
                transient,
                expected_acks: None,
                received_acks: 0,
                data: 0,
                lru: self.lru_tick,
                txn: Some(txn),
            });
            self.pending = Some(PendingOp { op, addr });
            ctx.events.push(ProtocolEvent::TxnStart {
                txn,
                ttype,
                core: self.core,
                addr,
            });
            self.issue_request(kind, addr, txn, ctx);
            Ok(CpuOutcome::MissIssued { txn, ttype })
        }
    }

    fn issue_request(&self, kind: MsgKind, addr: u64, txn: u64, ctx: &mut ProtocolCtx) {
        let home = ctx.home_of(addr);
        ctx.send(CoherenceMessage {
            kind,
            addr,
            requester: self.core,
            txn,
            src: self.core,
            dst: home,
            data: if kind == MsgKind::PutM {
                Some(self.line(addr).map(|l| l.data).unwrap_or(0))
            } else {
                None
            },
        });
    }

    /// Find or free a way in the address's set. `None` means blocked: either
    /// a victim writeback was started this cycle or the whole set is busy.
    fn alloc_way(
        &mut self,
        addr: u64,
        ctx: &mut ProtocolCtx,
    ) -> Result<Option<usize>, CoherenceError> {
        let range = self.set_range(addr);
        if let Some(free) = range.clone().find(|&i| self.ways[i].is_none()) {
            return Ok(Some(free));
        }
        // A victim writeback is already making room in this set: wait for it
        // instead of evicting a second line.
        if range.clone().any(|i| {
            matches!(&self.ways[i], Some(l) if matches!(l.transient, Transient::MiA | Transient::EiA))
        }) {
            return Ok(None);
        }
        // Oldest stable line is the victim.
        let victim = range
            .filter(|&i| matches!(&self.ways[i], Some(l) if l.transient == Transient::None))
            .min_by_key(|&i| self.ways[i].as_ref().unwrap().lru);
        let Some(vi) = victim else {
            return Ok(None); // every way mid-transaction
        };
        let vaddr = self.ways[vi].as_ref().unwrap().addr;
        self.evict(vaddr, ctx)?;
        // Silent S/I evictions free the way immediately; E/M wait for WBAck.
        Ok(self.ways[vi].is_none().then_some(vi))
    }

    /// Evict a stable line: S drops silently (the directory tolerates stale
    /// sharers), E and M write back and hold the way until WBAck.
    pub fn evict(&mut self, addr: u64, ctx: &mut ProtocolCtx) -> Result<(), CoherenceError> {
        let Some(idx) = self.find(addr) else {
            return Ok(()); // absent: no-op
        };
        let line = self.ways[idx].as_ref().unwrap();
        assert_eq!(line.transient, Transient::None, "evict needs a stable line");
        match line.stable {
            Stable::S => {
                self.ways[idx] = None;
                ctx.events.push(ProtocolEvent::Touched {
                    core: self.core,
                    addr,
                });
                Ok(())
            }
            Stable::E | Stable::M => {
                let txn = ctx.alloc_txn();
                let kind = if line.stable == Stable::M {
                    MsgKind::PutM
                } else {
                    MsgKind::PutE
                };
                let line = self.ways[idx].as_mut().unwrap();
                line.transient = if kind == MsgKind::PutM {
                    Transient::MiA
                } else {
                    Transient::EiA
                };
                line.txn = Some(txn);
                ctx.events.push(ProtocolEvent::TxnStart {
                    txn,
                    ttype: TxnType::Writeback,
                    core: self.core,
                    addr,
                });
                ctx.events.push(ProtocolEvent::Touched {
                    core: self.core,
                    addr,
                });
                self.issue_request(kind, addr, txn, ctx);
                Ok(())
            }
            Stable::I => unreachable!(),
        }
    }

    pub fn receive(
        &mut self,
        msg: CoherenceMessage,
        ctx: &mut ProtocolCtx,
    ) -> Result<(), CoherenceError> {
        let addr = msg.addr;
        self.receive_inner(msg, ctx)?;
        // A transition may unblock parked forward-class messages for this line.
        self.replay_stalled(addr, ctx)
    }

    fn replay_stalled(&mut self, addr: u64, ctx: &mut ProtocolCtx) -> Result<(), CoherenceError> {
        let mut i = 0;
        while i < self.stalled.len() {
            if self.stalled[i].addr == addr {
                let again = self.stalled.remove(i);
                let before = self.state_key(addr);
                self.receive_inner(again, ctx)?;
                if self.state_key(addr) == before {
                    // Still stalled (it re-parked itself at the back); stop to
                    // preserve arrival order.
                    break;
                }
                i = 0; // transition happened: rescan from the front
            } else {
                i += 1;
            }
        }
        Ok(())
    }

    fn state_key(&self, addr: u64) -> (Stable, Transient, u32) {
        match self.line(addr) {
            Some(l) => (l.stable, l.transient, l.received_acks),
            None => (Stable::I, Transient::None, 0),
        }
    }

    fn violation(&self, msg: &CoherenceMessage, state: String) -> CoherenceError {
        CoherenceError::ProtocolViolation {
            node: self.core,
            state,
            kind: msg.kind,
            addr: msg.addr,
        }
    }

    fn receive_inner(
        &mut self,
        msg: CoherenceMessage,
        ctx: &mut ProtocolCtx,
    ) -> Result<(), CoherenceError> {
        let addr = msg.addr;
        let idx = self.find(addr);
        let (stable, transient) = match idx {
            Some(i) => {
                let l = self.ways[i].as_ref().unwrap();
                (l.stable, l.transient)
            }
            None => (Stable::I, Transient::None),
        };
        use MsgKind::*;
        use Transient as T;
        match (transient, msg.kind) {
            // --- read miss completes ---
            (T::IsD, Data { exclusive, .. }) => {
                let line = self.ways[idx.unwrap()].as_mut().unwrap();
                line.data = msg.data.expect("data message carries a version");
                line.stable = if exclusive { Stable::E } else { Stable::S };
                self.complete(addr, ctx)
            }
            (T::IsD, DataOwnerToReq) => {
                let line = self.ways[idx.unwrap()].as_mut().unwrap();
                line.data = msg.data.unwrap();
                line.stable = Stable::S;
                self.complete(addr, ctx)
            }
            // Forward-class traffic racing ahead of our fill: park it.
            (T::IsD, Inv | FwdGetS | FwdGetM) => {
                self.stalled.push(msg);
                Ok(())
            }

            // --- write miss / upgrade collecting data and acks ---
            (T::ImAd, Data { acks, .. }) => {
                let line = self.ways[idx.unwrap()].as_mut().unwrap();
                line.data = msg.data.unwrap();
                line.expected_acks = Some(acks);
                if line.received_acks == acks {
                    line.stable = Stable::M;
                    self.complete(addr, ctx)
                } else {
                    line.transient = T::ImA;
                    Ok(())
                }
            }
            (T::ImAd, DataOwnerToReq) => {
                // Ownership handed over directly; no invalidations pending.
                let line = self.ways[idx.unwrap()].as_mut().unwrap();
                line.data = msg.data.unwrap();
                line.stable = Stable::M;
                self.complete(addr, ctx)
            }
            (T::SmAd, AckCount(n)) => {
                let line = self.ways[idx.unwrap()].as_mut().unwrap();
                line.expected_acks = Some(n);
                if line.received_acks == n {
                    line.stable = Stable::M;
                    self.complete(addr, ctx)
                } else {
                    line.transient = T::SmA;
                    Ok(())
                }
            }
            (T::SmAd, Data { acks, .. }) => {
                // Our upgrade lost the race and was serialized as a full miss.
                let line = self.ways[idx.unwrap()].as_mut().unwrap();
                line.data = msg.data.unwrap();
                line.expected_acks = Some(acks);
                if line.received_acks == acks {
                    line.stable = Stable::M;
                    self.complete(addr, ctx)
                } else {
                    line.transient = T::ImA;
                    Ok(())
                }
            }
            (T::SmAd, DataOwnerToReq) => {
                let line = self.ways[idx.unwrap()].as_mut().unwrap();
                line.data = msg.data.unwrap();
                line.stable = Stable::M;
                self.complete(addr, ctx)
            }
            (T::ImAd | T::ImA | T::SmAd | T::SmA, InvAck) => {
                let line = self.ways[idx.unwrap()].as_mut().unwrap();
                line.received_acks += 1;
                if line.expected_acks == Some(line.received_acks)
                    && matches!(line.transient, T::ImA | T::SmA)
                {
                    line.stable = Stable::M;
                    self.complete(addr, ctx)
                } else {
                    Ok(())
                }
            }
            // An invalidation for the S copy we are upgrading: someone else's
            // write was ordered first. Ack it and fall back to a plain miss.
            (T::SmAd, Inv) => {
                let line = self.ways[idx.unwrap()].as_mut().unwrap();
                line.stable = Stable::I;
                line.transient = T::ImAd;
                self.send_inv_ack(&msg, ctx);
                ctx.events.push(ProtocolEvent::Touched {
                    core: self.core,
                    addr,
                });
                Ok(())
            }
            // Stale-sharer invalidation while we are missing on the line.
            (T::ImAd | T::ImA, Inv) => {
                self.send_inv_ack(&msg, ctx);
                Ok(())
            }
            // Once we will own the line, forwards must wait for completion.
            (T::ImAd | T::ImA | T::SmAd | T::SmA, FwdGetS | FwdGetM) => {
                self.stalled.push(msg);
                Ok(())
            }

            // --- owner duties, including while a writeback is in flight ---
            (T::None, FwdGetS) if matches!(stable, Stable::M | Stable::E) => {
                self.owner_data(&msg, true, ctx);
                let line = self.ways[idx.unwrap()].as_mut().unwrap();
                line.stable = Stable::S;
                ctx.events.push(ProtocolEvent::Touched {
                    core: self.core,
                    addr,
                });
                Ok(())
            }
            (T::None, FwdGetM) if matches!(stable, Stable::M | Stable::E) => {
                self.owner_data(&msg, false, ctx);
                self.ways[idx.unwrap()] = None;
                ctx.events.push(ProtocolEvent::Touched {
                    core: self.core,
                    addr,
                });
                Ok(())
            }
            (T::MiA | T::EiA, FwdGetS) => {
                self.owner_data(&msg, true, ctx);
                Ok(())
            }
            (T::MiA | T::EiA, FwdGetM) => {
                self.owner_data(&msg, false, ctx);
                Ok(())
            }
            (T::MiA | T::EiA, WBAck) => {
                let txn = self.ways[idx.unwrap()].as_ref().unwrap().txn.unwrap();
                self.ways[idx.unwrap()] = None;
                ctx.events.push(ProtocolEvent::TxnEnd { txn });
                ctx.events.push(ProtocolEvent::Touched {
                    core: self.core,
                    addr,
                });
                Ok(())
            }

            // --- plain sharer / stale-sharer invalidations ---
            (T::None, Inv) if stable == Stable::S => {
                self.ways[idx.unwrap()] = None;
                self.send_inv_ack(&msg, ctx);
                ctx.events.push(ProtocolEvent::Touched {
                    core: self.core,
                    addr,
                });
                Ok(())
            }
            (T::None, Inv) if stable == Stable::I => {
                self.send_inv_ack(&msg, ctx);
                Ok(())
            }

            (t, k) => {
                let _ = k;
                Err(self.violation(&msg, format!("{stable:?}/{t:?}")))
            }
        }
    }

    fn send_inv_ack(&self, msg: &CoherenceMessage, ctx: &mut ProtocolCtx) {
        ctx.send(CoherenceMessage {
            kind: MsgKind::InvAck,
            addr: msg.addr,
            requester: msg.requester,
            txn: msg.txn,
            src: self.core,
            dst: msg.requester,
            data: None,
        });
    }

    /// Serve a forward as the (possibly departing) owner: data to the
    /// requester, and on a read also a copy back to the directory.
    fn owner_data(&self, msg: &CoherenceMessage, to_dir_too: bool, ctx: &mut ProtocolCtx) {
        let data = self.line(msg.addr).map(|l| l.data);
        ctx.send(CoherenceMessage {
            kind: MsgKind::DataOwnerToReq,
            addr: msg.addr,
            requester: msg.requester,
            txn: msg.txn,
            src: self.core,
            dst: msg.requester,
            data,
        });
        if to_dir_too {
            ctx.send(CoherenceMessage {
                kind: MsgKind::DataOwnerToDir,
                addr: msg.addr,
                requester: msg.requester,
                txn: msg.txn,
                src: self.core,
                dst: ctx.home_of(msg.addr),
                data,
            });
        }
    }

    /// The line reached its target stable state: perform the waiting CPU
    /// operation and seal the transaction.
    fn complete(&mut self, addr: u64, ctx: &mut ProtocolCtx) -> Result<(), CoherenceError> {
        let idx = self.find(addr).unwrap();
        {
            let line = self.ways[idx].as_mut().unwrap();
            line.transient = Transient::None;
            line.expected_acks = None;
            line.received_acks = 0;
        }
        ctx.events.push(ProtocolEvent::Touched {
            core: self.core,
            addr,
        });
        let txn = self.ways[idx].as_mut().unwrap().txn.take().unwrap();
        if let Some(p) = self.pending {
            if p.addr == addr {
                self.pending = None;
                match p.op {
                    CpuOp::Read => {
                        let seen = self.ways[idx].as_ref().unwrap().data;
                        ctx.oracle.check_read(self.core, addr, seen)?;
                    }
                    CpuOp::Write => {
                        let version = ctx.oracle.write(addr);
                        self.ways[idx].as_mut().unwrap().data = version;
                    }
                }
            }
        }
        ctx.events.push(ProtocolEvent::TxnEnd { txn });
        Ok(())
    }
}

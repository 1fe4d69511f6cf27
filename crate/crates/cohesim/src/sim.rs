//! The system simulator: in-order cores replaying an access trace, L1 and
//! home controllers, the network, and the traffic analyzer, advanced by one
//! deterministic cycle loop.
//!
//! Per cycle: memory-fetch timers fire, locally-homed messages and network
//! arrivals are delivered to their controllers (which may emit new messages),
//! each unblocked core issues at most one trace access, and the network runs
//! its switch/route/inject phases. Everything a controller emits this cycle
//! enters the network this cycle, so zero-load timing composes exactly.

use crate::ccta::{Ccta, CctaError, CoherenceMetrics, MsgDirection};
use crate::coherence::msg::{CoherenceMessage, MsgKind};
use crate::coherence::{
    CoherenceError, CpuOutcome, DataOracle, HomeSlice, L1Cache, L1Config, ProtocolCtx,
    ProtocolEvent, Stable,
};
use crate::noc::{Network, NetworkConfig, NocError, NocMetrics, RoutingTables};
use crate::topology::NetworkGraph;
use crate::workload::AccessTrace;
use std::collections::VecDeque;
use std::fmt;
use std::io::Write as _;

#[derive(Debug)]
pub enum SimError {
    Noc(NocError),
    Coherence(CoherenceError),
    Ccta(CctaError),
    /// A quiesce or drain did not settle within its cycle budget.
    StuckDrain {
        cycle: u64,
    },
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::Noc(e) => write!(f, "{e}"),
            SimError::Coherence(e) => write!(f, "{e}"),
            SimError::Ccta(e) => write!(f, "{e}"),
            SimError::StuckDrain { cycle } => write!(f, "drain did not settle by cycle {cycle}"),
        }
    }
}

impl std::error::Error for SimError {}

impl From<NocError> for SimError {
    fn from(e: NocError) -> Self {
        SimError::Noc(e)
    }
}
impl From<CoherenceError> for SimError {
    fn from(e: CoherenceError) -> Self {
        SimError::Coherence(e)
    }
}
impl From<CctaError> for SimError {
    fn from(e: CctaError) -> Self {
        SimError::Ccta(e)
    }
}

/// Combined NoC + coherence view of one measurement window.
#[derive(Debug, Clone)]
pub struct MetricsSnapshot {
    pub noc: NocMetrics,
    pub cc: CoherenceMetrics,
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub l1: L1Config,
    pub ccta: bool,
    /// Check the single-writer/multi-reader and data-value invariants as the
    /// simulation runs (cheap; scales with touched lines per cycle).
    pub swmr_check: bool,
    pub net: NetworkConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            l1: L1Config::default(),
            ccta: true,
            swmr_check: cfg!(debug_assertions),
            net: NetworkConfig::default(),
        }
    }
}

pub struct SystemSim {
    pub net: Network,
    pub l1s: Vec<L1Cache>,
    pub homes: Vec<HomeSlice>,
    pub oracle: DataOracle,
    pub ccta: Option<Ccta>,
    config: SimConfig,
    trace: AccessTrace,
    cursors: Vec<usize>,
    next_txn: u64,
    live_txns: u64,
    /// Messages homed on their sender bypass the network with a one-cycle
    /// local port latency.
    local_queue: VecDeque<(u64, CoherenceMessage)>,
    pub total_messages_sent: u64,
    pub local_messages: u64,
    /// Per-delivery protocol trace: "cycle,node,unit,before,kind,after,txn".
    pub protocol_trace: Option<Box<dyn std::io::Write>>,
    events_buf: Vec<ProtocolEvent>,
    touched: Vec<(usize, u64)>,
}

impl SystemSim {
    pub fn new(
        graph: NetworkGraph,
        tables: RoutingTables,
        trace: AccessTrace,
        config: SimConfig,
    ) -> SystemSim {
        let cores = graph.cores();
        assert_eq!(trace.cores, cores, "trace and topology core counts differ");
        // Core nodes are 0..cores in every candidate topology.
        assert!(graph.core_nodes.iter().enumerate().all(|(i, &n)| i == n));
        let l1s = (0..cores).map(|c| L1Cache::new(c, config.l1)).collect();
        let homes = (0..cores).map(|c| HomeSlice::new(c, cores)).collect();
        let net = Network::new(graph, tables, config.net.clone());
        let ccta = config.ccta.then(Ccta::new);
        SystemSim {
            net,
            l1s,
            homes,
            oracle: DataOracle::default(),
            ccta,
            config,
            cursors: vec![0; cores],
            trace,
            next_txn: 0,
            live_txns: 0,
            local_queue: VecDeque::new(),
            total_messages_sent: 0,
            local_messages: 0,
            protocol_trace: None,
            events_buf: Vec::new(),
            touched: Vec::new(),
        }
    }

    pub fn now(&self) -> u64 {
        self.net.cycle()
    }

    pub fn cores(&self) -> usize {
        self.l1s.len()
    }

    pub fn trace_done(&self) -> bool {
        self.cursors
            .iter()
            .zip(&self.trace.per_core)
            .all(|(&c, list)| c >= list.len())
    }

    /// Nothing in flight anywhere: network, directories, transactions.
    pub fn quiet(&self) -> bool {
        self.net.is_empty()
            && self.local_queue.is_empty()
            && self.live_txns == 0
            && self.homes.iter().all(HomeSlice::is_quiet)
    }

    /// Swap in a new network (new topology and/or weights) after a quiesce;
    /// caches, directories and trace position persist.
    pub fn rebuild_network(&mut self, graph: NetworkGraph, tables: RoutingTables) {
        assert!(self.quiet(), "rebuild requires a quiesced system");
        assert_eq!(graph.cores(), self.cores());
        let now = self.now();
        let mut net = Network::new(graph, tables, self.config.net.clone());
        net.set_start_cycle(now);
        self.net = net;
    }

    fn dispatch_events(&mut self) -> Result<(), SimError> {
        let cycle = self.now();
        let mut events = std::mem::take(&mut self.events_buf);
        for ev in events.drain(..) {
            match ev {
                ProtocolEvent::TxnStart {
                    txn,
                    ttype,
                    core,
                    addr,
                } => {
                    self.live_txns += 1;
                    if let Some(ccta) = self.ccta.as_mut() {
                        ccta.on_transaction_start(txn, ttype, core, addr, cycle)?;
                    }
                }
                ProtocolEvent::TxnEnd { txn } => {
                    self.live_txns -= 1;
                    if let Some(ccta) = self.ccta.as_mut() {
                        ccta.on_transaction_end(txn, cycle)?;
                    }
                }
                ProtocolEvent::Send(msg) => {
                    self.total_messages_sent += 1;
                    if let Some(ccta) = self.ccta.as_mut() {
                        ccta.on_coherence_msg(msg.txn, msg.kind, MsgDirection::Sent, cycle)?;
                    }
                    if msg.src == msg.dst {
                        self.local_messages += 1;
                        self.local_queue.push_back((cycle + 1, msg));
                    } else {
                        let (src, dst) = (msg.src, msg.dst);
                        let (vnet, flits) = (msg.kind.vnet(), msg.kind.flit_count());
                        self.net.inject(src, dst, vnet, flits, Some(msg));
                    }
                }
                ProtocolEvent::Touched { core, addr } => {
                    self.touched.push((core, addr));
                }
            }
        }
        self.events_buf = events;
        Ok(())
    }

    fn unit_state(&self, node: usize, to_dir: bool, addr: u64) -> String {
        if to_dir {
            match self.homes[node].entry(addr) {
                Some(e) if e.busy => "Busy".into(),
                Some(e) => format!("{:?}", e.state()),
                None => "I".into(),
            }
        } else {
            match self.l1s[node].line(addr) {
                Some(l) if l.transient != crate::coherence::Transient::None => {
                    format!("{:?}", l.transient)
                }
                Some(l) => format!("{:?}", l.stable),
                None => "I".into(),
            }
        }
    }

    fn deliver_message(&mut self, msg: CoherenceMessage) -> Result<(), SimError> {
        let cycle = self.now();
        let to_dir = matches!(
            msg.kind,
            MsgKind::GetS | MsgKind::GetM | MsgKind::PutM | MsgKind::PutE | MsgKind::DataOwnerToDir
        );
        if !to_dir {
            if let Some(ccta) = self.ccta.as_mut() {
                ccta.on_coherence_msg(
                    msg.txn,
                    msg.kind,
                    MsgDirection::ReceivedAtL1Inport { core: msg.dst },
                    cycle,
                )?;
            }
        }
        let traced = self.protocol_trace.is_some().then(|| {
            (
                msg.dst,
                msg.addr,
                msg.kind,
                msg.txn,
                self.unit_state(msg.dst, to_dir, msg.addr),
            )
        });
        let mut ctx = ProtocolCtx {
            cycle,
            next_txn: &mut self.next_txn,
            events: &mut self.events_buf,
            oracle: &mut self.oracle,
            core_nodes: &self.net.graph.core_nodes,
        };
        if to_dir {
            self.homes[msg.dst].receive(msg, &mut ctx)?;
        } else {
            self.l1s[msg.dst].receive(msg, &mut ctx)?;
        }
        if let Some((node, addr, kind, txn, before)) = traced {
            let after = self.unit_state(node, to_dir, addr);
            let unit = if to_dir { "dir" } else { "l1" };
            let w = self.protocol_trace.as_mut().unwrap();
            let _ = writeln!(
                w,
                "{cycle},{node},{unit},{before},{},{after},{txn}",
                MsgKind::name_of(kind.index())
            );
        }
        self.dispatch_events()
    }

    /// Advance one cycle; `issue` gates the trace-driven cores.
    pub fn cycle(&mut self, issue: bool) -> Result<(), SimError> {
        self.net.begin_cycle();
        let cycle = self.now();

        // Memory fetch timers at every home.
        for h in 0..self.homes.len() {
            let mut ctx = ProtocolCtx {
                cycle,
                next_txn: &mut self.next_txn,
                events: &mut self.events_buf,
                oracle: &mut self.oracle,
                core_nodes: &self.net.graph.core_nodes,
            };
            self.homes[h].tick(cycle, &mut ctx)?;
        }
        self.dispatch_events()?;

        // Locally-homed deliveries due this cycle, then network arrivals.
        while matches!(self.local_queue.front(), Some(&(due, _)) if due <= cycle) {
            let (_, msg) = self.local_queue.pop_front().unwrap();
            self.deliver_message(msg)?;
        }
        let ejected = self.net.deliver();
        for id in ejected.ejected {
            let msg = self.net.packet(id).msg.clone().expect("coherence packet");
            self.deliver_message(msg)?;
        }

        if issue {
            self.issue_trace_accesses()?;
        }

        self.net.finish_cycle()?;
        if self.config.swmr_check {
            self.check_swmr()?;
        } else {
            self.touched.clear();
        }
        Ok(())
    }

    fn issue_trace_accesses(&mut self) -> Result<(), SimError> {
        let cycle = self.now();
        for core in 0..self.cores() {
            let cursor = self.cursors[core];
            let Some(access) = self.trace.per_core[core].get(cursor) else {
                continue;
            };
            if access.cycle > cycle || self.l1s[core].has_outstanding_miss() {
                continue;
            }
            let (op, addr) = (access.op, access.addr);
            let mut ctx = ProtocolCtx {
                cycle,
                next_txn: &mut self.next_txn,
                events: &mut self.events_buf,
                oracle: &mut self.oracle,
                core_nodes: &self.net.graph.core_nodes,
            };
            match self.l1s[core].cpu_request(op, addr, &mut ctx)? {
                CpuOutcome::Hit | CpuOutcome::MissIssued { .. } => {
                    self.cursors[core] += 1;
                }
                CpuOutcome::Blocked => {}
            }
            self.dispatch_events()?;
        }
        Ok(())
    }

    fn check_swmr(&mut self) -> Result<(), SimError> {
        let touched = std::mem::take(&mut self.touched);
        for &(_, addr) in &touched {
            let mut exclusive = 0usize;
            let mut shared = 0usize;
            for l1 in &self.l1s {
                match l1.stable_state(addr) {
                    Stable::M | Stable::E => exclusive += 1,
                    Stable::S => shared += 1,
                    Stable::I => {}
                }
            }
            assert!(
                exclusive <= 1 && (exclusive == 0 || shared == 0),
                "SWMR violated at {addr:#x}: {exclusive} exclusive, {shared} shared holders"
            );
        }
        self.touched = touched;
        self.touched.clear();
        Ok(())
    }

    /// Run with injection until the trace is fully retired and the system is
    /// quiet, bounded by `budget` cycles.
    pub fn run_to_completion(&mut self, budget: u64) -> Result<(), SimError> {
        while !(self.trace_done() && self.quiet()) {
            if self.now() >= budget {
                return Err(SimError::StuckDrain { cycle: self.now() });
            }
            self.cycle(true)?;
        }
        Ok(())
    }

    /// Run exactly `n` more cycles with injection enabled.
    pub fn run_cycles(&mut self, n: u64) -> Result<(), SimError> {
        for _ in 0..n {
            self.cycle(true)?;
        }
        Ok(())
    }

    /// Stop issuing and let everything in flight finish.
    pub fn quiesce(&mut self, budget: u64) -> Result<(), SimError> {
        let start = self.now();
        while !self.quiet() {
            if self.now() - start >= budget {
                return Err(SimError::StuckDrain { cycle: self.now() });
            }
            self.cycle(false)?;
        }
        Ok(())
    }

    pub fn snapshot(&self, window: (u64, u64)) -> MetricsSnapshot {
        let noc = self.net.collect_metrics(window);
        let cc = self
            .ccta
            .as_ref()
            .map(|c| c.report(window))
            .unwrap_or_else(|| CoherenceMetrics {
                window,
                ..Default::default()
            });
        MetricsSnapshot { noc, cc }
    }

    /// Directory bookkeeping must cover reality after a drain: sharer sets
    /// are a superset of the actual S holders and owner matches the actual
    /// M/E holder.
    pub fn check_directory_agreement(&self) -> Result<(), String> {
        for home in &self.homes {
            for (&addr, entry) in home.entries() {
                let mut holders_s = 0u64;
                let mut holder_me = None;
                for (i, l1) in self.l1s.iter().enumerate() {
                    match l1.stable_state(addr) {
                        Stable::S => holders_s |= 1 << i,
                        Stable::M | Stable::E => holder_me = Some(i),
                        Stable::I => {}
                    }
                }
                match entry.state() {
                    crate::coherence::DirState::Owned => {
                        if entry.owner != holder_me {
                            return Err(format!(
                                "dir {addr:#x}: owner {:?} but holder {holder_me:?}",
                                entry.owner
                            ));
                        }
                    }
                    _ => {
                        if holder_me.is_some() {
                            return Err(format!("dir {addr:#x}: untracked exclusive holder"));
                        }
                        if entry.sharers & holders_s != holders_s {
                            return Err(format!("dir {addr:#x}: sharer set misses a holder"));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Canonical text form of all architectural state, for perturbation and
    /// determinism comparisons.
    pub fn state_digest(&self) -> String {
        let mut s = String::new();
        for (i, l1) in self.l1s.iter().enumerate() {
            let mut lines: Vec<_> = l1
                .lines()
                .map(|l| (l.addr, l.stable, l.transient, l.data))
                .collect();
            lines.sort_by_key(|x| x.0);
            for (addr, st, tr, data) in lines {
                s.push_str(&format!("l1 {i} {addr:x} {st:?} {tr:?} v{data}\n"));
            }
        }
        for home in &self.homes {
            for (addr, e) in home.entries() {
                s.push_str(&format!(
                    "dir {} {addr:x} {:?} own={:?} sh={:x}\n",
                    home.node,
                    e.state(),
                    e.owner,
                    e.sharers
                ));
            }
        }
        s
    }
}

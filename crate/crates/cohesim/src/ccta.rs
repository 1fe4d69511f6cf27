//! Cache coherence traffic analyzer: transaction-tagged instrumentation that
//! measures coherence timing and message counts without touching protocol
//! behavior.
//!
//! Attribution is exact: every protocol message carries its transaction id
//! and is counted once, at emission. In-port monitors at the requesting core's
//! private cache record the first and last message arrival per transaction.

use crate::coherence::msg::MsgKind;
use crate::coherence::TxnType;
use std::collections::BTreeSet;
use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub struct TransactionRecord {
    pub txn: u64,
    pub ttype: TxnType,
    pub core: usize,
    pub addr: u64,
    pub start_cycle: u64,
    pub end_cycle: Option<u64>,
    pub message_count: u64,
    pub first_inport_cycle: Option<u64>,
    pub last_inport_cycle: Option<u64>,
    pub kind_counts: [u32; MsgKind::COUNT],
}

impl TransactionRecord {
    pub fn sealed(&self) -> bool {
        self.end_cycle.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MsgDirection {
    Sent,
    ReceivedAtL1Inport { core: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub enum CctaError {
    DuplicateTransaction { core: usize, addr: u64 },
    UnknownTransaction(u64),
}

impl fmt::Display for CctaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CctaError::DuplicateTransaction { core, addr } => {
                write!(f, "transaction already live on core {core} addr {addr:#x}")
            }
            CctaError::UnknownTransaction(t) => write!(f, "unknown transaction {t}"),
        }
    }
}

impl std::error::Error for CctaError {}

/// Aggregates over transactions sealed inside a cycle window. Empty
/// categories report 0; the per-type counts double as presence flags.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CoherenceMetrics {
    /// H_t: mean issue-to-completion time of write hits on Shared lines.
    pub cpu_delay_avg: f64,
    pub write_miss_time_avg: f64,
    pub mem_fetch_time_avg: f64,
    /// C_t: messages attributed to transactions sealed in the window.
    pub total_messages: u64,
    pub histogram: [u64; MsgKind::COUNT],
    pub write_hit_s_count: u64,
    pub read_miss_count: u64,
    pub write_miss_count: u64,
    pub writeback_count: u64,
    pub window: (u64, u64),
}

#[derive(Debug, Default)]
pub struct Ccta {
    records: Vec<TransactionRecord>,
    live: BTreeSet<(usize, u64)>,
}

impl Ccta {
    pub fn new() -> Ccta {
        Ccta::default()
    }

    pub fn records(&self) -> &[TransactionRecord] {
        &self.records
    }

    pub fn record(&self, txn: u64) -> Option<&TransactionRecord> {
        self.records.get(txn as usize)
    }

    /// Transaction ids are allocated densely by the simulator, so the id must
    /// equal the next record index.
    pub fn on_transaction_start(
        &mut self,
        txn: u64,
        ttype: TxnType,
        core: usize,
        addr: u64,
        cycle: u64,
    ) -> Result<u64, CctaError> {
        assert_eq!(
            txn as usize,
            self.records.len(),
            "transaction ids are dense"
        );
        if !self.live.insert((core, addr)) {
            return Err(CctaError::DuplicateTransaction { core, addr });
        }
        self.records.push(TransactionRecord {
            txn,
            ttype,
            core,
            addr,
            start_cycle: cycle,
            end_cycle: None,
            message_count: 0,
            first_inport_cycle: None,
            last_inport_cycle: None,
            kind_counts: [0; MsgKind::COUNT],
        });
        Ok(txn)
    }

    pub fn on_coherence_msg(
        &mut self,
        txn: u64,
        kind: MsgKind,
        direction: MsgDirection,
        cycle: u64,
    ) -> Result<(), CctaError> {
        let rec = self
            .records
            .get_mut(txn as usize)
            .ok_or(CctaError::UnknownTransaction(txn))?;
        match direction {
            MsgDirection::Sent => {
                rec.message_count += 1;
                rec.kind_counts[kind.index()] += 1;
            }
            MsgDirection::ReceivedAtL1Inport { core } => {
                if core == rec.core {
                    rec.first_inport_cycle.get_or_insert(cycle);
                    rec.last_inport_cycle = Some(cycle);
                }
            }
        }
        Ok(())
    }

    pub fn on_transaction_end(&mut self, txn: u64, cycle: u64) -> Result<(), CctaError> {
        let rec = self
            .records
            .get_mut(txn as usize)
            .ok_or(CctaError::UnknownTransaction(txn))?;
        rec.end_cycle = Some(cycle);
        self.live.remove(&(rec.core, rec.addr));
        Ok(())
    }

    pub fn live_count(&self) -> usize {
        self.live.len()
    }

    pub fn report(&self, window: (u64, u64)) -> CoherenceMetrics {
        aggregate(
            self.records
                .iter()
                .filter(|r| matches!(r.end_cycle, Some(e) if e >= window.0 && e < window.1)),
            window,
        )
    }

    /// Raw per-transaction dump; sealed transactions only.
    pub fn dump_csv(&self) -> String {
        let mut out = String::from("txn_id,type,core,addr,start,first_in,last_in,end,msgs\n");
        for r in self.records.iter().filter(|r| r.sealed()) {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.txn,
                r.ttype.name(),
                r.core,
                r.addr,
                r.start_cycle,
                r.first_inport_cycle.unwrap_or(0),
                r.last_inport_cycle.unwrap_or(0),
                r.end_cycle.unwrap(),
                r.message_count
            ));
        }
        out
    }
}

/// Fold a set of sealed records into windowed aggregates. Shared with the
/// offline analyzer so a dump reproduces the simulator's numbers exactly.
pub fn aggregate<'a>(
    records: impl Iterator<Item = &'a TransactionRecord>,
    window: (u64, u64),
) -> CoherenceMetrics {
    let mut m = CoherenceMetrics {
        window,
        ..Default::default()
    };
    let (mut hit_sum, mut wm_sum, mut rm_sum) = (0u64, 0u64, 0u64);
    for r in records {
        let dur = r.end_cycle.unwrap() - r.start_cycle;
        match r.ttype {
            TxnType::WriteHitS => {
                m.write_hit_s_count += 1;
                hit_sum += dur;
            }
            TxnType::ReadMiss => {
                m.read_miss_count += 1;
                rm_sum += dur;
            }
            TxnType::WriteMiss => {
                m.write_miss_count += 1;
                wm_sum += dur;
            }
            TxnType::Writeback => m.writeback_count += 1,
        }
        m.total_messages += r.message_count;
        for (h, &c) in m.histogram.iter_mut().zip(&r.kind_counts) {
            *h += c as u64;
        }
    }
    if m.write_hit_s_count > 0 {
        m.cpu_delay_avg = hit_sum as f64 / m.write_hit_s_count as f64;
    }
    if m.write_miss_count > 0 {
        m.write_miss_time_avg = wm_sum as f64 / m.write_miss_count as f64;
    }
    if m.read_miss_count > 0 {
        m.mem_fetch_time_avg = rm_sum as f64 / m.read_miss_count as f64;
    }
    m
}

/// Parse a `dump_csv` file back into records (analyzer input). Histogram
/// detail is not present in the dump, so `kind_counts` stays zero.
pub fn parse_dump(text: &str) -> Result<Vec<TransactionRecord>, String> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 9 {
            return Err(format!("line {}: expected 9 fields", i + 1));
        }
        let num = |s: &str| s.parse::<u64>().map_err(|e| format!("line {}: {e}", i + 1));
        out.push(TransactionRecord {
            txn: num(f[0])?,
            ttype: f[1].parse()?,
            core: num(f[2])? as usize,
            addr: num(f[3])?,
            start_cycle: num(f[4])?,
            first_inport_cycle: Some(num(f[5])?),
            last_inport_cycle: Some(num(f[6])?),
            end_cycle: Some(num(f[7])?),
            message_count: num(f[8])?,
            kind_counts: [0; MsgKind::COUNT],
        });
    }
    Ok(out)
}

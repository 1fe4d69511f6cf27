//! Per-core memory access traces: synthetic generators, task-graph-driven
//! sharing patterns, and the trace file format.
//!
//! Trace cycles are intended issue cycles; the simulated core is in-order
//! with one outstanding miss, so actual issue slips under stalls. Generators
//! are pure functions of their seed.

use crate::coherence::msg::{LINE_BYTES, MEMORY_BYTES};
use crate::coherence::CpuOp;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use std::collections::BTreeMap;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Access {
    pub cycle: u64,
    pub op: CpuOp,
    pub addr: u64,
}

/// An ordered access stream per core plus the generator header.
#[derive(Debug, Clone, PartialEq)]
pub struct AccessTrace {
    pub cores: usize,
    pub seed: u64,
    pub generator: String,
    pub params: Vec<(String, String)>,
    pub per_core: Vec<Vec<Access>>,
}

impl AccessTrace {
    pub fn total_accesses(&self) -> usize {
        self.per_core.iter().map(Vec::len).sum()
    }

    /// Last intended issue cycle across all cores.
    pub fn horizon(&self) -> u64 {
        self.per_core
            .iter()
            .filter_map(|c| c.last())
            .map(|a| a.cycle)
            .max()
            .unwrap_or(0)
    }

    fn check(&self) {
        for (core, list) in self.per_core.iter().enumerate() {
            for w in list.windows(2) {
                assert!(
                    w[0].cycle < w[1].cycle,
                    "core {core}: cycles must strictly increase"
                );
            }
            for a in list {
                assert_eq!(a.addr % LINE_BYTES, 0, "addresses are line aligned");
                assert!(a.addr < MEMORY_BYTES, "address within memory");
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum WorkloadError {
    CyclicGraph,
    BadFormat(String),
}

impl fmt::Display for WorkloadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WorkloadError::CyclicGraph => write!(f, "task graph contains a cycle"),
            WorkloadError::BadFormat(m) => write!(f, "bad trace format: {m}"),
        }
    }
}

impl std::error::Error for WorkloadError {}

/// Bernoulli-per-cycle uniform traffic over a pool of lines.
pub fn gen_uniform_random(
    cores: usize,
    length: u64,
    rate: f64,
    write_fraction: f64,
    pool_lines: u64,
    seed: u64,
) -> AccessTrace {
    assert!((0.0..=1.0).contains(&rate));
    assert!((0.0..=1.0).contains(&write_fraction));
    let mut per_core = vec![Vec::new(); cores];
    let mut rng = stream(seed, 0x756e6966); // "unif"
    for cycle in 0..length {
        for list in per_core.iter_mut() {
            if rng.gen::<f64>() < rate {
                let line = rng.gen_range(0..pool_lines);
                let op = if rng.gen::<f64>() < write_fraction {
                    CpuOp::Write
                } else {
                    CpuOp::Read
                };
                list.push(Access {
                    cycle,
                    op,
                    addr: line * LINE_BYTES,
                });
            }
        }
    }
    let trace = AccessTrace {
        cores,
        seed,
        generator: "uniform".into(),
        params: vec![
            ("length".into(), length.to_string()),
            ("rate".into(), rate.to_string()),
            ("write_fraction".into(), write_fraction.to_string()),
            ("pool_lines".into(), pool_lines.to_string()),
        ],
        per_core,
    };
    trace.check();
    trace
}

const HOT_LINES: u64 = 64;
const PRIVATE_LINES: u64 = 64;
const HOT_WRITE_FRACTION: f64 = 0.1;
const PRIVATE_WRITE_FRACTION: f64 = 0.3;

/// Sharing-heavy traffic: `k` designated cores hammer a small hot region
/// (read-mostly with periodic writes, which forces upgrade storms), everyone
/// keeps a private region on the side.
pub fn gen_shared_hotspot(
    cores: usize,
    length: u64,
    rate: f64,
    sharing_degree: usize,
    hot_fraction: f64,
    seed: u64,
) -> AccessTrace {
    assert!((2..=cores).contains(&sharing_degree));
    assert!((0.0..=1.0).contains(&hot_fraction));
    let mut per_core = vec![Vec::new(); cores];
    let mut rng = stream(seed, 0x686f7473); // "hots"
                                            // Private regions start above the hot region, one stripe per core.
    for cycle in 0..length {
        for (core, list) in per_core.iter_mut().enumerate() {
            if rng.gen::<f64>() >= rate {
                continue;
            }
            let sharing = core < sharing_degree && rng.gen::<f64>() < hot_fraction;
            let (addr, wf) = if sharing {
                (rng.gen_range(0..HOT_LINES) * LINE_BYTES, HOT_WRITE_FRACTION)
            } else {
                let base = HOT_LINES + core as u64 * PRIVATE_LINES;
                (
                    (base + rng.gen_range(0..PRIVATE_LINES)) * LINE_BYTES,
                    PRIVATE_WRITE_FRACTION,
                )
            };
            let op = if rng.gen::<f64>() < wf {
                CpuOp::Write
            } else {
                CpuOp::Read
            };
            list.push(Access { cycle, op, addr });
        }
    }
    let trace = AccessTrace {
        cores,
        seed,
        generator: "hotspot".into(),
        params: vec![
            ("length".into(), length.to_string()),
            ("rate".into(), rate.to_string()),
            ("sharing_degree".into(), sharing_degree.to_string()),
            ("hot_fraction".into(), hot_fraction.to_string()),
        ],
        per_core,
    };
    trace.check();
    trace
}

#[derive(Debug, Clone)]
pub struct Task {
    pub id: usize,
    pub compute_cycles: u64,
    pub core: usize,
}

/// A shared memory region written by one producer task and read by its
/// consumers after it completes.
#[derive(Debug, Clone)]
pub struct SharedRegion {
    pub base_line: u64,
    pub lines: u64,
    pub producer: usize,
    pub consumers: Vec<usize>,
}

#[derive(Debug, Clone, Default)]
pub struct TaskGraph {
    pub tasks: Vec<Task>,
    /// (before, after) precedence pairs by task id.
    pub edges: Vec<(usize, usize)>,
    pub regions: Vec<SharedRegion>,
}

/// Schedule the DAG in trace-cycle space: a task starts when its predecessors
/// finish; producers write their region inside their compute window and
/// consumers read it at their own start, which lands the data cache-to-cache.
pub fn gen_from_taskgraph(graph: &TaskGraph) -> Result<AccessTrace, WorkloadError> {
    let n = graph.tasks.len();
    let mut indeg = vec![0usize; n];
    let mut succ: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(a, b) in &graph.edges {
        succ[a].push(b);
        indeg[b] += 1;
    }
    // Kahn's ordering; leftover nodes mean a cycle.
    let mut ready: std::collections::VecDeque<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
    let mut topo = Vec::with_capacity(n);
    let mut start = vec![0u64; n];
    while let Some(t) = ready.pop_front() {
        topo.push(t);
        let end = start[t] + graph.tasks[t].compute_cycles;
        for &s in &succ[t] {
            start[s] = start[s].max(end);
            indeg[s] -= 1;
            if indeg[s] == 0 {
                ready.push_back(s);
            }
        }
    }
    if topo.len() != n {
        return Err(WorkloadError::CyclicGraph);
    }
    let cores = graph
        .tasks
        .iter()
        .map(|t| t.core)
        .max()
        .map_or(0, |m| m + 1);
    // One access per core per cycle; per-task access lists merged per core.
    let mut per_core: Vec<BTreeMap<u64, Access>> = vec![BTreeMap::new(); cores];
    let mut push = |core: usize, mut cycle: u64, op: CpuOp, addr: u64| -> u64 {
        while per_core[core].contains_key(&cycle) {
            cycle += 1;
        }
        per_core[core].insert(cycle, Access { cycle, op, addr });
        cycle
    };
    let mut producer_last_write = vec![0u64; graph.regions.len()];
    for (ri, region) in graph.regions.iter().enumerate() {
        let task = &graph.tasks[region.producer];
        let window = task.compute_cycles.max(region.lines);
        for l in 0..region.lines {
            let offset = l * window / region.lines;
            let at = push(
                task.core,
                start[task.id] + offset,
                CpuOp::Write,
                (region.base_line + l) * LINE_BYTES,
            );
            producer_last_write[ri] = producer_last_write[ri].max(at);
        }
    }
    for (ri, region) in graph.regions.iter().enumerate() {
        for &c in &region.consumers {
            let task = &graph.tasks[c];
            // Readers wait for both their own start and the producer's last
            // write, so the trace itself orders the sharing.
            let earliest = start[task.id].max(producer_last_write[ri] + 1);
            for l in 0..region.lines {
                push(
                    task.core,
                    earliest + l,
                    CpuOp::Read,
                    (region.base_line + l) * LINE_BYTES,
                );
            }
        }
    }
    let trace = AccessTrace {
        cores,
        seed: 0,
        generator: "taskgraph".into(),
        params: vec![
            ("tasks".into(), n.to_string()),
            ("regions".into(), graph.regions.len().to_string()),
        ],
        per_core: per_core
            .into_iter()
            .map(|m| m.into_values().collect())
            .collect(),
    };
    trace.check();
    Ok(trace)
}

/// Header "#cores=N gen=<name> seed=S key=value...", then one line per access
/// "core,cycle,R|W,hex_address" sorted by (cycle, core).
pub fn save_trace(trace: &AccessTrace) -> String {
    let mut out = format!(
        "#cores={} gen={} seed={}",
        trace.cores, trace.generator, trace.seed
    );
    for (k, v) in &trace.params {
        out.push_str(&format!(" {k}={v}"));
    }
    out.push('\n');
    let mut rows: Vec<(u64, usize, &Access)> = Vec::with_capacity(trace.total_accesses());
    for (core, list) in trace.per_core.iter().enumerate() {
        for a in list {
            rows.push((a.cycle, core, a));
        }
    }
    rows.sort_by_key(|&(cycle, core, _)| (cycle, core));
    for (cycle, core, a) in rows {
        let op = if a.op == CpuOp::Write { 'W' } else { 'R' };
        out.push_str(&format!("{core},{cycle},{op},{:x}\n", a.addr));
    }
    out
}

pub fn load_trace(text: &str) -> Result<AccessTrace, WorkloadError> {
    let bad = |m: &str| WorkloadError::BadFormat(m.to_string());
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad("empty file"))?;
    let header = header
        .strip_prefix('#')
        .ok_or_else(|| bad("missing # header"))?;
    let mut cores = None;
    let mut seed = 0u64;
    let mut generator = String::new();
    let mut params = Vec::new();
    for field in header.split_whitespace() {
        let (k, v) = field.split_once('=').ok_or_else(|| bad("header field"))?;
        match k {
            "cores" => cores = Some(v.parse().map_err(|_| bad("cores"))?),
            "gen" => generator = v.to_string(),
            "seed" => seed = v.parse().map_err(|_| bad("seed"))?,
            _ => params.push((k.to_string(), v.to_string())),
        }
    }
    let cores = cores.ok_or_else(|| bad("missing cores"))?;
    let mut per_core = vec![Vec::new(); cores];
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            return Err(bad("expected core,cycle,op,addr"));
        }
        let core: usize = f[0].parse().map_err(|_| bad("core"))?;
        let cycle: u64 = f[1].parse().map_err(|_| bad("cycle"))?;
        let op = match f[2] {
            "R" => CpuOp::Read,
            "W" => CpuOp::Write,
            _ => return Err(bad("op must be R or W")),
        };
        let addr = u64::from_str_radix(f[3], 16).map_err(|_| bad("addr"))?;
        if core >= cores {
            return Err(bad("core out of range"));
        }
        per_core[core].push(Access { cycle, op, addr });
    }
    let trace = AccessTrace {
        cores,
        seed,
        generator,
        params,
        per_core,
    };
    trace.check();
    Ok(trace)
}

/// Named deterministic substream of a base seed.
pub fn stream(seed: u64, tag: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(tag);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_zero_is_empty_and_rate_one_is_dense() {
        let t = gen_uniform_random(4, 100, 0.0, 0.5, 16, 1);
        assert_eq!(t.total_accesses(), 0);
        let t = gen_uniform_random(1, 10, 1.0, 0.5, 16, 1);
        assert_eq!(t.per_core[0].len(), 10);
        let cycles: Vec<u64> = t.per_core[0].iter().map(|a| a.cycle).collect();
        assert_eq!(cycles, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn generators_are_deterministic_in_seed() {
        let a = gen_uniform_random(4, 500, 0.3, 0.5, 64, 7);
        let b = gen_uniform_random(4, 500, 0.3, 0.5, 64, 7);
        assert_eq!(a, b);
        let c = gen_uniform_random(4, 500, 0.3, 0.5, 64, 8);
        assert_ne!(a, c);
        let h = gen_shared_hotspot(8, 500, 0.2, 4, 0.6, 3);
        let h2 = gen_shared_hotspot(8, 500, 0.2, 4, 0.6, 3);
        assert_eq!(h, h2);
    }

    #[test]
    fn hotspot_fraction_extremes() {
        // hot_fraction 0 leaves every access in the private stripes.
        let t = gen_shared_hotspot(4, 2000, 0.3, 4, 0.0, 5);
        assert!(t
            .per_core
            .iter()
            .enumerate()
            .all(|(core, list)| list.iter().all(|a| {
                let line = a.addr / LINE_BYTES;
                line >= HOT_LINES + core as u64 * PRIVATE_LINES
                    && line < HOT_LINES + (core as u64 + 1) * PRIVATE_LINES
            })));
        // hot_fraction 1 with k = cores puts every access in the hot region.
        let t = gen_shared_hotspot(4, 2000, 0.3, 4, 1.0, 5);
        let mut any = false;
        for list in &t.per_core {
            for a in list {
                assert!(a.addr / LINE_BYTES < HOT_LINES);
                any = true;
            }
        }
        assert!(any);
    }

    #[test]
    fn trace_round_trip_is_identical() {
        let t = gen_shared_hotspot(4, 300, 0.2, 2, 0.5, 11);
        let text = save_trace(&t);
        let back = load_trace(&text).unwrap();
        assert_eq!(t, back);
        assert_eq!(save_trace(&back), text);
    }

    #[test]
    fn taskgraph_orders_consumers_after_producer() {
        let g = TaskGraph {
            tasks: vec![
                Task {
                    id: 0,
                    compute_cycles: 50,
                    core: 0,
                },
                Task {
                    id: 1,
                    compute_cycles: 30,
                    core: 1,
                },
                Task {
                    id: 2,
                    compute_cycles: 30,
                    core: 2,
                },
            ],
            edges: vec![(0, 1), (0, 2)],
            regions: vec![SharedRegion {
                base_line: 0,
                lines: 8,
                producer: 0,
                consumers: vec![1, 2],
            }],
        };
        let t = gen_from_taskgraph(&g).unwrap();
        let last_write = t.per_core[0]
            .iter()
            .filter(|a| a.op == CpuOp::Write)
            .map(|a| a.cycle)
            .max()
            .unwrap();
        for core in [1, 2] {
            let first_read = t.per_core[core]
                .iter()
                .filter(|a| a.op == CpuOp::Read)
                .map(|a| a.cycle)
                .min()
                .unwrap();
            assert!(first_read > last_write);
        }
    }

    #[test]
    fn cyclic_taskgraph_is_rejected() {
        let g = TaskGraph {
            tasks: vec![
                Task {
                    id: 0,
                    compute_cycles: 10,
                    core: 0,
                },
                Task {
                    id: 1,
                    compute_cycles: 10,
                    core: 1,
                },
            ],
            edges: vec![(0, 1), (1, 0)],
            regions: vec![],
        };
        assert_eq!(gen_from_taskgraph(&g), Err(WorkloadError::CyclicGraph));
    }
}

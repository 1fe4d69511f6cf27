//! The three workload generators and the trace file format.
//!
//!   cargo run --example trace_workloads

use cohesim::coherence::CpuOp;
use cohesim::workload::{
    gen_from_taskgraph, gen_shared_hotspot, gen_uniform_random, load_trace, save_trace,
    SharedRegion, Task, TaskGraph,
};

fn stats(name: &str, trace: &cohesim::workload::AccessTrace) {
    let writes: usize = trace
        .per_core
        .iter()
        .flat_map(|c| c.iter())
        .filter(|a| a.op == CpuOp::Write)
        .count();
    println!(
        "{name:<10} cores {:2}  accesses {:5}  writes {writes:4}  horizon {} cycles",
        trace.cores,
        trace.total_accesses(),
        trace.horizon()
    );
}

fn main() {
    let uniform = gen_uniform_random(16, 5000, 0.05, 0.3, 64, 1);
    stats("uniform", &uniform);

    let hotspot = gen_shared_hotspot(16, 5000, 0.05, 4, 0.5, 1);
    stats("hotspot", &hotspot);

    // A little fork-join: task 0 produces a buffer that tasks 1 and 2 read,
    // task 3 joins on both.
    let graph = TaskGraph {
        tasks: vec![
            Task {
                id: 0,
                compute_cycles: 200,
                core: 0,
            },
            Task {
                id: 1,
                compute_cycles: 150,
                core: 1,
            },
            Task {
                id: 2,
                compute_cycles: 150,
                core: 2,
            },
            Task {
                id: 3,
                compute_cycles: 100,
                core: 3,
            },
        ],
        edges: vec![(0, 1), (0, 2), (1, 3), (2, 3)],
        regions: vec![
            SharedRegion {
                base_line: 0,
                lines: 16,
                producer: 0,
                consumers: vec![1, 2],
            },
            SharedRegion {
                base_line: 16,
                lines: 8,
                producer: 1,
                consumers: vec![3],
            },
        ],
    };
    let tg = gen_from_taskgraph(&graph).unwrap();
    stats("taskgraph", &tg);

    // Round-trip through the text format is bit-identical.
    let text = save_trace(&tg);
    let back = load_trace(&text).unwrap();
    assert_eq!(tg, back);
    println!("\nfirst lines of the task graph trace:");
    for line in text.lines().take(8) {
        println!("  {line}");
    }
}

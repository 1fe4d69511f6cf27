//! Watch one upgrade transaction end to end: k cores share a line, one of
//! them writes, and the analyzer accounts for every protocol message the
//! write triggers (GetM + AckCount + the invalidation round).
//!
//!   cargo run --example coherence_walkthrough

use cohesim::coherence::{CpuOp, MsgKind, TxnType};
use cohesim::noc::compute_routing_tables;
use cohesim::sim::{SimConfig, SystemSim};
use cohesim::topology::{build_topology, TopologyKind};
use cohesim::workload::{Access, AccessTrace};

fn main() {
    let addr = 8 * 64; // homed on core 8
    println!("write hit on a Shared line, k sharers -> 2k messages\n");
    println!("k   messages  H_t(cycles)  per-kind");
    for k in 2..=6usize {
        let mut per_core = vec![Vec::new(); 16];
        for core in 1..=k {
            per_core[core].push(Access {
                cycle: 400 * (core as u64 - 1),
                op: CpuOp::Read,
                addr,
            });
        }
        per_core[1].push(Access {
            cycle: 400 * k as u64,
            op: CpuOp::Write,
            addr,
        });
        let trace = AccessTrace {
            cores: 16,
            seed: 0,
            generator: "walkthrough".into(),
            params: vec![],
            per_core,
        };
        let graph = build_topology(TopologyKind::Mesh, 16).unwrap();
        let tables = compute_routing_tables(&graph, &graph.link_weights.clone()).unwrap();
        let mut sim = SystemSim::new(graph, tables, trace, SimConfig::default());
        sim.run_to_completion(100_000).unwrap();
        let ccta = sim.ccta.as_ref().unwrap();
        let rec = ccta
            .records()
            .iter()
            .find(|r| r.ttype == TxnType::WriteHitS)
            .unwrap();
        let kinds: Vec<String> = rec
            .kind_counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, &c)| format!("{}x{}", c, MsgKind::name_of(i)))
            .collect();
        println!(
            "{k}   {:<8}  {:<11}  {}",
            rec.message_count,
            rec.end_cycle.unwrap() - rec.start_cycle,
            kinds.join(" ")
        );
    }
}

//! Run a workload with the traffic analyzer attached and print what it saw:
//! timing aggregates per transaction class and the message histogram.
//!
//!   cargo run --example ccta_report

use cohesim::coherence::MsgKind;
use cohesim::noc::compute_routing_tables;
use cohesim::sim::{SimConfig, SystemSim};
use cohesim::topology::{build_topology, TopologyKind};
use cohesim::workload::gen_shared_hotspot;

fn main() {
    let trace = gen_shared_hotspot(16, 10_000, 0.06, 6, 0.6, 5);
    let graph = build_topology(TopologyKind::Mesh, 16).unwrap();
    let tables = compute_routing_tables(&graph, &graph.link_weights.clone()).unwrap();
    let mut sim = SystemSim::new(graph, tables, trace, SimConfig::default());
    sim.run_to_completion(2_000_000).unwrap();

    let m = sim.snapshot((0, sim.now()));
    println!("simulated {} cycles", sim.now());
    println!(
        "transactions: {} write-hit-S, {} read miss, {} write miss, {} writeback",
        m.cc.write_hit_s_count, m.cc.read_miss_count, m.cc.write_miss_count, m.cc.writeback_count
    );
    println!("CPU delay (H_t)        {:8.2} cycles", m.cc.cpu_delay_avg);
    println!(
        "write miss time        {:8.2} cycles",
        m.cc.write_miss_time_avg
    );
    println!(
        "memory fetch time      {:8.2} cycles",
        m.cc.mem_fetch_time_avg
    );
    println!("coherence messages (C_t) {:6}", m.cc.total_messages);
    println!("\nper-kind histogram:");
    for (i, &count) in m.cc.histogram.iter().enumerate() {
        if count > 0 {
            println!("  {:<16} {count}", MsgKind::name_of(i));
        }
    }
    println!(
        "\nnetwork: L_t {:.2}  D_t {:.2}  util {:.4}",
        m.noc.latency_avg, m.noc.delay_avg, m.noc.link_utilization
    );
    let dump = sim.ccta.as_ref().unwrap().dump_csv();
    println!("\nfirst raw records:");
    for line in dump.lines().take(6) {
        println!("  {line}");
    }
}

//! Compare routing policies on the abstract energy model: same workload on
//! XY and on weighted routing over a few topologies.
//!
//!   cargo run --example energy_report

use cohesim::energy::{estimate, EnergyParams};
use cohesim::noc::{compute_routing_tables, xy_routing_table};
use cohesim::sim::{SimConfig, SystemSim};
use cohesim::topology::{build_topology, TopologyKind};
use cohesim::workload::gen_shared_hotspot;

fn main() {
    let params = EnergyParams::default();
    println!("config              L_t     total J    J/packet");
    for (name, kind, xy) in [
        ("mesh + xy", TopologyKind::Mesh, true),
        ("mesh + weighted", TopologyKind::Mesh, false),
        ("crossbar", TopologyKind::Crossbar, false),
        ("flattened bfly", TopologyKind::FlattenedButterfly, false),
    ] {
        let trace = gen_shared_hotspot(16, 8000, 0.05, 4, 0.5, 11);
        let graph = build_topology(kind, 16).unwrap();
        let node_count = graph.node_count;
        let tables = if xy {
            xy_routing_table(&graph).unwrap()
        } else {
            compute_routing_tables(&graph, &graph.link_weights.clone()).unwrap()
        };
        let mut sim = SystemSim::new(graph, tables, trace, SimConfig::default());
        sim.run_to_completion(1_000_000).unwrap();
        let m = sim.snapshot((0, sim.now()));
        let report = estimate(
            sim.net.total_flit_hops,
            sim.net.total_router_traversals,
            m.noc.ejected,
            sim.now(),
            node_count,
            &params,
        );
        println!(
            "{name:<18}  {:<6.2}  {:.3e}  {:.3e}",
            m.noc.latency_avg, report.total_j, report.j_per_packet
        );
    }
    println!("\nconstants are arbitrary; only the relative ordering is meaningful");
}

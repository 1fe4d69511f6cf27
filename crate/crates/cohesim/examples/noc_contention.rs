//! Latency and contention delay on the raw network as load rises: inject
//! uniform random 5-flit packets on a 4x4 mesh at increasing rates and watch
//! delay climb while zero-load latency stays put.
//!
//!   cargo run --example noc_contention

use cohesim::noc::{compute_routing_tables, Network, NetworkConfig, VirtualNet};
use cohesim::topology::{build_topology, TopologyKind};
use cohesim::workload::stream;
use rand::Rng;

fn main() {
    println!("rate/node  L_t      D_t      link util");
    for rate in [0.01, 0.02, 0.04, 0.08, 0.12] {
        let graph = build_topology(TopologyKind::Mesh, 16).unwrap();
        let tables = compute_routing_tables(&graph, &graph.link_weights.clone()).unwrap();
        let mut net = Network::new(graph, tables, NetworkConfig::default());
        let mut rng = stream(7, (rate * 1000.0) as u64);
        for _ in 0..20_000u32 {
            for src in 0..16 {
                if rng.gen::<f64>() < rate {
                    let dst = loop {
                        let d = rng.gen_range(0..16);
                        if d != src {
                            break d;
                        }
                    };
                    net.inject(src, dst, VirtualNet::Response, 5, None);
                }
            }
            net.step().unwrap();
        }
        net.drain().unwrap();
        let m = net.collect_metrics((0, net.cycle()));
        println!(
            "{rate:<9}  {:<7.2}  {:<7.2}  {:.4}",
            m.latency_avg, m.delay_avg, m.link_utilization
        );
    }
}

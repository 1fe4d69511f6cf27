//! Flow-control soundness under load: packet and credit conservation are
//! asserted every cycle, traversed paths are checked against the tables, and
//! the deadlock watchdog must stay silent on every candidate topology.

use cohesim::noc::{compute_routing_tables, Network, NetworkConfig, VirtualNet};
use cohesim::topology::{build_topology, TopologyKind};
use rand::Rng;

fn stress_one(kind: TopologyKind, cores: usize, seed: u64) {
    let mut rng = cohesim::workload::stream(seed, kind.index() as u64);
    let mut graph = build_topology(kind, cores).unwrap();
    for w in &mut graph.link_weights {
        *w = (rng.gen_range(-2.3f64..2.3)).exp();
    }
    let tables = compute_routing_tables(&graph, &graph.link_weights.clone()).unwrap();
    let n = graph.node_count;
    let mut net = Network::new(
        graph,
        tables,
        NetworkConfig {
            check_invariants: true,
            check_paths: true,
        },
    );
    let vnets = [
        VirtualNet::Request,
        VirtualNet::Forward,
        VirtualNet::Response,
    ];
    for _ in 0..4000 {
        // Aggressive injection: several packets per cycle across the fabric.
        for _ in 0..3 {
            if rng.gen::<f64>() < 0.8 {
                let src = rng.gen_range(0..n);
                let dst = loop {
                    let d = rng.gen_range(0..n);
                    if d != src {
                        break d;
                    }
                };
                let vnet = vnets[rng.gen_range(0..3)];
                let flits = if rng.gen::<bool>() { 5 } else { 1 };
                net.inject(src, dst, vnet, flits, None);
            }
        }
        net.step().unwrap();
    }
    net.drain().unwrap();
    assert_eq!(net.injected_count(), net.ejected_count());
    assert!(net.is_empty());
}

#[test]
fn all_topologies_survive_saturating_random_traffic() {
    for kind in TopologyKind::ALL {
        stress_one(kind, 16, 0xbeef);
    }
}

#[test]
fn large_mesh_and_torus_survive_stress() {
    stress_one(TopologyKind::Mesh, 64, 0xcafe);
    stress_one(TopologyKind::Torus, 64, 0xcafe);
}

#[test]
fn small_configs_survive_stress() {
    for kind in TopologyKind::ALL {
        stress_one(kind, 4, 0xd00d);
    }
}

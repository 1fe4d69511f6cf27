//! Table routing in action: XY on a mesh, weighted shortest paths under the
//! up*/down* turn restriction, and how a learned weight steers traffic.
//!
//!   cargo run --example routing_tables

use cohesim::noc::{compute_routing_tables, xy_routing_table};
use cohesim::topology::{build_topology, TopologyKind};

fn main() {
    let mesh = build_topology(TopologyKind::Mesh, 16).unwrap();

    let xy = xy_routing_table(&mesh).unwrap();
    println!("XY      0 -> 15: {:?}", xy.path(0, 15).unwrap());
    println!("XY      3 -> 12: {:?}", xy.path(3, 12).unwrap());

    let uniform = compute_routing_tables(&mesh, &mesh.link_weights.clone()).unwrap();
    println!("uniform 0 -> 15: {:?}", uniform.path(0, 15).unwrap());

    // Penalize one link on the preferred route and watch the path move.
    let mut weighted = mesh.clone();
    let idx = weighted.link_index(5, 6).unwrap();
    weighted.link_weights[idx] = 8.0;
    let tables = compute_routing_tables(&weighted, &weighted.link_weights.clone()).unwrap();
    println!(
        "w(5,6)=8, 5 -> 10: {:?}  (uniform: {:?})",
        tables.path(5, 10).unwrap(),
        uniform.path(5, 10).unwrap()
    );

    // The restriction guarantees deadlock freedom on every candidate fabric,
    // including ones with switch-only nodes.
    let fattree = build_topology(TopologyKind::FatTree, 16).unwrap();
    let ft = compute_routing_tables(&fattree, &fattree.link_weights.clone()).unwrap();
    println!("fattree 0 -> 15: {:?}", ft.path(0, 15).unwrap());
}

//! Construct all six candidate topologies, validate them, and print their
//! canonical shapes.
//!
//!   cargo run --example build_topologies

use cohesim::topology::{build_topology, enumerate_links, validate, TopologyKind};

fn main() {
    for cores in [4usize, 16, 64] {
        println!("== {cores} cores ==");
        for kind in TopologyKind::ALL {
            let graph = match build_topology(kind, cores) {
                Ok(g) => g,
                Err(e) => {
                    println!("  {kind:<20} unsupported: {e}");
                    continue;
                }
            };
            let report = validate(&graph);
            let links = enumerate_links(&graph);
            println!(
                "  {kind:<20} {:3} nodes {:4} links  degrees {:?}  {}",
                graph.node_count,
                links.len(),
                report.degree_histogram,
                if report.is_valid() {
                    "valid"
                } else {
                    "INVALID"
                }
            );
        }
    }
    // The canonical edge list is the exchange format for learned weights.
    let mesh = build_topology(TopologyKind::Mesh, 4).unwrap();
    println!("\nedge list for mesh/4:\n{}", mesh.to_edge_list());
}

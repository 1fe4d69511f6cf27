//! Shared test fixtures: an independent restricted-Dijkstra routing oracle
//! and scenario builders for controlled coherence transactions.

#![allow(dead_code)]

use cohesim::coherence::CpuOp;
use cohesim::noc::{bfs_levels, compute_routing_tables, RoutingTables};
use cohesim::sim::{SimConfig, SystemSim};
use cohesim::topology::{build_topology, NetworkGraph, TopologyKind};
use cohesim::workload::{Access, AccessTrace};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Min-heap entry ordered by (cost, state id); costs are finite.
#[derive(PartialEq)]
struct HeapEntry(f64, usize);

impl Eq for HeapEntry {}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed for a max-heap turned min-heap.
        other
            .0
            .partial_cmp(&self.0)
            .unwrap()
            .then_with(|| other.1.cmp(&self.1))
    }
}

/// Independent oracle: per-destination Dijkstra over the two-state legal-turn
/// graph (state 0 = may still climb toward the root, state 1 = descending).
/// Returns `dist[state][node]` of the cheapest legal path to `dst`, with the
/// same cost association (`w + f[next]`) the table builder uses.
pub fn oracle_distances(graph: &NetworkGraph, weights: &[f64], dst: usize) -> [Vec<f64>; 2] {
    let n = graph.node_count;
    let level = bfs_levels(graph);
    let key = |v: usize| (level[v], v);
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (i, &(a, b)) in graph.links.iter().enumerate() {
        adj[a].push((b, weights[i]));
        adj[b].push((a, weights[i]));
    }
    let mut dist = [vec![f64::INFINITY; n], vec![f64::INFINITY; n]];
    let mut heap = BinaryHeap::new();
    dist[0][dst] = 0.0;
    dist[1][dst] = 0.0;
    heap.push(HeapEntry(0.0, dst));
    heap.push(HeapEntry(0.0, n + dst));
    while let Some(HeapEntry(d, id)) = heap.pop() {
        let (m, u) = (id / n, id % n);
        if d > dist[m][u] {
            continue;
        }
        for &(v, w) in &adj[u] {
            // Which packet states at v can use hop v->u to continue at (u, m)?
            let hop_is_up = key(u) < key(v);
            let candidates: &[usize] = if hop_is_up {
                // Climb: only legal before any down-hop, and only into m = 0.
                if m == 0 {
                    &[0]
                } else {
                    &[]
                }
            } else {
                // Descend into (u, 1) from either state.
                if m == 1 {
                    &[0, 1]
                } else {
                    &[]
                }
            };
            for &pm in candidates {
                let nd = w + d;
                if nd < dist[pm][v] {
                    dist[pm][v] = nd;
                    heap.push(HeapEntry(nd, pm * n + v));
                }
            }
        }
    }
    dist
}

/// Greedy walk over the oracle distances with the production tie-break
/// (smallest next-hop id); independent reconstruction of the optimal path.
pub fn oracle_path(
    graph: &NetworkGraph,
    weights: &[f64],
    dist: &[Vec<f64>; 2],
    src: usize,
    dst: usize,
) -> Vec<usize> {
    let n = graph.node_count;
    let level = bfs_levels(graph);
    let key = |v: usize| (level[v], v);
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (i, &(a, b)) in graph.links.iter().enumerate() {
        adj[a].push((b, weights[i]));
        adj[b].push((a, weights[i]));
    }
    for list in &mut adj {
        list.sort_unstable_by_key(|&(v, _)| v);
    }
    let mut path = vec![src];
    let (mut node, mut mode) = (src, 0usize);
    while node != dst {
        let mut best: Option<(f64, usize, usize)> = None;
        for &(next, w) in &adj[node] {
            let next_mode = if key(next) < key(node) { 0 } else { 1 };
            if mode == 1 && next_mode == 0 {
                continue;
            }
            let c = w + dist[next_mode][next];
            if !c.is_finite() {
                continue;
            }
            if best.map_or(true, |(bc, _, _)| c < bc) {
                best = Some((c, next, next_mode));
            }
        }
        let (_, next, next_mode) = best.expect("oracle: connected");
        node = next;
        mode = next_mode;
        path.push(node);
        assert!(path.len() <= n, "oracle walk is loop-free");
    }
    path
}

/// Hop legality check against the BFS orientation: no down-then-up turn.
pub fn assert_updown_legal(graph: &NetworkGraph, path: &[usize]) {
    let level = bfs_levels(graph);
    let key = |v: usize| (level[v], v);
    let mut went_down = false;
    for hop in path.windows(2) {
        let down = key(hop[0]) < key(hop[1]);
        assert!(
            !(went_down && !down),
            "illegal down-then-up turn in {path:?}"
        );
        went_down |= down;
    }
}

pub fn trace_from_accesses(cores: usize, accesses: &[(usize, u64, CpuOp, u64)]) -> AccessTrace {
    let mut per_core = vec![Vec::new(); cores];
    for &(core, cycle, op, addr) in accesses {
        per_core[core].push(Access { cycle, op, addr });
    }
    AccessTrace {
        cores,
        seed: 0,
        generator: "handmade".into(),
        params: vec![],
        per_core,
    }
}

/// Mesh-16 system over a hand-built access list, checks enabled.
pub fn mesh16_sim(accesses: &[(usize, u64, CpuOp, u64)]) -> SystemSim {
    sim_on(TopologyKind::Mesh, 16, accesses)
}

pub fn sim_on(
    kind: TopologyKind,
    cores: usize,
    accesses: &[(usize, u64, CpuOp, u64)],
) -> SystemSim {
    let graph = build_topology(kind, cores).unwrap();
    let tables = compute_routing_tables(&graph, &graph.link_weights.clone()).unwrap();
    let trace = trace_from_accesses(cores, accesses);
    let mut config = SimConfig::default();
    config.swmr_check = true;
    config.net.check_invariants = true;
    config.net.check_paths = true;
    SystemSim::new(graph, tables, trace, config)
}

pub fn uniform_tables(graph: &NetworkGraph) -> RoutingTables {
    compute_routing_tables(graph, &graph.link_weights.clone()).unwrap()
}

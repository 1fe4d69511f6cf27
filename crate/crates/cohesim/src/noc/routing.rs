//! Deterministic table routing: weighted shortest paths under an up*/down*
//! turn restriction, plus the XY baseline for meshes.
//!
//! Links are oriented against a BFS spanning tree rooted at node 0: the
//! endpoint closer to the root (ties to the smaller id) is the "up" end of a
//! link. A legal path climbs zero or more up-hops and then descends zero or
//! more down-hops; the forbidden down-then-up turn is what makes the channel
//! dependency graph acyclic and the routing deadlock-free on any connected
//! topology.
//!
//! A single next-hop entry per (node, destination) cannot represent the
//! optimal legal paths (a node may be a climb waypoint for one source and a
//! descend waypoint for another), so the table keeps two planes and each
//! packet carries one phase bit: plane 0 while still climbing, plane 1 once
//! the first down-hop is taken. With that bit the table reproduces the
//! per-source optimum of a Dijkstra restricted to the same legal-turn set,
//! exactly.

use super::NocError;
use crate::topology::{NetworkGraph, TopologyKind};

pub const NO_HOP: u16 = u16::MAX;

/// Next-hop tables: `plane 0` = no down-hop taken yet, `plane 1` = descending.
#[derive(Debug, Clone)]
pub struct RoutingTables {
    pub node_count: usize,
    /// Indexed `[plane][node * node_count + dst]`; value is the next node id.
    next: [Vec<u16>; 2],
    /// BFS level of each node (root 0), used to classify hop direction.
    level: Vec<u32>,
    xy: bool,
}

impl RoutingTables {
    pub fn next_hop(&self, node: usize, dst: usize, descending: bool) -> Option<usize> {
        if node == dst {
            return None;
        }
        let v = self.next[descending as usize][node * self.node_count + dst];
        (v != NO_HOP).then_some(v as usize)
    }

    /// True when the hop `from -> to` moves away from the root.
    pub fn is_down_hop(&self, from: usize, to: usize) -> bool {
        if self.xy {
            return false; // XY carries no phase; the bit stays clear.
        }
        key(&self.level, from) < key(&self.level, to)
    }

    /// Full path `src -> dst` (inclusive of both endpoints).
    pub fn path(&self, src: usize, dst: usize) -> Result<Vec<usize>, NocError> {
        let mut path = vec![src];
        let mut node = src;
        let mut descending = false;
        while node != dst {
            let next = self
                .next_hop(node, dst, descending)
                .ok_or(NocError::Unreachable { src, dst })?;
            if self.is_down_hop(node, next) {
                descending = true;
            }
            node = next;
            path.push(node);
            if path.len() > self.node_count {
                return Err(NocError::Unreachable { src, dst });
            }
        }
        Ok(path)
    }

    pub fn path_len(&self, src: usize, dst: usize) -> Result<usize, NocError> {
        Ok(self.path(src, dst)?.len() - 1)
    }
}

fn key(level: &[u32], v: usize) -> (u32, usize) {
    (level[v], v)
}

/// BFS levels from node 0 over ascending-id neighbor lists.
pub fn bfs_levels(graph: &NetworkGraph) -> Vec<u32> {
    let n = graph.node_count;
    let mut level = vec![u32::MAX; n];
    let mut queue = std::collections::VecDeque::from([0usize]);
    level[0] = 0;
    while let Some(u) = queue.pop_front() {
        for v in graph.neighbors(u) {
            if level[v] == u32::MAX {
                level[v] = level[u] + 1;
                queue.push_back(v);
            }
        }
    }
    level
}

/// Weighted shortest-path tables restricted to up*/down*-legal turns.
///
/// Ties break to the smallest next-hop node id. Costs accumulate from the
/// destination side (`w + f[next]`), which keeps the floating-point sums
/// bit-identical to a destination-rooted Dijkstra over the same restriction.
pub fn compute_routing_tables(
    graph: &NetworkGraph,
    weights: &[f64],
) -> Result<RoutingTables, NocError> {
    assert_eq!(weights.len(), graph.links.len());
    assert!(
        weights.iter().all(|&w| w > 0.0),
        "link weights must be positive"
    );
    let n = graph.node_count;
    let level = bfs_levels(graph);
    if level.contains(&u32::MAX) {
        return Err(NocError::Unreachable { src: 0, dst: 0 });
    }

    // Adjacency with weights, ascending neighbor id.
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (i, &(a, b)) in graph.links.iter().enumerate() {
        adj[a].push((b, weights[i]));
        adj[b].push((a, weights[i]));
    }
    for list in &mut adj {
        list.sort_unstable_by_key(|&(v, _)| v);
    }

    // Nodes sorted by (level, id): down-hops strictly increase this key,
    // up-hops strictly decrease it, so both passes below are DAG sweeps.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_unstable_by_key(|&v| key(&level, v));

    let mut next = [vec![NO_HOP; n * n], vec![NO_HOP; n * n]];
    let mut f_desc = vec![f64::INFINITY; n]; // descend-only cost to dst
    let mut f_any = vec![f64::INFINITY; n]; // cost of best legal path to dst

    for dst in 0..n {
        f_desc.iter_mut().for_each(|x| *x = f64::INFINITY);
        f_any.iter_mut().for_each(|x| *x = f64::INFINITY);
        f_desc[dst] = 0.0;
        f_any[dst] = 0.0;

        // Plane 1: only down-hops remain. Sweep away from the root so every
        // down-neighbor is final before its uphill nodes look at it.
        for &v in order.iter().rev() {
            if v == dst {
                continue;
            }
            let mut best = f64::INFINITY;
            let mut best_hop = NO_HOP;
            for &(y, w) in &adj[v] {
                if key(&level, v) < key(&level, y) && f_desc[y].is_finite() {
                    let c = w + f_desc[y];
                    if c < best {
                        best = c;
                        best_hop = y as u16;
                    }
                }
            }
            f_desc[v] = best;
            next[1][v * n + dst] = best_hop;
        }

        // Plane 0: may still climb. Sweep from the root down so every
        // up-neighbor's full cost is final first.
        for &v in order.iter() {
            if v == dst {
                continue;
            }
            let mut best = f64::INFINITY;
            let mut best_hop = NO_HOP;
            for &(u, w) in &adj[v] {
                let c = if key(&level, u) < key(&level, v) {
                    w + f_any[u] // up-hop, keep climbing
                } else {
                    w + f_desc[u] // first down-hop commits to descending
                };
                if c < best {
                    best = c;
                    best_hop = u as u16;
                }
            }
            if best_hop == NO_HOP {
                return Err(NocError::Unreachable { src: v, dst });
            }
            f_any[v] = best;
            next[0][v * n + dst] = best_hop;
        }
    }

    Ok(RoutingTables {
        node_count: n,
        next,
        level,
        xy: false,
    })
}

/// Dimension-order (X then Y) baseline; meshes only.
pub fn xy_routing_table(graph: &NetworkGraph) -> Result<RoutingTables, NocError> {
    if graph.kind != TopologyKind::Mesh {
        return Err(NocError::NotAMesh);
    }
    let n = graph.node_count;
    let side = (n as f64).sqrt().round() as usize;
    let mut plane = vec![NO_HOP; n * n];
    for node in 0..n {
        let (x, y) = (node % side, node / side);
        for dst in 0..n {
            if node == dst {
                continue;
            }
            let (dx, dy) = (dst % side, dst / side);
            let next = if x != dx {
                if dx > x {
                    node + 1
                } else {
                    node - 1
                }
            } else if dy > y {
                node + side
            } else {
                node - side
            };
            plane[node * n + dst] = next as u16;
        }
    }
    Ok(RoutingTables {
        node_count: n,
        next: [plane.clone(), plane],
        level: bfs_levels(graph),
        xy: true,
    })
}

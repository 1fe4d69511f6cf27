//! Candidate network topologies and their deterministic construction.
//!
//! Every topology is reduced to a [`NetworkGraph`]: a node set, a canonical
//! ordered list of undirected links, and one positive weight per link. The
//! canonical link order (sorted by `(min endpoint, max endpoint)`) is what the
//! learned weight vector is keyed to, so it must be identical across runs.

use std::fmt;
use std::str::FromStr;

/// The six candidate fabrics. The integer encoding is stable and doubles as
/// the Q-network action index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TopologyKind {
    Crossbar = 0,
    Mesh = 1,
    Pt2Pt = 2,
    Torus = 3,
    FatTree = 4,
    FlattenedButterfly = 5,
}

impl TopologyKind {
    pub const COUNT: usize = 6;

    pub const ALL: [TopologyKind; 6] = [
        TopologyKind::Crossbar,
        TopologyKind::Mesh,
        TopologyKind::Pt2Pt,
        TopologyKind::Torus,
        TopologyKind::FatTree,
        TopologyKind::FlattenedButterfly,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<TopologyKind> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            TopologyKind::Crossbar => "crossbar",
            TopologyKind::Mesh => "mesh",
            TopologyKind::Pt2Pt => "pt2pt",
            TopologyKind::Torus => "torus",
            TopologyKind::FatTree => "fattree",
            TopologyKind::FlattenedButterfly => "flattenedbutterfly",
        }
    }
}

impl fmt::Display for TopologyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TopologyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "crossbar" => Ok(TopologyKind::Crossbar),
            "mesh" => Ok(TopologyKind::Mesh),
            "pt2pt" => Ok(TopologyKind::Pt2Pt),
            "torus" => Ok(TopologyKind::Torus),
            "fattree" => Ok(TopologyKind::FatTree),
            "flattenedbutterfly" | "flatbfly" => Ok(TopologyKind::FlattenedButterfly),
            other => Err(format!("unknown topology kind: {other}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TopologyError {
    UnsupportedCoreCount { kind: TopologyKind, cores: usize },
}

impl fmt::Display for TopologyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TopologyError::UnsupportedCoreCount { kind, cores } => {
                write!(f, "unsupported core count {cores} for {kind}")
            }
        }
    }
}

impl std::error::Error for TopologyError {}

/// A network substrate: routers, canonical undirected links, per-link weights.
///
/// Core nodes (id `0..cores`) host a core, an L1 and a directory slice;
/// Crossbar and FatTree additionally contain switch-only nodes with higher
/// ids. Links are stored sorted by `(min endpoint, max endpoint)` and every
/// link is traversable in both directions.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkGraph {
    pub kind: TopologyKind,
    pub node_count: usize,
    pub core_nodes: Vec<usize>,
    pub links: Vec<(usize, usize)>,
    pub link_weights: Vec<f64>,
}

impl NetworkGraph {
    pub fn cores(&self) -> usize {
        self.core_nodes.len()
    }

    /// Neighbors of `node` in ascending id order.
    pub fn neighbors(&self, node: usize) -> Vec<usize> {
        let mut out = Vec::new();
        for &(a, b) in &self.links {
            if a == node {
                out.push(b);
            } else if b == node {
                out.push(a);
            }
        }
        out.sort_unstable();
        out
    }

    /// Index into `links`/`link_weights` for the undirected pair, if present.
    pub fn link_index(&self, a: usize, b: usize) -> Option<usize> {
        let key = (a.min(b), a.max(b));
        self.links.binary_search(&key).ok()
    }

    pub fn weight_between(&self, a: usize, b: usize) -> Option<f64> {
        self.link_index(a, b).map(|i| self.link_weights[i])
    }

    pub fn set_weights(&mut self, weights: &[f64]) {
        assert_eq!(weights.len(), self.links.len());
        self.link_weights.copy_from_slice(weights);
    }

    /// Text edge list: header "kind cores nodes links", then "a b weight" per link.
    pub fn to_edge_list(&self) -> String {
        let mut s = format!(
            "{} {} {} {}\n",
            self.kind,
            self.cores(),
            self.node_count,
            self.links.len()
        );
        for (i, &(a, b)) in self.links.iter().enumerate() {
            s.push_str(&format!("{} {} {}\n", a, b, self.link_weights[i]));
        }
        s
    }

    /// Parse the `to_edge_list` format back into a graph.
    pub fn from_edge_list(text: &str) -> Result<NetworkGraph, String> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or("empty edge list")?;
        let mut parts = header.split_whitespace();
        let kind: TopologyKind = parts.next().ok_or("missing kind")?.parse()?;
        let cores: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or("bad core count")?;
        let nodes: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or("bad node count")?;
        let link_count: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or("bad link count")?;
        let mut links = Vec::with_capacity(link_count);
        let mut weights = Vec::with_capacity(link_count);
        for line in lines {
            let mut p = line.split_whitespace();
            let a: usize = p.next().and_then(|s| s.parse().ok()).ok_or("bad link")?;
            let b: usize = p.next().and_then(|s| s.parse().ok()).ok_or("bad link")?;
            let w: f64 = p.next().and_then(|s| s.parse().ok()).ok_or("bad weight")?;
            links.push((a.min(b), a.max(b)));
            weights.push(w);
        }
        if links.len() != link_count {
            return Err(format!(
                "edge list declares {link_count} links, found {}",
                links.len()
            ));
        }
        Ok(NetworkGraph {
            kind,
            node_count: nodes,
            core_nodes: (0..cores).collect(),
            links,
            link_weights: weights,
        })
    }
}

/// Diagnostic output of [`validate`]; an empty `violations` list means valid.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub connected: bool,
    pub degree_histogram: Vec<usize>,
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

fn is_perfect_square(n: usize) -> Option<usize> {
    let r = (n as f64).sqrt().round() as usize;
    (r * r == n).then_some(r)
}

/// Build one of the six candidate topologies for the given core count.
///
/// Core nodes are always `0..cores`; link weights start at 1.0 so untrained
/// routing is plain hop-count shortest path.
pub fn build_topology(kind: TopologyKind, cores: usize) -> Result<NetworkGraph, TopologyError> {
    let err = || TopologyError::UnsupportedCoreCount { kind, cores };
    let mut links: Vec<(usize, usize)> = Vec::new();
    let push = |links: &mut Vec<(usize, usize)>, a: usize, b: usize| {
        if a != b {
            let key = (a.min(b), a.max(b));
            if !links.contains(&key) {
                links.push(key);
            }
        }
    };
    let node_count = match kind {
        TopologyKind::Mesh | TopologyKind::Torus | TopologyKind::FlattenedButterfly => {
            if !matches!(cores, 4 | 16 | 64) {
                return Err(err());
            }
            let n = is_perfect_square(cores).ok_or_else(err)?;
            let id = |x: usize, y: usize| y * n + x;
            for y in 0..n {
                for x in 0..n {
                    match kind {
                        TopologyKind::Mesh => {
                            if x + 1 < n {
                                push(&mut links, id(x, y), id(x + 1, y));
                            }
                            if y + 1 < n {
                                push(&mut links, id(x, y), id(x, y + 1));
                            }
                        }
                        TopologyKind::Torus => {
                            // Wraparound rings; for n = 2 the wrap link
                            // coincides with the grid link and collapses.
                            push(&mut links, id(x, y), id((x + 1) % n, y));
                            push(&mut links, id(x, y), id(x, (y + 1) % n));
                        }
                        TopologyKind::FlattenedButterfly => {
                            for x2 in x + 1..n {
                                push(&mut links, id(x, y), id(x2, y));
                            }
                            for y2 in y + 1..n {
                                push(&mut links, id(x, y), id(x, y2));
                            }
                        }
                        _ => unreachable!(),
                    }
                }
            }
            cores
        }
        TopologyKind::Pt2Pt => {
            if cores < 2 {
                return Err(err());
            }
            for a in 0..cores {
                for b in a + 1..cores {
                    push(&mut links, a, b);
                }
            }
            cores
        }
        TopologyKind::Crossbar => {
            if cores < 2 {
                return Err(err());
            }
            let switch = cores;
            for c in 0..cores {
                push(&mut links, c, switch);
            }
            cores + 1
        }
        TopologyKind::FatTree => {
            // Complete binary tree over the cores; leaves are the cores,
            // internal switches get the ids above them, root last.
            if cores < 2 || !cores.is_power_of_two() {
                return Err(err());
            }
            let mut level: Vec<usize> = (0..cores).collect();
            let mut next_id = cores;
            while level.len() > 1 {
                let mut parents = Vec::with_capacity(level.len() / 2);
                for pair in level.chunks(2) {
                    push(&mut links, pair[0], next_id);
                    push(&mut links, pair[1], next_id);
                    parents.push(next_id);
                    next_id += 1;
                }
                level = parents;
            }
            next_id
        }
    };
    links.sort_unstable();
    let weights = vec![1.0; links.len()];
    Ok(NetworkGraph {
        kind,
        node_count,
        core_nodes: (0..cores).collect(),
        links,
        link_weights: weights,
    })
}

/// Check the graph invariants and report violations without failing.
pub fn validate(graph: &NetworkGraph) -> ValidationReport {
    let mut report = ValidationReport::default();
    let n = graph.node_count;
    let mut degree = vec![0usize; n];
    let mut seen = std::collections::BTreeSet::new();
    for (i, &(a, b)) in graph.links.iter().enumerate() {
        if a == b {
            report.violations.push(format!("self-loop at node {a}"));
            continue;
        }
        if a >= n || b >= n {
            report
                .violations
                .push(format!("link ({a},{b}) out of node range"));
            continue;
        }
        if !seen.insert((a, b)) {
            report.violations.push(format!("duplicate link ({a},{b})"));
        }
        if a > b || (i > 0 && graph.links[i - 1] > (a, b)) {
            report
                .violations
                .push(format!("non-canonical link order at ({a},{b})"));
        }
        degree[a] += 1;
        degree[b] += 1;
    }
    if graph.link_weights.len() != graph.links.len() {
        report.violations.push("weight/link length mismatch".into());
    }
    for (i, &w) in graph.link_weights.iter().enumerate() {
        if w.is_nan() || w <= 0.0 {
            report
                .violations
                .push(format!("nonpositive weight on link {i}"));
        }
    }
    // Connectivity by BFS from node 0.
    let mut visited = vec![false; n.max(1)];
    if n > 0 {
        let mut queue = std::collections::VecDeque::from([0usize]);
        visited[0] = true;
        while let Some(u) = queue.pop_front() {
            for v in graph.neighbors(u) {
                if v < n && !visited[v] {
                    visited[v] = true;
                    queue.push_back(v);
                }
            }
        }
    }
    report.connected = visited.iter().all(|&v| v);
    if !report.connected {
        report.violations.push("disconnected".into());
    }
    let max_deg = degree.iter().copied().max().unwrap_or(0);
    let mut hist = vec![0usize; max_deg + 1];
    for &d in &degree {
        hist[d] += 1;
    }
    report.degree_histogram = hist;
    report
}

/// The canonical link sequence; its length is the weight-head output
/// dimension for this graph. Pure: equal graphs yield identical sequences.
pub fn enumerate_links(graph: &NetworkGraph) -> Vec<(usize, usize)> {
    graph.links.clone()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn link_counts_match_closed_forms() {
        let cases = [
            (TopologyKind::Mesh, 16, 16, 24),
            (TopologyKind::Pt2Pt, 16, 16, 120),
            (TopologyKind::Torus, 16, 16, 32),
            (TopologyKind::FatTree, 16, 31, 30),
            (TopologyKind::FlattenedButterfly, 16, 16, 48),
            (TopologyKind::Crossbar, 16, 17, 16),
            (TopologyKind::Mesh, 64, 64, 112),
            (TopologyKind::Torus, 64, 64, 128),
            (TopologyKind::FatTree, 64, 127, 126),
            (TopologyKind::FlattenedButterfly, 64, 64, 448),
            (TopologyKind::Pt2Pt, 4, 4, 6),
            (TopologyKind::Mesh, 4, 4, 4),
        ];
        for (kind, cores, nodes, links) in cases {
            let g = build_topology(kind, cores).unwrap();
            assert_eq!(g.node_count, nodes, "{kind} {cores} node count");
            assert_eq!(g.links.len(), links, "{kind} {cores} link count");
            assert_eq!(g.cores(), cores);
            assert!(g.link_weights.iter().all(|&w| w == 1.0));
        }
    }

    #[test]
    fn torus_two_by_two_collapses_wraparound() {
        // A 2-node ring folds onto the grid link, so the 2x2 torus equals the
        // 2x2 mesh; the 2n^2 closed form only holds from n = 3 up.
        let g = build_topology(TopologyKind::Torus, 4).unwrap();
        assert_eq!(g.links, vec![(0, 1), (0, 2), (1, 3), (2, 3)]);
    }

    #[test]
    fn all_supported_builds_validate_clean() {
        let mut checked = 0;
        for kind in TopologyKind::ALL {
            for cores in [4usize, 16, 64] {
                let g = match build_topology(kind, cores) {
                    Ok(g) => g,
                    Err(_) => continue,
                };
                let report = validate(&g);
                assert!(report.is_valid(), "{kind} {cores}: {:?}", report.violations);
                checked += 1;
            }
        }
        assert_eq!(checked, 18);
    }

    #[test]
    fn degree_bounds() {
        let mesh = build_topology(TopologyKind::Mesh, 16).unwrap();
        for node in 0..16 {
            let d = mesh.neighbors(node).len();
            assert!((2..=4).contains(&d), "mesh degree {d}");
        }
        for cores in [16usize, 64] {
            let torus = build_topology(TopologyKind::Torus, cores).unwrap();
            for node in 0..cores {
                assert_eq!(torus.neighbors(node).len(), 4, "torus degree");
            }
        }
    }

    #[test]
    fn unsupported_core_counts_rejected() {
        assert!(build_topology(TopologyKind::Mesh, 9).is_err());
        assert!(build_topology(TopologyKind::Torus, 25).is_err());
        assert!(build_topology(TopologyKind::FatTree, 12).is_err());
        assert!(build_topology(TopologyKind::Pt2Pt, 1).is_err());
        assert!(build_topology(TopologyKind::Crossbar, 0).is_err());
    }

    #[test]
    fn canonical_link_enumeration() {
        let mesh = build_topology(TopologyKind::Mesh, 16).unwrap();
        let links = enumerate_links(&mesh);
        assert_eq!(links.len(), 24);
        assert_eq!(&links[..3], &[(0, 1), (0, 4), (1, 2)]);
        // Pure function: a rebuild yields the identical sequence.
        let again = enumerate_links(&build_topology(TopologyKind::Mesh, 16).unwrap());
        assert_eq!(links, again);

        let p = build_topology(TopologyKind::Pt2Pt, 4).unwrap();
        assert_eq!(
            enumerate_links(&p),
            vec![(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
        );

        let xbar = build_topology(TopologyKind::Crossbar, 4).unwrap();
        assert_eq!(enumerate_links(&xbar), vec![(0, 4), (1, 4), (2, 4), (3, 4)]);
    }

    #[test]
    fn validate_flags_bad_graphs() {
        let mut g = build_topology(TopologyKind::Mesh, 16).unwrap();
        assert!(validate(&g).is_valid());

        let mut disconnected = g.clone();
        disconnected.node_count += 1;
        let r = validate(&disconnected);
        assert!(r.violations.iter().any(|v| v.contains("disconnected")));

        g.link_weights[3] = 0.0;
        let r = validate(&g);
        assert!(r.violations.iter().any(|v| v.contains("nonpositive")));
    }

    #[test]
    fn edge_list_round_trip() {
        let g = build_topology(TopologyKind::FlattenedButterfly, 16).unwrap();
        let text = g.to_edge_list();
        assert!(text.starts_with("flattenedbutterfly 16 16 48\n"));
        let parsed = NetworkGraph::from_edge_list(&text).unwrap();
        assert_eq!(parsed, g);
    }

    #[test]
    fn action_index_encoding_is_stable() {
        assert_eq!(TopologyKind::Crossbar.index(), 0);
        assert_eq!(TopologyKind::Mesh.index(), 1);
        assert_eq!(TopologyKind::Pt2Pt.index(), 2);
        assert_eq!(TopologyKind::Torus.index(), 3);
        assert_eq!(TopologyKind::FatTree.index(), 4);
        assert_eq!(TopologyKind::FlattenedButterfly.index(), 5);
        assert_eq!(
            TopologyKind::from_index(5),
            Some(TopologyKind::FlattenedButterfly)
        );
        assert_eq!(TopologyKind::from_index(6), None);
    }
}

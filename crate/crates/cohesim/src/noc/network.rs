//! The router pipeline and cycle loop.
//!
//! Each cycle runs, in order: credit returns from the previous cycle, link
//! traversal (arrivals eject at their destination), switch allocation and
//! traversal (one flit per output port, round-robin), route lookup for new
//! head flits, then injection from the per-node source queues. A head flit
//! therefore spends one cycle being routed and leaves on the next, giving the
//! 1-cycle-router + 1-cycle-link hop time.

use super::routing::RoutingTables;
use super::{
    NocError, NocMetrics, Packet, PacketId, VirtualNet, VCS_PER_PORT, VC_DEPTH, WATCHDOG_CYCLES,
};
use crate::coherence::msg::CoherenceMessage;
use crate::topology::NetworkGraph;
use std::collections::VecDeque;
use std::io::Write;

#[derive(Debug, Clone, Copy)]
struct Flit {
    pkt: u32,
    seq: u8,
}

impl Flit {
    fn is_head(self) -> bool {
        self.seq == 0
    }
}

#[derive(Debug, Default)]
struct InputVc {
    fifo: VecDeque<Flit>,
    /// Output port assigned to the packet at the head of this VC.
    out_port: Option<u8>,
    /// Downstream VC held by that packet, once allocated.
    out_vc: Option<u8>,
}

#[derive(Debug, Clone, Copy)]
struct OutVcState {
    credits: u8,
    held_by: Option<u32>,
}

impl Default for OutVcState {
    fn default() -> Self {
        OutVcState {
            credits: VC_DEPTH as u8,
            held_by: None,
        }
    }
}

#[derive(Debug)]
struct Router {
    /// Neighbor node per port, ascending id; the injection port comes last.
    neighbors: Vec<usize>,
    /// `inputs[port][vc]`; `port == neighbors.len()` is the injection port.
    inputs: Vec<Vec<InputVc>>,
    /// Credit/hold state toward each neighbor, `out[port][vc]`.
    out: Vec<Vec<OutVcState>>,
    /// Round-robin pointer per output port over flattened (in_port, vc).
    rr: Vec<usize>,
    inj_rr: usize,
}

#[derive(Debug)]
struct Wire {
    to: usize,
    in_port_at_to: u8,
    from: usize,
    out_port_at_from: u8,
    slot: Option<(Flit, u8)>,
}

/// Per-node injection stream: packet currently claiming an injection VC and
/// the next flit sequence number to push.
type InjStream = Option<(u32, u8)>;

#[derive(Debug, Clone)]
pub struct NetworkConfig {
    /// Assert packet/credit conservation every cycle.
    pub check_invariants: bool,
    /// Record traversed paths and verify them against the tables on ejection.
    pub check_paths: bool,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            check_invariants: cfg!(debug_assertions),
            check_paths: false,
        }
    }
}

#[derive(Debug, Default)]
pub struct CycleEvents {
    pub ejected: Vec<PacketId>,
}

pub struct Network {
    pub graph: NetworkGraph,
    pub tables: RoutingTables,
    config: NetworkConfig,
    cycle: u64,
    routers: Vec<Router>,
    wires: Vec<Wire>,
    /// Wire index for (node, out port).
    wire_of: Vec<Vec<usize>>,
    packets: Vec<Packet>,
    /// Waiting packets per node per vnet.
    src_queues: Vec<[VecDeque<u32>; 3]>,
    /// Active injection stream per node per injection VC.
    inj_streams: Vec<[InjStream; VCS_PER_PORT]>,
    /// Credit returns generated this cycle, applied at the next cycle start.
    pending_credits: Vec<(usize, u8, u8)>,
    queued_packets: u64,
    injected_packets: u64,
    ejected_packets: u64,
    flits_in_network: u64,
    last_move_cycle: u64,
    /// (ejection cycle, packet index), in ejection order.
    ejection_log: Vec<(u64, u32)>,
    /// Total wire deliveries per cycle, for windowed utilization.
    per_cycle_hops: Vec<u32>,
    pub link_flits_total: Vec<u64>,
    link_flits_window: Vec<u64>,
    window_start: u64,
    window_router_traversals: u64,
    window_flit_hops: u64,
    pub total_router_traversals: u64,
    pub total_flit_hops: u64,
    pub event_log: Option<Box<dyn Write>>,
}

impl Network {
    pub fn new(graph: NetworkGraph, tables: RoutingTables, config: NetworkConfig) -> Network {
        let n = graph.node_count;
        let mut routers = Vec::with_capacity(n);
        let mut wire_of = vec![Vec::new(); n];
        let mut wires = Vec::new();
        for node in 0..n {
            let neighbors = graph.neighbors(node);
            let ports = neighbors.len() + 1; // + injection port
            let inputs = (0..ports)
                .map(|_| (0..VCS_PER_PORT).map(|_| InputVc::default()).collect())
                .collect();
            let out = vec![vec![OutVcState::default(); VCS_PER_PORT]; neighbors.len()];
            let rr = vec![ports * VCS_PER_PORT - 1; neighbors.len()];
            routers.push(Router {
                neighbors,
                inputs,
                out,
                rr,
                inj_rr: VCS_PER_PORT - 1,
            });
        }
        // One wire per direction per link; in-port index at the receiver is
        // the receiver's port toward the sender.
        for node in 0..n {
            wire_of[node] = vec![usize::MAX; routers[node].neighbors.len()];
            for (port, &nb) in routers[node].neighbors.iter().enumerate() {
                let in_port = routers[nb]
                    .neighbors
                    .iter()
                    .position(|&x| x == node)
                    .unwrap();
                wire_of[node][port] = wires.len();
                wires.push(Wire {
                    to: nb,
                    in_port_at_to: in_port as u8,
                    from: node,
                    out_port_at_from: port as u8,
                    slot: None,
                });
            }
        }
        let wire_count = wires.len();
        Network {
            graph,
            tables,
            config,
            cycle: 0,
            routers,
            wires,
            wire_of,
            packets: Vec::new(),
            src_queues: vec![Default::default(); n],
            inj_streams: vec![[None; VCS_PER_PORT]; n],
            pending_credits: Vec::new(),
            queued_packets: 0,
            injected_packets: 0,
            ejected_packets: 0,
            flits_in_network: 0,
            last_move_cycle: 0,
            ejection_log: Vec::new(),
            per_cycle_hops: Vec::new(),
            link_flits_total: vec![0; wire_count],
            link_flits_window: vec![0; wire_count],
            window_start: 0,
            window_router_traversals: 0,
            window_flit_hops: 0,
            total_router_traversals: 0,
            total_flit_hops: 0,
            event_log: None,
        }
    }

    pub fn cycle(&self) -> u64 {
        self.cycle
    }

    /// Start the clock at a later cycle (used when a fresh network replaces a
    /// drained one mid-run, so timestamps stay on one timeline).
    pub fn set_start_cycle(&mut self, cycle: u64) {
        assert!(self.cycle == 0 && self.packets.is_empty());
        self.cycle = cycle;
        self.window_start = cycle;
        self.last_move_cycle = cycle;
    }

    pub fn packet(&self, id: PacketId) -> &Packet {
        &self.packets[id as usize]
    }

    pub fn packets(&self) -> &[Packet] {
        &self.packets
    }

    pub fn injected_count(&self) -> u64 {
        self.injected_packets
    }

    pub fn ejected_count(&self) -> u64 {
        self.ejected_packets
    }

    /// Flits buffered or on wires, plus packets still queued at sources.
    pub fn is_empty(&self) -> bool {
        self.flits_in_network == 0
            && self.queued_packets == 0
            && self
                .inj_streams
                .iter()
                .all(|s| s.iter().all(Option::is_none))
    }

    /// Queue a packet at its source node. Injection queues are unbounded;
    /// backpressure starts at the first router's buffers.
    pub fn inject(
        &mut self,
        src: usize,
        dst: usize,
        vnet: VirtualNet,
        flit_count: u8,
        msg: Option<CoherenceMessage>,
    ) -> PacketId {
        assert!(src < self.graph.node_count && dst < self.graph.node_count && src != dst);
        assert!(flit_count == 1 || flit_count == 5);
        let id = self.packets.len() as u32;
        let route_hops = self
            .tables
            .path_len(src, dst)
            .expect("valid graphs route all pairs") as u32;
        self.packets.push(Packet {
            id: id as PacketId,
            src,
            dst,
            vnet,
            flit_count,
            creation_cycle: self.cycle,
            injection_cycle: None,
            ejection_cycle: None,
            msg,
            route_hops,
            descending: false,
            trace: if self.config.check_paths {
                vec![src]
            } else {
                Vec::new()
            },
        });
        self.src_queues[src][vnet as usize].push_back(id);
        self.queued_packets += 1;
        self.log(self.cycle, "create", id as u64, src);
        id as PacketId
    }

    fn log(&mut self, cycle: u64, kind: &str, pkt: u64, node: usize) {
        if let Some(w) = self.event_log.as_mut() {
            let _ = writeln!(w, "{cycle},{kind},{pkt},{node}");
        }
    }

    /// Start a metrics window at the current cycle.
    pub fn begin_window(&mut self) {
        self.window_start = self.cycle;
        self.link_flits_window.iter_mut().for_each(|x| *x = 0);
        self.window_router_traversals = 0;
        self.window_flit_hops = 0;
    }

    pub fn window_energy_counters(&self) -> (u64, u64) {
        (self.window_flit_hops, self.window_router_traversals)
    }

    /// Apply the credit returns generated during the previous cycle.
    pub fn begin_cycle(&mut self) {
        let pending = std::mem::take(&mut self.pending_credits);
        for (node, port, vc) in pending {
            self.routers[node].out[port as usize][vc as usize].credits += 1;
        }
    }

    /// Link-traversal phase: deliver wire flits, ejecting at destinations.
    pub fn deliver(&mut self) -> CycleEvents {
        let mut events = CycleEvents::default();
        let mut hops_this_cycle = 0u32;
        for w in 0..self.wires.len() {
            let Some((flit, vc)) = self.wires[w].slot.take() else {
                continue;
            };
            hops_this_cycle += 1;
            self.link_flits_total[w] += 1;
            self.link_flits_window[w] += 1;
            self.window_flit_hops += 1;
            self.total_flit_hops += 1;
            self.last_move_cycle = self.cycle;
            let to = self.wires[w].to;
            let from = self.wires[w].from;
            let out_port = self.wires[w].out_port_at_from;
            let pkt = &mut self.packets[flit.pkt as usize];
            if self.config.check_paths && flit.is_head() {
                pkt.trace.push(to);
            }
            if pkt.dst == to {
                // Consumed on arrival; the buffer slot is never used, so the
                // credit goes straight back to the sender.
                self.pending_credits.push((from, out_port, vc));
                self.flits_in_network -= 1;
                if flit.seq == pkt.flit_count - 1 {
                    pkt.ejection_cycle = Some(self.cycle);
                    let id = pkt.id;
                    self.ejected_packets += 1;
                    self.ejection_log.push((self.cycle, flit.pkt));
                    events.ejected.push(id);
                    if self.config.check_paths {
                        let expect = self.tables.path(pkt.src, pkt.dst).unwrap();
                        assert_eq!(
                            self.packets[flit.pkt as usize].trace, expect,
                            "packet misrouted"
                        );
                    }
                    self.log(self.cycle, "eject", id, to);
                }
            } else {
                let in_port = self.wires[w].in_port_at_to as usize;
                let fifo = &mut self.routers[to].inputs[in_port][vc as usize];
                debug_assert!(fifo.fifo.len() < VC_DEPTH, "vc overflow");
                fifo.fifo.push_back(flit);
            }
        }
        if self.per_cycle_hops.len() as u64 <= self.cycle {
            self.per_cycle_hops.resize(self.cycle as usize + 1, 0);
        }
        self.per_cycle_hops[self.cycle as usize] = hops_this_cycle;
        events
    }

    /// Switch allocation + traversal, route lookup, injection; ends the cycle.
    pub fn finish_cycle(&mut self) -> Result<(), NocError> {
        self.switch_phase();
        self.route_phase();
        self.inject_phase();
        if self.config.check_invariants {
            self.assert_conservation();
        }
        if self.flits_in_network > 0 && self.cycle - self.last_move_cycle >= WATCHDOG_CYCLES {
            return Err(NocError::DeadlockSuspected { cycle: self.cycle });
        }
        self.cycle += 1;
        Ok(())
    }

    /// Advance one full cycle (standalone use; system simulation interleaves
    /// controller work between `deliver` and `finish_cycle`).
    pub fn step(&mut self) -> Result<CycleEvents, NocError> {
        self.begin_cycle();
        let events = self.deliver();
        self.finish_cycle()?;
        Ok(events)
    }

    /// Step until the network is empty; returns the number of packets still
    /// in flight (0 on success).
    pub fn drain(&mut self) -> Result<u64, NocError> {
        while !self.is_empty() {
            self.step()?;
        }
        Ok(0)
    }

    fn switch_phase(&mut self) {
        for node in 0..self.routers.len() {
            let ports = self.routers[node].neighbors.len();
            let cand_count = (ports + 1) * VCS_PER_PORT;
            for out_port in 0..ports {
                let start = self.routers[node].rr[out_port];
                let mut granted = None;
                for i in 1..=cand_count {
                    let flat = (start + i) % cand_count;
                    let (in_port, vc) = (flat / VCS_PER_PORT, flat % VCS_PER_PORT);
                    if self.eligible(node, in_port, vc, out_port) {
                        granted = Some((flat, in_port, vc));
                        break;
                    }
                }
                let Some((flat, in_port, vc)) = granted else {
                    continue;
                };
                self.routers[node].rr[out_port] = flat;
                self.send_flit(node, in_port, vc, out_port);
            }
        }
    }

    fn eligible(&self, node: usize, in_port: usize, vc: usize, out_port: usize) -> bool {
        let ivc = &self.routers[node].inputs[in_port][vc];
        let Some(&flit) = ivc.fifo.front() else {
            return false;
        };
        if ivc.out_port != Some(out_port as u8) {
            return false;
        }
        match ivc.out_vc {
            Some(ovc) => self.routers[node].out[out_port][ovc as usize].credits > 0,
            None => {
                debug_assert!(flit.is_head());
                self.pick_out_vc(node, out_port, self.packets[flit.pkt as usize].vnet)
                    .is_some()
            }
        }
    }

    /// Lowest-index VC of the class not held by another packet and with a
    /// free downstream slot. Packets may queue back-to-back in one buffer;
    /// the hold keeps their flits contiguous.
    fn pick_out_vc(&self, node: usize, out_port: usize, vnet: VirtualNet) -> Option<u8> {
        vnet.vcs()
            .iter()
            .copied()
            .find(|&v| {
                let s = &self.routers[node].out[out_port][v];
                s.held_by.is_none() && s.credits > 0
            })
            .map(|v| v as u8)
    }

    fn send_flit(&mut self, node: usize, in_port: usize, vc: usize, out_port: usize) {
        let flit = {
            let ivc = &mut self.routers[node].inputs[in_port][vc];
            ivc.fifo.pop_front().unwrap()
        };
        let pkt_idx = flit.pkt as usize;
        let out_vc = match self.routers[node].inputs[in_port][vc].out_vc {
            Some(v) => v,
            None => {
                let v = self
                    .pick_out_vc(node, out_port, self.packets[pkt_idx].vnet)
                    .unwrap();
                self.routers[node].inputs[in_port][vc].out_vc = Some(v);
                self.routers[node].out[out_port][v as usize].held_by = Some(flit.pkt);
                v
            }
        };
        let state = &mut self.routers[node].out[out_port][out_vc as usize];
        debug_assert!(state.credits > 0);
        state.credits -= 1;
        let is_tail = flit.seq == self.packets[pkt_idx].flit_count - 1;
        if is_tail {
            state.held_by = None;
            let ivc = &mut self.routers[node].inputs[in_port][vc];
            ivc.out_port = None;
            ivc.out_vc = None;
        }
        if flit.is_head() {
            let next = self.routers[node].neighbors[out_port];
            if self.tables.is_down_hop(node, next) {
                self.packets[pkt_idx].descending = true;
            }
        }
        // Vacating a buffer slot returns a credit upstream; the injection
        // port has no upstream.
        if in_port < self.routers[node].neighbors.len() {
            let nb = self.routers[node].neighbors[in_port];
            let nb_port = self.routers[nb]
                .neighbors
                .iter()
                .position(|&x| x == node)
                .unwrap();
            self.pending_credits.push((nb, nb_port as u8, vc as u8));
        }
        let wire = self.wire_of[node][out_port];
        debug_assert!(self.wires[wire].slot.is_none());
        self.wires[wire].slot = Some((flit, out_vc));
        self.window_router_traversals += 1;
        self.total_router_traversals += 1;
        self.last_move_cycle = self.cycle;
    }

    /// Assign output ports to head flits that reached the front of a VC.
    fn route_phase(&mut self) {
        for node in 0..self.routers.len() {
            let ports = self.routers[node].inputs.len();
            for in_port in 0..ports {
                for vc in 0..VCS_PER_PORT {
                    let ivc = &self.routers[node].inputs[in_port][vc];
                    let Some(&flit) = ivc.fifo.front() else {
                        continue;
                    };
                    if !flit.is_head() || ivc.out_port.is_some() {
                        continue;
                    }
                    let pkt = &self.packets[flit.pkt as usize];
                    let next = self
                        .tables
                        .next_hop(node, pkt.dst, pkt.descending)
                        .expect("routable");
                    let out_port = self.routers[node]
                        .neighbors
                        .iter()
                        .position(|&x| x == next)
                        .expect("next hop is a neighbor") as u8;
                    self.routers[node].inputs[in_port][vc].out_port = Some(out_port);
                }
            }
        }
    }

    fn inject_phase(&mut self) {
        for node in 0..self.routers.len() {
            let inj_port = self.routers[node].neighbors.len();
            // Claim idle injection VCs for waiting packets, per vnet.
            for vnet in [
                VirtualNet::Request,
                VirtualNet::Forward,
                VirtualNet::Response,
            ] {
                while let Some(&pkt) = self.src_queues[node][vnet as usize].front() {
                    let free = vnet.vcs().iter().copied().find(|&v| {
                        self.inj_streams[node][v].is_none()
                            && self.routers[node].inputs[inj_port][v].fifo.len() < VC_DEPTH
                    });
                    let Some(v) = free else { break };
                    self.inj_streams[node][v] = Some((pkt, 0));
                    self.src_queues[node][vnet as usize].pop_front();
                    self.queued_packets -= 1;
                }
            }
            // One flit per node per cycle, round-robin over injection VCs.
            let start = self.routers[node].inj_rr;
            for i in 1..=VCS_PER_PORT {
                let v = (start + i) % VCS_PER_PORT;
                let Some((pkt, seq)) = self.inj_streams[node][v] else {
                    continue;
                };
                if self.routers[node].inputs[inj_port][v].fifo.len() >= VC_DEPTH {
                    continue;
                }
                self.routers[node].inputs[inj_port][v]
                    .fifo
                    .push_back(Flit { pkt, seq });
                self.flits_in_network += 1;
                self.last_move_cycle = self.cycle;
                if seq == 0 {
                    self.packets[pkt as usize].injection_cycle = Some(self.cycle);
                    self.injected_packets += 1;
                    let (id, src) = (self.packets[pkt as usize].id, node);
                    self.log(self.cycle, "inject", id, src);
                }
                if seq + 1 == self.packets[pkt as usize].flit_count {
                    self.inj_streams[node][v] = None;
                } else {
                    self.inj_streams[node][v] = Some((pkt, seq + 1));
                }
                self.routers[node].inj_rr = v;
                break;
            }
        }
    }

    fn assert_conservation(&self) {
        let buffered: u64 = self
            .routers
            .iter()
            .flat_map(|r| r.inputs.iter())
            .flat_map(|p| p.iter())
            .map(|vc| vc.fifo.len() as u64)
            .sum();
        let on_wire: u64 = self.wires.iter().filter(|w| w.slot.is_some()).count() as u64;
        assert_eq!(self.flits_in_network, buffered + on_wire, "flit accounting");
        // Packet conservation: injected = ejected + in flight.
        let in_flight = self
            .packets
            .iter()
            .filter(|p| p.injection_cycle.is_some() && p.ejection_cycle.is_none())
            .count() as u64;
        assert_eq!(
            self.injected_packets,
            self.ejected_packets + in_flight,
            "packet conservation"
        );
        // Credit conservation per (wire, vc): sender credits + slot occupancy
        // + receiver buffer + unapplied returns add to the buffer depth.
        for (wi, w) in self.wires.iter().enumerate() {
            for vc in 0..VCS_PER_PORT {
                let credits =
                    self.routers[w.from].out[w.out_port_at_from as usize][vc].credits as usize;
                let in_flight = match w.slot {
                    Some((_, v)) if v as usize == vc => 1,
                    _ => 0,
                };
                let occupancy = self.routers[w.to].inputs[w.in_port_at_to as usize][vc]
                    .fifo
                    .len();
                let pending = self
                    .pending_credits
                    .iter()
                    .filter(|&&(n, p, v)| {
                        n == w.from && p == w.out_port_at_from && v as usize == vc
                    })
                    .count();
                assert_eq!(
                    credits + in_flight + occupancy + pending,
                    VC_DEPTH,
                    "credit conservation on wire {wi} vc {vc}"
                );
            }
        }
    }

    /// Aggregate metrics over `[window.0, window.1)` by ejection cycle.
    pub fn collect_metrics(&self, window: (u64, u64)) -> NocMetrics {
        let (start, end) = window;
        let lo = self.ejection_log.partition_point(|&(c, _)| c < start);
        let hi = self.ejection_log.partition_point(|&(c, _)| c < end);
        let mut latency_sum = 0u64;
        let mut delay_sum = 0u64;
        for &(_, pkt) in &self.ejection_log[lo..hi] {
            let p = &self.packets[pkt as usize];
            let lat = p.latency().unwrap();
            latency_sum += lat;
            delay_sum += lat - p.zero_load();
        }
        let ejected = (hi - lo) as u64;
        let injected = self
            .packets
            .iter()
            .filter(|p| matches!(p.injection_cycle, Some(c) if c >= start && c < end))
            .count() as u64;
        let hops: u64 = self
            .per_cycle_hops
            .iter()
            .take(end.min(self.per_cycle_hops.len() as u64) as usize)
            .skip(start as usize)
            .map(|&h| h as u64)
            .sum();
        let span = end.saturating_sub(start);
        let capacity = (self.wires.len() as u64) * span;
        // Window per-link counts are only tracked from the last begin_window;
        // for matching windows they are exact, otherwise fall back to totals.
        let link_flits: Vec<u64> = if start == self.window_start {
            let mut v = vec![0u64; self.graph.links.len()];
            for (wi, w) in self.wires.iter().enumerate() {
                let li = self.graph.link_index(w.from, w.to).unwrap();
                v[li] += self.link_flits_window[wi];
            }
            v
        } else {
            let mut v = vec![0u64; self.graph.links.len()];
            for (wi, w) in self.wires.iter().enumerate() {
                let li = self.graph.link_index(w.from, w.to).unwrap();
                v[li] += self.link_flits_total[wi];
            }
            v
        };
        NocMetrics {
            latency_avg: if ejected > 0 {
                latency_sum as f64 / ejected as f64
            } else {
                0.0
            },
            delay_avg: if ejected > 0 {
                delay_sum as f64 / ejected as f64
            } else {
                0.0
            },
            link_utilization: if capacity > 0 {
                hops as f64 / capacity as f64
            } else {
                0.0
            },
            injected,
            ejected,
            link_flits,
            window,
            empty: ejected == 0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noc::routing::compute_routing_tables;
    use crate::topology::{build_topology, TopologyKind};

    fn mesh_net(cores: usize) -> Network {
        let g = build_topology(TopologyKind::Mesh, cores).unwrap();
        let t = compute_routing_tables(&g, &g.link_weights.clone()).unwrap();
        Network::new(
            g,
            t,
            NetworkConfig {
                check_invariants: true,
                check_paths: true,
            },
        )
    }

    #[test]
    fn single_flit_adjacent_hop_takes_three_cycles() {
        let mut net = mesh_net(16);
        net.inject(0, 1, VirtualNet::Request, 1, None);
        net.drain().unwrap();
        let p = net.packet(0);
        assert_eq!(p.creation_cycle, 0);
        assert_eq!(p.ejection_cycle, Some(3));
        assert_eq!(p.latency(), Some(3));
        assert_eq!(p.zero_load(), 3);
    }

    #[test]
    fn zero_load_matches_formula_for_multiflit_and_multihop() {
        let mut net = mesh_net(16);
        net.inject(0, 15, VirtualNet::Response, 5, None); // 6 hops, 5 flits
        net.drain().unwrap();
        let p = net.packet(0);
        assert_eq!(p.latency(), Some(1 + 2 * 6 + 4));
    }

    #[test]
    fn idle_step_is_noop_with_zero_metrics() {
        let mut net = mesh_net(16);
        for _ in 0..50 {
            let ev = net.step().unwrap();
            assert!(ev.ejected.is_empty());
        }
        let m = net.collect_metrics((0, 50));
        assert!(m.empty);
        assert_eq!(m.latency_avg, 0.0);
        assert_eq!(m.link_utilization, 0.0);
        assert_eq!(net.cycle(), 50);
    }

    #[test]
    fn contention_delays_exactly_one_packet() {
        // 0 -> 2 and 1 -> 2 on the top row of a 4x4 mesh, timed so both heads
        // want the 1->2 output on the same cycle; round-robin lets the through
        // packet win and the local one waits one cycle.
        let mut net = mesh_net(16);
        net.inject(0, 2, VirtualNet::Request, 1, None);
        net.step().unwrap(); // cycle 0
        net.step().unwrap(); // cycle 1
        net.inject(1, 2, VirtualNet::Request, 1, None);
        net.drain().unwrap();
        let a = net.packet(0);
        let b = net.packet(1);
        assert_eq!(a.latency(), Some(5)); // zero-load, 2 hops
        assert_eq!(b.latency(), Some(4)); // 1 hop zero-load 3, +1 contention
        let m = net.collect_metrics((0, net.cycle()));
        assert!((m.delay_avg - 0.5).abs() < 1e-12);
    }

    #[test]
    fn saturated_link_reports_full_utilization() {
        // A steady 1-flit stream across one link of a 2-node point-to-point
        // graph keeps that wire busy every cycle once warmed up.
        let g = build_topology(TopologyKind::Pt2Pt, 2).unwrap();
        let t = compute_routing_tables(&g, &g.link_weights.clone()).unwrap();
        let mut net = Network::new(g, t, NetworkConfig::default());
        for _ in 0..200 {
            net.inject(0, 1, VirtualNet::Request, 1, None);
        }
        for _ in 0..10 {
            net.step().unwrap();
        }
        net.begin_window();
        for _ in 0..80 {
            net.step().unwrap();
        }
        // Per-wire utilization is 0.5 of the bidirectional pair here: the
        // forward wire is saturated, the reverse idle.
        let m = net.collect_metrics((10, 90));
        assert!((m.link_utilization - 0.5).abs() < 1e-12);
        assert_eq!(m.link_flits, vec![80]);
        net.drain().unwrap();
    }

    #[test]
    fn packet_conservation_after_drain() {
        let mut net = mesh_net(16);
        for i in 0..40usize {
            let src = i % 16;
            let dst = (src + 1 + (i * 7) % 15) % 16;
            net.inject(src, dst, VirtualNet::Response, 5, None);
        }
        net.drain().unwrap();
        assert_eq!(net.injected_count(), net.ejected_count());
        assert_eq!(net.injected_count(), 40);
        assert!(net.is_empty());
    }

    #[test]
    fn deterministic_replay_is_bit_identical() {
        let run = || {
            let mut net = mesh_net(16);
            for i in 0..60usize {
                let src = (i * 5) % 16;
                let dst = (src + 1 + (i * 3) % 15) % 16;
                net.inject(src, dst, VirtualNet::Response, 5, None);
                net.step().unwrap();
            }
            net.drain().unwrap();
            let m = net.collect_metrics((0, net.cycle()));
            (m.latency_avg, m.delay_avg, m.link_utilization, net.cycle())
        };
        assert_eq!(run(), run());
    }
}

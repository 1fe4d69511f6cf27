//! Parameterized abstract energy model: converts traffic counters into
//! comparable energy figures. The default constants are arbitrary, so only
//! relative comparisons across routing policies mean anything.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyParams {
    /// Joules per flit-link traversal.
    pub e_link: f64,
    /// Joules per flit-router traversal.
    pub e_router: f64,
    /// Joules per node per cycle.
    pub p_static: f64,
}

impl Default for EnergyParams {
    fn default() -> Self {
        EnergyParams {
            e_link: 1e-12,
            e_router: 2e-12,
            p_static: 1e-13,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyReport {
    pub dynamic_j: f64,
    pub static_j: f64,
    pub total_j: f64,
    pub j_per_packet: f64,
    /// Set when no packet was ejected and per-packet energy is reported as 0.
    pub no_packets: bool,
}

pub fn estimate(
    flit_hops: u64,
    router_traversals: u64,
    ejected_packets: u64,
    cycles: u64,
    node_count: usize,
    params: &EnergyParams,
) -> EnergyReport {
    let dynamic_j = flit_hops as f64 * params.e_link + router_traversals as f64 * params.e_router;
    let static_j = params.p_static * node_count as f64 * cycles as f64;
    let total_j = dynamic_j + static_j;
    let (j_per_packet, no_packets) = if ejected_packets > 0 {
        (total_j / ejected_packets as f64, false)
    } else {
        (0.0, true)
    };
    EnergyReport {
        dynamic_j,
        static_j,
        total_j,
        j_per_packet,
        no_packets,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_traffic_zero_static_is_zero() {
        let p = EnergyParams {
            e_link: 1e-12,
            e_router: 2e-12,
            p_static: 0.0,
        };
        let r = estimate(0, 0, 0, 1000, 16, &p);
        assert_eq!(r.total_j, 0.0);
        assert!(r.no_packets);
        assert_eq!(r.j_per_packet, 0.0);
    }

    #[test]
    fn link_energy_arithmetic() {
        let p = EnergyParams {
            e_link: 1e-12,
            e_router: 0.0,
            p_static: 0.0,
        };
        let r = estimate(100, 40, 10, 50, 4, &p);
        assert!((r.dynamic_j - 1e-10).abs() < 1e-24);
        assert_eq!(r.total_j, r.dynamic_j + r.static_j);
    }

    #[test]
    fn doubling_counters_doubles_dynamic_energy() {
        let p = EnergyParams::default();
        let a = estimate(123, 45, 6, 100, 16, &p);
        let b = estimate(246, 90, 6, 100, 16, &p);
        assert!((b.dynamic_j - 2.0 * a.dynamic_j).abs() < 1e-20);
        let c = estimate(123, 45, 6, 200, 16, &p);
        assert!((c.static_j - 2.0 * a.static_j).abs() < 1e-20);
    }
}

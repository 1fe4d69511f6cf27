//! Learned link weights must steer traffic off a congested link.
//!
//! Setup: a 2x2 mesh carrying two five-flit flows. Flow B (2 -> 1) is pinned
//! to the route 2 -> 0 -> 1 by the turn restriction (2 -> 3 -> 1 would turn
//! down-then-up), so it always loads link (0,1). Flow A (0 -> 3) can ride
//! either 0 -> 1 -> 3 or 0 -> 2 -> 3; the predictor starts biased so A joins
//! B on (0,1) and oversubscribes it. Two hundred epochs of the score-function
//! update should push A onto the free path, cutting the flit count on (0,1)
//! down to B's share.

use cohesim::ccta::CoherenceMetrics;
use cohesim::neural::Mode;
use cohesim::noc::{compute_routing_tables, Network, NetworkConfig, VirtualNet};
use cohesim::optimizer::{
    compute_reward, predict_weights, weight_policy_update, Agent, AgentHyper, RLStateVector,
    RewardWeights, WeightPolicySample,
};
use cohesim::topology::{build_topology, TopologyKind};
use cohesim::workload::stream;
use rand::Rng;

const EPOCH_CYCLES: u64 = 1500;
const RATE_A: f64 = 0.14; // 0.7 flits/cycle
const RATE_B: f64 = 0.10; // 0.5 flits/cycle; together they oversubscribe a wire

/// One epoch with the given weights; returns (flits over link (0,1), reward).
fn run_epoch(weights: &[f64], seed: u64, epoch: u64) -> (u64, f64) {
    let mut graph = build_topology(TopologyKind::Mesh, 4).unwrap();
    graph.set_weights(weights);
    let tables = compute_routing_tables(&graph, weights).unwrap();
    let hot_link = graph.link_index(0, 1).unwrap();
    let mut net = Network::new(graph, tables, NetworkConfig::default());
    let mut rng = stream(seed, 0x666c6f77 ^ epoch);
    for _ in 0..EPOCH_CYCLES {
        if rng.gen::<f64>() < RATE_A {
            net.inject(0, 3, VirtualNet::Response, 5, None);
        }
        if rng.gen::<f64>() < RATE_B {
            net.inject(2, 1, VirtualNet::Response, 5, None);
        }
        net.step().unwrap();
    }
    net.drain().unwrap();
    let m = net.collect_metrics((0, net.cycle()));
    let reward_weights = RewardWeights {
        alpha: [0.5, 0.0, 0.5, 0.0],
        divisors: [30.0, 1.0, 15.0, 1.0],
    };
    let reward = compute_reward(&m, &CoherenceMetrics::default(), &reward_weights);
    (m.link_flits[hot_link], reward)
}

fn learn_one_seed(seed: u64) -> (f64, f64) {
    let hyper = AgentHyper {
        sigma: 0.6,
        w_lr: 2e-3,
        ..AgentHyper::default()
    };
    let mut agent = Agent::new(4, hyper, seed);
    // Arrange the congestion: tame the untrained head spread, then price flow
    // A's escape route (0->2->3) out of the market so that at epoch 1 it
    // piles onto (0,1) with flow B. The gap is within reach of the
    // exploration noise, so flips get sampled and rewarded.
    let mesh_head = agent.head_ranges[TopologyKind::Mesh.index()].clone();
    let graph = build_topology(TopologyKind::Mesh, 4).unwrap();
    let last = agent.predictor.layers.len() - 1;
    agent.predictor.layers[last]
        .w
        .iter_mut()
        .for_each(|w| *w *= 0.25);
    for (j, &link) in graph.links.iter().enumerate() {
        if link == (0, 2) || link == (2, 3) {
            agent.predictor.layers[last].b[mesh_head.start + j] += 0.5;
        }
    }
    let mut noise_rng = stream(seed, 0x706f6c);
    let state = RLStateVector::ZERO;
    let sigma = agent.hyper.sigma;
    let mut epoch1_traffic = 0.0;
    let mut tail: Vec<f64> = Vec::new();
    let epochs = 200u64;
    for epoch in 0..epochs {
        let (weights, noise) = predict_weights(
            &mut agent,
            &state,
            TopologyKind::Mesh,
            sigma,
            Mode::Train,
            &mut noise_rng,
        );
        let (hot_flits, reward) = run_epoch(&weights, seed, epoch);
        if epoch == 0 {
            epoch1_traffic = hot_flits as f64;
        }
        if epoch >= epochs - 20 {
            tail.push(hot_flits as f64);
        }
        weight_policy_update(
            &mut agent,
            &[WeightPolicySample {
                state,
                topology: TopologyKind::Mesh,
                noise,
                reward,
            }],
        );
    }
    let tail_mean = tail.iter().sum::<f64>() / tail.len() as f64;
    (epoch1_traffic, tail_mean)
}

#[test]
fn weight_updates_reduce_traffic_on_the_congested_link() {
    for seed in [1u64, 2, 3] {
        let (epoch1, tail_mean) = learn_one_seed(seed);
        assert!(
            tail_mean < epoch1,
            "seed {seed}: tail mean {tail_mean:.0} vs epoch 1 {epoch1:.0}"
        );
        // The shift should be substantial, not noise: rerouting flow A takes
        // its whole share off the link.
        assert!(
            tail_mean < 0.85 * epoch1,
            "seed {seed}: weak reduction {tail_mean:.0} vs {epoch1:.0}"
        );
    }
}

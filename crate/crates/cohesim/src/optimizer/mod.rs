//! The learning loop's building blocks: metric featurization, the Eq.-style
//! multi-objective reward, an epsilon-greedy Q-network over the six candidate
//! topologies, and a link-weight predictor trained with a score-function
//! estimator over multiplicative log-normal weight noise.

pub mod training;

pub use training::{run_training, EpochRow, TrainConfig, TrainingHistory};

use crate::ccta::CoherenceMetrics;
use crate::neural::{gauss, FeedForwardNet, Mode};
use crate::noc::NocMetrics;
use crate::topology::{build_topology, enumerate_links, TopologyKind};
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use std::ops::Range;

/// Normalized 6-feature state: latency, delay, link utilization, coherence
/// messages, CPU delay, write-miss time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RLStateVector(pub [f64; 6]);

impl RLStateVector {
    pub const ZERO: RLStateVector = RLStateVector([0.0; 6]);
}

/// Per-feature normalization divisors for the state vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDivisors(pub [f64; 6]);

impl Default for StateDivisors {
    fn default() -> Self {
        StateDivisors([1.0; 6])
    }
}

/// Reward term weights and normalization for (L_t, H_t, D_t, C_t).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardWeights {
    pub alpha: [f64; 4],
    pub divisors: [f64; 4],
}

impl Default for RewardWeights {
    fn default() -> Self {
        RewardWeights {
            alpha: [0.25; 4],
            divisors: [1.0; 4],
        }
    }
}

const FEATURE_CLAMP: f64 = 10.0;
/// Head outputs are log-weights clamped to this band, so weights span
/// [exp(-2.3), exp(2.3)], roughly [0.1, 10].
pub const LOG_WEIGHT_CLAMP: f64 = 2.3;

pub fn featurize(noc: &NocMetrics, cc: &CoherenceMetrics, div: &StateDivisors) -> RLStateVector {
    let raw = [
        noc.latency_avg,
        noc.delay_avg,
        noc.link_utilization,
        cc.total_messages as f64,
        cc.cpu_delay_avg,
        cc.write_miss_time_avg,
    ];
    let mut out = [0.0; 6];
    for i in 0..6 {
        debug_assert!(div.0[i] > 0.0);
        out[i] = (raw[i] / div.0[i]).clamp(0.0, FEATURE_CLAMP);
        debug_assert!(out[i].is_finite());
    }
    RLStateVector(out)
}

/// Exploration schedule: exactly 1/(episode + 1).
pub fn epsilon(episode: u64) -> f64 {
    1.0 / (episode + 1) as f64
}

/// Multi-objective reward over normalized latency, CPU delay, packet delay
/// and coherence message count. More of anything weighted is worse.
pub fn compute_reward(noc: &NocMetrics, cc: &CoherenceMetrics, w: &RewardWeights) -> f64 {
    let terms = [
        noc.latency_avg / w.divisors[0],
        cc.cpu_delay_avg / w.divisors[1],
        noc.delay_avg / w.divisors[2],
        cc.total_messages as f64 / w.divisors[3],
    ];
    -(w.alpha[0] * terms[0] + w.alpha[1] * terms[1] + w.alpha[2] * terms[2] + w.alpha[3] * terms[3])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentHyper {
    pub gamma: f64,
    pub q_lr: f64,
    pub w_lr: f64,
    /// Exploration noise scale in log-weight space.
    pub sigma: f64,
    pub q_hidden: usize,
}

impl Default for AgentHyper {
    fn default() -> Self {
        AgentHyper {
            gamma: 0.9,
            q_lr: 1e-3,
            w_lr: 1e-3,
            sigma: 0.2,
            q_hidden: 64,
        }
    }
}

/// Q-network over topology actions plus the per-topology link-weight heads.
///
/// The predictor is one network: a shared trunk over the 6 metrics + 6-way
/// one-hot topology encoding, with an output slice per topology sized to that
/// topology's canonical link count.
#[derive(Debug, Clone)]
pub struct Agent {
    pub cores: usize,
    pub q_net: FeedForwardNet,
    pub predictor: FeedForwardNet,
    pub head_ranges: Vec<Range<usize>>,
    pub hyper: AgentHyper,
    pub episode: u64,
    pub reward_baseline: f64,
}

/// One decision's worth of experience for the weight-policy update.
#[derive(Debug, Clone)]
pub struct WeightPolicySample {
    pub state: RLStateVector,
    pub topology: TopologyKind,
    pub noise: Vec<f64>,
    pub reward: f64,
}

impl Agent {
    pub fn new(cores: usize, hyper: AgentHyper, seed: u64) -> Agent {
        let mut head_ranges = Vec::with_capacity(TopologyKind::COUNT);
        let mut total = 0usize;
        for kind in TopologyKind::ALL {
            let g = build_topology(kind, cores)
                .expect("core count must support all candidate topologies");
            let links = enumerate_links(&g).len();
            head_ranges.push(total..total + links);
            total += links;
        }
        let q_net = FeedForwardNet::new(
            &[6, hyper.q_hidden, hyper.q_hidden, TopologyKind::COUNT],
            0.0,
            seed ^ 0x71,
        );
        let predictor = FeedForwardNet::new(&[12, 256, 256, total], 0.5, seed ^ 0x77);
        Agent {
            cores,
            q_net,
            predictor,
            head_ranges,
            hyper,
            episode: 0,
            reward_baseline: 0.0,
        }
    }

    pub fn q_values(&mut self, state: &RLStateVector) -> Vec<f64> {
        self.q_net.forward(&state.0, Mode::Inference)
    }

    pub fn greedy_action(&mut self, state: &RLStateVector) -> TopologyKind {
        let q = self.q_values(state);
        let mut best = 0;
        for (i, &v) in q.iter().enumerate() {
            if v > q[best] {
                best = i;
            }
        }
        TopologyKind::from_index(best).unwrap()
    }

    fn predictor_input(state: &RLStateVector, kind: TopologyKind) -> Vec<f64> {
        let mut input = state.0.to_vec();
        let mut one_hot = [0.0; TopologyKind::COUNT];
        one_hot[kind.index()] = 1.0;
        input.extend_from_slice(&one_hot);
        input
    }

    /// Raw head outputs for a topology (log-weight means).
    pub fn head_outputs(
        &mut self,
        state: &RLStateVector,
        kind: TopologyKind,
        mode: Mode,
    ) -> Vec<f64> {
        let input = Self::predictor_input(state, kind);
        let y = self.predictor.forward(&input, mode);
        y[self.head_ranges[kind.index()].clone()].to_vec()
    }
}

/// Epsilon-greedy over the six kinds: uniform exploration with probability
/// 1/(episode+1), otherwise the Q-argmax with ties to the lowest index.
pub fn select_topology(
    agent: &mut Agent,
    state: &RLStateVector,
    episode: u64,
    rng: &mut ChaCha12Rng,
) -> TopologyKind {
    let eps = epsilon(episode);
    let explore = rng.gen::<f64>() < eps;
    let uniform = rng.gen_range(0..TopologyKind::COUNT);
    if explore {
        TopologyKind::from_index(uniform).unwrap()
    } else {
        agent.greedy_action(state)
    }
}

/// Map head outputs to link weights, optionally jittered by multiplicative
/// exploration noise in log space. Returns (weights, standard-normal draws).
pub fn predict_weights(
    agent: &mut Agent,
    state: &RLStateVector,
    kind: TopologyKind,
    sigma: f64,
    mode: Mode,
    rng: &mut ChaCha12Rng,
) -> (Vec<f64>, Vec<f64>) {
    let y = agent.head_outputs(state, kind, mode);
    let mut weights = Vec::with_capacity(y.len());
    let mut noise = Vec::with_capacity(y.len());
    for &yi in &y {
        let xi = if sigma > 0.0 { gauss(rng) } else { 0.0 };
        let log_w = yi.clamp(-LOG_WEIGHT_CLAMP, LOG_WEIGHT_CLAMP) + sigma * xi;
        weights.push(log_w.clamp(-LOG_WEIGHT_CLAMP, LOG_WEIGHT_CLAMP).exp());
        noise.push(xi);
    }
    (weights, noise)
}

/// One TD(0) step: squared error on the taken action's output only.
pub fn q_update(
    agent: &mut Agent,
    state: &RLStateVector,
    action: TopologyKind,
    reward: f64,
    next_state: Option<&RLStateVector>,
    gamma: f64,
    lr: f64,
) {
    let target = match next_state {
        Some(s) => {
            let q_next = agent.q_values(s);
            reward + gamma * q_next.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        }
        None => reward,
    };
    let q = agent.q_net.forward(&state.0, Mode::Train);
    let mut grad = vec![0.0; q.len()];
    grad[action.index()] = 2.0 * (q[action.index()] - target);
    let grads = agent.q_net.backward(&grad);
    agent.q_net.sgd_step(&grads, lr);
}

/// Score-function (REINFORCE) update in log-weight space: push head outputs
/// toward the sampled log-weights, scaled by the advantage over a running
/// baseline (exponential moving average, decay 0.9).
pub fn weight_policy_update(agent: &mut Agent, batch: &[WeightPolicySample]) {
    let sigma = agent.hyper.sigma;
    if sigma <= 0.0 {
        return;
    }
    let lr = agent.hyper.w_lr;
    for sample in batch {
        let advantage = sample.reward - agent.reward_baseline;
        agent.reward_baseline = 0.9 * agent.reward_baseline + 0.1 * sample.reward;
        let input = Agent::predictor_input(&sample.state, sample.topology);
        let y = agent.predictor.forward(&input, Mode::Train);
        let range = agent.head_ranges[sample.topology.index()].clone();
        let mut grad = vec![0.0; y.len()];
        for (j, out_idx) in range.enumerate() {
            // Clamp saturation zeroes the pathway.
            if y[out_idx].abs() < LOG_WEIGHT_CLAMP {
                grad[out_idx] = -(advantage / sigma) * sample.noise[j];
            }
        }
        let grads = agent.predictor.backward(&grad);
        agent.predictor.sgd_step(&grads, lr);
    }
}

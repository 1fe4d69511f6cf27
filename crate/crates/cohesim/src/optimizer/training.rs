//! The training loop: every episode replays the workload from a cold system;
//! within an episode the agent acts at fixed-cycle decision epochs, and each
//! reconfiguration waits for the network to drain so cache and directory
//! state survive the swap.

use super::{
    compute_reward, featurize, predict_weights, q_update, select_topology, weight_policy_update,
    Agent, AgentHyper, RLStateVector, RewardWeights, StateDivisors, WeightPolicySample,
};
use crate::neural::Mode;
use crate::noc::{compute_routing_tables, xy_routing_table};
use crate::sim::{SimConfig, SimError, SystemSim};
use crate::topology::{build_topology, TopologyKind};
use crate::workload::{stream, AccessTrace};

const TAG_EPS: u64 = 0x657073; // "eps"
const TAG_NOISE: u64 = 0x6e6f69; // "noi"

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub cores: usize,
    pub episodes: u64,
    /// Decision epoch length in cycles.
    pub epoch_cycles: u64,
    pub max_epochs_per_episode: u32,
    pub hyper: AgentHyper,
    pub alphas: [f64; 4],
    /// Feature and reward normalization; when absent, taken from a
    /// calibration run of XY-on-Mesh over the same trace.
    pub divisors: Option<(StateDivisors, [f64; 4])>,
    pub seed: u64,
    pub trace: AccessTrace,
    pub sim: SimConfig,
    pub quiesce_budget: u64,
}

impl TrainConfig {
    pub fn new(cores: usize, trace: AccessTrace, seed: u64) -> TrainConfig {
        TrainConfig {
            cores,
            episodes: 100,
            epoch_cycles: 10_000,
            max_epochs_per_episode: 50,
            hyper: AgentHyper::default(),
            alphas: [0.25; 4],
            divisors: None,
            seed,
            trace,
            sim: SimConfig::default(),
            quiesce_budget: 200_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRow {
    pub episode: u64,
    pub epoch: u32,
    pub topology: TopologyKind,
    pub epsilon: f64,
    pub reward: f64,
    pub latency: f64,
    pub delay: f64,
    pub link_util: f64,
    pub messages: u64,
    pub cpu_delay: f64,
    pub write_miss: f64,
}

#[derive(Debug, Clone, Default)]
pub struct TrainingHistory {
    pub rows: Vec<EpochRow>,
    /// Episodes cut short by a suspected network deadlock (should stay empty:
    /// the turn-restricted routing is deadlock-free).
    pub aborted_episodes: Vec<u64>,
}

impl TrainingHistory {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "episode,epoch,topology,epsilon,reward,L_t,D_t,link_util,C_t,H_t,write_miss_avg\n",
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{}\n",
                r.episode,
                r.epoch,
                r.topology,
                r.epsilon,
                r.reward,
                r.latency,
                r.delay,
                r.link_util,
                r.messages,
                r.cpu_delay,
                r.write_miss
            ));
        }
        out
    }

    pub fn episode_mean_reward(&self, episode: u64) -> f64 {
        let rewards: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.episode == episode)
            .map(|r| r.reward)
            .collect();
        rewards.iter().sum::<f64>() / rewards.len().max(1) as f64
    }
}

fn floor_divisor(x: f64) -> f64 {
    if x > 1e-9 {
        x
    } else {
        1.0
    }
}

/// Run the trace on XY-over-Mesh for one epoch and read the metric ranges
/// off that run. Keeps every feature near unit scale at the training point.
pub fn calibrate_divisors(config: &TrainConfig) -> Result<(StateDivisors, [f64; 4]), SimError> {
    let graph = build_topology(TopologyKind::Mesh, config.cores)
        .expect("calibration needs a mesh-capable core count");
    let tables = xy_routing_table(&graph)?;
    let mut sim = SystemSim::new(graph, tables, config.trace.clone(), config.sim.clone());
    sim.run_cycles(config.epoch_cycles)?;
    sim.quiesce(config.quiesce_budget)?;
    let snap = sim.snapshot((0, sim.now()));
    let state = StateDivisors([
        floor_divisor(snap.noc.latency_avg),
        floor_divisor(snap.noc.delay_avg),
        floor_divisor(snap.noc.link_utilization),
        floor_divisor(snap.cc.total_messages as f64),
        floor_divisor(snap.cc.cpu_delay_avg),
        floor_divisor(snap.cc.write_miss_time_avg),
    ]);
    let reward = [state.0[0], state.0[4], state.0[1], state.0[3]];
    Ok((state, reward))
}

/// Train an agent over the configured episodes; `on_episode` fires after each
/// episode (checkpointing hook). Fully deterministic in (config, seed).
pub fn run_training<F>(
    config: &TrainConfig,
    mut on_episode: F,
) -> Result<(TrainingHistory, Agent), SimError>
where
    F: FnMut(u64, &Agent, &TrainingHistory),
{
    let (div, reward_div) = match config.divisors {
        Some(d) => d,
        None => calibrate_divisors(config)?,
    };
    let reward_weights = RewardWeights {
        alpha: config.alphas,
        divisors: reward_div,
    };
    let mut agent = Agent::new(config.cores, config.hyper, config.seed);
    let mut eps_rng = stream(config.seed, TAG_EPS);
    let mut noise_rng = stream(config.seed, TAG_NOISE);
    let mut history = TrainingHistory::default();

    for episode in 0..config.episodes {
        agent.episode = episode;
        let mut state = RLStateVector::ZERO;
        let mut action = select_topology(&mut agent, &state, episode, &mut eps_rng);
        let (mut weights, mut noise) = predict_weights(
            &mut agent,
            &state,
            action,
            config.hyper.sigma,
            Mode::Train,
            &mut noise_rng,
        );
        let mut graph = build_topology(action, config.cores).expect("supported core count");
        graph.set_weights(&weights);
        let tables = compute_routing_tables(&graph, &weights)?;
        let mut sim = SystemSim::new(graph, tables, config.trace.clone(), config.sim.clone());

        for epoch in 0..config.max_epochs_per_episode {
            let start = sim.now();
            sim.net.begin_window();
            let stepped = sim
                .run_cycles(config.epoch_cycles)
                .and_then(|()| sim.quiesce(config.quiesce_budget));
            if let Err(e) = stepped {
                if matches!(
                    e,
                    SimError::Noc(crate::noc::NocError::DeadlockSuspected { .. })
                ) {
                    history.aborted_episodes.push(episode);
                    break;
                }
                return Err(e);
            }
            let snap = sim.snapshot((start, sim.now()));
            let reward = compute_reward(&snap.noc, &snap.cc, &reward_weights);
            let next_state = featurize(&snap.noc, &snap.cc, &div);
            let done = sim.trace_done() || epoch + 1 == config.max_epochs_per_episode;

            q_update(
                &mut agent,
                &state,
                action,
                reward,
                (!done).then_some(&next_state),
                config.hyper.gamma,
                config.hyper.q_lr,
            );
            weight_policy_update(
                &mut agent,
                &[WeightPolicySample {
                    state,
                    topology: action,
                    noise: std::mem::take(&mut noise),
                    reward,
                }],
            );
            history.rows.push(EpochRow {
                episode,
                epoch,
                topology: action,
                epsilon: super::epsilon(episode),
                reward,
                latency: snap.noc.latency_avg,
                delay: snap.noc.delay_avg,
                link_util: snap.noc.link_utilization,
                messages: snap.cc.total_messages,
                cpu_delay: snap.cc.cpu_delay_avg,
                write_miss: snap.cc.write_miss_time_avg,
            });
            if done {
                break;
            }
            state = next_state;
            action = select_topology(&mut agent, &state, episode, &mut eps_rng);
            let (w, n) = predict_weights(
                &mut agent,
                &state,
                action,
                config.hyper.sigma,
                Mode::Train,
                &mut noise_rng,
            );
            weights = w;
            noise = n;
            let mut g = build_topology(action, config.cores).unwrap();
            g.set_weights(&weights);
            let t = compute_routing_tables(&g, &weights)?;
            sim.rebuild_network(g, t);
        }
        on_episode(episode, &agent, &history);
    }
    Ok((history, agent))
}

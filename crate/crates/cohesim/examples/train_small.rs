//! A small end-to-end training run: the agent picks topologies and link
//! weights for a sharing-heavy workload, learning from combined network +
//! coherence metrics.
//!
//!   cargo run --release --example train_small

use cohesim::optimizer::{run_training, TrainConfig};
use cohesim::workload::gen_shared_hotspot;

fn main() {
    let seed = 3;
    let trace = gen_shared_hotspot(16, 4_000, 0.05, 4, 0.5, seed);
    let mut config = TrainConfig::new(16, trace, seed);
    config.episodes = 60;
    config.epoch_cycles = 4_000;
    config.max_epochs_per_episode = 4;
    config.hyper.q_lr = 0.1;

    let (history, mut agent) = run_training(&config, |episode, _, history| {
        if (episode + 1) % 10 == 0 {
            println!(
                "episode {:3}  mean reward {:+.4}",
                episode + 1,
                history.episode_mean_reward(episode)
            );
        }
    })
    .unwrap();

    let first = history.episode_mean_reward(0);
    let last = history.episode_mean_reward(config.episodes - 1);
    println!(
        "\nreward: episode 0 {first:+.4} -> episode {} {last:+.4}",
        config.episodes - 1
    );
    let greedy = agent.greedy_action(&cohesim::optimizer::RLStateVector::ZERO);
    println!("greedy topology after training: {greedy}");
    println!("\nlast five history rows:");
    let csv = history.to_csv();
    let rows: Vec<&str> = csv.lines().collect();
    for line in rows.iter().skip(rows.len().saturating_sub(5)) {
        println!("  {line}");
    }
}

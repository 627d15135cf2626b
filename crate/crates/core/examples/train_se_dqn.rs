//! Trains SE-DQN on a two-sensor instance small enough for value iteration
//! and compares the learned greedy policy with the exact optimum.
//!
//! `cargo run --release --example train_se_dqn -- [seed] [episodes]`

use sensor_sched::dqn::{train_se_dqn_with, QGreedy};
use sensor_sched::harness::{evaluate_policy, AgentKind, ExperimentConfig};
use sensor_sched::mdp::value_iteration;

fn main() -> sensor_sched::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map_or(Ok(0), |s| s.parse()).expect("seed");
    let episodes: usize = args.next().map_or(Ok(60), |s| s.parse()).expect("episodes");

    let cfg = ExperimentConfig {
        n_sensors: 2,
        n_channels: 1,
        seed,
        agent: AgentKind::ValueIteration,
        ..Default::default()
    };
    let system = cfg.generate_system()?;
    let spec = cfg.mdp_spec(&system)?;
    let optimum = value_iteration(&spec, &cfg.vi.options())?;
    let vi_mse = evaluate_policy(&optimum, &spec, 10_000, seed)?.summary.avg_sum_mse;

    let mut training = cfg.training.clone();
    training.hidden = vec![64, 64];
    training.loose_episodes = episodes / 6;
    training.tight_episodes = episodes / 3;
    training.conventional_episodes = episodes - training.loose_episodes - training.tight_episodes;

    let trained = train_se_dqn_with(&spec, &training, seed, &mut |e| {
        if e.episode % 10 == 0 {
            println!("episode {:>4} {:?}: avg sum MSE {:.3}, ε {:.3}", e.episode, e.stage, e.avg_sum_mse, e.epsilon);
        }
    })?;
    let policy = QGreedy {
        net: &trained.qnet,
        actions: &trained.actions,
        spec: &spec,
    };
    let learned = evaluate_policy(&policy, &spec, 10_000, seed)?.summary.avg_sum_mse;
    println!("value iteration {vi_mse:.3}, SE-DQN {learned:.3} (ratio {:.4})", learned / vi_mse);
    Ok(())
}

//! Trains SE-DDPG on a generated three-sensor, two-channel system and
//! reports the training curve and the greedy evaluation.
//!
//! `cargo run --release --example train_se_ddpg -- [seed] [episodes]`

use sensor_sched::ddpg::{train_se_ddpg_with, ActorGreedy};
use sensor_sched::harness::{evaluate_policy, generate_system};
use sensor_sched::mdp::MdpSpec;
use sensor_sched::training::TrainingConfig;

fn main() -> sensor_sched::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map_or(Ok(0), |s| s.parse()).expect("seed");
    let episodes: usize = args.next().map_or(Ok(30), |s| s.parse()).expect("episodes");

    let system = generate_system(seed, 3, 2)?;
    let spec = MdpSpec::new(system.processes, system.channels, 0.95, 20)?;
    let cfg = TrainingConfig {
        hidden: vec![64, 64],
        loose_episodes: episodes / 6,
        tight_episodes: episodes / 3,
        conventional_episodes: episodes - episodes / 6 - episodes / 3,
        ..Default::default()
    };
    let trained = train_se_ddpg_with(&spec, &cfg, seed, &mut |e| {
        println!(
            "episode {:>4} {:?}: avg sum MSE {:.3}, critic loss {:.2e}, σ {:.3}",
            e.episode,
            e.stage,
            e.avg_sum_mse,
            e.critic_loss_mean.unwrap_or(f64::NAN),
            e.noise_sigma.unwrap_or(0.0)
        );
    })?;
    let policy = ActorGreedy {
        actor: &trained.actor,
        spec: &spec,
    };
    let eval = evaluate_policy(&policy, &spec, 10_000, seed)?;
    println!("greedy 10 000-step average sum MSE {:.3}", eval.summary.avg_sum_mse);
    Ok(())
}

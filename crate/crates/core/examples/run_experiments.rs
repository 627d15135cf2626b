//! Runs every agent on one generated system through the experiment harness
//! and prints the evaluation of each artifact bundle.
//!
//! `cargo run --release --example run_experiments -- [config.json] [out_dir]`

use std::path::PathBuf;

use sensor_sched::harness::{run_experiment, AgentKind, ExperimentConfig};

fn main() -> sensor_sched::Result<()> {
    let mut args = std::env::args().skip(1);
    let mut base = match args.next() {
        Some(path) => ExperimentConfig::from_file(path.as_ref())?,
        None => {
            let mut c = ExperimentConfig {
                n_sensors: 3,
                n_channels: 2,
                tau_cap: 20,
                eval_steps: 2_000,
                ..Default::default()
            };
            c.training.hidden = vec![32, 32];
            c.training.loose_episodes = 2;
            c.training.tight_episodes = 4;
            c.training.conventional_episodes = 6;
            c
        }
    };
    let root = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("sensor-sched-runs"));
    for agent in [AgentKind::Dqn, AgentKind::SeDqn, AgentKind::Ddpg, AgentKind::SeDdpg] {
        base.agent = agent;
        base.out_dir = root.join(agent.as_str());
        let summary = run_experiment(&base)?;
        println!(
            "{:<8} avg sum MSE {:>10.3}  -> {}",
            agent.as_str(),
            summary.evaluation.avg_sum_mse,
            summary.out_dir.display()
        );
    }
    Ok(())
}

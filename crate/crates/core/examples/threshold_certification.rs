//! Solves small two-sensor, one-channel instances exactly and certifies
//! that each optimal policy has the threshold structure.

use sensor_sched::harness::{certify_threshold, AgentKind, ExperimentConfig};
use sensor_sched::mdp::write_policy_csv;

fn main() -> sensor_sched::Result<()> {
    for seed in 0..5 {
        let cfg = ExperimentConfig {
            n_sensors: 2,
            n_channels: 1,
            seed,
            agent: AgentKind::ValueIteration,
            ..Default::default()
        };
        let started = std::time::Instant::now();
        let (solution, report) = certify_threshold(&cfg)?;
        println!(
            "seed {seed}: {} states, {} sweeps, residual {:.1e}, {} violations, {:.1?}",
            report.n_states,
            report.iterations,
            report.residual,
            report.violations.len(),
            started.elapsed()
        );
        if seed == 0 {
            let table = sensor_sched::mdp::policy_table(&solution, &solution.space)?;
            let path = std::env::temp_dir().join("threshold_policy_seed0.csv");
            write_policy_csv(std::fs::File::create(&path)?, &solution.space, &table, Some(&solution.values))?;
            println!("  policy table written to {}", path.display());
        }
    }
    Ok(())
}

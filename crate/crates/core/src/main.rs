use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sensor_sched::harness::{
    certify_threshold, evaluate_checkpoint, gradcheck, run_experiment, write_steps_csv, AgentKind, ExperimentConfig,
    GradCheckOptions, DEFAULT_EVAL_STEPS,
};
use sensor_sched::{Error, Result};

#[derive(Parser)]
#[command(name = "sensor-sched", version, about = "Sensor scheduling for remote state estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train (or solve) one agent and write its artifact bundle.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        agent: Option<AgentKind>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Roll out a saved Q-network or actor greedily on a saved system.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        system: PathBuf,
        #[arg(long, default_value_t = DEFAULT_EVAL_STEPS)]
        steps: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Also write per-step sum MSE to this CSV file.
        #[arg(long)]
        steps_csv: Option<PathBuf>,
    },
    /// Solve value iteration and check the threshold structure of its policy.
    CertifyThreshold {
        #[arg(long)]
        config: PathBuf,
    },
    /// Compare analytic loss gradients with central finite differences.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        directions: usize,
    },
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, seed, agent, out } => {
            let mut cfg = ExperimentConfig::from_file(&config)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if let Some(agent) = agent {
                cfg.agent = agent;
            }
            if let Some(out) = out {
                cfg.out_dir = out;
            }
            let summary = run_experiment(&cfg)?;
            print_json(&summary.evaluation)?;
            if let Some(report) = summary.threshold.filter(|r| !r.certified) {
                return Err(Error::Certification(format!(
                    "{} threshold violations",
                    report.violations.len()
                )));
            }
            Ok(())
        }
        Command::Evaluate {
            checkpoint,
            system,
            steps,
            seed,
            steps_csv,
        } => {
            let rollout = evaluate_checkpoint(&checkpoint, &system, steps, seed)?;
            if let Some(path) = steps_csv {
                write_steps_csv(&mut std::io::BufWriter::new(std::fs::File::create(path)?), &rollout.per_step)?;
            }
            print_json(&rollout.summary)
        }
        Command::CertifyThreshold { config } => {
            let cfg = ExperimentConfig::from_file(&config)?;
            let (_, report) = certify_threshold(&cfg)?;
            print_json(&report)?;
            if report.certified {
                Ok(())
            } else {
                Err(Error::Certification(format!("{} threshold violations", report.violations.len())))
            }
        }
        Command::Gradcheck { seed, directions } => {
            let reports = gradcheck(&GradCheckOptions {
                seed,
                directions,
                ..Default::default()
            })?;
            print_json(&reports)?;
            match reports.iter().find(|r| !r.passed) {
                Some(r) => Err(Error::Certification(format!(
                    "{} gradient off by {:.3e}",
                    r.loss, r.max_rel_error
                ))),
                None => Ok(()),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

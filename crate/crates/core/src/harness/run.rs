use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{AgentKind, ExperimentConfig};
use super::evaluate::{evaluate_policy, write_steps_csv, Evaluation, Rollout};
use super::system::GeneratedSystem;
use crate::ddpg::{train_se_ddpg, ActorGreedy};
use crate::dqn::{train_se_dqn, QGreedy};
use crate::error::{Error, Result};
use crate::mdp::{
    check_threshold_structure, value_iteration, write_policy_csv, ActionSpace, MdpSpec, ThresholdViolation,
};
use crate::nn::Checkpoint;
use crate::training::{write_training_csv, StageSnapshot};

/// Outcome of [`check_threshold_structure`] on a value-iteration policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub seed: u64,
    pub n_states: usize,
    pub iterations: usize,
    pub residual: f64,
    pub certified: bool,
    pub violations: Vec<ThresholdViolation>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub evaluation: Evaluation,
    pub threshold: Option<ThresholdReport>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn write_snapshots(dir: &Path, snapshots: &[StageSnapshot], cfg: &ExperimentConfig, spec: &MdpSpec) -> Result<()> {
    let ckpt_dir = dir.join("checkpoints");
    fs::create_dir_all(&ckpt_dir)?;
    for snap in snapshots {
        for (role, ckpt) in &snap.checkpoints {
            let ckpt = ckpt
                .clone()
                .with_metadata("role", role.as_str())
                .with_metadata("run_agent", cfg.agent.as_str())
                .with_metadata("tau_cap", spec.tau_cap())
                .with_metadata("gamma", spec.gamma())
                .with_metadata("eval_seed", cfg.seed);
            ckpt.write(&ckpt_dir.join(format!("{}_{role}.json", snap.label)))?;
        }
    }
    Ok(())
}

/// Solves value iteration and checks the threshold structure of its policy.
pub fn certify_threshold(cfg: &ExperimentConfig) -> Result<(crate::mdp::ValueIterationSolution, ThresholdReport)> {
    let cfg = ExperimentConfig {
        agent: AgentKind::ValueIteration,
        ..cfg.clone()
    };
    let system = cfg.generate_system()?;
    let spec = cfg.mdp_spec(&system)?;
    let sol = value_iteration(&spec, &cfg.vi.options())?;
    let violations = check_threshold_structure(&sol, &spec)?;
    let report = ThresholdReport {
        seed: cfg.seed,
        n_states: sol.space.len(),
        iterations: sol.iterations,
        residual: sol.residual,
        certified: violations.is_empty(),
        violations,
    };
    Ok((sol, report))
}

/// Generates the system, trains or solves the configured agent, evaluates
/// the greedy policy, and writes every artifact under `cfg.out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let dir = cfg.out_dir.clone();
    fs::create_dir_all(&dir)?;
    write_json(&dir.join("config.json"), cfg)?;
    let system = cfg.generate_system()?;
    write_json(&dir.join("system.json"), &system)?;
    let spec = cfg.mdp_spec(&system)?;
    let training = cfg.effective_training();

    let (rollout, threshold) = match cfg.agent {
        AgentKind::Dqn | AgentKind::SeDqn => {
            let out = train_se_dqn(&spec, &training, cfg.seed)?;
            write_training_csv(&mut create(&dir.join("training.csv"))?, &out.log)?;
            write_snapshots(&dir, &out.snapshots, cfg, &spec)?;
            let policy = QGreedy {
                net: &out.qnet,
                actions: &out.actions,
                spec: &spec,
            };
            (evaluate_policy(&policy, &spec, cfg.eval_steps, cfg.seed)?, None)
        }
        AgentKind::Ddpg | AgentKind::SeDdpg => {
            let out = train_se_ddpg(&spec, &training, cfg.seed)?;
            write_training_csv(&mut create(&dir.join("training.csv"))?, &out.log)?;
            write_snapshots(&dir, &out.snapshots, cfg, &spec)?;
            let policy = ActorGreedy {
                actor: &out.actor,
                spec: &spec,
            };
            (evaluate_policy(&policy, &spec, cfg.eval_steps, cfg.seed)?, None)
        }
        AgentKind::ValueIteration => {
            let (sol, report) = certify_threshold(cfg)?;
            let mut curve = create(&dir.join("training.csv"))?;
            writeln!(curve, "iteration,residual")?;
            for (k, r) in sol.history.iter().enumerate() {
                writeln!(curve, "{},{}", k + 1, r)?;
            }
            curve.flush()?;
            let ckpt_dir = dir.join("checkpoints");
            fs::create_dir_all(&ckpt_dir)?;
            let table = crate::mdp::policy_table(&sol, &sol.space)?;
            let mut policy_csv = create(&ckpt_dir.join("policy.csv"))?;
            write_policy_csv(&mut policy_csv, &sol.space, &table, Some(&sol.values))?;
            policy_csv.flush()?;
            write_json(&dir.join("threshold_report.json"), &report)?;
            (evaluate_policy(&sol, &spec, cfg.eval_steps, cfg.seed)?, Some(report))
        }
    };
    write_json(&dir.join("evaluation.json"), &rollout.summary)?;
    let mut steps = create(&dir.join("eval_steps.csv"))?;
    write_steps_csv(&mut steps, &rollout.per_step)?;
    steps.flush()?;
    Ok(RunSummary {
        out_dir: dir,
        evaluation: rollout.summary,
        threshold,
    })
}

/// Evaluates a saved Q-network or actor on a saved system. The AoI cap,
/// discount, and default seed come from the checkpoint metadata.
pub fn evaluate_checkpoint(checkpoint: &Path, system: &Path, steps: usize, seed: Option<u64>) -> Result<Rollout> {
    let ckpt = Checkpoint::read(checkpoint)?;
    let sys: GeneratedSystem = serde_json::from_str(&fs::read_to_string(system)?)?;
    let meta_u64 = |key: &str| ckpt.metadata.get(key).and_then(|v| v.as_u64());
    let tau_cap = meta_u64("tau_cap")
        .ok_or_else(|| Error::Config("checkpoint metadata lacks tau_cap".into()))? as u32;
    let gamma = ckpt.metadata.get("gamma").and_then(|v| v.as_f64()).unwrap_or(0.95);
    let seed = seed.or_else(|| meta_u64("eval_seed")).unwrap_or(0);
    let spec = MdpSpec::new(sys.processes, sys.channels, gamma, tau_cap)?;
    let net = ckpt.to_network()?;
    let role = ckpt.metadata.get("role").and_then(|v| v.as_str()).unwrap_or("q");
    match role {
        "q" => {
            let actions = ActionSpace::new(spec.n_sensors(), spec.n_channels())?;
            let policy = QGreedy {
                net: &net,
                actions: &actions,
                spec: &spec,
            };
            evaluate_policy(&policy, &spec, steps, seed)
        }
        "actor" => evaluate_policy(&ActorGreedy { actor: &net, spec: &spec }, &spec, steps, seed),
        other => Err(Error::Config(format!("cannot evaluate a `{other}` checkpoint"))),
    }
}

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::system::{generate_system_with, GeneratedSystem};
use super::DEFAULT_EVAL_STEPS;
use crate::channel::DEFAULT_DROP_PROBS;
use crate::error::{Error, Result};
use crate::estimation::DEFAULT_TAU_CAP;
use crate::mdp::{MdpSpec, ViOptions};
use crate::training::TrainingConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    Dqn,
    SeDqn,
    Ddpg,
    SeDdpg,
    ValueIteration,
}

impl AgentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AgentKind::Dqn => "dqn",
            AgentKind::SeDqn => "se_dqn",
            AgentKind::Ddpg => "ddpg",
            AgentKind::SeDdpg => "se_ddpg",
            AgentKind::ValueIteration => "value_iteration",
        }
    }
}

impl std::str::FromStr for AgentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::Config(format!("unknown agent `{s}`")))
    }
}

/// Truncated instance solved exactly by value iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ViConfig {
    pub tau_cap: u32,
    /// One drop probability per channel state; its length is `h̄_vi`.
    pub drop_probs: Vec<f64>,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ViConfig {
    fn default() -> Self {
        let opts = ViOptions::default();
        Self {
            tau_cap: 20,
            drop_probs: vec![DEFAULT_DROP_PROBS[0], DEFAULT_DROP_PROBS[4]],
            tol: opts.tol,
            max_iter: opts.max_iter,
        }
    }
}

impl ViConfig {
    pub fn options(&self) -> ViOptions {
        ViOptions {
            tol: self.tol,
            max_iter: self.max_iter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n_sensors: usize,
    pub n_channels: usize,
    pub seed: u64,
    pub agent: AgentKind,
    pub gamma: f64,
    pub tau_cap: u32,
    pub drop_probs: Vec<f64>,
    pub vi: ViConfig,
    pub training: TrainingConfig,
    pub eval_steps: usize,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_sensors: 6,
            n_channels: 3,
            seed: 0,
            agent: AgentKind::SeDqn,
            gamma: 0.95,
            tau_cap: DEFAULT_TAU_CAP,
            drop_probs: DEFAULT_DROP_PROBS.to_vec(),
            vi: ViConfig::default(),
            training: TrainingConfig::default(),
            eval_steps: DEFAULT_EVAL_STEPS,
            out_dir: PathBuf::from("runs"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let cfg: Self = serde_json::from_str(&fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_channels == 0 || self.n_channels > self.n_sensors {
            return Err(Error::Config(format!(
                "need 1 ≤ n_channels ≤ n_sensors, got {} and {}",
                self.n_channels, self.n_sensors
            )));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::Config(format!("gamma must lie in [0, 1), got {}", self.gamma)));
        }
        if self.tau_cap == 0 || self.vi.tau_cap == 0 {
            return Err(Error::Config("AoI caps must be positive".into()));
        }
        if self.eval_steps == 0 {
            return Err(Error::Config("eval_steps must be positive".into()));
        }
        self.training.validate()
    }

    /// Drop probabilities and AoI cap of the instance this agent runs on.
    fn instance(&self) -> (&[f64], u32) {
        match self.agent {
            AgentKind::ValueIteration => (&self.vi.drop_probs, self.vi.tau_cap),
            _ => (&self.drop_probs, self.tau_cap),
        }
    }

    pub fn generate_system(&self) -> Result<GeneratedSystem> {
        let (drop, _) = self.instance();
        generate_system_with(self.seed, self.n_sensors, self.n_channels, drop.to_vec())
    }

    pub fn mdp_spec(&self, system: &GeneratedSystem) -> Result<MdpSpec> {
        let (_, cap) = self.instance();
        MdpSpec::new(system.processes.clone(), system.channels.clone(), self.gamma, cap)
    }

    /// Training settings with the SE stages folded into the conventional
    /// stage for the plain agents.
    pub fn effective_training(&self) -> TrainingConfig {
        match self.agent {
            AgentKind::Dqn | AgentKind::Ddpg => self.training.clone().conventional_only(),
            _ => self.training.clone(),
        }
    }
}

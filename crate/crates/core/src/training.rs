//! Settings and bookkeeping shared by the DQN and DDPG trainers.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::MdpSpec;
use crate::nn::{Checkpoint, DEFAULT_HIDDEN};

/// Action-selection regime of an episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Loose,
    Tight,
    Conventional,
}

/// How rewards are scaled before they enter TD targets.
///
/// Scaling by a positive constant leaves the optimal policy unchanged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardScale {
    /// `1 / |r(τ_ref, …, τ_ref)|` with `τ_ref = min(AUTO_REFERENCE_AOI, τ_cap)`.
    Auto,
    Fixed(f64),
}

/// Reference age for [`RewardScale::Auto`].
pub const AUTO_REFERENCE_AOI: u32 = 10;

impl RewardScale {
    pub fn resolve(self, spec: &MdpSpec) -> Result<f64> {
        let scale = match self {
            RewardScale::Auto => {
                let tau = AUTO_REFERENCE_AOI.min(spec.tau_cap());
                1.0 / spec.sum_mse(&vec![tau; spec.n_sensors()])
            }
            RewardScale::Fixed(s) => s,
        };
        if scale.is_finite() && scale > 0.0 {
            Ok(scale)
        } else {
            Err(Error::Config(format!("reward scale must be positive and finite, got {scale}")))
        }
    }
}

/// Which actor objective the DDPG trainer minimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActorObjective {
    /// `−α₂·Q(s, μ(s)) + (1−α₂)·‖v − μ(s)‖²` on SE records, `−Q` otherwise.
    Reconciled,
    /// `α₂·Q(s, μ(s)) + (1−α₂)·‖v − μ(s)‖²` on SE records, `Q` otherwise.
    Literal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub loose_episodes: usize,
    pub tight_episodes: usize,
    pub conventional_episodes: usize,
    pub steps_per_episode: usize,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub alpha1: f64,
    pub alpha2: f64,
    pub epsilon_initial: f64,
    pub epsilon_decay: f64,
    pub epsilon_min: f64,
    pub learning_rate: f64,
    pub lr_decay: f64,
    pub target_update_every: usize,
    pub actor_learning_rate: f64,
    pub critic_learning_rate: f64,
    pub soft_update: f64,
    pub noise_sigma_initial: f64,
    pub noise_decay: f64,
    pub noise_min: f64,
    pub hidden: Vec<usize>,
    pub reward_scale: RewardScale,
    pub actor_objective: ActorObjective,
    /// Fill the `wall_ms` log column; off keeps logs reproducible.
    pub record_wall_clock: bool,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            loose_episodes: 50,
            tight_episodes: 100,
            conventional_episodes: 150,
            steps_per_episode: 500,
            batch_size: 128,
            replay_capacity: 20_000,
            alpha1: 0.5,
            alpha2: 0.9,
            epsilon_initial: 1.0,
            epsilon_decay: 0.999,
            epsilon_min: 0.01,
            learning_rate: 1e-4,
            lr_decay: 1e-3,
            target_update_every: 100,
            actor_learning_rate: 1e-4,
            critic_learning_rate: 1e-3,
            soft_update: 0.005,
            noise_sigma_initial: 0.3,
            noise_decay: 0.999,
            noise_min: 0.01,
            hidden: DEFAULT_HIDDEN.to_vec(),
            reward_scale: RewardScale::Auto,
            actor_objective: ActorObjective::Reconciled,
            record_wall_clock: false,
        }
    }
}

impl TrainingConfig {
    pub fn total_episodes(&self) -> usize {
        self.loose_episodes + self.tight_episodes + self.conventional_episodes
    }

    /// Stage of the 0-based episode `episode`.
    pub fn stage_of(&self, episode: usize) -> Stage {
        if episode < self.loose_episodes {
            Stage::Loose
        } else if episode < self.loose_episodes + self.tight_episodes {
            Stage::Tight
        } else {
            Stage::Conventional
        }
    }

    /// Moves every SE episode into the conventional stage.
    pub fn conventional_only(mut self) -> Self {
        self.conventional_episodes = self.total_episodes();
        self.loose_episodes = 0;
        self.tight_episodes = 0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")))
            }
        };
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
        };
        unit("alpha1", self.alpha1)?;
        unit("alpha2", self.alpha2)?;
        unit("epsilon_initial", self.epsilon_initial)?;
        unit("epsilon_decay", self.epsilon_decay)?;
        unit("epsilon_min", self.epsilon_min)?;
        unit("soft_update", self.soft_update)?;
        unit("noise_decay", self.noise_decay)?;
        positive("learning_rate", self.learning_rate)?;
        positive("actor_learning_rate", self.actor_learning_rate)?;
        positive("critic_learning_rate", self.critic_learning_rate)?;
        if !(self.lr_decay >= 0.0 && self.noise_sigma_initial >= 0.0 && self.noise_min >= 0.0) {
            return Err(Error::Config("decay and noise parameters must be non-negative".into()));
        }
        if self.steps_per_episode == 0 || self.batch_size == 0 || self.replay_capacity == 0 {
            return Err(Error::Config("steps_per_episode, batch_size and replay_capacity must be positive".into()));
        }
        if self.target_update_every == 0 {
            return Err(Error::Config("target_update_every must be positive".into()));
        }
        if self.hidden.iter().any(|&h| h == 0) {
            return Err(Error::Config("hidden layer widths must be positive".into()));
        }
        if let RewardScale::Fixed(s) = self.reward_scale {
            positive("reward_scale", s)?;
        }
        Ok(())
    }
}

/// Independent generators for the environment, the agent, and weight
/// initialization, all derived from one seed.
pub struct RunRngs {
    pub env: ChaCha8Rng,
    pub agent: ChaCha8Rng,
    pub init: ChaCha8Rng,
}

impl RunRngs {
    pub fn new(seed: u64) -> Self {
        let stream = |s: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(s);
            rng
        };
        Self {
            env: stream(1),
            agent: stream(2),
            init: stream(3),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    /// 1-based.
    pub episode: usize,
    pub stage: Stage,
    pub steps: usize,
    pub epsilon: f64,
    pub xi: f64,
    pub avg_sum_mse: f64,
    /// Mean training loss over the episode's updates; critic loss for DDPG.
    pub loss_mean: Option<f64>,
    pub wall_ms: u64,
    pub actor_loss_mean: Option<f64>,
    pub critic_loss_mean: Option<f64>,
    pub noise_sigma: Option<f64>,
}

const BASE_COLUMNS: &str = "episode,steps,epsilon,xi,avg_sum_mse,loss_mean,wall_ms";
const DDPG_COLUMNS: &str = ",actor_loss_mean,critic_loss_mean,noise_sigma";

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes the per-episode training curve. DDPG columns are included when
/// any row carries a noise level.
pub fn write_training_csv<W: Write>(out: &mut W, log: &[EpisodeLog]) -> Result<()> {
    let ddpg = log.iter().any(|e| e.noise_sigma.is_some());
    write!(out, "{BASE_COLUMNS}")?;
    if ddpg {
        write!(out, "{DDPG_COLUMNS}")?;
    }
    writeln!(out)?;
    for e in log {
        write!(
            out,
            "{},{},{},{},{},{},{}",
            e.episode,
            e.steps,
            e.epsilon,
            e.xi,
            e.avg_sum_mse,
            cell(e.loss_mean),
            e.wall_ms
        )?;
        if ddpg {
            write!(
                out,
                ",{},{},{}",
                cell(e.actor_loss_mean),
                cell(e.critic_loss_mean),
                cell(e.noise_sigma)
            )?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Networks saved when a stage ends.
#[derive(Debug, Clone, PartialEq)]
pub struct StageSnapshot {
    /// `loose`, `tight`, or `final`.
    pub label: String,
    /// Episodes completed when the snapshot was taken.
    pub episode: usize,
    /// Named checkpoints (`q`, or `actor` and `critic`).
    pub checkpoints: Vec<(String, Checkpoint)>,
}

/// Running mean that yields `None` when empty.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct Mean {
    sum: f64,
    n: usize,
}

impl Mean {
    pub(crate) fn push(&mut self, x: f64) {
        self.sum += x;
        self.n += 1;
    }

    pub(crate) fn get(&self) -> Option<f64> {
        (self.n > 0).then(|| self.sum / self.n as f64)
    }
}

/// Label of the stage that ends after 0-based `episode`, if one does.
pub(crate) fn stage_boundary(cfg: &TrainingConfig, episode: usize) -> Option<&'static str> {
    let done = episode + 1;
    if done == cfg.total_episodes() {
        Some("final")
    } else if cfg.loose_episodes > 0 && done == cfg.loose_episodes {
        Some("loose")
    } else if cfg.tight_episodes > 0 && done == cfg.loose_episodes + cfg.tight_episodes {
        Some("tight")
    } else {
        None
    }
}

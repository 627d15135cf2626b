use std::time::Instant;

use super::loss::{actor_loss_and_grad, critic_loss_and_grad};
use super::{se_action_ddpg, DdpgTransition};
use crate::dqn::{ExplorationSchedule, LossParams, ReplayMemory};
use crate::error::Result;
use crate::features::input_dim;
use crate::mdp::{step, MdpSpec};
use crate::nn::{Adam, AdamConfig, Checkpoint, Network, OutputActivation};
use crate::training::{stage_boundary, EpisodeLog, Mean, RunRngs, StageSnapshot, TrainingConfig};

/// Uniform range of the final-layer initial weights of both networks.
const FINAL_LAYER_INIT: f64 = 3e-3;

#[derive(Debug, Clone)]
pub struct TrainedDdpg {
    pub actor: Network,
    pub critic: Network,
    pub target_actor: Network,
    pub target_critic: Network,
    pub actor_optimizer: Adam,
    pub critic_optimizer: Adam,
    pub log: Vec<EpisodeLog>,
    pub snapshots: Vec<StageSnapshot>,
}

pub fn train_se_ddpg(spec: &MdpSpec, cfg: &TrainingConfig, seed: u64) -> Result<TrainedDdpg> {
    train_se_ddpg_with(spec, cfg, seed, &mut |_| {})
}

/// Trains actor and critic through the configured stages, calling
/// `observer` after every episode.
pub fn train_se_ddpg_with(
    spec: &MdpSpec,
    cfg: &TrainingConfig,
    seed: u64,
    observer: &mut dyn FnMut(&EpisodeLog),
) -> Result<TrainedDdpg> {
    cfg.validate()?;
    let mut rngs = RunRngs::new(seed);
    let n = spec.n_sensors();
    let feat = input_dim(spec);
    let dims = |input: usize, output: usize| {
        let mut d = vec![input];
        d.extend(&cfg.hidden);
        d.push(output);
        d
    };
    let mut actor = Network::with_output_scale(dims(feat, n), OutputActivation::Tanh, FINAL_LAYER_INIT, &mut rngs.init)?;
    let mut critic =
        Network::with_output_scale(dims(feat + n, 1), OutputActivation::Identity, FINAL_LAYER_INIT, &mut rngs.init)?;
    let mut target_actor = actor.clone();
    let mut target_critic = critic.clone();
    let mut actor_opt = Adam::new(AdamConfig::new(cfg.actor_learning_rate, cfg.lr_decay), actor.n_params());
    let mut critic_opt = Adam::new(AdamConfig::new(cfg.critic_learning_rate, cfg.lr_decay), critic.n_params());
    let mut replay = ReplayMemory::new(cfg.replay_capacity);
    let mut sched = ExplorationSchedule::new(cfg.epsilon_initial, cfg.epsilon_decay, cfg.epsilon_min);
    let mut sigma = cfg.noise_sigma_initial;
    let loss_params = LossParams {
        alpha1: cfg.alpha1,
        gamma: spec.gamma(),
        reward_scale: cfg.reward_scale.resolve(spec)?,
    };

    let mut log = Vec::with_capacity(cfg.total_episodes());
    let mut snapshots = Vec::new();
    for episode in 0..cfg.total_episodes() {
        let started = Instant::now();
        let stage = cfg.stage_of(episode);
        let mut state = spec.initial_state(&mut rngs.env);
        let mut mse = Mean::default();
        let mut critic_losses = Mean::default();
        let mut actor_losses = Mean::default();
        for _ in 0..cfg.steps_per_episode {
            let sel = se_action_ddpg(&actor, &state, &sched, sigma, stage, spec, &mut rngs.agent)?;
            debug_assert!(sel.se_action.as_ref().is_none_or(|v| *v == sel.executed));
            let (next, r) = step(spec, &state, &sel.schedule, &mut rngs.env)?;
            mse.push(-r);
            replay.push(DdpgTransition {
                s: state,
                v: sel.executed,
                v_hat: sel.se_action,
                v_tilde: sel.actor,
                r,
                s_next: next.clone(),
            });
            if replay.len() >= cfg.batch_size {
                let batch = replay.sample(cfg.batch_size, &mut rngs.agent);
                let (cl, cg) =
                    critic_loss_and_grad(&batch, &critic, &target_critic, &target_actor, spec, &loss_params)?;
                critic_opt.step(critic.params_mut(), &cg, episode)?;
                let (al, ag) = actor_loss_and_grad(&batch, &actor, &critic, spec, cfg.alpha2, cfg.actor_objective)?;
                actor_opt.step(actor.params_mut(), &ag, episode)?;
                target_critic.sync_from(&critic, cfg.soft_update)?;
                target_actor.sync_from(&actor, cfg.soft_update)?;
                critic_losses.push(cl);
                actor_losses.push(al);
            }
            sched.step();
            sigma = (sigma * cfg.noise_decay).max(cfg.noise_min);
            state = next;
        }
        let entry = EpisodeLog {
            episode: episode + 1,
            stage,
            steps: cfg.steps_per_episode,
            epsilon: sched.epsilon,
            xi: sched.xi,
            avg_sum_mse: mse.get().unwrap_or(0.0),
            loss_mean: critic_losses.get(),
            wall_ms: if cfg.record_wall_clock {
                started.elapsed().as_millis() as u64
            } else {
                0
            },
            actor_loss_mean: actor_losses.get(),
            critic_loss_mean: critic_losses.get(),
            noise_sigma: Some(sigma),
        };
        observer(&entry);
        log.push(entry);
        if let Some(label) = stage_boundary(cfg, episode) {
            let tag = |c: Checkpoint| {
                c.with_metadata("agent", "ddpg")
                    .with_metadata("stage", label)
                    .with_metadata("episode", episode + 1)
            };
            snapshots.push(StageSnapshot {
                label: label.to_string(),
                episode: episode + 1,
                checkpoints: vec![
                    ("actor".to_string(), tag(Checkpoint::from_network(&actor, Some(&actor_opt)))),
                    ("critic".to_string(), tag(Checkpoint::from_network(&critic, Some(&critic_opt)))),
                ],
            });
        }
    }
    Ok(TrainedDdpg {
        actor,
        critic,
        target_actor,
        target_critic,
        actor_optimizer: actor_opt,
        critic_optimizer: critic_opt,
        log,
        snapshots,
    })
}

use std::time::Instant;

use super::loss::{se_loss_and_grad, LossParams};
use super::select::{select_dqn_action, QGreedy};
use super::{ExplorationSchedule, ReplayMemory, TransitionRecord};
use crate::error::Result;
use crate::features::input_dim;
use crate::mdp::{step, ActionSpace, MdpSpec};
use crate::nn::{Adam, AdamConfig, Checkpoint, Network, OutputActivation};
use crate::training::{stage_boundary, EpisodeLog, Mean, RunRngs, StageSnapshot, TrainingConfig};

#[derive(Debug, Clone)]
pub struct TrainedDqn {
    pub qnet: Network,
    pub target: Network,
    pub optimizer: Adam,
    pub actions: ActionSpace,
    pub log: Vec<EpisodeLog>,
    pub snapshots: Vec<StageSnapshot>,
}

/// Trains a Q-network through the loose, tight, and conventional stages
/// configured in `cfg`. With no SE episodes this is plain DQN.
pub fn train_se_dqn(spec: &MdpSpec, cfg: &TrainingConfig, seed: u64) -> Result<TrainedDqn> {
    train_se_dqn_with(spec, cfg, seed, &mut |_| {})
}

/// As [`train_se_dqn`], calling `observer` after every episode.
pub fn train_se_dqn_with(
    spec: &MdpSpec,
    cfg: &TrainingConfig,
    seed: u64,
    observer: &mut dyn FnMut(&EpisodeLog),
) -> Result<TrainedDqn> {
    cfg.validate()?;
    let mut rngs = RunRngs::new(seed);
    let actions = ActionSpace::new(spec.n_sensors(), spec.n_channels())?;
    let mut dims = vec![input_dim(spec)];
    dims.extend(&cfg.hidden);
    dims.push(actions.len());
    let mut qnet = Network::new(dims, OutputActivation::Identity, &mut rngs.init)?;
    let mut target = qnet.clone();
    let mut optimizer = Adam::new(AdamConfig::new(cfg.learning_rate, cfg.lr_decay), qnet.n_params());
    let mut replay = ReplayMemory::new(cfg.replay_capacity);
    let mut sched = ExplorationSchedule::new(cfg.epsilon_initial, cfg.epsilon_decay, cfg.epsilon_min);
    let loss_params = LossParams {
        alpha1: cfg.alpha1,
        gamma: spec.gamma(),
        reward_scale: cfg.reward_scale.resolve(spec)?,
    };

    let mut log = Vec::with_capacity(cfg.total_episodes());
    let mut snapshots = Vec::new();
    let mut global_step = 0usize;
    for episode in 0..cfg.total_episodes() {
        let started = Instant::now();
        let stage = cfg.stage_of(episode);
        let mut state = spec.initial_state(&mut rngs.env);
        let mut mse = Mean::default();
        let mut losses = Mean::default();
        for _ in 0..cfg.steps_per_episode {
            let src = QGreedy {
                net: &qnet,
                actions: &actions,
                spec,
            };
            let sel = select_dqn_action(&src, stage, &state, &sched, &actions, &mut rngs.agent)?;
            debug_assert!(sel.se_action.as_ref().is_none_or(|a| *a == sel.executed));
            let (next, r) = step(spec, &state, &sel.executed, &mut rngs.env)?;
            mse.push(-r);
            replay.push(TransitionRecord {
                s: state,
                a: sel.executed,
                a_hat: sel.se_action,
                a_tilde: sel.greedy,
                r,
                s_next: next.clone(),
            });
            if replay.len() >= cfg.batch_size {
                let batch = replay.sample(cfg.batch_size, &mut rngs.agent);
                let (loss, grads) = se_loss_and_grad(&batch, &qnet, &target, &actions, spec, &loss_params)?;
                optimizer.step(qnet.params_mut(), &grads, episode)?;
                losses.push(loss);
            }
            global_step += 1;
            if global_step % cfg.target_update_every == 0 {
                target.sync_from(&qnet, 1.0)?;
            }
            sched.step();
            state = next;
        }
        let entry = EpisodeLog {
            episode: episode + 1,
            stage,
            steps: cfg.steps_per_episode,
            epsilon: sched.epsilon,
            xi: sched.xi,
            avg_sum_mse: mse.get().unwrap_or(0.0),
            loss_mean: losses.get(),
            wall_ms: if cfg.record_wall_clock {
                started.elapsed().as_millis() as u64
            } else {
                0
            },
            actor_loss_mean: None,
            critic_loss_mean: None,
            noise_sigma: None,
        };
        observer(&entry);
        log.push(entry);
        if let Some(label) = stage_boundary(cfg, episode) {
            snapshots.push(StageSnapshot {
                label: label.to_string(),
                episode: episode + 1,
                checkpoints: vec![(
                    "q".to_string(),
                    Checkpoint::from_network(&qnet, Some(&optimizer))
                        .with_metadata("agent", "dqn")
                        .with_metadata("stage", label)
                        .with_metadata("episode", episode + 1),
                )],
            });
        }
    }
    Ok(TrainedDqn {
        qnet,
        target,
        optimizer,
        actions,
        log,
        snapshots,
    })
}

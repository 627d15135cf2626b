//! DDPG over continuous ranking vectors ("virtual actions") that decode to
//! schedules, with optional structure-enhanced selection and losses.

mod loss;
mod train;
mod virtual_action;

pub use loss::{actor_loss, actor_loss_and_grad, critic_loss, critic_loss_and_grad};
pub use train::{train_se_ddpg, train_se_ddpg_with, TrainedDdpg};
pub use virtual_action::{
    actor_explore, actor_output, canonical_virtual, map_virtual_to_schedule, perturb, ActorGreedy, VirtualAction,
};

use rand::Rng;

use crate::dqn::{se_inference, ExplorationSchedule};
use crate::error::Result;
use crate::mdp::{MdpSpec, ScheduleAction, SystemState};
use crate::nn::Network;
use crate::training::Stage;

/// One stored experience. `v_hat` is present only when the SE action was
/// executed, in which case it equals `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct DdpgTransition {
    pub s: SystemState,
    pub v: VirtualAction,
    pub v_hat: Option<VirtualAction>,
    /// Actor output `μ(s)` at the time of acting.
    pub v_tilde: VirtualAction,
    pub r: f64,
    pub s_next: SystemState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DdpgSelection {
    pub executed: VirtualAction,
    pub schedule: ScheduleAction,
    pub se_action: Option<VirtualAction>,
    pub actor: VirtualAction,
}

/// Action selection for one step. The conventional stage always explores
/// with actor noise; SE stages run SE inference with probability `1 − ε`
/// and fall back to actor noise when no SE schedule survives.
pub fn se_action_ddpg<R: Rng + ?Sized>(
    actor: &Network,
    state: &SystemState,
    sched: &ExplorationSchedule,
    noise_sigma: f64,
    stage: Stage,
    spec: &MdpSpec,
    rng: &mut R,
) -> Result<DdpgSelection> {
    let mu = actor_output(actor, state, spec)?;
    let se = if stage == Stage::Conventional || rng.random::<f64>() < sched.epsilon {
        None
    } else {
        let src = ActorGreedy { actor, spec };
        match se_inference(&src, stage, state, sched.xi, rng)?.1 {
            Some(a) => Some(canonical_virtual(&a, spec.n_channels())?),
            None => None,
        }
    };
    let executed = match &se {
        Some(v) => v.clone(),
        None => perturb(&mu, noise_sigma, rng),
    };
    Ok(DdpgSelection {
        schedule: map_virtual_to_schedule(&executed, spec.n_channels()),
        executed,
        se_action: se,
        actor: mu,
    })
}

//! Deep Q-learning over the enumerated schedule set, with optional
//! structure-enhanced (SE) action selection and the TD + action-difference
//! loss.

mod explore;
mod loss;
mod replay;
mod select;
mod train;

pub use explore::ExplorationSchedule;
pub use loss::{se_loss, se_loss_and_grad, LossParams};
pub use replay::ReplayMemory;
pub use select::{
    complete_randomly, greedy_action, loose_candidate, loose_se_action, q_values, se_inference, select_dqn_action,
    tight_filter, tight_se_action, GreedySchedule, QGreedy, Selection,
};
pub use train::{train_se_dqn, train_se_dqn_with, TrainedDqn};

use crate::error::Result;
use crate::mdp::{Policy, ScheduleAction, SystemState};

/// One stored experience. `a_hat` is present only when the SE action was
/// executed, in which case it equals `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionRecord {
    pub s: SystemState,
    pub a: ScheduleAction,
    pub a_hat: Option<ScheduleAction>,
    pub a_tilde: ScheduleAction,
    pub r: f64,
    pub s_next: SystemState,
}

impl Policy for QGreedy<'_> {
    fn decide(&self, state: &SystemState) -> Result<ScheduleAction> {
        self.greedy_schedule(state)
    }
}

//! The sensor scheduling MDP: states, actions, stochastic stepping, the
//! exact transition kernel, an exhaustive value-iteration solver, and the
//! threshold-structure checker.

mod env;
mod threshold;
mod vi;

pub use env::{reward, step, transition_probability, MdpSpec};
pub use threshold::{
    check_threshold_structure, policy_table, write_policy_csv, Property, ThresholdViolation,
};
pub use vi::{value_iteration, StateSpace, ValueIterationSolution, ViOptions, VI_STATE_LIMIT};

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::channel::ChannelMatrix;
use crate::error::{Error, Result};

/// MDP state `(τ, H)`: AoI per sensor plus the current channel matrix.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SystemState {
    pub tau: Vec<u32>,
    pub h: ChannelMatrix,
}

impl SystemState {
    pub fn new(tau: Vec<u32>, h: ChannelMatrix) -> Result<Self> {
        if tau.len() != h.n_sensors() {
            return Err(Error::Shape(format!(
                "{} AoI entries for {} sensors",
                tau.len(),
                h.n_sensors()
            )));
        }
        if tau.iter().any(|&t| t == 0) {
            return Err(Error::Domain("AoI entries must be at least 1".into()));
        }
        Ok(Self { tau, h })
    }

    pub fn n_sensors(&self) -> usize {
        self.tau.len()
    }
}

/// Channel assignment: `assign[n] = 0` leaves sensor `n` idle,
/// `assign[n] = m` puts it on channel `m` (1-based).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ScheduleAction {
    pub assign: Vec<u8>,
}

impl ScheduleAction {
    pub fn new(assign: Vec<u8>) -> Self {
        Self { assign }
    }

    pub fn idle(n_sensors: usize) -> Self {
        Self { assign: vec![0; n_sensors] }
    }

    pub fn n_sensors(&self) -> usize {
        self.assign.len()
    }

    /// Channel of `sensor` (0 when idle).
    pub fn channel_of(&self, sensor: usize) -> u8 {
        self.assign[sensor]
    }

    /// Sensor on channel `m` (1-based), if any.
    pub fn sensor_on(&self, channel: u8) -> Option<usize> {
        self.assign.iter().position(|&a| a == channel)
    }

    /// Each channel carries at most one sensor and no entry exceeds `M`.
    pub fn satisfies_loose(&self, n_channels: usize) -> bool {
        let mut used = vec![false; n_channels + 1];
        for &a in &self.assign {
            let a = a as usize;
            if a > n_channels {
                return false;
            }
            if a > 0 {
                if used[a] {
                    return false;
                }
                used[a] = true;
            }
        }
        true
    }

    /// Every channel carries exactly one sensor.
    pub fn satisfies_exact(&self, n_channels: usize) -> bool {
        self.satisfies_loose(n_channels)
            && self.assign.iter().filter(|&&a| a > 0).count() == n_channels
    }

    pub fn validate(&self, n_sensors: usize, n_channels: usize) -> Result<()> {
        if self.assign.len() != n_sensors {
            return Err(Error::InvalidAction(format!(
                "action covers {} sensors, expected {n_sensors}",
                self.assign.len()
            )));
        }
        if !self.satisfies_exact(n_channels) {
            return Err(Error::InvalidAction(format!(
                "{:?} does not assign each of the {n_channels} channels to exactly one sensor",
                self.assign
            )));
        }
        Ok(())
    }
}

/// All valid schedules for `N` sensors and `M` channels.
///
/// Ordering is lexicographic in the tuple (sensor on channel 1, sensor on
/// channel 2, …), which for `N = 2, M = 1` gives `[(1,0), (0,1)]`. The
/// order is fixed and defines DQN output indices.
pub fn enumerate_actions(n_sensors: usize, n_channels: usize) -> Result<Vec<ScheduleAction>> {
    if n_channels == 0 || n_channels > n_sensors {
        return Err(Error::Domain(format!(
            "need 1 ≤ M ≤ N, got N={n_sensors}, M={n_channels}"
        )));
    }
    let mut out = Vec::new();
    let mut current = vec![0u8; n_sensors];
    fn fill(channel: usize, n_channels: usize, current: &mut [u8], out: &mut Vec<ScheduleAction>) {
        if channel > n_channels {
            out.push(ScheduleAction::new(current.to_vec()));
            return;
        }
        for sensor in 0..current.len() {
            if current[sensor] == 0 {
                current[sensor] = channel as u8;
                fill(channel + 1, n_channels, current, out);
                current[sensor] = 0;
            }
        }
    }
    fill(1, n_channels, &mut current, &mut out);
    Ok(out)
}

/// Canonical action list with reverse lookup.
#[derive(Debug, Clone)]
pub struct ActionSpace {
    actions: Vec<ScheduleAction>,
    index: HashMap<ScheduleAction, usize>,
    n_channels: usize,
}

impl ActionSpace {
    pub fn new(n_sensors: usize, n_channels: usize) -> Result<Self> {
        let actions = enumerate_actions(n_sensors, n_channels)?;
        let index = actions.iter().enumerate().map(|(i, a)| (a.clone(), i)).collect();
        Ok(Self { actions, index, n_channels })
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn get(&self, idx: usize) -> &ScheduleAction {
        &self.actions[idx]
    }

    pub fn index_of(&self, action: &ScheduleAction) -> Option<usize> {
        self.index.get(action).copied()
    }

    pub fn actions(&self) -> &[ScheduleAction] {
        &self.actions
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }
}

/// A stationary scheduling policy.
pub trait Policy {
    fn decide(&self, state: &SystemState) -> Result<ScheduleAction>;
}

/// Adapts a closure into a [`Policy`].
pub struct FnPolicy<F>(pub F);

impl<F> Policy for FnPolicy<F>
where
    F: Fn(&SystemState) -> ScheduleAction,
{
    fn decide(&self, state: &SystemState) -> Result<ScheduleAction> {
        Ok((self.0)(state))
    }
}

#[cfg(test)]
pub(crate) mod tests_support {
    use super::MdpSpec;
    use crate::channel::{ChannelModel, DEFAULT_DROP_PROBS};
    use crate::estimation::ProcessModel;

    /// Scalar unstable processes and uniform five-state channels.
    pub(crate) fn spec(n: usize, m: usize) -> MdpSpec {
        let p = ProcessModel::scalar(1.1, 1.0, 1.0, 1.0).unwrap();
        let ch = ChannelModel::uniform_pairs(n, m, DEFAULT_DROP_PROBS.to_vec(), vec![0.2; 5]).unwrap();
        MdpSpec::new(vec![p; n], ch, 0.95, 100).unwrap()
    }
}

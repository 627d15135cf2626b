use rand::Rng;
use rand_distr::StandardNormal;

use crate::dqn::GreedySchedule;
use crate::error::Result;
use crate::features::input_dim;
use crate::mdp::{MdpSpec, ScheduleAction, SystemState};
use crate::nn::Network;

/// Continuous ranking vector in `[−1, 1]^N`.
pub type VirtualAction = Vec<f64>;

/// Ranks sensors by `v` (descending, ties to the lower index) and gives the
/// top `M` channels `1..=M` in rank order.
pub fn map_virtual_to_schedule(v: &[f64], n_channels: usize) -> ScheduleAction {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[b].total_cmp(&v[a]));
    let mut assign = vec![0u8; v.len()];
    for (rank, &n) in order.iter().take(n_channels).enumerate() {
        assign[n] = rank as u8 + 1;
    }
    ScheduleAction::new(assign)
}

/// Fixed encoding of a schedule: the sensor on channel `m` gets
/// `1 − (m−1)·2/N`; idle sensors get evenly spaced values below the last
/// scheduled one, decreasing with sensor index and ending at −1.
pub fn canonical_virtual(action: &ScheduleAction, n_channels: usize) -> Result<VirtualAction> {
    let n = action.n_sensors();
    action.validate(n, n_channels)?;
    let step = 2.0 / n as f64;
    let lowest = 1.0 - (n_channels as f64 - 1.0) * step;
    let n_idle = n - n_channels;
    let mut idle_rank = 0;
    Ok(action
        .assign
        .iter()
        .map(|&m| {
            if m > 0 {
                1.0 - (m as f64 - 1.0) * step
            } else {
                idle_rank += 1;
                -1.0 + (n_idle - idle_rank) as f64 * (lowest + 1.0) / n_idle as f64
            }
        })
        .collect())
}

/// `clamp(μ(s) + σ·ε, −1, 1)` with `ε` standard normal per entry.
pub fn perturb<R: Rng + ?Sized>(mu: &[f64], sigma: f64, rng: &mut R) -> VirtualAction {
    mu.iter()
        .map(|&m| {
            let z: f64 = rng.sample(StandardNormal);
            (m + sigma * z).clamp(-1.0, 1.0)
        })
        .collect()
}

pub fn actor_output(actor: &Network, state: &SystemState, spec: &MdpSpec) -> Result<VirtualAction> {
    actor.forward(&crate::features::state_to_input(state, spec))
}

/// Actor output with Gaussian exploration noise, clamped to `[−1, 1]`.
pub fn actor_explore<R: Rng + ?Sized>(
    actor: &Network,
    state: &SystemState,
    noise_sigma: f64,
    spec: &MdpSpec,
    rng: &mut R,
) -> Result<VirtualAction> {
    Ok(perturb(&actor_output(actor, state, spec)?, noise_sigma, rng))
}

/// Greedy schedules induced by an actor network.
pub struct ActorGreedy<'a> {
    pub actor: &'a Network,
    pub spec: &'a MdpSpec,
}

impl GreedySchedule for ActorGreedy<'_> {
    fn greedy_schedules(&self, states: &[SystemState]) -> Result<Vec<ScheduleAction>> {
        if states.is_empty() {
            return Ok(Vec::new());
        }
        let mut flat = Vec::with_capacity(states.len() * input_dim(self.spec));
        for s in states {
            crate::features::push_features(s, self.spec, &mut flat);
        }
        let x = ndarray::Array2::from_shape_vec((states.len(), input_dim(self.spec)), flat)
            .expect("feature rows have equal length");
        let out = self.actor.forward_batch(x)?;
        let m = self.spec.n_channels();
        Ok(out
            .rows()
            .into_iter()
            .map(|row| map_virtual_to_schedule(row.as_slice().expect("contiguous rows"), m))
            .collect())
    }
}

impl crate::mdp::Policy for ActorGreedy<'_> {
    fn decide(&self, state: &SystemState) -> Result<ScheduleAction> {
        self.greedy_schedule(state)
    }
}

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;

use super::ExplorationSchedule;
use crate::error::Result;
use crate::features::{input_dim, push_features};
use crate::mdp::{ActionSpace, MdpSpec, ScheduleAction, SystemState};
use crate::nn::Network;
use crate::training::Stage;

/// Source of greedy schedules consulted at perturbed states.
pub trait GreedySchedule {
    fn greedy_schedules(&self, states: &[SystemState]) -> Result<Vec<ScheduleAction>>;

    fn greedy_schedule(&self, state: &SystemState) -> Result<ScheduleAction> {
        Ok(self.greedy_schedules(std::slice::from_ref(state))?.remove(0))
    }
}

/// Any state → schedule function is a greedy source; handy for stubs.
impl<F> GreedySchedule for F
where
    F: Fn(&SystemState) -> ScheduleAction,
{
    fn greedy_schedules(&self, states: &[SystemState]) -> Result<Vec<ScheduleAction>> {
        Ok(states.iter().map(self).collect())
    }
}

/// Outcome of one action selection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Selection {
    pub executed: ScheduleAction,
    /// SE action, present only when it was executed.
    pub se_action: Option<ScheduleAction>,
    /// Greedy action at the current state.
    pub greedy: ScheduleAction,
}

/// Q-network greedy source over the canonical action list.
pub struct QGreedy<'a> {
    pub net: &'a Network,
    pub actions: &'a ActionSpace,
    pub spec: &'a MdpSpec,
}

impl GreedySchedule for QGreedy<'_> {
    fn greedy_schedules(&self, states: &[SystemState]) -> Result<Vec<ScheduleAction>> {
        if states.is_empty() {
            return Ok(Vec::new());
        }
        let q = self.net.forward_batch(features_batch(states, self.spec))?;
        Ok(q.rows()
            .into_iter()
            .map(|row| self.actions.get(argmax_first(row.iter().copied())).clone())
            .collect())
    }
}

pub(crate) fn features_batch<'s>(states: impl IntoIterator<Item = &'s SystemState>, spec: &MdpSpec) -> Array2<f64> {
    let mut flat = Vec::new();
    let mut rows = 0;
    for s in states {
        push_features(s, spec, &mut flat);
        rows += 1;
    }
    Array2::from_shape_vec((rows, input_dim(spec)), flat).expect("feature rows have equal length")
}

/// Index of the first maximal value.
pub(crate) fn argmax_first(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.into_iter().enumerate() {
        if v > best.1 || (i == 0 && v.is_nan()) {
            best = (i, v);
        }
    }
    best.0
}

pub fn q_values(qnet: &Network, state: &SystemState, spec: &MdpSpec) -> Result<Vec<f64>> {
    let q = qnet.forward_batch(features_batch([state], spec))?;
    Ok(q.row(0).to_vec())
}

/// Greedy action `argmax_a Q(s, a)`, ties to the lowest canonical index.
pub fn greedy_action(qnet: &Network, state: &SystemState, spec: &MdpSpec, actions: &ActionSpace) -> Result<ScheduleAction> {
    QGreedy { net: qnet, actions, spec }.greedy_schedule(state)
}

/// Loose-stage SE candidate: per-sensor inference from AoI-decremented
/// states, before the channel constraint is checked.
pub fn loose_candidate<G, R>(
    greedy_src: &G,
    state: &SystemState,
    greedy: &ScheduleAction,
    xi: f64,
    rng: &mut R,
) -> Result<ScheduleAction>
where
    G: GreedySchedule + ?Sized,
    R: Rng + ?Sized,
{
    let n_sensors = state.n_sensors();
    let probe: Vec<usize> = (0..n_sensors).filter(|&n| state.tau[n] > 1).collect();
    let perturbed: Vec<SystemState> = probe
        .iter()
        .map(|&n| {
            let mut s = state.clone();
            s.tau[n] -= 1;
            s
        })
        .collect();
    let inferred = greedy_src.greedy_schedules(&perturbed)?;

    let mut assign = greedy.assign.clone();
    for (&n, dot) in probe.iter().zip(&inferred) {
        let m = dot.channel_of(n);
        if m == 0 {
            continue;
        }
        let h_m = state.h.get(n, m as usize - 1);
        let better: Vec<u8> = (1..=state.h.n_channels() as u8)
            .filter(|&c| state.h.get(n, c as usize - 1) > h_m)
            .collect();
        assign[n] = if !better.is_empty() && rng.random::<f64>() < xi {
            better[rng.random_range(0..better.len())]
        } else {
            m
        };
    }
    Ok(ScheduleAction::new(assign))
}

/// Assigns each unused channel to a distinct unscheduled sensor, uniformly
/// at random.
pub fn complete_randomly<R: Rng + ?Sized>(partial: &ScheduleAction, n_channels: usize, rng: &mut R) -> ScheduleAction {
    let mut assign = partial.assign.clone();
    let unused: Vec<u8> = (1..=n_channels as u8).filter(|&c| partial.sensor_on(c).is_none()).collect();
    let mut idle: Vec<usize> = (0..assign.len()).filter(|&n| assign[n] == 0).collect();
    idle.shuffle(rng);
    for (&c, &n) in unused.iter().zip(&idle) {
        assign[n] = c;
    }
    ScheduleAction::new(assign)
}

/// Tight-stage filter: keeps `â_n = m` only if the greedy action at the
/// state with `h_{n,m}` one step worse still assigns `m` to `n`.
pub fn tight_filter<G>(
    greedy_src: &G,
    state: &SystemState,
    candidate: &ScheduleAction,
    greedy: &ScheduleAction,
) -> Result<ScheduleAction>
where
    G: GreedySchedule + ?Sized,
{
    let probe: Vec<(usize, u8)> = (0..state.n_sensors())
        .filter_map(|n| {
            let m = candidate.channel_of(n);
            (m > 0 && state.h.get(n, m as usize - 1) > 1).then_some((n, m))
        })
        .collect();
    let perturbed: Vec<SystemState> = probe
        .iter()
        .map(|&(n, m)| {
            let mut s = state.clone();
            let c = m as usize - 1;
            s.h.set(n, c, s.h.get(n, c) - 1);
            s
        })
        .collect();
    let checks = greedy_src.greedy_schedules(&perturbed)?;
    let mut assign = candidate.assign.clone();
    for (&(n, m), ddot) in probe.iter().zip(&checks) {
        if ddot.channel_of(n) != m {
            assign[n] = greedy.channel_of(n);
        }
    }
    Ok(ScheduleAction::new(assign))
}

/// SE inference past the ε coin. Returns the greedy action and the SE
/// action to execute, if the stage's constraint admits one.
pub fn se_inference<G, R>(
    greedy_src: &G,
    stage: Stage,
    state: &SystemState,
    xi: f64,
    rng: &mut R,
) -> Result<(ScheduleAction, Option<ScheduleAction>)>
where
    G: GreedySchedule + ?Sized,
    R: Rng + ?Sized,
{
    let n_channels = state.h.n_channels();
    let greedy = greedy_src.greedy_schedule(state)?;
    let se = match stage {
        Stage::Conventional => None,
        Stage::Loose => {
            let cand = loose_candidate(greedy_src, state, &greedy, xi, rng)?;
            cand.satisfies_loose(n_channels)
                .then(|| complete_randomly(&cand, n_channels, rng))
        }
        Stage::Tight => {
            let cand = loose_candidate(greedy_src, state, &greedy, xi, rng)?;
            let kept = tight_filter(greedy_src, state, &cand, &greedy)?;
            kept.satisfies_exact(n_channels).then_some(kept)
        }
    };
    Ok((greedy, se))
}

/// ε-greedy selection with SE inference in the loose and tight stages.
pub fn select_dqn_action<G, R>(
    greedy_src: &G,
    stage: Stage,
    state: &SystemState,
    sched: &ExplorationSchedule,
    actions: &ActionSpace,
    rng: &mut R,
) -> Result<Selection>
where
    G: GreedySchedule + ?Sized,
    R: Rng + ?Sized,
{
    if rng.random::<f64>() < sched.epsilon {
        let executed = actions.get(rng.random_range(0..actions.len())).clone();
        let greedy = greedy_src.greedy_schedule(state)?;
        return Ok(Selection {
            executed,
            se_action: None,
            greedy,
        });
    }
    let (greedy, se) = se_inference(greedy_src, stage, state, sched.xi, rng)?;
    Ok(Selection {
        executed: se.clone().unwrap_or_else(|| greedy.clone()),
        se_action: se,
        greedy,
    })
}

pub fn loose_se_action<R: Rng + ?Sized>(
    qnet: &Network,
    state: &SystemState,
    sched: &ExplorationSchedule,
    spec: &MdpSpec,
    actions: &ActionSpace,
    rng: &mut R,
) -> Result<Selection> {
    let src = QGreedy { net: qnet, actions, spec };
    select_dqn_action(&src, Stage::Loose, state, sched, actions, rng)
}

pub fn tight_se_action<R: Rng + ?Sized>(
    qnet: &Network,
    state: &SystemState,
    sched: &ExplorationSchedule,
    spec: &MdpSpec,
    actions: &ActionSpace,
    rng: &mut R,
) -> Result<Selection> {
    let src = QGreedy { net: qnet, actions, spec };
    select_dqn_action(&src, Stage::Tight, state, sched, actions, rng)
}

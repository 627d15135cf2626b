//! Exhaustive value iteration on the truncated state space.

use super::{ActionSpace, MdpSpec, Policy, ScheduleAction, SystemState};
use crate::channel::ChannelMatrix;
use crate::error::{Error, Result};

/// Largest state space the solver will enumerate.
pub const VI_STATE_LIMIT: u128 = 10_000_000;

/// Relative tolerance under which two Q-values count as tied.
const TIE_REL_TOL: f64 = 1e-12;

/// Mixed-radix indexing of every `(τ, H)` with `τ_n ∈ 1..=cap`,
/// `H[n,m] ∈ 1..=h̄`. The AoI part is the most significant; sensor 0 and
/// entry (0,0) are the most significant digits within each part.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateSpace {
    n_sensors: usize,
    n_channels: usize,
    tau_cap: u32,
    h_bar: u8,
    tau_count: usize,
    h_count: usize,
}

impl StateSpace {
    pub fn new(n_sensors: usize, n_channels: usize, tau_cap: u32, h_bar: u8) -> Result<Self> {
        let total = (tau_cap as u128)
            .checked_pow(n_sensors as u32)
            .and_then(|t| (h_bar as u128).checked_pow((n_sensors * n_channels) as u32).and_then(|h| t.checked_mul(h)))
            .unwrap_or(u128::MAX);
        if total > VI_STATE_LIMIT {
            return Err(Error::Capacity {
                states: total,
                limit: VI_STATE_LIMIT,
            });
        }
        Ok(Self {
            n_sensors,
            n_channels,
            tau_cap,
            h_bar,
            tau_count: (tau_cap as usize).pow(n_sensors as u32),
            h_count: (h_bar as usize).pow((n_sensors * n_channels) as u32),
        })
    }

    pub fn for_spec(spec: &MdpSpec) -> Result<Self> {
        Self::new(spec.n_sensors(), spec.n_channels(), spec.tau_cap(), spec.h_bar())
    }

    pub fn len(&self) -> usize {
        self.tau_count * self.h_count
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn tau_count(&self) -> usize {
        self.tau_count
    }

    pub fn h_count(&self) -> usize {
        self.h_count
    }

    pub fn tau_cap(&self) -> u32 {
        self.tau_cap
    }

    pub fn h_bar(&self) -> u8 {
        self.h_bar
    }

    pub fn tau_index(&self, tau: &[u32]) -> usize {
        tau.iter()
            .fold(0, |acc, &t| acc * self.tau_cap as usize + (t as usize - 1))
    }

    pub fn h_index(&self, h: &ChannelMatrix) -> usize {
        h.as_slice()
            .iter()
            .fold(0, |acc, &x| acc * self.h_bar as usize + (x as usize - 1))
    }

    pub fn index(&self, state: &SystemState) -> usize {
        self.tau_index(&state.tau) * self.h_count + self.h_index(&state.h)
    }

    pub fn contains(&self, state: &SystemState) -> bool {
        state.tau.len() == self.n_sensors
            && state.h.n_sensors() == self.n_sensors
            && state.h.n_channels() == self.n_channels
            && state.tau.iter().all(|&t| t >= 1 && t <= self.tau_cap)
            && state.h.as_slice().iter().all(|&x| x >= 1 && x <= self.h_bar)
    }

    pub fn tau_at(&self, mut tau_idx: usize) -> Vec<u32> {
        let mut tau = vec![0; self.n_sensors];
        for t in tau.iter_mut().rev() {
            *t = (tau_idx % self.tau_cap as usize) as u32 + 1;
            tau_idx /= self.tau_cap as usize;
        }
        tau
    }

    pub fn h_at(&self, mut h_idx: usize) -> ChannelMatrix {
        let mut states = vec![0u8; self.n_sensors * self.n_channels];
        for x in states.iter_mut().rev() {
            *x = (h_idx % self.h_bar as usize) as u8 + 1;
            h_idx /= self.h_bar as usize;
        }
        ChannelMatrix::new(self.n_sensors, self.n_channels, states).expect("consistent dimensions")
    }

    pub fn state_at(&self, idx: usize) -> SystemState {
        SystemState {
            tau: self.tau_at(idx / self.h_count),
            h: self.h_at(idx % self.h_count),
        }
    }

    pub fn states(&self) -> impl Iterator<Item = SystemState> + '_ {
        (0..self.len()).map(|i| self.state_at(i))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ViOptions {
    /// Stop once `‖T V − V‖_∞ ≤ tol`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ViOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 100_000,
        }
    }
}

/// Value table and greedy policy over the whole truncated state space.
#[derive(Debug, Clone)]
pub struct ValueIterationSolution {
    pub space: StateSpace,
    pub actions: ActionSpace,
    pub values: Vec<f64>,
    /// Action index (into `actions`) per state index.
    pub policy: Vec<usize>,
    pub residual: f64,
    pub iterations: usize,
    /// `‖V_{k+1} − V_k‖_∞` per sweep.
    pub history: Vec<f64>,
}

impl ValueIterationSolution {
    pub fn value(&self, state: &SystemState) -> Option<f64> {
        self.space.contains(state).then(|| self.values[self.space.index(state)])
    }

    pub fn action(&self, state: &SystemState) -> Option<&ScheduleAction> {
        self.space
            .contains(state)
            .then(|| self.actions.get(self.policy[self.space.index(state)]))
    }
}

impl Policy for ValueIterationSolution {
    fn decide(&self, state: &SystemState) -> Result<ScheduleAction> {
        self.action(state)
            .cloned()
            .ok_or_else(|| Error::IncompletePolicy(format!("{:?}", state.tau)))
    }
}

/// Precomputed per-state-action quantities shared across sweeps.
struct Kernel {
    rewards: Vec<f64>,
    h_probs: Vec<f64>,
    /// For each `(τ-index, h-index, action)`: list of `(probability, next τ-index)`.
    outcomes: Vec<Vec<(f64, usize)>>,
}

fn build_kernel(spec: &MdpSpec, space: &StateSpace, actions: &ActionSpace) -> Result<Kernel> {
    let n = spec.n_sensors();
    let cap = spec.tau_cap() as usize;
    let weights: Vec<usize> = (0..n).map(|i| cap.pow((n - 1 - i) as u32)).collect();
    let rewards = (0..space.tau_count())
        .map(|ti| -spec.sum_mse(&space.tau_at(ti)))
        .collect();
    let h_probs = (0..space.h_count())
        .map(|hi| spec.channels().matrix_probability(&space.h_at(hi)))
        .collect();

    let mut outcomes = Vec::with_capacity(space.tau_count() * space.h_count() * actions.len());
    for ti in 0..space.tau_count() {
        let tau = space.tau_at(ti);
        let aged: Vec<usize> = tau.iter().map(|&t| (t as usize + 1).min(cap) - 1).collect();
        let base: usize = aged.iter().zip(&weights).map(|(d, w)| d * w).sum();
        for hi in 0..space.h_count() {
            let h = space.h_at(hi);
            for a in actions.actions() {
                let mut scheduled = Vec::with_capacity(spec.n_channels());
                for (sensor, &ch) in a.assign.iter().enumerate() {
                    if ch > 0 {
                        let p_drop = spec.channels().drop_prob(h.get(sensor, ch as usize - 1))?;
                        scheduled.push((sensor, 1.0 - p_drop));
                    }
                }
                let mut list = Vec::with_capacity(1 << scheduled.len());
                for mask in 0..(1usize << scheduled.len()) {
                    let mut p = 1.0;
                    let mut idx = base;
                    for (bit, &(sensor, p_ok)) in scheduled.iter().enumerate() {
                        if mask & (1 << bit) != 0 {
                            p *= p_ok;
                            idx -= aged[sensor] * weights[sensor];
                        } else {
                            p *= 1.0 - p_ok;
                        }
                    }
                    if p > 0.0 {
                        list.push((p, idx));
                    }
                }
                outcomes.push(list);
            }
        }
    }
    Ok(Kernel {
        rewards,
        h_probs,
        outcomes,
    })
}

/// Expected value over a freshly drawn channel matrix, per next-AoI index.
fn expected_over_channels(values: &[f64], kernel: &Kernel, space: &StateSpace) -> Vec<f64> {
    values
        .chunks_exact(space.h_count())
        .map(|row| row.iter().zip(&kernel.h_probs).map(|(v, p)| v * p).sum())
        .collect()
}

fn argmax_lowest(qs: impl Iterator<Item = f64>) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, q) in qs.enumerate() {
        if best.1 == f64::NEG_INFINITY || q > best.1 + TIE_REL_TOL * best.1.abs().max(1.0) {
            best = (i, q);
        }
    }
    best
}

/// One synchronous Bellman sweep; returns `(T V, greedy policy)`.
fn bellman_sweep(
    spec: &MdpSpec,
    space: &StateSpace,
    n_actions: usize,
    kernel: &Kernel,
    values: &[f64],
) -> (Vec<f64>, Vec<usize>) {
    let ev = expected_over_channels(values, kernel, space);
    let gamma = spec.gamma();
    let mut next = Vec::with_capacity(values.len());
    let mut policy = Vec::with_capacity(values.len());
    for s in 0..space.len() {
        let r = kernel.rewards[s / space.h_count()];
        let start = s * n_actions;
        let (a, q) = argmax_lowest((0..n_actions).map(|a| {
            let cont: f64 = kernel.outcomes[start + a].iter().map(|&(p, t)| p * ev[t]).sum();
            r + gamma * cont
        }));
        next.push(q);
        policy.push(a);
    }
    (next, policy)
}

/// Solves the truncated MDP by synchronous (Jacobi) value iteration from
/// `V = 0`.
///
/// Returns values `V` with `‖T V − V‖_∞ ≤ tol` and the greedy policy of `V`
/// (ties go to the lowest action index).
pub fn value_iteration(spec: &MdpSpec, opts: &ViOptions) -> Result<ValueIterationSolution> {
    let space = StateSpace::for_spec(spec)?;
    let actions = ActionSpace::new(spec.n_sensors(), spec.n_channels())?;
    let kernel = build_kernel(spec, &space, &actions)?;
    let mut values = vec![0.0; space.len()];
    let mut history = Vec::new();
    for iteration in 0..opts.max_iter {
        let (next, policy) = bellman_sweep(spec, &space, actions.len(), &kernel, &values);
        let residual = next
            .iter()
            .zip(&values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        history.push(residual);
        if residual <= opts.tol {
            return Ok(ValueIterationSolution {
                space,
                actions,
                values,
                policy,
                residual,
                iterations: iteration,
                history,
            });
        }
        values = next;
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iter,
        residual: history.last().copied().unwrap_or(f64::INFINITY),
    })
}

use rand::Rng;

use super::{ScheduleAction, SystemState};
use crate::channel::{ChannelMatrix, ChannelModel};
use crate::error::{Error, Result};
use crate::estimation::{MseTable, ProcessModel};

/// Processes, channels, discount, and the AoI cap that together define
/// one (truncated) scheduling MDP.
#[derive(Debug, Clone)]
pub struct MdpSpec {
    processes: Vec<ProcessModel>,
    channels: ChannelModel,
    gamma: f64,
    tau_cap: u32,
    tables: Vec<MseTable>,
}

impl MdpSpec {
    pub fn new(processes: Vec<ProcessModel>, channels: ChannelModel, gamma: f64, tau_cap: u32) -> Result<Self> {
        if processes.len() != channels.n_sensors() {
            return Err(Error::Shape(format!(
                "{} processes for {} sensors",
                processes.len(),
                channels.n_sensors()
            )));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::Domain(format!("discount must lie in [0, 1), got {gamma}")));
        }
        if tau_cap < 1 {
            return Err(Error::Domain("AoI cap must be at least 1".into()));
        }
        let tables = processes
            .iter()
            .map(|p| MseTable::new(p, tau_cap))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            processes,
            channels,
            gamma,
            tau_cap,
            tables,
        })
    }

    pub fn n_sensors(&self) -> usize {
        self.channels.n_sensors()
    }

    pub fn n_channels(&self) -> usize {
        self.channels.n_channels()
    }

    pub fn h_bar(&self) -> u8 {
        self.channels.h_bar()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn tau_cap(&self) -> u32 {
        self.tau_cap
    }

    pub fn processes(&self) -> &[ProcessModel] {
        &self.processes
    }

    pub fn channels(&self) -> &ChannelModel {
        &self.channels
    }

    /// Cached `Tr(f^τ(P̄))` table of one sensor.
    pub fn mse_table(&self, sensor: usize) -> &MseTable {
        &self.tables[sensor]
    }

    /// Sum of per-sensor MSE at the given AoI vector.
    pub fn sum_mse(&self, tau: &[u32]) -> f64 {
        tau.iter().zip(&self.tables).map(|(&t, table)| table.mse(t)).sum()
    }

    /// Initial state: every AoI at 1 with a freshly sampled channel matrix.
    pub fn initial_state<R: Rng + ?Sized>(&self, rng: &mut R) -> SystemState {
        SystemState {
            tau: vec![1; self.n_sensors()],
            h: self.channels.sample_channel_matrix(rng),
        }
    }

    pub(crate) fn advance_tau(&self, tau: u32) -> u32 {
        (tau + 1).min(self.tau_cap)
    }

    pub fn check_state(&self, state: &SystemState) -> Result<()> {
        let h = &state.h;
        if state.tau.len() != self.n_sensors()
            || h.n_sensors() != self.n_sensors()
            || h.n_channels() != self.n_channels()
        {
            return Err(Error::Shape("state dimensions do not match the MDP".into()));
        }
        if state.tau.iter().any(|&t| t < 1 || t > self.tau_cap) {
            return Err(Error::Domain(format!("AoI {:?} outside 1..={}", state.tau, self.tau_cap)));
        }
        if h.as_slice().iter().any(|&x| x < 1 || x > self.h_bar()) {
            return Err(Error::Domain(format!("channel state outside 1..={}", self.h_bar())));
        }
        Ok(())
    }
}

/// Immediate reward `r(s) = −Σ_n Tr(f_n^{τ_n}(P̄_n))`; depends on `τ` only.
pub fn reward(spec: &MdpSpec, state: &SystemState) -> f64 {
    -spec.sum_mse(&state.tau)
}

/// Executes one decision slot and returns the next state together with the
/// reward of the current state.
pub fn step<R: Rng + ?Sized>(
    spec: &MdpSpec,
    state: &SystemState,
    action: &ScheduleAction,
    rng: &mut R,
) -> Result<(SystemState, f64)> {
    action.validate(spec.n_sensors(), spec.n_channels())?;
    let r = reward(spec, state);
    let mut tau = Vec::with_capacity(state.tau.len());
    for (n, &t) in state.tau.iter().enumerate() {
        let next = match action.assign[n] {
            0 => spec.advance_tau(t),
            m => {
                let h = state.h.get(n, m as usize - 1);
                if spec.channels.packet_delivered(h, rng)? {
                    1
                } else {
                    spec.advance_tau(t)
                }
            }
        };
        tau.push(next);
    }
    let h = spec.channels.sample_channel_matrix(rng);
    Ok((SystemState { tau, h }, r))
}

/// Per-sensor AoI kernel `Pr(τ⁺_n | τ_n, H, a_n)` with saturation at the cap.
///
/// `sensor` is 0-based; `a_n` is the channel (0 = idle).
pub fn transition_probability(
    spec: &MdpSpec,
    sensor: usize,
    tau_n: u32,
    h: &ChannelMatrix,
    a_n: u8,
    tau_next: u32,
) -> Result<f64> {
    if sensor >= spec.n_sensors() {
        return Err(Error::Domain(format!("sensor {sensor} out of range")));
    }
    if tau_n < 1 || tau_n > spec.tau_cap || tau_next < 1 || tau_next > spec.tau_cap {
        return Err(Error::Domain(format!(
            "AoI pair ({tau_n}, {tau_next}) outside 1..={}",
            spec.tau_cap
        )));
    }
    if a_n as usize > spec.n_channels() {
        return Err(Error::Domain(format!("channel {a_n} out of range")));
    }
    if h.n_sensors() != spec.n_sensors() || h.n_channels() != spec.n_channels() {
        return Err(Error::Shape("channel matrix does not match the MDP".into()));
    }
    let aged = spec.advance_tau(tau_n);
    let (p_reset, p_age) = match a_n {
        0 => (0.0, 1.0),
        m => {
            let p_drop = spec.channels.drop_prob(h.get(sensor, m as usize - 1))?;
            (1.0 - p_drop, p_drop)
        }
    };
    let mut p = 0.0;
    if tau_next == 1 {
        p += p_reset;
    }
    if tau_next == aged {
        p += p_age;
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::DEFAULT_DROP_PROBS;
    use crate::mdp::enumerate_actions;
    use nalgebra::DMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scalar(a: f64, p: f64) -> ProcessModel {
        let m = |x| DMatrix::from_element(1, 1, x);
        ProcessModel::with_p_bar(m(a), m(1.0), m(1.0), m(1.0), m(p)).unwrap()
    }

    fn spec_with(n: usize, m: usize, drop: Vec<f64>, q: Vec<f64>) -> MdpSpec {
        let channels = ChannelModel::uniform_pairs(n, m, drop, q).unwrap();
        MdpSpec::new(vec![scalar(2.0, 1.0); n], channels, 0.95, 100).unwrap()
    }

    fn default_spec(n: usize, m: usize) -> MdpSpec {
        spec_with(n, m, DEFAULT_DROP_PROBS.to_vec(), vec![0.2; 5])
    }

    #[test]
    fn reward_examples() {
        let spec = default_spec(1, 1);
        let s = SystemState::new(vec![1], ChannelMatrix::filled(1, 1, 3)).unwrap();
        assert_eq!(reward(&spec, &s), -5.0);
        let spec = default_spec(2, 1);
        let s = SystemState::new(vec![1, 2], ChannelMatrix::filled(2, 1, 3)).unwrap();
        assert_eq!(reward(&spec, &s), -26.0);
    }

    #[test]
    fn reward_is_monotone_in_aoi() {
        let spec = default_spec(2, 1);
        let h = ChannelMatrix::filled(2, 1, 1);
        let r = |t1, t2| reward(&spec, &SystemState::new(vec![t1, t2], h.clone()).unwrap());
        for a1 in 1..=10 {
            for a2 in 1..=10 {
                for b1 in a1..=10 {
                    for b2 in a2..=10 {
                        assert!(r(a1, a2) >= r(b1, b2));
                    }
                }
            }
        }
    }

    #[test]
    fn lossless_and_lossy_channels() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let spec = spec_with(3, 2, vec![0.0], vec![1.0]);
        let s = SystemState::new(vec![4, 7, 2], ChannelMatrix::filled(3, 2, 1)).unwrap();
        let (next, r) = step(&spec, &s, &ScheduleAction::new(vec![1, 0, 2]), &mut rng).unwrap();
        assert_eq!(next.tau, vec![1, 8, 1]);
        assert_eq!(r, reward(&spec, &s));

        let spec = spec_with(3, 2, vec![1.0], vec![1.0]);
        let (next, _) = step(&spec, &s, &ScheduleAction::new(vec![1, 0, 2]), &mut rng).unwrap();
        assert_eq!(next.tau, vec![5, 8, 3]);
    }

    #[test]
    fn invalid_action_rejected() {
        let spec = default_spec(3, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = spec.initial_state(&mut rng);
        let err = step(&spec, &s, &ScheduleAction::new(vec![1, 1, 0]), &mut rng).unwrap_err();
        assert!(matches!(err, Error::InvalidAction(_)));
        let err = step(&spec, &s, &ScheduleAction::new(vec![1, 0, 0]), &mut rng).unwrap_err();
        assert!(matches!(err, Error::InvalidAction(_)));
    }

    #[test]
    fn aoi_saturates_at_cap() {
        let channels = ChannelModel::uniform_pairs(2, 1, vec![1.0], vec![1.0]).unwrap();
        let spec = MdpSpec::new(vec![scalar(1.5, 1.0); 2], channels, 0.9, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = SystemState::new(vec![5, 4], ChannelMatrix::filled(2, 1, 1)).unwrap();
        let (next, _) = step(&spec, &s, &ScheduleAction::new(vec![1, 0]), &mut rng).unwrap();
        assert_eq!(next.tau, vec![5, 5]);
    }

    #[test]
    fn kernel_cases() {
        let spec = default_spec(2, 1);
        let h = ChannelMatrix::new(2, 1, vec![5, 2]).unwrap();
        assert_eq!(transition_probability(&spec, 0, 3, &h, 0, 4).unwrap(), 1.0);
        assert_eq!(transition_probability(&spec, 0, 3, &h, 0, 1).unwrap(), 0.0);
        assert!((transition_probability(&spec, 0, 3, &h, 1, 1).unwrap() - 0.99).abs() < 1e-15);
        assert!((transition_probability(&spec, 1, 3, &h, 1, 4).unwrap() - 0.15).abs() < 1e-15);
        assert_eq!(transition_probability(&spec, 1, 3, &h, 1, 7).unwrap(), 0.0);
        assert!(matches!(
            transition_probability(&spec, 0, 0, &h, 0, 1),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            transition_probability(&spec, 0, 1, &h, 2, 1),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn kernel_normalizes_including_cap() {
        let channels = ChannelModel::uniform_pairs(2, 1, DEFAULT_DROP_PROBS.to_vec(), vec![0.2; 5]).unwrap();
        let spec = MdpSpec::new(vec![scalar(1.1, 1.0); 2], channels, 0.9, 6).unwrap();
        for hv in 1..=5u8 {
            let h = ChannelMatrix::new(2, 1, vec![hv, 6 - hv]).unwrap();
            for tau in 1..=6 {
                for a in 0..=1u8 {
                    for sensor in 0..2 {
                        let total: f64 = (1..=6)
                            .map(|t| transition_probability(&spec, sensor, tau, &h, a, t).unwrap())
                            .sum();
                        assert!((total - 1.0).abs() < 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn step_frequency_matches_kernel() {
        let spec = default_spec(2, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for hv in [1u8, 3, 5] {
            let h = ChannelMatrix::filled(2, 1, hv);
            let s = SystemState::new(vec![3, 3], h.clone()).unwrap();
            let trials = 100_000;
            let a = ScheduleAction::new(vec![1, 0]);
            let resets = (0..trials)
                .filter(|_| step(&spec, &s, &a, &mut rng).unwrap().0.tau[0] == 1)
                .count();
            let expected = transition_probability(&spec, 0, 3, &h, 1, 1).unwrap();
            assert!((resets as f64 / trials as f64 - expected).abs() < 0.005);
        }
    }

    #[test]
    fn joint_kernel_factorizes() {
        let channels = ChannelModel::uniform_pairs(3, 2, vec![0.5, 0.3, 0.1], vec![1.0 / 3.0; 3]).unwrap();
        let spec = MdpSpec::new(vec![scalar(1.2, 1.0); 3], channels, 0.9, 50).unwrap();
        let h = ChannelMatrix::new(3, 2, vec![1, 2, 3, 1, 2, 3]).unwrap();
        let s = SystemState::new(vec![2, 5, 1], h.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for a in enumerate_actions(3, 2).unwrap() {
            let trials = 40_000;
            let mut counts = std::collections::HashMap::new();
            for _ in 0..trials {
                let (next, _) = step(&spec, &s, &a, &mut rng).unwrap();
                *counts.entry(next.tau).or_insert(0usize) += 1;
            }
            for (tau_next, c) in counts {
                let product: f64 = (0..3)
                    .map(|n| transition_probability(&spec, n, s.tau[n], &h, a.assign[n], tau_next[n]).unwrap())
                    .product();
                let freq = c as f64 / trials as f64;
                let se = (product * (1.0 - product) / trials as f64).sqrt();
                assert!((freq - product).abs() <= 5.0 * se + 1e-12, "{a:?} {freq} vs {product}");
            }
        }
    }
}

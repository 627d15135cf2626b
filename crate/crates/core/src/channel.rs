//! I.i.d. block-fading channels with quantized states and per-state
//! packet drop probabilities.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Drop probabilities `p_1 ≥ … ≥ p_5` for the five quantized channel states.
pub const DEFAULT_DROP_PROBS: [f64; 5] = [0.2, 0.15, 0.1, 0.05, 0.01];

const DIST_TOL: f64 = 1e-12;

/// Channel states of every sensor-channel pair in one decision slot.
///
/// Entries are in `1..=h_bar`, stored row-major (sensor-major).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChannelMatrix {
    n_sensors: usize,
    n_channels: usize,
    states: Vec<u8>,
}

impl ChannelMatrix {
    pub fn new(n_sensors: usize, n_channels: usize, states: Vec<u8>) -> Result<Self> {
        if states.len() != n_sensors * n_channels {
            return Err(Error::Shape(format!(
                "channel matrix needs {} entries, got {}",
                n_sensors * n_channels,
                states.len()
            )));
        }
        Ok(Self { n_sensors, n_channels, states })
    }

    pub fn filled(n_sensors: usize, n_channels: usize, state: u8) -> Self {
        Self {
            n_sensors,
            n_channels,
            states: vec![state; n_sensors * n_channels],
        }
    }

    /// State of the link between `sensor` and `channel` (both 0-based).
    #[inline]
    pub fn get(&self, sensor: usize, channel: usize) -> u8 {
        self.states[sensor * self.n_channels + channel]
    }

    #[inline]
    pub fn set(&mut self, sensor: usize, channel: usize, state: u8) {
        self.states[sensor * self.n_channels + channel] = state;
    }

    pub fn n_sensors(&self) -> usize {
        self.n_sensors
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.states
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ChannelModelRepr {
    n_sensors: usize,
    n_channels: usize,
    drop_prob: Vec<f64>,
    dist: Vec<Vec<f64>>,
}

/// Per-pair categorical state distributions plus per-state drop
/// probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ChannelModelRepr", into = "ChannelModelRepr")]
pub struct ChannelModel {
    n_sensors: usize,
    n_channels: usize,
    drop_prob: Vec<f64>,
    /// `dist[n * M + m]` is `q^{(n,m)}`.
    dist: Vec<Vec<f64>>,
    cdf: Vec<Vec<f64>>,
}

impl TryFrom<ChannelModelRepr> for ChannelModel {
    type Error = Error;

    fn try_from(r: ChannelModelRepr) -> Result<Self> {
        ChannelModel::new(r.n_sensors, r.n_channels, r.drop_prob, r.dist)
    }
}

impl From<ChannelModel> for ChannelModelRepr {
    fn from(c: ChannelModel) -> Self {
        Self {
            n_sensors: c.n_sensors,
            n_channels: c.n_channels,
            drop_prob: c.drop_prob,
            dist: c.dist,
        }
    }
}

impl ChannelModel {
    /// `dist` holds one distribution per (sensor, channel) pair, sensor-major.
    pub fn new(n_sensors: usize, n_channels: usize, drop_prob: Vec<f64>, dist: Vec<Vec<f64>>) -> Result<Self> {
        if n_channels == 0 || n_channels > n_sensors {
            return Err(Error::Domain(format!(
                "need 1 ≤ M ≤ N, got N={n_sensors}, M={n_channels}"
            )));
        }
        let h_bar = drop_prob.len();
        if h_bar == 0 || h_bar > u8::MAX as usize {
            return Err(Error::Domain(format!("unsupported number of channel states {h_bar}")));
        }
        if drop_prob.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Domain("drop probabilities must lie in [0, 1]".into()));
        }
        if drop_prob.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::Domain("drop probabilities must be non-increasing in the channel state".into()));
        }
        if dist.len() != n_sensors * n_channels {
            return Err(Error::Shape(format!(
                "expected {} channel distributions, got {}",
                n_sensors * n_channels,
                dist.len()
            )));
        }
        let mut cdf = Vec::with_capacity(dist.len());
        for q in &dist {
            if q.len() != h_bar {
                return Err(Error::Shape(format!("distribution has {} entries, expected {h_bar}", q.len())));
            }
            if q.iter().any(|x| !(*x >= 0.0)) {
                return Err(Error::Domain("channel state probabilities must be non-negative".into()));
            }
            let total: f64 = q.iter().sum();
            if (total - 1.0).abs() > DIST_TOL {
                return Err(Error::Domain(format!("channel distribution sums to {total}")));
            }
            let mut acc = 0.0;
            let mut c: Vec<f64> = q
                .iter()
                .map(|x| {
                    acc += x;
                    acc
                })
                .collect();
            // last positive-mass state absorbs rounding
            let last = q.iter().rposition(|x| *x > 0.0).unwrap_or(h_bar - 1);
            for v in &mut c[last..] {
                *v = 1.0;
            }
            cdf.push(c);
        }
        Ok(Self {
            n_sensors,
            n_channels,
            drop_prob,
            dist,
            cdf,
        })
    }

    /// Every pair uses the same distribution `q`.
    pub fn uniform_pairs(n_sensors: usize, n_channels: usize, drop_prob: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        let dist = vec![q; n_sensors * n_channels];
        Self::new(n_sensors, n_channels, drop_prob, dist)
    }

    pub fn n_sensors(&self) -> usize {
        self.n_sensors
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    /// Number of quantized channel states `h̄`.
    pub fn h_bar(&self) -> u8 {
        self.drop_prob.len() as u8
    }

    pub fn drop_probs(&self) -> &[f64] {
        &self.drop_prob
    }

    /// Drop probability at channel state `h ∈ 1..=h̄`.
    pub fn drop_prob(&self, h: u8) -> Result<f64> {
        if h == 0 || h > self.h_bar() {
            return Err(Error::Domain(format!("channel state {h} outside 1..={}", self.h_bar())));
        }
        Ok(self.drop_prob[h as usize - 1])
    }

    /// `q^{(n,m)}` for 0-based sensor and channel.
    pub fn distribution(&self, sensor: usize, channel: usize) -> &[f64] {
        &self.dist[sensor * self.n_channels + channel]
    }

    /// Draws a fresh channel matrix, one independent categorical sample
    /// per pair, in sensor-major order.
    pub fn sample_channel_matrix<R: Rng + ?Sized>(&self, rng: &mut R) -> ChannelMatrix {
        let states = self
            .cdf
            .iter()
            .map(|cdf| {
                let u: f64 = rng.random();
                (cdf.iter().position(|c| u < *c).unwrap_or(cdf.len() - 1) + 1) as u8
            })
            .collect();
        ChannelMatrix {
            n_sensors: self.n_sensors,
            n_channels: self.n_channels,
            states,
        }
    }

    /// Bernoulli packet delivery: true with probability `1 − p_h`.
    pub fn packet_delivered<R: Rng + ?Sized>(&self, h: u8, rng: &mut R) -> Result<bool> {
        let p = self.drop_prob(h)?;
        let u: f64 = rng.random();
        Ok(u < 1.0 - p)
    }

    /// Probability of a full channel matrix under the i.i.d. model.
    pub fn matrix_probability(&self, h: &ChannelMatrix) -> f64 {
        h.states
            .iter()
            .zip(&self.dist)
            .map(|(s, q)| q[*s as usize - 1])
            .product()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn degenerate(state: usize) -> ChannelModel {
        let mut q = vec![0.0; 5];
        q[state - 1] = 1.0;
        ChannelModel::uniform_pairs(3, 2, DEFAULT_DROP_PROBS.to_vec(), q).unwrap()
    }

    #[test]
    fn degenerate_distributions_are_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            assert!(degenerate(5).sample_channel_matrix(&mut rng).as_slice().iter().all(|&h| h == 5));
            assert!(degenerate(1).sample_channel_matrix(&mut rng).as_slice().iter().all(|&h| h == 1));
        }
    }

    #[test]
    fn uniform_state_frequencies() {
        let model = ChannelModel::uniform_pairs(1, 1, DEFAULT_DROP_PROBS.to_vec(), vec![0.2; 5]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut counts = [0usize; 5];
        let draws = 100_000;
        for _ in 0..draws {
            counts[model.sample_channel_matrix(&mut rng).get(0, 0) as usize - 1] += 1;
        }
        for c in counts {
            assert!((c as f64 / draws as f64 - 0.2).abs() < 0.01);
        }
    }

    #[test]
    fn delivery_extremes_and_default_rate() {
        let model = ChannelModel::uniform_pairs(1, 1, vec![1.0, 0.5, 0.0], vec![1.0, 0.0, 0.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            assert!(!model.packet_delivered(1, &mut rng).unwrap());
            assert!(model.packet_delivered(3, &mut rng).unwrap());
        }
        let model = degenerate(5);
        let trials = 100_000;
        let ok = (0..trials).filter(|_| model.packet_delivered(5, &mut rng).unwrap()).count();
        assert!((ok as f64 / trials as f64 - 0.99).abs() < 0.005);
    }

    #[test]
    fn out_of_range_state_is_domain_error() {
        let model = degenerate(5);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(model.packet_delivered(0, &mut rng), Err(Error::Domain(_))));
        assert!(matches!(model.packet_delivered(6, &mut rng), Err(Error::Domain(_))));
    }

    #[test]
    fn construction_rejects_bad_inputs() {
        let q = vec![0.2; 5];
        assert!(ChannelModel::uniform_pairs(1, 2, DEFAULT_DROP_PROBS.to_vec(), q.clone()).is_err());
        assert!(ChannelModel::uniform_pairs(2, 1, vec![0.1, 0.2], vec![0.5, 0.5]).is_err());
        assert!(ChannelModel::uniform_pairs(2, 1, DEFAULT_DROP_PROBS.to_vec(), vec![0.3; 5]).is_err());
        assert!(ChannelModel::uniform_pairs(2, 1, DEFAULT_DROP_PROBS.to_vec(), vec![0.5, 0.5, 0.1, -0.1, 0.0]).is_err());
    }

    #[test]
    fn same_seed_same_samples() {
        let model = ChannelModel::uniform_pairs(4, 2, DEFAULT_DROP_PROBS.to_vec(), vec![0.1, 0.2, 0.3, 0.15, 0.25]).unwrap();
        let mut r1 = ChaCha8Rng::seed_from_u64(99);
        let mut r2 = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..100 {
            assert_eq!(model.sample_channel_matrix(&mut r1), model.sample_channel_matrix(&mut r2));
        }
    }

    #[test]
    fn json_round_trip_rebuilds_tables() {
        let model = ChannelModel::uniform_pairs(2, 1, DEFAULT_DROP_PROBS.to_vec(), vec![0.1, 0.2, 0.3, 0.15, 0.25]).unwrap();
        let back: ChannelModel = serde_json::from_str(&serde_json::to_string(&model).unwrap()).unwrap();
        assert_eq!(model, back);
    }
}

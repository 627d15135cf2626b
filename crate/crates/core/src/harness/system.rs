use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelModel, DEFAULT_DROP_PROBS};
use crate::error::{Error, Result};
use crate::estimation::{spectral_radius, ProcessModel};

/// Redraws allowed per process before giving up.
pub const MAX_REDRAWS: usize = 100;

/// Random plants and channels for one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedSystem {
    pub seed: u64,
    pub processes: Vec<ProcessModel>,
    pub channels: ChannelModel,
    pub spectral_radii: Vec<f64>,
}

/// Two-dimensional unstable processes with scalar measurements, spectral
/// radii uniform in (1, 1.4), identity noise covariances, and random
/// channel-state distributions over the default five states.
pub fn generate_system(seed: u64, n_sensors: usize, n_channels: usize) -> Result<GeneratedSystem> {
    generate_system_with(seed, n_sensors, n_channels, DEFAULT_DROP_PROBS.to_vec())
}

/// As [`generate_system`] with caller-chosen drop probabilities (one per
/// channel state).
pub fn generate_system_with(
    seed: u64,
    n_sensors: usize,
    n_channels: usize,
    drop_probs: Vec<f64>,
) -> Result<GeneratedSystem> {
    if n_channels == 0 || n_channels > n_sensors {
        return Err(Error::Domain(format!("need 1 ≤ M ≤ N, got N={n_sensors}, M={n_channels}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut processes = Vec::with_capacity(n_sensors);
    let mut spectral_radii = Vec::with_capacity(n_sensors);
    for _ in 0..n_sensors {
        let (p, rho) = draw_process(&mut rng)?;
        processes.push(p);
        spectral_radii.push(rho);
    }
    let h_bar = drop_probs.len();
    let dist = (0..n_sensors * n_channels)
        .map(|_| {
            let w: Vec<f64> = (0..h_bar).map(|_| rng.random::<f64>()).collect();
            let total: f64 = w.iter().sum();
            w.into_iter().map(|x| x / total).collect()
        })
        .collect();
    let channels = ChannelModel::new(n_sensors, n_channels, drop_probs, dist)?;
    Ok(GeneratedSystem {
        seed,
        processes,
        channels,
        spectral_radii,
    })
}

fn draw_process<R: Rng + ?Sized>(rng: &mut R) -> Result<(ProcessModel, f64)> {
    for _ in 0..MAX_REDRAWS {
        let a = DMatrix::from_fn(2, 2, |_, _| rng.random_range(-1.0..1.0));
        let rho = spectral_radius(&a);
        let target = rng.random_range(1.0..1.4);
        if rho < 1e-6 || target <= 1.0 {
            continue;
        }
        let a = a * (target / rho);
        let c = DMatrix::from_fn(1, 2, |_, _| rng.random::<f64>());
        match ProcessModel::new(a, c, DMatrix::identity(2, 2), DMatrix::identity(1, 1)) {
            Ok(p) => {
                let rho = p.spectral_radius();
                return Ok((p, rho));
            }
            Err(Error::NonConvergence { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::GenerationFailure(MAX_REDRAWS))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radii_and_shapes_follow_the_recipe() {
        for seed in 0..20 {
            let sys = generate_system(seed, 6, 3).unwrap();
            assert_eq!(sys.processes.len(), 6);
            for (p, &rho) in sys.processes.iter().zip(&sys.spectral_radii) {
                let direct = spectral_radius(&p.a);
                assert!(direct > 1.0 - 1e-12 && direct < 1.4 + 1e-12, "rho {direct}");
                assert!((direct - rho).abs() < 1e-12);
                assert_eq!((p.a.nrows(), p.a.ncols()), (2, 2));
                assert_eq!((p.c.nrows(), p.c.ncols()), (1, 2));
                assert!(p.c.iter().all(|&c| (0.0..1.0).contains(&c)));
                assert_eq!(p.w, DMatrix::identity(2, 2));
                assert_eq!(p.v, DMatrix::identity(1, 1));
            }
            assert_eq!(sys.channels.h_bar(), 5);
        }
    }

    #[test]
    fn same_seed_same_system() {
        assert_eq!(generate_system(4, 4, 2).unwrap(), generate_system(4, 4, 2).unwrap());
        assert_ne!(generate_system(4, 4, 2).unwrap(), generate_system(5, 4, 2).unwrap());
    }

    #[test]
    fn json_round_trip() {
        let sys = generate_system_with(1, 2, 1, vec![0.2, 0.01]).unwrap();
        let back: GeneratedSystem = serde_json::from_str(&serde_json::to_string(&sys).unwrap()).unwrap();
        assert_eq!(back, sys);
    }

    #[test]
    fn bad_sizes_rejected() {
        assert!(matches!(generate_system(0, 1, 2), Err(Error::Domain(_))));
    }
}

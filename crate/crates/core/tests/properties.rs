use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sensor_sched::ddpg::{se_action_ddpg, train_se_ddpg};
use sensor_sched::dqn::{select_dqn_action, ExplorationSchedule, QGreedy};
use sensor_sched::estimation::{error_covariance_at_aoi, MseTable};
use sensor_sched::features::input_dim;
use sensor_sched::harness::{generate_system, ExperimentConfig};
use sensor_sched::mdp::{enumerate_actions, transition_probability, ActionSpace, MdpSpec, SystemState};
use sensor_sched::nn::{Network, OutputActivation};
use sensor_sched::training::{Stage, TrainingConfig};

fn spec(seed: u64, n: usize, m: usize, cap: u32) -> MdpSpec {
    let sys = generate_system(seed, n, m).unwrap();
    MdpSpec::new(sys.processes, sys.channels, 0.95, cap).unwrap()
}

fn random_state(spec: &MdpSpec, rng: &mut ChaCha8Rng) -> SystemState {
    let tau = (0..spec.n_sensors()).map(|_| rng.random_range(1..=spec.tau_cap())).collect();
    SystemState::new(tau, spec.channels().sample_channel_matrix(rng)).unwrap()
}

fn min_eigenvalue(x: DMatrix<f64>) -> f64 {
    SymmetricEigen::new(x).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn generated_processes_solve_the_riccati_equation(seed in any::<u64>()) {
        for p in generate_system(seed, 4, 2).unwrap().processes {
            prop_assert!(p.riccati_residual() <= 1e-9, "residual {}", p.riccati_residual());
        }
    }

    #[test]
    fn open_loop_map_is_monotone(seed in any::<u64>(), entries in prop::collection::vec(-2.0f64..2.0, 8)) {
        let p = &generate_system(seed, 1, 1).unwrap().processes[0];
        let b = DMatrix::from_column_slice(2, 2, &entries[..4]);
        let d = DMatrix::from_column_slice(2, 2, &entries[4..]);
        let x = &b * b.transpose();
        let y = &x + &d * d.transpose();
        let gap = p.open_loop_map(&y) - p.open_loop_map(&x);
        prop_assert!(min_eigenvalue(gap) >= -1e-9);
    }

    #[test]
    fn mse_strictly_increases_with_age(seed in any::<u64>()) {
        for p in generate_system(seed, 3, 1).unwrap().processes {
            let table = MseTable::new(&p, 60).unwrap();
            for tau in 1..60 {
                prop_assert!(table.mse(tau + 1) > table.mse(tau));
            }
        }
    }

    #[test]
    fn covariances_are_symmetric(seed in any::<u64>(), tau in 1u32..40) {
        for p in generate_system(seed, 2, 1).unwrap().processes {
            let x = error_covariance_at_aoi(&p, tau).unwrap();
            let asym = (&x - x.transpose()).amax();
            prop_assert!(asym <= 1e-10 * x.amax().max(1.0));
            prop_assert!((&p.p_bar - p.p_bar.transpose()).amax() <= 1e-10);
        }
    }

    #[test]
    fn channel_sampling_is_seed_deterministic(seed in any::<u64>(), draw_seed in any::<u64>()) {
        let channels = generate_system(seed, 3, 2).unwrap().channels;
        let mut a = ChaCha8Rng::seed_from_u64(draw_seed);
        let mut b = ChaCha8Rng::seed_from_u64(draw_seed);
        for _ in 0..50 {
            prop_assert_eq!(channels.sample_channel_matrix(&mut a), channels.sample_channel_matrix(&mut b));
        }
    }

    #[test]
    fn transition_kernel_normalizes(seed in any::<u64>(), state_seed in any::<u64>()) {
        let spec = spec(seed % 16, 3, 2, 12);
        let mut rng = ChaCha8Rng::seed_from_u64(state_seed);
        let s = random_state(&spec, &mut rng);
        for sensor in 0..3 {
            for a_n in 0..=2u8 {
                let total: f64 = (1..=12)
                    .map(|next| transition_probability(&spec, sensor, s.tau[sensor], &s.h, a_n, next).unwrap())
                    .sum();
                prop_assert!((total - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn bounded_inputs_give_finite_outputs(seed in any::<u64>(), x in prop::collection::vec(-1.0f64..1.0, 9)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for out in [OutputActivation::Identity, OutputActivation::Tanh] {
            let net = Network::new(vec![9, 32, 32, 5], out, &mut rng).unwrap();
            prop_assert!(net.forward(&x).unwrap().iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn epsilon_follows_power_law(k in 0usize..20_000) {
        let mut sched = ExplorationSchedule::default();
        for _ in 0..k {
            sched.step();
        }
        let expected = 0.999f64.powi(k as i32).max(0.01);
        prop_assert!((sched.epsilon - expected).abs() <= 1e-12 * expected.max(1e-3));
        prop_assert_eq!(sched.epsilon, sched.xi);
    }

    #[test]
    fn dqn_selection_is_valid_and_annotated(seed in any::<u64>(), eps in 0.0f64..1.0, xi in 0.0f64..1.0) {
        let spec = spec(seed % 8, 4, 2, 20);
        let actions = ActionSpace::new(4, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = Network::new(vec![input_dim(&spec), 16, actions.len()], OutputActivation::Identity, &mut rng).unwrap();
        let src = QGreedy { net: &net, actions: &actions, spec: &spec };
        let sched = ExplorationSchedule { epsilon: eps, xi, decay: 1.0, floor: 0.0 };
        for stage in [Stage::Loose, Stage::Tight, Stage::Conventional] {
            for _ in 0..20 {
                let s = random_state(&spec, &mut rng);
                let sel = select_dqn_action(&src, stage, &s, &sched, &actions, &mut rng).unwrap();
                prop_assert!(sel.executed.satisfies_exact(2));
                if let Some(hat) = &sel.se_action {
                    prop_assert_eq!(hat, &sel.executed);
                    prop_assert!(stage != Stage::Conventional);
                }
            }
        }
    }

    #[test]
    fn ddpg_selection_is_valid_and_annotated(seed in any::<u64>(), eps in 0.0f64..1.0, sigma in 0.0f64..2.0) {
        let spec = spec(seed % 8, 4, 2, 20);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let actor = Network::new(vec![input_dim(&spec), 16, 4], OutputActivation::Tanh, &mut rng).unwrap();
        let sched = ExplorationSchedule { epsilon: eps, xi: 0.5, decay: 1.0, floor: 0.0 };
        for stage in [Stage::Loose, Stage::Tight, Stage::Conventional] {
            for _ in 0..20 {
                let s = random_state(&spec, &mut rng);
                let sel = se_action_ddpg(&actor, &s, &sched, sigma, stage, &spec, &mut rng).unwrap();
                prop_assert!(sel.schedule.satisfies_exact(2));
                prop_assert!(sel.executed.iter().all(|v| (-1.0..=1.0).contains(v)));
                if let Some(hat) = &sel.se_action {
                    prop_assert_eq!(hat, &sel.executed);
                }
            }
        }
    }
}

#[test]
fn every_enumerated_action_meets_the_exact_constraint() {
    for (n, m) in [(2, 1), (3, 2), (4, 2), (6, 3)] {
        for a in enumerate_actions(n, m).unwrap() {
            assert!(a.satisfies_exact(m), "{a:?}");
        }
    }
}

#[test]
fn network_dimensions_follow_the_system_size() {
    let spec = spec(1, 4, 2, 20);
    let cfg = TrainingConfig {
        loose_episodes: 1,
        tight_episodes: 0,
        conventional_episodes: 0,
        steps_per_episode: 10,
        batch_size: 4,
        hidden: vec![8],
        ..Default::default()
    };
    let out = train_se_ddpg(&spec, &cfg, 0).unwrap();
    let (n, m) = (4, 2);
    assert_eq!(out.actor.input_dim(), n + n * m);
    assert_eq!(out.actor.output_dim(), n);
    assert_eq!(out.critic.input_dim(), 2 * n + n * m);
    assert_eq!(out.critic.output_dim(), 1);
}

#[test]
fn config_round_trips_through_json() {
    let mut cfg = ExperimentConfig::default();
    cfg.seed = 99;
    cfg.training.alpha1 = 0.3;
    cfg.vi.drop_probs = vec![0.3, 0.1, 0.0];
    let text = serde_json::to_string(&cfg).unwrap();
    assert_eq!(serde_json::from_str::<ExperimentConfig>(&text).unwrap(), cfg);
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::system::generate_system;
use crate::ddpg::{actor_loss, actor_loss_and_grad, canonical_virtual, critic_loss, critic_loss_and_grad, DdpgTransition};
use crate::dqn::{se_loss, se_loss_and_grad, LossParams, TransitionRecord};
use crate::error::{Error, Result};
use crate::features::input_dim;
use crate::mdp::{ActionSpace, MdpSpec, SystemState};
use crate::nn::{Network, OutputActivation};
use crate::training::ActorObjective;

/// Step of the central difference.
pub const FD_STEP: f64 = 1e-6;
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub loss: String,
    pub n_params: usize,
    pub directions: usize,
    pub max_rel_error: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct GradCheckOptions {
    pub seed: u64,
    pub n_sensors: usize,
    pub n_channels: usize,
    pub batch_size: usize,
    pub directions: usize,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            n_sensors: 3,
            n_channels: 2,
            batch_size: 8,
            directions: 100,
        }
    }
}

/// Largest relative gap between `⟨grad, d⟩` and the central difference of
/// `loss` along random directions `d`.
pub fn directional_error<R: Rng + ?Sized>(
    net: &Network,
    grad: &[f64],
    directions: usize,
    rng: &mut R,
    mut loss: impl FnMut(&Network) -> Result<f64>,
) -> Result<f64> {
    let mut probe = net.clone();
    let base = net.params();
    let mut worst: f64 = 0.0;
    for _ in 0..directions {
        let dir: Vec<f64> = (0..base.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut at = |sign: f64| {
            for ((w, b), d) in probe.params_mut().iter_mut().zip(base).zip(&dir) {
                *w = b + sign * FD_STEP * d;
            }
            loss(&probe)
        };
        let fd = (at(1.0)? - at(-1.0)?) / (2.0 * FD_STEP);
        let an: f64 = grad.iter().zip(&dir).map(|(g, d)| g * d).sum();
        let rel = (fd - an).abs() / an.abs().max(fd.abs()).max(1e-8);
        worst = worst.max(rel);
    }
    Ok(worst)
}

fn random_state<R: Rng + ?Sized>(spec: &MdpSpec, rng: &mut R) -> Result<SystemState> {
    let tau = (0..spec.n_sensors()).map(|_| rng.random_range(1..=spec.tau_cap())).collect();
    SystemState::new(tau, spec.channels().sample_channel_matrix(rng))
}

fn report(loss: &str, net: &Network, directions: usize, err: f64) -> GradCheckReport {
    GradCheckReport {
        loss: loss.to_string(),
        n_params: net.n_params(),
        directions,
        max_rel_error: err,
        passed: err <= GRADCHECK_TOLERANCE,
    }
}

/// Checks the SE-DQN loss, the DDPG critic loss, and the reconciled actor
/// loss on random networks and batches where most records carry an SE action.
pub fn gradcheck(opts: &GradCheckOptions) -> Result<Vec<GradCheckReport>> {
    if opts.batch_size == 0 || opts.directions == 0 {
        return Err(Error::Config("batch_size and directions must be positive".into()));
    }
    let system = generate_system(opts.seed, opts.n_sensors, opts.n_channels)?;
    let spec = MdpSpec::new(system.processes, system.channels, 0.95, 20)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let n = spec.n_sensors();
    let m = spec.n_channels();
    let feat = input_dim(&spec);
    let actions = ActionSpace::new(n, m)?;
    let p = LossParams {
        alpha1: 0.5,
        gamma: spec.gamma(),
        reward_scale: 1.0 / spec.sum_mse(&vec![spec.tau_cap(); n]),
    };
    let net = |dims: Vec<usize>, out, rng: &mut ChaCha8Rng| Network::new(dims, out, rng);
    let mut out = Vec::new();

    let qnet = net(vec![feat, 16, 16, actions.len()], OutputActivation::Identity, &mut rng)?;
    let target = net(vec![feat, 16, 16, actions.len()], OutputActivation::Identity, &mut rng)?;
    let mut records = Vec::with_capacity(opts.batch_size);
    for _ in 0..opts.batch_size {
        let s = random_state(&spec, &mut rng)?;
        let s_next = random_state(&spec, &mut rng)?;
        let a = actions.get(rng.random_range(0..actions.len())).clone();
        let a_tilde = actions.get(rng.random_range(0..actions.len())).clone();
        let a_hat = (rng.random::<f64>() < 0.7).then(|| a.clone());
        records.push(TransitionRecord {
            r: -spec.sum_mse(&s.tau),
            s,
            a,
            a_hat,
            a_tilde,
            s_next,
        });
    }
    let refs: Vec<&TransitionRecord> = records.iter().collect();
    let (_, g) = se_loss_and_grad(&refs, &qnet, &target, &actions, &spec, &p)?;
    let err = directional_error(&qnet, &g, opts.directions, &mut rng, |q| {
        se_loss(&refs, q, &target, &actions, &spec, &p)
    })?;
    out.push(report("se_dqn", &qnet, opts.directions, err));

    let actor = net(vec![feat, 16, 16, n], OutputActivation::Tanh, &mut rng)?;
    let critic = net(vec![feat + n, 16, 16, 1], OutputActivation::Identity, &mut rng)?;
    let t_actor = net(vec![feat, 16, 16, n], OutputActivation::Tanh, &mut rng)?;
    let t_critic = net(vec![feat + n, 16, 16, 1], OutputActivation::Identity, &mut rng)?;
    let mut transitions = Vec::with_capacity(opts.batch_size);
    for _ in 0..opts.batch_size {
        let s = random_state(&spec, &mut rng)?;
        let s_next = random_state(&spec, &mut rng)?;
        let v_tilde: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let with_se = rng.random::<f64>() < 0.7;
        let v = if with_se {
            canonical_virtual(actions.get(rng.random_range(0..actions.len())), m)?
        } else {
            (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
        };
        transitions.push(DdpgTransition {
            r: -spec.sum_mse(&s.tau),
            v_hat: with_se.then(|| v.clone()),
            s,
            v,
            v_tilde,
            s_next,
        });
    }
    let refs: Vec<&DdpgTransition> = transitions.iter().collect();
    let (_, g) = critic_loss_and_grad(&refs, &critic, &t_critic, &t_actor, &spec, &p)?;
    let err = directional_error(&critic, &g, opts.directions, &mut rng, |c| {
        critic_loss(&refs, c, &t_critic, &t_actor, &spec, &p)
    })?;
    out.push(report("ddpg_critic", &critic, opts.directions, err));

    let objective = ActorObjective::Reconciled;
    let (_, g) = actor_loss_and_grad(&refs, &actor, &critic, &spec, 0.9, objective)?;
    let err = directional_error(&actor, &g, opts.directions, &mut rng, |a| {
        actor_loss(&refs, a, &critic, &spec, 0.9, objective)
    })?;
    out.push(report("ddpg_actor", &actor, opts.directions, err));
    Ok(out)
}

use ndarray::{s, Array2};

use super::DdpgTransition;
use crate::dqn::LossParams;
use crate::error::{Error, Result};
use crate::features::{input_dim, push_features};
use crate::mdp::{MdpSpec, SystemState};
use crate::nn::Network;
use crate::training::ActorObjective;

fn state_rows<'s>(states: impl Iterator<Item = &'s SystemState>, spec: &MdpSpec) -> Array2<f64> {
    let mut flat = Vec::new();
    let mut rows = 0;
    for st in states {
        push_features(st, spec, &mut flat);
        rows += 1;
    }
    Array2::from_shape_vec((rows, input_dim(spec)), flat).expect("feature rows have equal length")
}

/// Rows `[features(s_i), v_i]`.
fn critic_rows<'a>(pairs: impl Iterator<Item = (&'a SystemState, &'a [f64])>, spec: &MdpSpec) -> Array2<f64> {
    let mut flat = Vec::new();
    let mut rows = 0;
    for (st, v) in pairs {
        push_features(st, spec, &mut flat);
        flat.extend_from_slice(v);
        rows += 1;
    }
    let cols = input_dim(spec) + spec.n_sensors();
    Array2::from_shape_vec((rows, cols), flat).expect("critic rows have equal length")
}

fn critic_eval(
    batch: &[&DdpgTransition],
    critic: &Network,
    target_critic: &Network,
    target_actor: &Network,
    spec: &MdpSpec,
    p: &LossParams,
    want_grad: bool,
) -> Result<(f64, Option<Vec<f64>>)> {
    if batch.is_empty() {
        return Err(Error::Shape("empty training batch".into()));
    }
    let mu_next = target_actor.forward_batch(state_rows(batch.iter().map(|t| &t.s_next), spec))?;
    let next_rows = critic_rows(
        batch
            .iter()
            .zip(mu_next.rows())
            .map(|(t, m)| (&t.s_next, m.to_slice().expect("contiguous rows"))),
        spec,
    );
    let q_next = target_critic.forward_batch(next_rows)?;

    // Row i holds (s_i, v_i). SE records append rows for ṽ_i and, when it
    // differs from v_i, for v̂_i.
    let mut pairs: Vec<(&SystemState, &[f64])> = batch.iter().map(|t| (&t.s, t.v.as_slice())).collect();
    let mut se_rows = vec![None; batch.len()];
    for (i, t) in batch.iter().enumerate() {
        if let Some(hat) = &t.v_hat {
            let hat_row = if hat == &t.v {
                i
            } else {
                pairs.push((&t.s, hat.as_slice()));
                pairs.len() - 1
            };
            pairs.push((&t.s, t.v_tilde.as_slice()));
            se_rows[i] = Some((hat_row, pairs.len() - 1));
        }
    }
    let trace = critic.forward_trace(critic_rows(pairs.into_iter(), spec))?;
    let q = trace.output();

    let b = batch.len() as f64;
    let mut upstream = Array2::zeros(q.raw_dim());
    let mut total = 0.0;
    for (i, t) in batch.iter().enumerate() {
        let y = p.reward_scale * t.r + p.gamma * q_next[[i, 0]];
        let td = y - q[[i, 0]];
        match se_rows[i] {
            Some((hat, tilde)) => {
                let ad = q[[hat, 0]] - q[[tilde, 0]];
                total += p.alpha1 * td * td + (1.0 - p.alpha1) * ad * ad;
                upstream[[i, 0]] -= 2.0 * p.alpha1 * td / b;
                upstream[[hat, 0]] += 2.0 * (1.0 - p.alpha1) * ad / b;
                upstream[[tilde, 0]] -= 2.0 * (1.0 - p.alpha1) * ad / b;
            }
            None => {
                total += td * td;
                upstream[[i, 0]] -= 2.0 * td / b;
            }
        }
    }
    let loss = total / b;
    if !loss.is_finite() {
        return Err(Error::NonFiniteLoss(loss));
    }
    let grads = if want_grad {
        Some(critic.backward_trace(&trace, &upstream)?.0)
    } else {
        None
    };
    Ok((loss, grads))
}

/// Composite TD + action-difference critic loss with targets from the
/// target actor and critic, and its gradient in the critic parameters.
pub fn critic_loss_and_grad(
    batch: &[&DdpgTransition],
    critic: &Network,
    target_critic: &Network,
    target_actor: &Network,
    spec: &MdpSpec,
    p: &LossParams,
) -> Result<(f64, Vec<f64>)> {
    let (l, g) = critic_eval(batch, critic, target_critic, target_actor, spec, p, true)?;
    Ok((l, g.expect("gradient requested")))
}

pub fn critic_loss(
    batch: &[&DdpgTransition],
    critic: &Network,
    target_critic: &Network,
    target_actor: &Network,
    spec: &MdpSpec,
    p: &LossParams,
) -> Result<f64> {
    Ok(critic_eval(batch, critic, target_critic, target_actor, spec, p, false)?.0)
}

fn actor_eval(
    batch: &[&DdpgTransition],
    actor: &Network,
    critic: &Network,
    spec: &MdpSpec,
    alpha2: f64,
    objective: ActorObjective,
    want_grad: bool,
) -> Result<(f64, Option<Vec<f64>>)> {
    if batch.is_empty() {
        return Err(Error::Shape("empty training batch".into()));
    }
    let n = spec.n_sensors();
    let x = state_rows(batch.iter().map(|t| &t.s), spec);
    let feat = x.ncols();
    let actor_trace = actor.forward_trace(x.clone())?;
    let mu = actor_trace.output();
    let mut critic_in = Array2::zeros((batch.len(), feat + n));
    critic_in.slice_mut(s![.., ..feat]).assign(&x);
    critic_in.slice_mut(s![.., feat..]).assign(mu);
    let critic_trace = critic.forward_trace(critic_in)?;
    let q = critic_trace.output();

    // Q enters with sign −1 (reconciled) or +1 (literal).
    let q_sign = match objective {
        ActorObjective::Reconciled => -1.0,
        ActorObjective::Literal => 1.0,
    };
    let b = batch.len() as f64;
    let mut total = 0.0;
    let mut dq = Array2::zeros((batch.len(), 1));
    let mut dmu = Array2::zeros((batch.len(), n));
    for (i, t) in batch.iter().enumerate() {
        let w = if t.v_hat.is_some() { alpha2 } else { 1.0 };
        total += q_sign * w * q[[i, 0]];
        dq[[i, 0]] = q_sign * w / b;
        if t.v_hat.is_some() {
            for k in 0..n {
                let d = t.v[k] - mu[[i, k]];
                total += (1.0 - alpha2) * d * d;
                dmu[[i, k]] -= 2.0 * (1.0 - alpha2) * d / b;
            }
        }
    }
    let loss = total / b;
    if !loss.is_finite() {
        return Err(Error::NonFiniteLoss(loss));
    }
    if !want_grad {
        return Ok((loss, None));
    }
    let (_, dinput) = critic.backward_trace(&critic_trace, &dq)?;
    dmu += &dinput.slice(s![.., feat..]);
    let (grads, _) = actor.backward_trace(&actor_trace, &dmu)?;
    Ok((loss, Some(grads)))
}

/// Actor loss and its gradient in the actor parameters; the critic is held
/// fixed and gradients flow through its action input.
pub fn actor_loss_and_grad(
    batch: &[&DdpgTransition],
    actor: &Network,
    critic: &Network,
    spec: &MdpSpec,
    alpha2: f64,
    objective: ActorObjective,
) -> Result<(f64, Vec<f64>)> {
    let (l, g) = actor_eval(batch, actor, critic, spec, alpha2, objective, true)?;
    Ok((l, g.expect("gradient requested")))
}

pub fn actor_loss(
    batch: &[&DdpgTransition],
    actor: &Network,
    critic: &Network,
    spec: &MdpSpec,
    alpha2: f64,
    objective: ActorObjective,
) -> Result<f64> {
    Ok(actor_eval(batch, actor, critic, spec, alpha2, objective, false)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ddpg::{canonical_virtual, map_virtual_to_schedule};
    use crate::features::state_to_input;
    use crate::mdp::{tests_support, ActionSpace};
    use crate::nn::OutputActivation;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    struct Fixture {
        spec: MdpSpec,
        actor: Network,
        critic: Network,
        t_actor: Network,
        t_critic: Network,
        rng: ChaCha8Rng,
    }

    fn fixture(seed: u64) -> Fixture {
        let spec = tests_support::spec(3, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let actor = Network::new(vec![9, 12, 3], OutputActivation::Tanh, &mut rng).unwrap();
        let critic = Network::new(vec![12, 10, 8, 1], OutputActivation::Identity, &mut rng).unwrap();
        let t_actor = Network::new(vec![9, 12, 3], OutputActivation::Tanh, &mut rng).unwrap();
        let t_critic = Network::new(vec![12, 10, 8, 1], OutputActivation::Identity, &mut rng).unwrap();
        Fixture { spec, actor, critic, t_actor, t_critic, rng }
    }

    fn batch(f: &mut Fixture, b: usize, se: bool) -> Vec<DdpgTransition> {
        let actions = ActionSpace::new(3, 2).unwrap();
        (0..b)
            .map(|_| {
                let rng = &mut f.rng;
                let mut state = || {
                    let tau = (0..3).map(|_| rng.random_range(1..=10)).collect();
                    SystemState::new(tau, f.spec.channels().sample_channel_matrix(rng)).unwrap()
                };
                let (s, s_next) = (state(), state());
                let v_tilde: Vec<f64> = (0..3).map(|_| f.rng.random_range(-1.0..1.0)).collect();
                let with_se = se && f.rng.random::<f64>() < 0.7;
                let v = if with_se {
                    canonical_virtual(actions.get(f.rng.random_range(0..actions.len())), 2).unwrap()
                } else {
                    (0..3).map(|_| f.rng.random_range(-1.0..1.0)).collect()
                };
                DdpgTransition {
                    r: -f.spec.sum_mse(&s.tau),
                    v_hat: with_se.then(|| v.clone()),
                    s,
                    v,
                    v_tilde,
                    s_next,
                }
            })
            .collect()
    }

    const P: LossParams = LossParams { alpha1: 0.5, gamma: 0.95, reward_scale: 0.1 };

    fn directional_check(params: &mut Network, g: &[f64], rng: &mut ChaCha8Rng, mut loss: impl FnMut(&Network) -> f64) {
        let base = params.params().to_vec();
        for _ in 0..100 {
            let dir: Vec<f64> = (0..base.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let h = 1e-6;
            let mut at = |sign: f64| {
                for ((w, b), d) in params.params_mut().iter_mut().zip(&base).zip(&dir) {
                    *w = b + sign * h * d;
                }
                loss(params)
            };
            let fd = (at(1.0) - at(-1.0)) / (2.0 * h);
            let an: f64 = g.iter().zip(&dir).map(|(a, b)| a * b).sum();
            assert!((fd - an).abs() <= 1e-4 * an.abs().max(fd.abs()).max(1e-8), "fd {fd} vs {an}");
        }
        params.params_mut().copy_from_slice(&base);
    }

    #[test]
    fn critic_gradient_matches_central_differences() {
        let mut f = fixture(1);
        let data = batch(&mut f, 4, true);
        let refs: Vec<&DdpgTransition> = data.iter().collect();
        let (_, g) = critic_loss_and_grad(&refs, &f.critic, &f.t_critic, &f.t_actor, &f.spec, &P).unwrap();
        let mut critic = f.critic.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        directional_check(&mut critic, &g, &mut rng, |c| {
            critic_loss(&refs, c, &f.t_critic, &f.t_actor, &f.spec, &P).unwrap()
        });
    }

    #[test]
    fn actor_gradient_matches_central_differences() {
        for objective in [ActorObjective::Reconciled, ActorObjective::Literal] {
            let mut f = fixture(2);
            let data = batch(&mut f, 4, true);
            let refs: Vec<&DdpgTransition> = data.iter().collect();
            let (_, g) = actor_loss_and_grad(&refs, &f.actor, &f.critic, &f.spec, 0.9, objective).unwrap();
            let mut actor = f.actor.clone();
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            directional_check(&mut actor, &g, &mut rng, |a| {
                actor_loss(&refs, a, &f.critic, &f.spec, 0.9, objective).unwrap()
            });
        }
    }

    /// Standard DDPG critic loss written out per record.
    fn plain_critic_loss(data: &[DdpgTransition], f: &Fixture) -> f64 {
        let q = |net: &Network, s: &SystemState, v: &[f64]| {
            let mut x = state_to_input(s, &f.spec);
            x.extend_from_slice(v);
            net.forward(&x).unwrap()[0]
        };
        data.iter()
            .map(|t| {
                let mu = f.t_actor.forward(&state_to_input(&t.s_next, &f.spec)).unwrap();
                let y = P.reward_scale * t.r + P.gamma * q(&f.t_critic, &t.s_next, &mu);
                (y - q(&f.critic, &t.s, &t.v)).powi(2)
            })
            .sum::<f64>()
            / data.len() as f64
    }

    #[test]
    fn critic_degenerates_to_td_loss() {
        let mut f = fixture(3);
        let data = batch(&mut f, 16, true);
        let refs: Vec<&DdpgTransition> = data.iter().collect();
        let p1 = LossParams { alpha1: 1.0, ..P };
        let got = critic_loss(&refs, &f.critic, &f.t_critic, &f.t_actor, &f.spec, &p1).unwrap();
        let want = plain_critic_loss(&data, &f);
        assert!((got - want).abs() <= 1e-12 * want.max(1.0));

        let plain = batch(&mut f, 16, false);
        let refs: Vec<&DdpgTransition> = plain.iter().collect();
        let got = critic_loss(&refs, &f.critic, &f.t_critic, &f.t_actor, &f.spec, &P).unwrap();
        assert!((got - plain_critic_loss(&plain, &f)).abs() <= 1e-12 * got.max(1.0));
    }

    #[test]
    fn actor_degenerates_to_q_ascent() {
        let mut f = fixture(4);
        let data = batch(&mut f, 8, true);
        let plain = batch(&mut f, 8, false);
        let mean_neg_q = |data: &[DdpgTransition]| {
            data.iter()
                .map(|t| {
                    let mut x = state_to_input(&t.s, &f.spec);
                    x.extend(f.actor.forward(&x.clone()).unwrap());
                    -f.critic.forward(&x).unwrap()[0]
                })
                .sum::<f64>()
                / data.len() as f64
        };
        let refs: Vec<&DdpgTransition> = data.iter().collect();
        let got = actor_loss(&refs, &f.actor, &f.critic, &f.spec, 1.0, ActorObjective::Reconciled).unwrap();
        assert!((got - mean_neg_q(&data)).abs() <= 1e-12);
        let refs: Vec<&DdpgTransition> = plain.iter().collect();
        let got = actor_loss(&refs, &f.actor, &f.critic, &f.spec, 0.3, ActorObjective::Reconciled).unwrap();
        assert!((got - mean_neg_q(&plain)).abs() <= 1e-12);
    }

    #[test]
    fn canonical_actions_decode_to_their_schedule() {
        let mut f = fixture(5);
        for t in batch(&mut f, 20, true) {
            if let Some(hat) = &t.v_hat {
                assert!(map_virtual_to_schedule(hat, 2).satisfies_exact(2));
            }
        }
    }
}

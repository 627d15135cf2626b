use ndarray::Array2;

use super::select::features_batch;
use super::TransitionRecord;
use crate::error::{Error, Result};
use crate::mdp::{ActionSpace, MdpSpec, ScheduleAction};
use crate::nn::Network;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParams {
    pub alpha1: f64,
    pub gamma: f64,
    /// Multiplies stored rewards before they enter the TD target.
    pub reward_scale: f64,
}

struct Indexed {
    a: usize,
    se: Option<(usize, usize)>,
}

fn index(actions: &ActionSpace, a: &ScheduleAction) -> Result<usize> {
    actions
        .index_of(a)
        .ok_or_else(|| Error::InvalidAction(format!("{:?} is not in the action space", a.assign)))
}

/// Mean composite loss over the batch and, if requested, its gradient with
/// respect to the online parameters. TD targets use the target network and
/// are held constant.
fn evaluate(
    batch: &[&TransitionRecord],
    qnet: &Network,
    target: &Network,
    actions: &ActionSpace,
    spec: &MdpSpec,
    p: &LossParams,
    want_grad: bool,
) -> Result<(f64, Option<Vec<f64>>)> {
    if batch.is_empty() {
        return Err(Error::Shape("empty training batch".into()));
    }
    let idx: Vec<Indexed> = batch
        .iter()
        .map(|t| {
            Ok(Indexed {
                a: index(actions, &t.a)?,
                se: match &t.a_hat {
                    Some(hat) => Some((index(actions, hat)?, index(actions, &t.a_tilde)?)),
                    None => None,
                },
            })
        })
        .collect::<Result<_>>()?;

    let q_next = target.forward_batch(features_batch(batch.iter().map(|t| &t.s_next), spec))?;
    let trace = qnet.forward_trace(features_batch(batch.iter().map(|t| &t.s), spec))?;
    let q = trace.output();

    let b = batch.len() as f64;
    let mut upstream = Array2::zeros(q.raw_dim());
    let mut total = 0.0;
    for (i, (t, ix)) in batch.iter().zip(&idx).enumerate() {
        let y = p.reward_scale * t.r + p.gamma * q_next.row(i).iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let td = y - q[[i, ix.a]];
        match ix.se {
            Some((hat, tilde)) => {
                let ad = q[[i, hat]] - q[[i, tilde]];
                total += p.alpha1 * td * td + (1.0 - p.alpha1) * ad * ad;
                upstream[[i, ix.a]] -= 2.0 * p.alpha1 * td / b;
                upstream[[i, hat]] += 2.0 * (1.0 - p.alpha1) * ad / b;
                upstream[[i, tilde]] -= 2.0 * (1.0 - p.alpha1) * ad / b;
            }
            None => {
                total += td * td;
                upstream[[i, ix.a]] -= 2.0 * td / b;
            }
        }
    }
    let loss = total / b;
    if !loss.is_finite() {
        return Err(Error::NonFiniteLoss(loss));
    }
    let grads = if want_grad {
        Some(qnet.backward_trace(&trace, &upstream)?.0)
    } else {
        None
    };
    Ok((loss, grads))
}

/// `(1/B) Σ_i ℓ_i` with `ℓ_i = α₁·TD_i² + (1−α₁)·AD_i²` on records whose SE
/// action was executed and `TD_i²` otherwise, plus its parameter gradient.
pub fn se_loss_and_grad(
    batch: &[&TransitionRecord],
    qnet: &Network,
    target: &Network,
    actions: &ActionSpace,
    spec: &MdpSpec,
    p: &LossParams,
) -> Result<(f64, Vec<f64>)> {
    let (loss, grads) = evaluate(batch, qnet, target, actions, spec, p, true)?;
    Ok((loss, grads.expect("gradient requested")))
}

/// Loss value only.
pub fn se_loss(
    batch: &[&TransitionRecord],
    qnet: &Network,
    target: &Network,
    actions: &ActionSpace,
    spec: &MdpSpec,
    p: &LossParams,
) -> Result<f64> {
    Ok(evaluate(batch, qnet, target, actions, spec, p, false)?.0)
}

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{step, MdpSpec, Policy};

pub const DEFAULT_EVAL_STEPS: usize = 10_000;

/// Summary written to `evaluation.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub avg_sum_mse: f64,
    pub steps: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub summary: Evaluation,
    /// `Σ_n Tr(P_n)` at each step.
    pub per_step: Vec<f64>,
}

/// One greedy rollout of `steps` steps from the all-fresh state.
pub fn evaluate_policy<P: Policy + ?Sized>(policy: &P, spec: &MdpSpec, steps: usize, seed: u64) -> Result<Rollout> {
    if steps == 0 {
        return Err(Error::Config("evaluation needs at least one step".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(4);
    let mut state = spec.initial_state(&mut rng);
    let mut per_step = Vec::with_capacity(steps);
    for _ in 0..steps {
        let action = policy.decide(&state)?;
        let (next, r) = step(spec, &state, &action, &mut rng)?;
        per_step.push(-r);
        state = next;
    }
    let avg_sum_mse = per_step.iter().sum::<f64>() / steps as f64;
    Ok(Rollout {
        summary: Evaluation {
            avg_sum_mse,
            steps,
            seed,
        },
        per_step,
    })
}

pub fn write_steps_csv<W: Write>(out: &mut W, per_step: &[f64]) -> Result<()> {
    writeln!(out, "step,sum_mse")?;
    for (k, v) in per_step.iter().enumerate() {
        writeln!(out, "{},{}", k + 1, v)?;
    }
    Ok(())
}

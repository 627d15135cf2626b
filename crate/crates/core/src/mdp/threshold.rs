//! Exhaustive certification of the threshold structure of a policy.
//!
//! A threshold policy that puts sensor `n` on channel `m` at `(τ, H)` must
//!
//! * (i) keep sensor `n` on channel `m` when only `h_{n,m}` improves, and
//! * (ii) give sensor `n` channel `m` or a channel at least as good (under
//!   the same `H`) when only `τ_n` grows.
//!
//! Both properties are checked against the unit-step neighbour
//! (`h_{n,m} + 1`, `τ_n + 1`); larger steps follow by chaining.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{MdpSpec, Policy, ScheduleAction, StateSpace, SystemState};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Property {
    #[serde(rename = "i")]
    ChannelImprovement,
    #[serde(rename = "ii")]
    AgeIncrease,
}

/// One failed check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdViolation {
    /// State where the sensor was assigned `expected`.
    pub state: SystemState,
    /// The perturbed neighbour that breaks the property.
    pub perturbed: SystemState,
    /// 1-based sensor index.
    pub sensor: usize,
    pub property: Property,
    /// Channel the policy gives the sensor at the perturbed state (0 = idle).
    pub assigned: u8,
    /// Channel the sensor held at `state`.
    pub expected: u8,
}

/// Evaluates `policy` on every state of the truncated space.
pub fn policy_table<P: Policy + ?Sized>(policy: &P, space: &StateSpace) -> Result<Vec<ScheduleAction>> {
    space.states().map(|s| policy.decide(&s)).collect()
}

/// Lists every violation of properties (i) and (ii) on the truncated state
/// space of `spec`. An empty list certifies the policy as threshold
/// structured.
pub fn check_threshold_structure<P: Policy + ?Sized>(policy: &P, spec: &MdpSpec) -> Result<Vec<ThresholdViolation>> {
    let space = StateSpace::for_spec(spec)?;
    let table = policy_table(policy, &space)?;
    let mut violations = Vec::new();
    for (idx, action) in table.iter().enumerate() {
        let state = space.state_at(idx);
        for (sensor, &m) in action.assign.iter().enumerate() {
            if m == 0 {
                continue;
            }
            let ch = m as usize - 1;
            let h_nm = state.h.get(sensor, ch);

            if h_nm < space.h_bar() {
                let mut better = state.clone();
                better.h.set(sensor, ch, h_nm + 1);
                let assigned = table[space.index(&better)].assign[sensor];
                if assigned != m {
                    violations.push(ThresholdViolation {
                        state: state.clone(),
                        perturbed: better,
                        sensor: sensor + 1,
                        property: Property::ChannelImprovement,
                        assigned,
                        expected: m,
                    });
                }
            }

            if state.tau[sensor] < space.tau_cap() {
                let mut older = state.clone();
                older.tau[sensor] += 1;
                let assigned = table[space.index(&older)].assign[sensor];
                let ok = assigned > 0 && state.h.get(sensor, assigned as usize - 1) >= h_nm;
                if !ok {
                    violations.push(ThresholdViolation {
                        state: state.clone(),
                        perturbed: older,
                        sensor: sensor + 1,
                        property: Property::AgeIncrease,
                        assigned,
                        expected: m,
                    });
                }
            }
        }
    }
    Ok(violations)
}

/// Writes one CSV row per state: `tau_1..tau_N, h_1_1..h_N_M, a_1..a_N[, value]`.
pub fn write_policy_csv<W: Write>(
    mut out: W,
    space: &StateSpace,
    table: &[ScheduleAction],
    values: Option<&[f64]>,
) -> Result<()> {
    let first = space.state_at(0);
    let n = first.tau.len();
    let m = first.h.n_channels();
    let mut header: Vec<String> = (1..=n).map(|i| format!("tau_{i}")).collect();
    for i in 1..=n {
        for j in 1..=m {
            header.push(format!("h_{i}_{j}"));
        }
    }
    header.extend((1..=n).map(|i| format!("a_{i}")));
    if values.is_some() {
        header.push("value".into());
    }
    writeln!(out, "{}", header.join(","))?;
    for (idx, action) in table.iter().enumerate() {
        let s = space.state_at(idx);
        let mut row: Vec<String> = s.tau.iter().map(u32::to_string).collect();
        row.extend(s.h.as_slice().iter().map(u8::to_string));
        row.extend(action.assign.iter().map(u8::to_string));
        if let Some(v) = values {
            row.push(format!("{}", v[idx]));
        }
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

//! State featurization shared by the Q-network, actor, and critic.

use crate::mdp::{MdpSpec, SystemState};

/// `[τ_1/τ_cap, …, τ_N/τ_cap, (h_11−1)/(h̄−1), …, (h_NM−1)/(h̄−1)]`,
/// channel entries row-major. With a single channel state the channel
/// features are all zero.
pub fn state_to_input(state: &SystemState, spec: &MdpSpec) -> Vec<f64> {
    let mut out = Vec::with_capacity(input_dim(spec));
    push_features(state, spec, &mut out);
    out
}

pub(crate) fn push_features(state: &SystemState, spec: &MdpSpec, out: &mut Vec<f64>) {
    let cap = spec.tau_cap() as f64;
    out.extend(state.tau.iter().map(|&t| t as f64 / cap));
    let span = (spec.h_bar() as f64 - 1.0).max(0.0);
    out.extend(state.h.as_slice().iter().map(|&h| {
        if span > 0.0 {
            (h as f64 - 1.0) / span
        } else {
            0.0
        }
    }));
}

/// `N + N·M`.
pub fn input_dim(spec: &MdpSpec) -> usize {
    spec.n_sensors() * (1 + spec.n_channels())
}

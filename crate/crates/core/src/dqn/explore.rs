use serde::{Deserialize, Serialize};

/// Multiplicatively decaying exploration probabilities `ε` (random action)
/// and `ξ` (jump to a better channel during SE selection).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExplorationSchedule {
    pub epsilon: f64,
    pub xi: f64,
    pub decay: f64,
    pub floor: f64,
}

impl ExplorationSchedule {
    pub fn new(initial: f64, decay: f64, floor: f64) -> Self {
        Self {
            epsilon: initial.max(floor),
            xi: initial.max(floor),
            decay,
            floor,
        }
    }

    /// Advances one environment step.
    pub fn step(&mut self) {
        self.epsilon = (self.epsilon * self.decay).max(self.floor);
        self.xi = (self.xi * self.decay).max(self.floor);
    }
}

impl Default for ExplorationSchedule {
    fn default() -> Self {
        Self::new(1.0, 0.999, 0.01)
    }
}

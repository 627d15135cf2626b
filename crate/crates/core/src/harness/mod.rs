//! Experiment orchestration: random systems, configuration, training runs,
//! greedy evaluation, and on-disk artifacts.

mod config;
mod evaluate;
mod gradcheck;
mod run;
mod system;

pub use config::{AgentKind, ExperimentConfig, ViConfig};
pub use evaluate::{evaluate_policy, write_steps_csv, Evaluation, Rollout, DEFAULT_EVAL_STEPS};
pub use system::{generate_system, generate_system_with, GeneratedSystem, MAX_REDRAWS};
pub use gradcheck::{directional_error, gradcheck, GradCheckOptions, GradCheckReport, FD_STEP, GRADCHECK_TOLERANCE};
pub use run::{certify_threshold, evaluate_checkpoint, run_experiment, RunSummary, ThresholdReport};

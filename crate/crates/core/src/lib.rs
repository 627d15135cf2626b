pub mod channel;
pub mod ddpg;
pub mod dqn;
pub mod error;
pub mod estimation;
pub mod features;
pub mod harness;
pub mod mdp;
pub mod nn;
pub mod training;

pub use error::{Error, Result};

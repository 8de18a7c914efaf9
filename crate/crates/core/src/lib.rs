//! Batched bandit algorithms and a regret-measurement harness.
//!
//! - [`policy_mab`]: batched arm elimination for stochastic multi-armed
//!   bandits, with a sequential UCB baseline.
//! - [`policy_linear`]: batched elimination for stochastic linear bandits
//!   driven by approximate G-optimal designs ([`design`]).
//! - [`policy_adversarial`]: EXP3 with feedback delayed to batch boundaries.
//! - [`env`]: stochastic, linear and adversarial environments.
//! - [`harness`] and [`export`]: replicated experiments and output files.

pub mod design;
pub mod env;
pub mod error;
pub mod export;
pub mod harness;
pub mod policy_adversarial;
pub mod policy_linear;
pub mod policy_mab;
pub mod regret;
pub mod rng;

pub use error::{Error, Result};
pub use nalgebra::DVector;

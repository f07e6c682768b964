//! Desk-scale deep Q-learning laboratory built around paused replay refresh.
//!
//! The replay stores every derived quantity next to each experience
//! (predicted Q, novelty, target, sampling priority), training regresses
//! against the stored targets only, and a periodic pause rewrites all of
//! the derived values with the momentarily frozen online network —
//! including retraining the novelty predictor from scratch over the replay.
//!
//! Modules:
//! - [`nn`] — dense f64 networks, exact backprop, adaptive-moment optimizer
//! - [`env`] — feature-vector environments, sticky-action wrapper, oracle MDP
//! - [`replay`] — ring replay with priority-proportional sampling
//! - [`novelty`] — random-network-distillation pair with refresh retraining
//! - [`agent`] — the act/train/refresh loop and the target-network baseline
//! - [`harness`] — config, metrics, checkpointing, experiment drivers

pub mod agent;
pub mod env;
pub mod error;
pub mod harness;
pub mod nn;
pub mod novelty;
pub mod replay;
pub mod rng;
pub mod wire;

pub use error::{Error, Result};

//! Feature-vector environments plus the wrappers the training protocol needs.

mod chain;
mod key_door;
mod sticky;

pub use chain::{value_iteration, ChainMdp, QTable};
pub use key_door::KeyDoorWorld;
pub use sticky::StickyActions;

use std::io::{Read, Write};

use crate::error::Result;

/// A fixed-width feature vector observed by the agent.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub features: Vec<f64>,
}

impl Observation {
    pub fn new(features: Vec<f64>) -> Self {
        debug_assert!(features.iter().all(|v| v.is_finite()));
        Self { features }
    }

    pub fn width(&self) -> usize {
        self.features.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.features
    }
}

/// Result of one environment transition.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub reward: f64,
    pub next_obs: Observation,
    pub terminal: bool,
}

pub trait Environment {
    fn obs_width(&self) -> usize;
    fn num_actions(&self) -> usize;

    /// Starts a new episode; deterministic for a fixed seed.
    fn reset(&mut self, seed: u64) -> Observation;

    /// Executes one action.
    fn step(&mut self, action: usize) -> Result<StepOutcome>;

    /// Serializes the mutable episode state (not the static configuration).
    fn save_state(&self, w: &mut dyn Write) -> Result<()>;

    /// Restores state previously written by [`Environment::save_state`]
    /// on an identically configured instance.
    fn restore_state(&mut self, r: &mut dyn Read) -> Result<()>;
}

/// Clamps a reward to `[-1, 1]`.
pub fn clip_reward(r: f64) -> f64 {
    r.clamp(-1.0, 1.0)
}

pub(crate) fn one_hot(index: usize, width: usize) -> Vec<f64> {
    let mut v = vec![0.0; width];
    v[index] = 1.0;
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clip_reward_matches_examples() {
        assert_eq!(clip_reward(5.0), 1.0);
        assert_eq!(clip_reward(-3.0), -1.0);
        assert_eq!(clip_reward(0.5), 0.5);
        assert_eq!(clip_reward(1.0), 1.0);
        assert_eq!(clip_reward(-1.0), -1.0);
    }
}

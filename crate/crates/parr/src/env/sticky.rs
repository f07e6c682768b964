//! Sticky-action wrapper: with probability `p` the previously executed
//! action repeats instead of the requested one. The first step of every
//! episode always executes the requested action.

use std::io::{Read, Write};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::rng;
use crate::wire;

use super::{Environment, Observation, StepOutcome};

#[derive(Debug, Clone)]
pub struct StickyActions<E: Environment> {
    inner: E,
    p: f64,
    rng: ChaCha8Rng,
    prev: Option<usize>,
}

impl<E: Environment> StickyActions<E> {
    pub fn new(inner: E, p: f64, seed: u64) -> Result<Self> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::InvalidConfig(format!(
                "sticky probability must lie in [0,1), got {p}"
            )));
        }
        Ok(Self {
            inner,
            p,
            rng: rng::seeded(seed),
            prev: None,
        })
    }

    /// Action actually executed by the most recent step.
    pub fn last_executed(&self) -> Option<usize> {
        self.prev
    }

    pub fn inner(&self) -> &E {
        &self.inner
    }
}

impl<E: Environment> Environment for StickyActions<E> {
    fn obs_width(&self) -> usize {
        self.inner.obs_width()
    }

    fn num_actions(&self) -> usize {
        self.inner.num_actions()
    }

    fn reset(&mut self, seed: u64) -> Observation {
        self.prev = None;
        self.rng = rng::seeded(rng::derive_seed(seed, 0x57_1C_4F));
        self.inner.reset(seed)
    }

    fn step(&mut self, action: usize) -> Result<StepOutcome> {
        if action >= self.num_actions() {
            return Err(Error::Contract(format!(
                "action {action} out of range 0..{}",
                self.num_actions()
            )));
        }
        let executed = match self.prev {
            Some(prev) if self.p > 0.0 => {
                if self.rng.gen::<f64>() < self.p {
                    prev
                } else {
                    action
                }
            }
            _ => action,
        };
        self.prev = Some(executed);
        self.inner.step(executed)
    }

    fn save_state(&self, w: &mut dyn Write) -> Result<()> {
        match self.prev {
            Some(a) => {
                wire::write_bool(w, true)?;
                wire::write_u64(w, a as u64)?;
            }
            None => wire::write_bool(w, false)?,
        }
        rng::save_rng(w, &self.rng)?;
        self.inner.save_state(w)
    }

    fn restore_state(&mut self, r: &mut dyn Read) -> Result<()> {
        self.prev = if wire::read_bool(r)? {
            Some(wire::read_u64(r)? as usize)
        } else {
            None
        };
        self.rng = rng::load_rng(r)?;
        self.inner.restore_state(r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::KeyDoorWorld;

    #[test]
    fn p_zero_matches_unwrapped_env() {
        let mut plain = KeyDoorWorld::standard();
        let mut sticky = StickyActions::new(KeyDoorWorld::standard(), 0.0, 1).unwrap();
        plain.reset(0);
        sticky.reset(0);
        for i in 0..300 {
            let a = i % 4;
            assert_eq!(plain.step(a).unwrap(), sticky.step(a).unwrap());
        }
    }

    #[test]
    fn constant_requests_are_unaffected() {
        let mut sticky = StickyActions::new(KeyDoorWorld::standard(), 0.95, 3).unwrap();
        sticky.reset(0);
        for _ in 0..100 {
            sticky.step(1).unwrap();
            assert_eq!(sticky.last_executed(), Some(1));
        }
    }

    #[test]
    fn repeat_rate_matches_probability() {
        // Request an action that always differs from the previous executed
        // one, so every repeat we observe was forced by the wrapper.
        let mut sticky = StickyActions::new(KeyDoorWorld::standard(), 0.25, 11).unwrap();
        sticky.reset(0);
        sticky.step(0).unwrap();
        let mut repeats = 0u32;
        let trials = 100_000u32;
        for _ in 0..trials {
            let prev = sticky.last_executed().unwrap();
            let request = (prev + 1) % 4;
            sticky.step(request).unwrap();
            if sticky.last_executed() == Some(prev) {
                repeats += 1;
            }
        }
        let rate = f64::from(repeats) / f64::from(trials);
        assert!((rate - 0.25).abs() < 0.01, "repeat rate {rate}");
    }

    #[test]
    fn first_step_after_reset_executes_request() {
        let mut sticky = StickyActions::new(KeyDoorWorld::standard(), 0.99, 5).unwrap();
        for seed in 0..50 {
            sticky.reset(seed);
            sticky.step(3).unwrap();
            assert_eq!(sticky.last_executed(), Some(3));
        }
    }

    #[test]
    fn wrapped_episode_is_seed_deterministic() {
        let run = |seed: u64| {
            let mut env = StickyActions::new(KeyDoorWorld::standard(), 0.25, 9).unwrap();
            env.reset(seed);
            (0..200)
                .map(|i| env.step(i % 4).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(run(4), run(4));
    }

    #[test]
    fn never_invents_foreign_actions() {
        let mut sticky = StickyActions::new(KeyDoorWorld::standard(), 0.5, 2).unwrap();
        sticky.reset(0);
        for i in 0..1000 {
            sticky.step(i % 4).unwrap();
            assert!(sticky.last_executed().unwrap() < 4);
        }
    }
}

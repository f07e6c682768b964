//! Drives the act/train/refresh schedule against one environment.
//!
//! Schedule: `burn_in` uniform-random experiences, then the first refresh
//! before any training; afterwards one training step per
//! `actions_per_train_step` actions and a refresh every `refresh_interval`
//! training steps. The refresh callback observes the paused agent and may
//! stop the run.

use std::io::{Read, Write};

use crate::env::{clip_reward, Environment, Observation};
use crate::error::{Error, Result};
use crate::replay::Experience;
use crate::rng;
use crate::wire;

use super::{ParrAgent, RefreshReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunControl {
    Continue,
    Stop,
}

pub struct Runner<E: Environment> {
    agent: ParrAgent,
    env: E,
    current_obs: Observation,
    episode_index: u64,
    actions_since_train: u32,
    stopped: bool,
}

impl<E: Environment> Runner<E> {
    pub fn new(agent: ParrAgent, mut env: E) -> Result<Self> {
        if env.obs_width() != agent.qspec().input_width() {
            return Err(Error::InvalidConfig(format!(
                "environment width {} does not match network input {}",
                env.obs_width(),
                agent.qspec().input_width()
            )));
        }
        if env.num_actions() != agent.n_actions() {
            return Err(Error::InvalidConfig(
                "environment action count does not match the agent".into(),
            ));
        }
        let seed = rng::derive_seed(agent.config().seeds.env, 0);
        let current_obs = env.reset(seed);
        Ok(Self {
            agent,
            env,
            current_obs,
            episode_index: 0,
            actions_since_train: 0,
            stopped: false,
        })
    }

    pub fn agent(&self) -> &ParrAgent {
        &self.agent
    }

    pub fn agent_mut(&mut self) -> &mut ParrAgent {
        &mut self.agent
    }

    pub fn env(&self) -> &E {
        &self.env
    }

    pub fn stopped(&self) -> bool {
        self.stopped
    }

    /// Runs until `total_env_steps` experiences exist or the callback says
    /// stop. Resumable: counters live in the agent, so calling again with a
    /// larger budget continues exactly where the run left off.
    pub fn run_until(
        &mut self,
        total_env_steps: u64,
        on_refresh: &mut dyn FnMut(&ParrAgent, &RefreshReport) -> Result<RunControl>,
    ) -> Result<()> {
        while !self.stopped && self.agent.env_steps() < total_env_steps {
            self.step_once(on_refresh)?;
        }
        Ok(())
    }

    fn step_once(
        &mut self,
        on_refresh: &mut dyn FnMut(&ParrAgent, &RefreshReport) -> Result<RunControl>,
    ) -> Result<()> {
        let action = self.agent.act(&self.current_obs)?;
        let outcome = self.env.step(action)?;
        self.agent.admit(Experience {
            s: self.current_obs.clone(),
            a: action,
            r: clip_reward(outcome.reward),
            s_next: outcome.next_obs.clone(),
            terminal: outcome.terminal,
        })?;
        if outcome.terminal {
            self.episode_index += 1;
            let seed = rng::derive_seed(self.agent.config().seeds.env, self.episode_index);
            self.current_obs = self.env.reset(seed);
        } else {
            self.current_obs = outcome.next_obs;
        }

        if self.agent.in_burn_in() {
            if self.agent.env_steps() >= self.agent.config().burn_in {
                let report = self.agent.refresh()?;
                if on_refresh(&self.agent, &report)? == RunControl::Stop {
                    self.stopped = true;
                }
            }
        } else {
            self.actions_since_train += 1;
            if self.actions_since_train >= self.agent.config().actions_per_train_step {
                self.actions_since_train = 0;
                self.agent.training_step()?;
                if self.agent.train_steps() % self.agent.config().refresh_interval == 0 {
                    let report = self.agent.refresh()?;
                    if on_refresh(&self.agent, &report)? == RunControl::Stop {
                        self.stopped = true;
                    }
                }
            }
        }
        Ok(())
    }

    /// Serializes agent, environment, and loop state.
    pub fn save(&self, w: &mut dyn Write) -> Result<()> {
        self.agent.save(w)?;
        self.env.save_state(w)?;
        wire::write_u64(w, self.current_obs.width() as u64)?;
        wire::write_f64_slice(w, &self.current_obs.features)?;
        wire::write_u64(w, self.episode_index)?;
        wire::write_u32(w, self.actions_since_train)?;
        wire::write_bool(w, self.stopped)?;
        Ok(())
    }

    /// Restores state saved by [`Runner::save`] into a runner built from
    /// the same configuration.
    pub fn restore(&mut self, r: &mut dyn Read) -> Result<()> {
        self.agent.restore(r)?;
        self.env.restore_state(r)?;
        let width = wire::read_u64(r)? as usize;
        if width != self.env.obs_width() {
            return Err(Error::Format("stored observation width mismatch".into()));
        }
        self.current_obs = Observation::new(wire::read_f64_vec(r, width)?);
        self.episode_index = wire::read_u64(r)?;
        self.actions_since_train = wire::read_u32(r)?;
        self.stopped = wire::read_bool(r)?;
        Ok(())
    }
}

//! Run configuration: TOML in, strict validation, TOML out.
//!
//! Unknown keys are rejected and missing required keys are reported with
//! the offending name and location, so a config typo fails loudly instead
//! of silently training the wrong experiment.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agent::{AgentConfig, AgentSeeds, ParrAgent};
use crate::env::{ChainMdp, Environment, KeyDoorWorld, StickyActions};
use crate::error::{Error, Result};
use crate::novelty::NoveltyConfig;
use crate::replay::PriorityConfig;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainVariant {
    Riverswim,
    Deterministic,
}

/// Environment selection plus wrapper parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvConfig {
    KeyDoor {
        #[serde(default = "d_grid")]
        width: usize,
        #[serde(default = "d_grid")]
        height: usize,
        #[serde(default = "d_start")]
        start: (usize, usize),
        #[serde(default = "d_key")]
        key: (usize, usize),
        #[serde(default = "d_door")]
        door: (usize, usize),
        #[serde(default = "d_step_limit")]
        step_limit: u32,
        #[serde(default = "d_sticky")]
        sticky_p: f64,
    },
    Chain {
        #[serde(default = "d_n_states")]
        n_states: usize,
        #[serde(default = "d_variant")]
        variant: ChainVariant,
        #[serde(default = "d_sticky")]
        sticky_p: f64,
    },
}

fn d_grid() -> usize {
    10
}
fn d_start() -> (usize, usize) {
    (0, 0)
}
fn d_key() -> (usize, usize) {
    (9, 9)
}
fn d_door() -> (usize, usize) {
    (0, 9)
}
fn d_step_limit() -> u32 {
    200
}
fn d_sticky() -> f64 {
    0.25
}
fn d_n_states() -> usize {
    8
}
fn d_variant() -> ChainVariant {
    ChainVariant::Riverswim
}

/// A bundled environment; the config picks the variant at run time.
#[derive(Debug, Clone)]
pub enum WorldEnv {
    KeyDoor(KeyDoorWorld),
    Chain(ChainMdp),
}

impl Environment for WorldEnv {
    fn obs_width(&self) -> usize {
        match self {
            WorldEnv::KeyDoor(e) => e.obs_width(),
            WorldEnv::Chain(e) => e.obs_width(),
        }
    }

    fn num_actions(&self) -> usize {
        match self {
            WorldEnv::KeyDoor(e) => e.num_actions(),
            WorldEnv::Chain(e) => e.num_actions(),
        }
    }

    fn reset(&mut self, seed: u64) -> crate::env::Observation {
        match self {
            WorldEnv::KeyDoor(e) => e.reset(seed),
            WorldEnv::Chain(e) => e.reset(seed),
        }
    }

    fn step(&mut self, action: usize) -> Result<crate::env::StepOutcome> {
        match self {
            WorldEnv::KeyDoor(e) => e.step(action),
            WorldEnv::Chain(e) => e.step(action),
        }
    }

    fn save_state(&self, w: &mut dyn std::io::Write) -> Result<()> {
        match self {
            WorldEnv::KeyDoor(e) => e.save_state(w),
            WorldEnv::Chain(e) => e.save_state(w),
        }
    }

    fn restore_state(&mut self, r: &mut dyn std::io::Read) -> Result<()> {
        match self {
            WorldEnv::KeyDoor(e) => e.restore_state(r),
            WorldEnv::Chain(e) => e.restore_state(r),
        }
    }
}

/// Every training and evaluation environment is sticky-wrapped; p = 0
/// makes the wrapper transparent.
pub type TrainEnv = StickyActions<WorldEnv>;

impl EnvConfig {
    pub fn sticky_p(&self) -> f64 {
        match self {
            EnvConfig::KeyDoor { sticky_p, .. } | EnvConfig::Chain { sticky_p, .. } => *sticky_p,
        }
    }

    pub fn build_world(&self) -> Result<WorldEnv> {
        match self {
            EnvConfig::KeyDoor {
                width,
                height,
                start,
                key,
                door,
                step_limit,
                ..
            } => Ok(WorldEnv::KeyDoor(KeyDoorWorld::new(
                *width,
                *height,
                *start,
                *key,
                *door,
                *step_limit,
            )?)),
            EnvConfig::Chain {
                n_states, variant, ..
            } => {
                if *n_states < 2 {
                    return Err(Error::InvalidConfig("chain needs >= 2 states".into()));
                }
                Ok(WorldEnv::Chain(match variant {
                    ChainVariant::Riverswim => ChainMdp::riverswim(*n_states),
                    ChainVariant::Deterministic => ChainMdp::deterministic_chain(*n_states),
                }))
            }
        }
    }

    pub fn build(&self, seed: u64) -> Result<TrainEnv> {
        StickyActions::new(self.build_world()?, self.sticky_p(), seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QNetConfig {
    pub hidden: Vec<usize>,
}

impl Default for QNetConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReplayConfig {
    pub capacity: usize,
    pub omega: f64,
    pub floor_eps: f64,
}

impl Default for ReplayConfig {
    fn default() -> Self {
        Self {
            capacity: 1 << 15,
            omega: 1.0,
            floor_eps: 1e-3,
        }
    }
}

impl ReplayConfig {
    pub fn priority_config(&self) -> PriorityConfig {
        PriorityConfig {
            omega: self.omega,
            floor_eps: self.floor_eps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub total_env_steps: u64,
    #[serde(default = "d_eval_episodes")]
    pub eval_episodes: u32,
    #[serde(default = "d_eval_cap")]
    pub eval_episode_cap: u32,
    /// An evaluation is "perfect" when every episode return reaches this.
    #[serde(default = "d_success")]
    pub success_return: f64,
    /// Stop after this many consecutive perfect evaluations.
    #[serde(default)]
    pub stop_after_perfect: Option<u32>,
    /// Write zeros instead of wall-clock fields, making output files
    /// byte-reproducible for a fixed (config, seeds).
    #[serde(default)]
    pub deterministic_timing: bool,
    /// When set, re-derives every seed from this master value.
    #[serde(default)]
    pub master_seed: Option<u64>,
    #[serde(default)]
    pub out_dir: Option<String>,
    #[serde(default = "d_eq_steps")]
    pub equivalence_steps: u64,
    /// Deliberately mismatch the two agents' seeds (equivalence negative
    /// control; the reported deviation must then be nonzero).
    #[serde(default)]
    pub equivalence_negative_control: bool,
    #[serde(default = "d_bench_sizes")]
    pub bench_sizes: Vec<usize>,
}

fn d_eval_episodes() -> u32 {
    10
}
fn d_eval_cap() -> u32 {
    400
}
fn d_success() -> f64 {
    1.0
}
fn d_eq_steps() -> u64 {
    1_000
}
fn d_bench_sizes() -> Vec<usize> {
    vec![1024, 2048, 4096]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub env: EnvConfig,
    #[serde(default)]
    pub agent: AgentConfig,
    #[serde(default)]
    pub qnet: QNetConfig,
    #[serde(default)]
    pub replay: ReplayConfig,
    #[serde(default)]
    pub novelty: NoveltyConfig,
    pub run: RunSection,
}

impl RunConfig {
    /// Agent config with the master-seed override applied.
    pub fn agent_config(&self) -> AgentConfig {
        let mut cfg = self.agent;
        if let Some(master) = self.run.master_seed {
            cfg.seeds = AgentSeeds::from_master(master);
        }
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        self.agent_config().validate()?;
        self.env.build_world()?;
        if self.qnet.hidden.iter().any(|&h| h == 0) {
            return Err(Error::InvalidConfig("q-network hidden sizes must be >= 1".into()));
        }
        if self.replay.capacity == 0 {
            return Err(Error::InvalidConfig("replay capacity must be >= 1".into()));
        }
        if self.run.eval_episodes == 0 {
            return Err(Error::InvalidConfig("eval_episodes must be >= 1".into()));
        }
        if self.run.eval_episode_cap == 0 {
            return Err(Error::InvalidConfig("eval_episode_cap must be >= 1".into()));
        }
        Ok(())
    }

    pub fn build_agent(&self) -> Result<ParrAgent> {
        self.build_agent_with(self.agent_config())
    }

    /// Builds an agent with an explicitly overridden agent config (the
    /// comparison and equivalence drivers vary mode and seeds).
    pub fn build_agent_with(&self, acfg: AgentConfig) -> Result<ParrAgent> {
        let world = self.env.build_world()?;
        ParrAgent::new(
            world.obs_width(),
            world.num_actions(),
            &self.qnet.hidden,
            acfg,
            self.novelty,
            self.replay.capacity,
            self.replay.priority_config(),
        )
    }

    pub fn build_train_env(&self) -> Result<TrainEnv> {
        let seeds = self.agent_config().seeds;
        self.env.build(rng::derive_seed(seeds.env, 0xE57))
    }
}

/// Parses and validates a config file.
pub fn read_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::InvalidConfig(format!("cannot read config {}: {e}", path.display()))
    })?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig =
        toml::from_str(text).map_err(|e| Error::InvalidConfig(format!("config error: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Serializes a config; `parse_config(&write_config(c)) == c`.
pub fn write_config(cfg: &RunConfig) -> Result<String> {
    toml::to_string_pretty(cfg)
        .map_err(|e| Error::InvalidConfig(format!("cannot serialize config: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [env]
        kind = "chain"

        [run]
        total_env_steps = 1000
    "#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.run.total_env_steps, 1000);
        assert_eq!(cfg.run.eval_episodes, 10);
        assert_eq!(cfg.replay.capacity, 1 << 15);
        assert_eq!(cfg.env.sticky_p(), 0.25);
        assert_eq!(cfg.agent.gamma, 0.99);
    }

    #[test]
    fn missing_required_key_names_it() {
        let err = parse_config("[env]\nkind = \"chain\"\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("run"), "diagnostic was: {msg}");
    }

    #[test]
    fn unknown_key_is_rejected() {
        let text = format!("{MINIMAL}\n[agent]\nlearning_rage = 0.1\n");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("learning_rage"), "got: {err}");
    }

    #[test]
    fn round_trip_is_a_fixed_point() {
        let cfg = parse_config(MINIMAL).unwrap();
        let text = write_config(&cfg).unwrap();
        let cfg2 = parse_config(&text).unwrap();
        assert_eq!(cfg, cfg2);
        assert_eq!(write_config(&cfg2).unwrap(), text);
    }

    #[test]
    fn master_seed_rederives_agent_seeds() {
        let text = format!("{MINIMAL}\n");
        let mut cfg = parse_config(&text).unwrap();
        let defaults = cfg.agent_config().seeds;
        cfg.run.master_seed = Some(42);
        let overridden = cfg.agent_config().seeds;
        assert_ne!(defaults, overridden);
        assert_eq!(overridden, AgentSeeds::from_master(42));
    }

    #[test]
    fn invalid_env_geometry_fails_validation() {
        let text = r#"
            [env]
            kind = "key_door"
            key = [20, 20]

            [run]
            total_env_steps = 10
        "#;
        assert!(parse_config(text).is_err());
    }

    #[test]
    fn key_door_world_builds_from_defaults() {
        let text = r#"
            [env]
            kind = "key_door"

            [run]
            total_env_steps = 10
        "#;
        let cfg = parse_config(text).unwrap();
        let world = cfg.env.build_world().unwrap();
        assert_eq!(world.obs_width(), 22);
        assert_eq!(world.num_actions(), 4);
    }
}

//! The training agent: act, admit experiences with mode-dependent
//! valuation, regress against stored targets, and periodically pause to
//! rewrite every derived value in the replay with the frozen online net.

mod runner;

pub use runner::{RunControl, Runner};

use std::io::{Read, Write};
use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::Observation;
use crate::error::{Error, Result};
use crate::nn::{self, AdamConfig, AdamState, GradSet, NetSpec, ParamSet};
use crate::novelty::{NoveltyConfig, NoveltyPair};
use crate::replay::{Experience, PriorityConfig, ReplayBuffer, ReplayRecord};
use crate::rng;
use crate::wire;

/// Which network values experiences created since the last refresh.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Value new experiences with the current online network.
    OnlineNew,
    /// Value new experiences with the network copied at the last refresh.
    SnapshotNew,
    /// Classic target networks: targets computed live at sample time from
    /// the snapshot; stored targets are ignored.
    TargetNetBaseline,
}

impl Mode {
    pub fn uses_snapshot(self) -> bool {
        !matches!(self, Mode::OnlineNew)
    }
}

/// How training batches are drawn from the replay.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingStrategy {
    Prioritized,
    Uniform,
}

/// Linear anneal from `start` to `end` over `decay_steps` training steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_steps: u64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        Self {
            start: 1.0,
            end: 0.05,
            decay_steps: 25_000,
        }
    }
}

impl EpsilonSchedule {
    pub fn value(&self, train_steps: u64) -> f64 {
        if self.decay_steps == 0 {
            return self.end;
        }
        let frac = (train_steps as f64 / self.decay_steps as f64).min(1.0);
        self.start + (self.end - self.start) * frac
    }
}

/// Named seeds for the independent random streams of one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSeeds {
    pub params: u64,
    pub policy: u64,
    pub env: u64,
    pub sampling: u64,
    pub novelty_fixed: u64,
    pub novelty_refresh: u64,
    pub eval: u64,
}

impl AgentSeeds {
    pub fn from_master(master: u64) -> Self {
        // Masked to 63 bits so seeds survive a TOML round trip (TOML
        // integers are i64).
        let derive = |tag| rng::derive_seed(master, tag) & (i64::MAX as u64);
        Self {
            params: derive(1),
            policy: derive(2),
            env: derive(3),
            sampling: derive(4),
            novelty_fixed: derive(5),
            novelty_refresh: derive(6),
            eval: derive(7),
        }
    }
}

impl Default for AgentSeeds {
    fn default() -> Self {
        Self::from_master(0x5EED)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentConfig {
    /// Discount factor, in `[0, 1)`.
    pub gamma: f64,
    /// Intrinsic (novelty) reward coefficient; 0 disables novelty entirely.
    pub beta: f64,
    /// Training steps between refreshes.
    pub refresh_interval: u64,
    /// Environment actions taken between consecutive training steps.
    pub actions_per_train_step: u32,
    /// Experiences created before the first refresh.
    pub burn_in: u64,
    pub batch_size: usize,
    pub epsilon: EpsilonSchedule,
    pub mode: Mode,
    /// Whether terminal targets receive the intrinsic bonus.
    pub terminal_gets_novelty: bool,
    pub sampling: SamplingStrategy,
    pub learning_rate: f64,
    pub seeds: AgentSeeds,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            beta: 1.0,
            refresh_interval: 500,
            actions_per_train_step: 4,
            burn_in: 2_000,
            batch_size: 32,
            epsilon: EpsilonSchedule::default(),
            mode: Mode::OnlineNew,
            terminal_gets_novelty: false,
            sampling: SamplingStrategy::Prioritized,
            learning_rate: 1e-3,
            seeds: AgentSeeds::default(),
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::InvalidConfig(format!(
                "gamma must lie in [0,1), got {}",
                self.gamma
            )));
        }
        if !(self.beta >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "beta must be >= 0, got {}",
                self.beta
            )));
        }
        if self.refresh_interval == 0 {
            return Err(Error::InvalidConfig("refresh_interval must be >= 1".into()));
        }
        if self.actions_per_train_step == 0 {
            return Err(Error::InvalidConfig(
                "actions_per_train_step must be >= 1".into(),
            ));
        }
        if self.burn_in == 0 {
            return Err(Error::InvalidConfig("burn_in must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig("learning_rate must be > 0".into()));
        }
        Ok(())
    }
}

/// Audit record of one refresh. Times are microseconds of wall clock.
#[derive(Debug, Clone, PartialEq)]
pub struct RefreshReport {
    pub ordinal: u64,
    pub records: usize,
    pub sigma: f64,
    pub sigma_floored: bool,
    pub novelty_us: u128,
    pub target_us: u128,
    pub total_us: u128,
    pub priority_min: f64,
    pub priority_mean: f64,
    pub priority_max: f64,
    pub target_min: f64,
    pub target_mean: f64,
    pub target_max: f64,
}

/// Regression target for one experience.
///
/// Non-terminal: `r + beta * novelty + gamma * max_a Q(s', a)`.
/// Terminal: `r`, plus the intrinsic bonus only when the flag says so.
pub fn compute_target(
    params: &ParamSet,
    spec: &NetSpec,
    exp: &Experience,
    novelty: f64,
    gamma: f64,
    beta: f64,
    terminal_gets_novelty: bool,
) -> Result<f64> {
    debug_assert!(novelty >= 0.0);
    if exp.terminal {
        return Ok(if terminal_gets_novelty {
            exp.r + beta * novelty
        } else {
            exp.r
        });
    }
    let q = nn::forward_value(params, spec, &exp.s_next.features)?;
    let max = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(exp.r + beta * novelty + gamma * max)
}

/// Argmax over Q-values; exact ties break toward the lowest action index.
pub fn greedy_action(params: &ParamSet, spec: &NetSpec, s: &Observation) -> Result<usize> {
    let q = nn::forward_value(params, spec, &s.features)?;
    let mut best = 0;
    for (a, &v) in q.iter().enumerate().skip(1) {
        if v > q[best] {
            best = a;
        }
    }
    Ok(best)
}

pub struct ParrAgent {
    cfg: AgentConfig,
    qspec: NetSpec,
    n_actions: usize,
    online: ParamSet,
    opt: AdamState,
    snapshot: Option<ParamSet>,
    novelty: NoveltyPair,
    replay: ReplayBuffer,
    policy_rng: ChaCha8Rng,
    sample_rng: ChaCha8Rng,
    env_steps: u64,
    train_steps: u64,
    refreshes: u64,
    loss_ma: Option<f64>,
    /// Online-weight checksum taken at the end of the last refresh.
    last_refresh_checksum: u64,
    /// Set by refresh; cleared by the next admission, which verifies the
    /// mode-equality-at-the-boundary property.
    boundary_check_pending: bool,
    boundary_checks_passed: u64,
    boundary_checks_total: u64,
}

impl ParrAgent {
    pub fn new(
        obs_width: usize,
        n_actions: usize,
        hidden: &[usize],
        cfg: AgentConfig,
        novelty_cfg: NoveltyConfig,
        replay_capacity: usize,
        priority_cfg: PriorityConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        if n_actions == 0 {
            return Err(Error::InvalidConfig("need at least one action".into()));
        }
        let mut sizes = Vec::with_capacity(hidden.len() + 2);
        sizes.push(obs_width);
        sizes.extend_from_slice(hidden);
        sizes.push(n_actions);
        let qspec = NetSpec::with_linear_head(sizes)?;
        let online = nn::init_params(&qspec, cfg.seeds.params);
        let opt = AdamState::new(&qspec, AdamConfig::with_lr(cfg.learning_rate));
        let novelty = NoveltyPair::new(obs_width, novelty_cfg, cfg.seeds.novelty_fixed)?;
        let replay = ReplayBuffer::new(replay_capacity, priority_cfg)?;
        Ok(Self {
            policy_rng: rng::seeded(cfg.seeds.policy),
            sample_rng: rng::seeded(cfg.seeds.sampling),
            last_refresh_checksum: online.checksum(),
            cfg,
            qspec,
            n_actions,
            online,
            opt,
            snapshot: None,
            novelty,
            replay,
            env_steps: 0,
            train_steps: 0,
            refreshes: 0,
            loss_ma: None,
            boundary_check_pending: false,
            boundary_checks_passed: 0,
            boundary_checks_total: 0,
        })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.cfg
    }

    pub fn qspec(&self) -> &NetSpec {
        &self.qspec
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn online(&self) -> &ParamSet {
        &self.online
    }

    pub fn snapshot(&self) -> Option<&ParamSet> {
        self.snapshot.as_ref()
    }

    pub fn replay(&self) -> &ReplayBuffer {
        &self.replay
    }

    pub fn novelty(&self) -> &NoveltyPair {
        &self.novelty
    }

    pub fn env_steps(&self) -> u64 {
        self.env_steps
    }

    pub fn train_steps(&self) -> u64 {
        self.train_steps
    }

    pub fn refreshes(&self) -> u64 {
        self.refreshes
    }

    pub fn loss_moving_average(&self) -> Option<f64> {
        self.loss_ma
    }

    pub fn online_checksum(&self) -> u64 {
        self.online.checksum()
    }

    /// `(passed, total)` refresh-boundary record-equality checks so far.
    pub fn boundary_checks(&self) -> (u64, u64) {
        (self.boundary_checks_passed, self.boundary_checks_total)
    }

    /// True until the first refresh has happened.
    pub fn in_burn_in(&self) -> bool {
        self.refreshes == 0
    }

    pub fn epsilon(&self) -> f64 {
        self.cfg.epsilon.value(self.train_steps)
    }

    /// Q-values of the online network for a state.
    pub fn q_values(&self, s: &Observation) -> Result<Vec<f64>> {
        nn::forward_value(&self.online, &self.qspec, &s.features)
    }

    /// Behavior policy: uniform during burn-in, epsilon-greedy afterwards.
    pub fn act(&mut self, s: &Observation) -> Result<usize> {
        if self.in_burn_in() {
            return Ok(self.policy_rng.gen_range(0..self.n_actions));
        }
        let eps = self.epsilon();
        if self.policy_rng.gen::<f64>() < eps {
            Ok(self.policy_rng.gen_range(0..self.n_actions))
        } else {
            greedy_action(&self.online, &self.qspec, s)
        }
    }

    /// Values and stores one experience.
    ///
    /// During burn-in the derived fields are zero placeholders; the first
    /// refresh (which precedes all training) fills them in. Afterwards the
    /// valuation network is the online net in [`Mode::OnlineNew`] and the
    /// refresh-time snapshot otherwise.
    pub fn admit(&mut self, exp: Experience) -> Result<()> {
        if exp.a >= self.n_actions {
            return Err(Error::Contract(format!(
                "experience action {} out of range 0..{}",
                exp.a, self.n_actions
            )));
        }
        if !(-1.0..=1.0).contains(&exp.r) {
            return Err(Error::Contract(format!(
                "experience reward {} not clipped to [-1,1]",
                exp.r
            )));
        }

        let record = if self.in_burn_in() {
            ReplayRecord::from_experience(exp)
        } else {
            let novelty = self.novelty.novelty_for_new(&exp.s_next)?;
            let valuation: &ParamSet = match self.cfg.mode {
                Mode::OnlineNew => &self.online,
                Mode::SnapshotNew | Mode::TargetNetBaseline => {
                    self.snapshot.as_ref().ok_or_else(|| {
                        Error::Contract("snapshot missing after first refresh".into())
                    })?
                }
            };
            let q_pred = nn::forward_value(valuation, &self.qspec, &exp.s.features)?[exp.a];
            let target = compute_target(
                valuation,
                &self.qspec,
                &exp,
                novelty,
                self.cfg.gamma,
                self.cfg.beta,
                self.cfg.terminal_gets_novelty,
            )?;
            let priority = (q_pred - target).abs();

            if self.boundary_check_pending {
                self.boundary_check_pending = false;
                self.boundary_checks_total += 1;
                let equal = match self.cfg.mode {
                    // Snapshot modes: revalue with the online net and demand
                    // bit equality with the snapshot valuation.
                    Mode::SnapshotNew | Mode::TargetNetBaseline => {
                        let q_on =
                            nn::forward_value(&self.online, &self.qspec, &exp.s.features)?[exp.a];
                        let t_on = compute_target(
                            &self.online,
                            &self.qspec,
                            &exp,
                            novelty,
                            self.cfg.gamma,
                            self.cfg.beta,
                            self.cfg.terminal_gets_novelty,
                        )?;
                        q_on.to_bits() == q_pred.to_bits() && t_on.to_bits() == target.to_bits()
                    }
                    // Online mode: equal iff the online weights are still the
                    // ones the refresh froze.
                    Mode::OnlineNew => self.online.checksum() == self.last_refresh_checksum,
                };
                if equal {
                    self.boundary_checks_passed += 1;
                }
            }

            let mut rec = ReplayRecord::from_experience(exp);
            rec.q_pred = q_pred;
            rec.novelty = novelty;
            rec.target = target;
            rec.priority = priority;
            rec
        };

        self.replay.push(record);
        self.env_steps += 1;
        Ok(())
    }

    fn sample_batch(&mut self) -> Result<Vec<usize>> {
        match self.cfg.sampling {
            SamplingStrategy::Prioritized => self
                .replay
                .sample_indices(self.cfg.batch_size, &mut self.sample_rng),
            SamplingStrategy::Uniform => self
                .replay
                .sample_uniform(self.cfg.batch_size, &mut self.sample_rng),
        }
    }

    /// Shared gradient step; `live_targets` selects baseline semantics.
    fn train_on_batch(&mut self, live_targets: bool) -> Result<f64> {
        if self.refreshes == 0 {
            return Err(Error::Contract(
                "training requested before the first refresh".into(),
            ));
        }
        let indices = self.sample_batch()?;
        let inv_b = 1.0 / indices.len() as f64;

        let mut grads = GradSet::zeros(&self.qspec);
        let mut loss = 0.0;
        let mut fresh: Vec<(usize, f64)> = Vec::with_capacity(indices.len());
        for &ix in &indices {
            let rec = self.replay.record(ix)?;
            let action = rec.exp.a;
            let target = if live_targets {
                let snapshot = self.snapshot.as_ref().ok_or_else(|| {
                    Error::Contract("baseline training requires a snapshot".into())
                })?;
                compute_target(
                    snapshot,
                    &self.qspec,
                    &rec.exp,
                    rec.novelty,
                    self.cfg.gamma,
                    self.cfg.beta,
                    self.cfg.terminal_gets_novelty,
                )?
            } else {
                rec.target
            };
            let (q, cache) = nn::forward(&self.online, &self.qspec, &rec.exp.s.features)?;
            let diff = q[action] - target;
            loss += diff * diff * inv_b;
            let mut out_grad = vec![0.0; self.n_actions];
            out_grad[action] = 2.0 * diff * inv_b;
            let g = nn::backward(&self.online, &self.qspec, &cache, &out_grad)?;
            grads.accumulate(&g);
            fresh.push((ix, diff.abs()));
        }

        self.opt.apply(&mut self.online, &grads)?;
        // Cheap per-use priority rewrite from the predictions we already
        // computed; the full distribution rewrite happens at refresh.
        for (ix, priority) in fresh {
            self.replay.set_priority(ix, priority)?;
        }
        self.train_steps += 1;
        self.loss_ma = Some(match self.loss_ma {
            Some(ma) => 0.99 * ma + 0.01 * loss,
            None => loss,
        });
        Ok(loss)
    }

    /// One regression step against the stored targets.
    pub fn train_step(&mut self) -> Result<f64> {
        if self.cfg.mode == Mode::TargetNetBaseline {
            return Err(Error::Contract(
                "train_step is not available in baseline mode; use baseline_train_step".into(),
            ));
        }
        self.train_on_batch(false)
    }

    /// Baseline step: identical except targets come live from the snapshot.
    pub fn baseline_train_step(&mut self) -> Result<f64> {
        if self.cfg.mode != Mode::TargetNetBaseline {
            return Err(Error::Contract(
                "baseline_train_step requires TargetNetBaseline mode".into(),
            ));
        }
        self.train_on_batch(true)
    }

    /// Mode-appropriate training step.
    pub fn training_step(&mut self) -> Result<f64> {
        match self.cfg.mode {
            Mode::TargetNetBaseline => self.baseline_train_step(),
            _ => self.train_step(),
        }
    }

    /// Pauses and rewrites every derived value with the frozen online net.
    pub fn refresh(&mut self) -> Result<RefreshReport> {
        let seed = rng::derive_seed(self.cfg.seeds.novelty_refresh, self.refreshes);
        self.refresh_with_seed(seed)
    }

    /// Refresh with an explicit predictor-retraining seed.
    pub fn refresh_with_seed(&mut self, novelty_seed: u64) -> Result<RefreshReport> {
        if self.replay.is_empty() {
            return Err(Error::Contract("cannot refresh an empty replay".into()));
        }
        let theta_checksum = self.online.checksum();
        let t_start = Instant::now();

        // Phase 1: novelty — normalizer refit, predictor from scratch,
        // sigma, normalized novelties written into the records.
        let nov = self.novelty.refresh(&mut self.replay, novelty_seed)?;
        let novelty_us = t_start.elapsed().as_micros();

        // Phase 2: Q-values, targets, priorities, oldest to newest.
        let t_targets = Instant::now();
        let order = self.replay.iterate_oldest_to_newest();
        let mut p_min = f64::INFINITY;
        let mut p_max = f64::NEG_INFINITY;
        let mut p_sum = 0.0;
        let mut t_min = f64::INFINITY;
        let mut t_max = f64::NEG_INFINITY;
        let mut t_sum = 0.0;
        for &ix in &order {
            let (exp, novelty) = {
                let rec = self.replay.record(ix)?;
                (rec.exp.clone(), rec.novelty)
            };
            let q_pred = nn::forward_value(&self.online, &self.qspec, &exp.s.features)?[exp.a];
            let target = compute_target(
                &self.online,
                &self.qspec,
                &exp,
                novelty,
                self.cfg.gamma,
                self.cfg.beta,
                self.cfg.terminal_gets_novelty,
            )?;
            let priority = (q_pred - target).abs();
            self.replay
                .rewrite_derived(ix, q_pred, novelty, target, priority)?;
            p_min = p_min.min(priority);
            p_max = p_max.max(priority);
            p_sum += priority;
            t_min = t_min.min(target);
            t_max = t_max.max(target);
            t_sum += target;
        }
        let target_us = t_targets.elapsed().as_micros();

        if self.cfg.mode.uses_snapshot() {
            self.snapshot = Some(self.online.clone());
        }

        debug_assert_eq!(
            self.online.checksum(),
            theta_checksum,
            "refresh must not touch the online weights"
        );
        self.refreshes += 1;
        self.last_refresh_checksum = theta_checksum;
        self.boundary_check_pending = true;

        let n = order.len() as f64;
        Ok(RefreshReport {
            ordinal: self.refreshes,
            records: order.len(),
            sigma: nov.sigma,
            sigma_floored: nov.sigma_floored,
            novelty_us,
            target_us,
            total_us: t_start.elapsed().as_micros(),
            priority_min: p_min,
            priority_mean: p_sum / n,
            priority_max: p_max,
            target_min: t_min,
            target_mean: t_sum / n,
            target_max: t_max,
        })
    }

    /// Serializes every piece of mutable state.
    pub fn save(&self, w: &mut dyn Write) -> Result<()> {
        nn::save_params(w, &self.qspec, &self.online)?;
        nn::save_adam(w, &self.qspec, &self.opt)?;
        match &self.snapshot {
            Some(snap) => {
                wire::write_bool(w, true)?;
                nn::save_params(w, &self.qspec, snap)?;
            }
            None => wire::write_bool(w, false)?,
        }
        self.novelty.save(w)?;
        crate::replay::dump_snapshot(w, &self.replay)?;
        rng::save_rng(w, &self.policy_rng)?;
        rng::save_rng(w, &self.sample_rng)?;
        wire::write_u64(w, self.env_steps)?;
        wire::write_u64(w, self.train_steps)?;
        wire::write_u64(w, self.refreshes)?;
        match self.loss_ma {
            Some(v) => {
                wire::write_bool(w, true)?;
                wire::write_f64(w, v)?;
            }
            None => wire::write_bool(w, false)?,
        }
        wire::write_u64(w, self.last_refresh_checksum)?;
        wire::write_bool(w, self.boundary_check_pending)?;
        wire::write_u64(w, self.boundary_checks_passed)?;
        wire::write_u64(w, self.boundary_checks_total)?;
        Ok(())
    }

    /// Restores state saved by [`ParrAgent::save`] into an agent built with
    /// the same configuration.
    pub fn restore(&mut self, r: &mut dyn Read) -> Result<()> {
        let (qspec, online) = nn::load_params(r)?;
        if qspec != self.qspec {
            return Err(Error::Format(
                "checkpoint network shape does not match the configuration".into(),
            ));
        }
        self.online = online;
        self.opt = nn::load_adam(r, &self.qspec)?;
        self.snapshot = if wire::read_bool(r)? {
            let (spec, params) = nn::load_params(r)?;
            if spec != self.qspec {
                return Err(Error::Format("snapshot shape mismatch".into()));
            }
            Some(params)
        } else {
            None
        };
        self.novelty.restore(r)?;
        self.replay = crate::replay::load_snapshot(r)?;
        self.policy_rng = rng::load_rng(r)?;
        self.sample_rng = rng::load_rng(r)?;
        self.env_steps = wire::read_u64(r)?;
        self.train_steps = wire::read_u64(r)?;
        self.refreshes = wire::read_u64(r)?;
        self.loss_ma = if wire::read_bool(r)? {
            Some(wire::read_f64(r)?)
        } else {
            None
        };
        self.last_refresh_checksum = wire::read_u64(r)?;
        self.boundary_check_pending = wire::read_bool(r)?;
        self.boundary_checks_passed = wire::read_u64(r)?;
        self.boundary_checks_total = wire::read_u64(r)?;
        Ok(())
    }
}

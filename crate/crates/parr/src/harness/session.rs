//! A full training run: runner + per-refresh evaluation + metrics + the
//! consecutive-perfect-evaluations stopper, all checkpointable as one unit.

use std::io::{Read, Write};
use std::time::Instant;

use crate::agent::{RefreshReport, RunControl, Runner};
use crate::error::{Error, Result};
use crate::rng;
use crate::wire;

use super::config::{parse_config, write_config, RunConfig, TrainEnv};
use super::eval::evaluate_greedy;
use super::metrics::{novelty_stats, MetricsRow};

const CKPT_MAGIC: &[u8; 8] = b"PARRCKPT";
const CKPT_VERSION: u32 = 1;

pub struct TrainSession {
    cfg: RunConfig,
    runner: Runner<TrainEnv>,
    started: Instant,
    /// Consecutive perfect evaluations so far.
    perfect_streak: u32,
    metrics: Vec<MetricsRow>,
    reports: Vec<RefreshReport>,
    /// Per refresh: did every evaluation episode reach the success return?
    perfect_flags: Vec<bool>,
}

impl TrainSession {
    pub fn new(cfg: RunConfig) -> Result<Self> {
        cfg.validate()?;
        let agent = cfg.build_agent()?;
        let env = cfg.build_train_env()?;
        let runner = Runner::new(agent, env)?;
        Ok(Self {
            cfg,
            runner,
            started: Instant::now(),
            perfect_streak: 0,
            metrics: Vec::new(),
            reports: Vec::new(),
            perfect_flags: Vec::new(),
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn runner(&self) -> &Runner<TrainEnv> {
        &self.runner
    }

    pub fn agent(&self) -> &crate::agent::ParrAgent {
        self.runner.agent()
    }

    pub fn metrics(&self) -> &[MetricsRow] {
        &self.metrics
    }

    pub fn reports(&self) -> &[RefreshReport] {
        &self.reports
    }

    pub fn perfect_flags(&self) -> &[bool] {
        &self.perfect_flags
    }

    /// First refresh whose evaluation was perfect, with its env-step count.
    pub fn first_success(&self) -> Option<(u64, u64)> {
        self.perfect_flags
            .iter()
            .position(|&p| p)
            .map(|i| (self.metrics[i].env_steps, self.metrics[i].refresh))
    }

    pub fn run_to_completion(&mut self) -> Result<()> {
        self.run_until_env_steps(self.cfg.run.total_env_steps)
    }

    /// Advances the run to the given env-step count (resumable).
    pub fn run_until_env_steps(&mut self, env_steps: u64) -> Result<()> {
        let cfg = &self.cfg;
        let started = self.started;
        let metrics = &mut self.metrics;
        let reports = &mut self.reports;
        let perfect_flags = &mut self.perfect_flags;
        let perfect_streak = &mut self.perfect_streak;

        self.runner.run_until(
            env_steps.min(cfg.run.total_env_steps),
            &mut |agent, report| {
                let eval = evaluate_greedy(
                    agent.online(),
                    agent.qspec(),
                    &cfg.env,
                    cfg.run.eval_episodes,
                    cfg.run.eval_episode_cap,
                    rng::derive_seed(agent.config().seeds.eval, report.ordinal),
                )?;
                let (mean_novelty, max_novelty) = novelty_stats(agent.replay());
                let wall_ms = if cfg.run.deterministic_timing {
                    0
                } else {
                    started.elapsed().as_millis()
                };
                metrics.push(MetricsRow {
                    refresh: report.ordinal,
                    env_steps: agent.env_steps(),
                    train_steps: agent.train_steps(),
                    eval_return: eval.mean_return,
                    mean_novelty,
                    max_novelty,
                    sigma: report.sigma,
                    mean_priority: report.priority_mean,
                    loss_ma: agent.loss_moving_average().unwrap_or(0.0),
                    wall_ms,
                });
                let mut stored = report.clone();
                if cfg.run.deterministic_timing {
                    stored.novelty_us = 0;
                    stored.target_us = 0;
                    stored.total_us = 0;
                }
                reports.push(stored);

                let perfect = eval.all_at_least(cfg.run.success_return);
                perfect_flags.push(perfect);
                *perfect_streak = if perfect { *perfect_streak + 1 } else { 0 };
                if let Some(k) = cfg.run.stop_after_perfect {
                    if *perfect_streak >= k {
                        return Ok(RunControl::Stop);
                    }
                }
                Ok(RunControl::Continue)
            },
        )
    }

    /// Full checkpoint: config text, runner (agent + env + loop state),
    /// stopper state. Metrics emitted so far stay with the caller.
    pub fn write_checkpoint(&self, w: &mut dyn Write) -> Result<()> {
        w.write_all(CKPT_MAGIC)?;
        wire::write_u32(w, CKPT_VERSION)?;
        wire::write_bytes(w, write_config(&self.cfg)?.as_bytes())?;
        self.runner.save(w)?;
        wire::write_u32(w, self.perfect_streak)?;
        Ok(())
    }

    /// Rebuilds a session from a checkpoint, validating that the supplied
    /// config matches the one the checkpoint was written under.
    pub fn resume(cfg: RunConfig, r: &mut dyn Read) -> Result<Self> {
        wire::expect_magic(r, CKPT_MAGIC)?;
        wire::expect_version(r, CKPT_VERSION)?;
        let stored_text = String::from_utf8(wire::read_bytes(r)?)
            .map_err(|_| Error::Format("checkpoint config is not UTF-8".into()))?;
        let stored_cfg = parse_config(&stored_text)?;
        if stored_cfg != cfg {
            return Err(Error::Format(
                "checkpoint was written under a different configuration".into(),
            ));
        }
        let mut session = Self::new(cfg)?;
        session.runner.restore(r)?;
        session.perfect_streak = wire::read_u32(r)?;
        Ok(session)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::parse_config;
    use crate::harness::metrics::metrics_csv;
    use crate::replay::snapshot_bytes;

    fn tiny_config() -> RunConfig {
        parse_config(
            r#"
            [env]
            kind = "key_door"
            width = 4
            height = 4
            start = [0, 0]
            key = [3, 3]
            door = [0, 3]
            step_limit = 25
            sticky_p = 0.25

            [agent]
            burn_in = 50
            refresh_interval = 10
            actions_per_train_step = 2
            batch_size = 4

            [qnet]
            hidden = [12]

            [replay]
            capacity = 128

            [novelty]
            output_width = 4
            hidden_width = 8

            [run]
            total_env_steps = 300
            eval_episodes = 3
            eval_episode_cap = 25
            deterministic_timing = true
        "#,
        )
        .unwrap()
    }

    #[test]
    fn identical_configs_give_byte_identical_metrics() {
        let run = || {
            let mut s = TrainSession::new(tiny_config()).unwrap();
            s.run_to_completion().unwrap();
            metrics_csv(s.metrics())
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn every_refresh_emits_one_row_and_one_report() {
        let mut s = TrainSession::new(tiny_config()).unwrap();
        s.run_to_completion().unwrap();
        assert_eq!(s.metrics().len() as u64, s.agent().refreshes());
        assert_eq!(s.reports().len(), s.metrics().len());
        assert!(s.metrics().len() >= 2);
        for w in s.metrics().windows(2) {
            assert!(w[0].env_steps <= w[1].env_steps);
            assert!(w[0].train_steps <= w[1].train_steps);
            assert_eq!(w[0].refresh + 1, w[1].refresh);
        }
    }

    #[test]
    fn checkpoint_resume_reproduces_the_uninterrupted_run() {
        let mut full = TrainSession::new(tiny_config()).unwrap();
        full.run_to_completion().unwrap();

        let mut half = TrainSession::new(tiny_config()).unwrap();
        half.run_until_env_steps(160).unwrap();
        let mut ckpt = Vec::new();
        half.write_checkpoint(&mut ckpt).unwrap();

        let mut resumed = TrainSession::resume(tiny_config(), &mut &ckpt[..]).unwrap();
        resumed.run_to_completion().unwrap();

        let mut combined = half.metrics().to_vec();
        combined.extend_from_slice(resumed.metrics());
        assert_eq!(metrics_csv(&combined), metrics_csv(full.metrics()));
        assert_eq!(
            resumed.agent().online_checksum(),
            full.agent().online_checksum()
        );
        assert_eq!(
            snapshot_bytes(resumed.agent().replay()).unwrap(),
            snapshot_bytes(full.agent().replay()).unwrap()
        );
    }

    #[test]
    fn resume_rejects_mismatched_config() {
        let mut s = TrainSession::new(tiny_config()).unwrap();
        s.run_until_env_steps(60).unwrap();
        let mut ckpt = Vec::new();
        s.write_checkpoint(&mut ckpt).unwrap();

        let mut other = tiny_config();
        other.run.total_env_steps = 999;
        assert!(TrainSession::resume(other, &mut &ckpt[..]).is_err());
    }

    #[test]
    fn stopper_halts_after_consecutive_perfect_evals() {
        let mut cfg = tiny_config();
        // Success threshold 0 with returns >= 0 always: every evaluation is
        // "perfect", so the run must stop at the second refresh.
        cfg.run.success_return = 0.0;
        cfg.run.stop_after_perfect = Some(2);
        let mut s = TrainSession::new(cfg).unwrap();
        s.run_to_completion().unwrap();
        assert_eq!(s.metrics().len(), 2);
        assert!(s.runner().stopped());
        assert!(s.agent().env_steps() < 300);
    }
}

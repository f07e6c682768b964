//! Experiment drivers behind the CLI subcommands: mode A/B comparison,
//! the frozen-replay drop-in equivalence protocol, and refresh timing.

use crate::agent::{AgentConfig, Mode, ParrAgent, SamplingStrategy};
use crate::env::{clip_reward, Environment};
use crate::error::{Error, Result};
use crate::replay::Experience;

use super::config::RunConfig;
use super::metrics::MetricsRow;
use super::session::TrainSession;

/// Fills the replay with uniform-random experiences, exactly like burn-in.
fn random_fill(agent: &mut ParrAgent, env: &mut impl Environment, n: u64) -> Result<()> {
    let mut obs = env.reset(crate::rng::derive_seed(agent.config().seeds.env, 0));
    while agent.env_steps() < n {
        let a = agent.act(&obs)?;
        let out = env.step(a)?;
        agent.admit(Experience {
            s: obs,
            a,
            r: clip_reward(out.reward),
            s_next: out.next_obs.clone(),
            terminal: out.terminal,
        })?;
        obs = if out.terminal {
            env.reset(crate::rng::derive_seed(agent.config().seeds.env, agent.env_steps()))
        } else {
            out.next_obs
        };
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Drop-in equivalence
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceOutcome {
    pub steps: u64,
    pub max_deviation: f64,
    pub negative_control: bool,
}

impl EquivalenceOutcome {
    pub const TOLERANCE: f64 = 1e-12;

    pub fn passed(&self) -> bool {
        if self.negative_control {
            self.max_deviation > Self::TOLERANCE
        } else {
            self.max_deviation <= Self::TOLERANCE
        }
    }
}

/// Frozen-replay protocol: identical burn-in, one refresh each, then
/// `equivalence_steps` training steps with no acting. The stored-target
/// learner and the live-snapshot baseline must produce identical weights.
///
/// Only defined for beta = 0 and uniform sampling; refuses otherwise.
pub fn run_equivalence(cfg: &RunConfig) -> Result<EquivalenceOutcome> {
    cfg.validate()?;
    let acfg = cfg.agent_config();
    if acfg.beta != 0.0 {
        return Err(Error::Contract(format!(
            "equivalence is only defined at beta = 0 (config has beta = {})",
            acfg.beta
        )));
    }
    if acfg.sampling != SamplingStrategy::Uniform {
        return Err(Error::Contract(
            "equivalence requires uniform sampling".into(),
        ));
    }

    let negative_control = cfg.run.equivalence_negative_control;
    let parr_cfg = AgentConfig {
        mode: Mode::OnlineNew,
        ..acfg
    };
    let mut base_cfg = AgentConfig {
        mode: Mode::TargetNetBaseline,
        ..acfg
    };
    if negative_control {
        base_cfg.seeds.params = base_cfg.seeds.params.wrapping_add(1);
    }

    let mut parr = cfg.build_agent_with(parr_cfg)?;
    let mut base = cfg.build_agent_with(base_cfg)?;
    let mut env_a = cfg.build_train_env()?;
    let mut env_b = cfg.build_train_env()?;
    random_fill(&mut parr, &mut env_a, acfg.burn_in)?;
    random_fill(&mut base, &mut env_b, acfg.burn_in)?;
    parr.refresh()?;
    base.refresh()?;

    let steps = cfg.run.equivalence_steps;
    for _ in 0..steps {
        parr.train_step()?;
        base.baseline_train_step()?;
    }

    let max_deviation = parr
        .online()
        .values()
        .zip(base.online().values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    Ok(EquivalenceOutcome {
        steps,
        max_deviation,
        negative_control,
    })
}

// ---------------------------------------------------------------------------
// Mode comparison
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct ModeRun {
    pub mode: Mode,
    pub metrics: Vec<MetricsRow>,
    pub first_success: Option<(u64, u64)>,
    pub boundary_passed: u64,
    pub boundary_total: u64,
}

#[derive(Debug, Clone)]
pub struct CompareOutcome {
    pub online: ModeRun,
    pub snapshot: ModeRun,
}

impl CompareOutcome {
    pub fn boundary_ok(&self) -> bool {
        self.online.boundary_passed == self.online.boundary_total
            && self.snapshot.boundary_passed == self.snapshot.boundary_total
    }
}

fn run_one_mode(cfg: &RunConfig, mode: Mode) -> Result<ModeRun> {
    let mut cfg = cfg.clone();
    cfg.agent.mode = mode;
    // Both modes must consume the full budget so the summaries line up.
    cfg.run.stop_after_perfect = None;
    let mut session = TrainSession::new(cfg)?;
    session.run_to_completion()?;
    let (boundary_passed, boundary_total) = session.agent().boundary_checks();
    Ok(ModeRun {
        mode,
        first_success: session.first_success(),
        metrics: session.metrics().to_vec(),
        boundary_passed,
        boundary_total,
    })
}

/// Runs the same budget and seeds under both new-experience valuations.
pub fn run_compare_modes(cfg: &RunConfig) -> Result<CompareOutcome> {
    cfg.validate()?;
    Ok(CompareOutcome {
        online: run_one_mode(cfg, Mode::OnlineNew)?,
        snapshot: run_one_mode(cfg, Mode::SnapshotNew)?,
    })
}

/// Side-by-side per-refresh summary; one row per refresh.
pub fn compare_summary_csv(outcome: &CompareOutcome) -> String {
    let mut out = String::from(
        "refresh,env_steps,eval_return_online_new,eval_return_snapshot_new\n",
    );
    for (a, b) in outcome.online.metrics.iter().zip(&outcome.snapshot.metrics) {
        out.push_str(&format!(
            "{},{},{},{}\n",
            a.refresh, a.env_steps, a.eval_return, b.eval_return
        ));
    }
    out
}

pub fn first_success_csv(outcome: &CompareOutcome) -> String {
    let mut out = String::from("mode,first_success_env_steps,first_success_refresh\n");
    for run in [&outcome.online, &outcome.snapshot] {
        let mode = match run.mode {
            Mode::OnlineNew => "online_new",
            Mode::SnapshotNew => "snapshot_new",
            Mode::TargetNetBaseline => "target_net_baseline",
        };
        match run.first_success {
            Some((env_steps, refresh)) => {
                out.push_str(&format!("{mode},{env_steps},{refresh}\n"));
            }
            None => out.push_str(&format!("{mode},none,none\n")),
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Refresh benchmarking
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub size: usize,
    pub novelty_us: u128,
    pub target_us: u128,
    pub total_us: u128,
}

/// Fills a replay at each configured size and times one refresh per size.
pub fn run_refresh_bench(cfg: &RunConfig) -> Result<Vec<BenchRow>> {
    cfg.validate()?;
    if cfg.run.bench_sizes.is_empty() {
        return Err(Error::InvalidConfig("bench_sizes must not be empty".into()));
    }
    let mut rows = Vec::with_capacity(cfg.run.bench_sizes.len());
    for &size in &cfg.run.bench_sizes {
        if size == 0 {
            return Err(Error::InvalidConfig("bench sizes must be >= 1".into()));
        }
        let acfg = AgentConfig {
            burn_in: size as u64,
            ..cfg.agent_config()
        };
        let world = cfg.env.build_world()?;
        let mut agent = ParrAgent::new(
            world.obs_width(),
            world.num_actions(),
            &cfg.qnet.hidden,
            acfg,
            cfg.novelty,
            size,
            cfg.replay.priority_config(),
        )?;
        let mut env = cfg.build_train_env()?;
        random_fill(&mut agent, &mut env, size as u64)?;
        let report = agent.refresh()?;
        rows.push(BenchRow {
            size,
            novelty_us: report.novelty_us,
            target_us: report.target_us,
            total_us: report.total_us,
        });
    }
    Ok(rows)
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("size,novelty_us,target_us,total_us\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            row.size, row.novelty_us, row.target_us, row.total_us
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::parse_config;

    fn eq_config(negative: bool, beta: f64, sampling: &str) -> RunConfig {
        parse_config(&format!(
            r#"
            [env]
            kind = "chain"

            [agent]
            beta = {beta}
            burn_in = 60
            batch_size = 4
            sampling = "{sampling}"

            [qnet]
            hidden = [12]

            [replay]
            capacity = 128

            [novelty]
            output_width = 4
            hidden_width = 8

            [run]
            total_env_steps = 60
            equivalence_steps = 120
            equivalence_negative_control = {negative}
        "#
        ))
        .unwrap()
    }

    #[test]
    fn equivalence_protocol_matches_exactly() {
        let outcome = run_equivalence(&eq_config(false, 0.0, "uniform")).unwrap();
        assert!(outcome.passed(), "deviation {}", outcome.max_deviation);
        assert_eq!(outcome.max_deviation, 0.0);
    }

    #[test]
    fn negative_control_shows_nonzero_deviation() {
        let outcome = run_equivalence(&eq_config(true, 0.0, "uniform")).unwrap();
        assert!(outcome.max_deviation > EquivalenceOutcome::TOLERANCE);
        assert!(outcome.passed());
    }

    #[test]
    fn equivalence_refuses_nonzero_beta() {
        assert!(run_equivalence(&eq_config(false, 0.5, "uniform")).is_err());
    }

    #[test]
    fn equivalence_refuses_prioritized_sampling() {
        assert!(run_equivalence(&eq_config(false, 0.0, "prioritized")).is_err());
    }

    fn small_compare_config() -> RunConfig {
        parse_config(
            r#"
            [env]
            kind = "key_door"
            width = 4
            height = 4
            key = [3, 3]
            door = [0, 3]
            step_limit = 20

            [agent]
            burn_in = 40
            refresh_interval = 8
            actions_per_train_step = 2
            batch_size = 4

            [qnet]
            hidden = [10]

            [replay]
            capacity = 128

            [novelty]
            output_width = 4
            hidden_width = 8

            [run]
            total_env_steps = 160
            eval_episodes = 2
            eval_episode_cap = 20
            deterministic_timing = true
        "#,
        )
        .unwrap()
    }

    #[test]
    fn compare_modes_runs_both_budgets_and_checks_boundaries() {
        let outcome = run_compare_modes(&small_compare_config()).unwrap();
        assert_eq!(outcome.online.metrics.len(), outcome.snapshot.metrics.len());
        assert!(outcome.boundary_ok());
        assert!(outcome.online.boundary_total >= 1);

        let summary = compare_summary_csv(&outcome);
        let rows = summary.lines().count() - 1;
        assert_eq!(rows, outcome.online.metrics.len());

        let fs = first_success_csv(&outcome);
        assert_eq!(fs.lines().count(), 3);
    }

    #[test]
    fn refresh_bench_times_each_size() {
        let mut cfg = small_compare_config();
        cfg.run.bench_sizes = vec![32, 64, 128];
        let rows = run_refresh_bench(&cfg).unwrap();
        assert_eq!(rows.len(), 3);
        for row in &rows {
            let phases = row.novelty_us + row.target_us;
            assert!(phases <= row.total_us);
        }
        let csv = bench_csv(&rows);
        assert_eq!(csv.lines().count(), 4);
    }
}

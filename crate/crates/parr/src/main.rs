use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use parr::harness::{
    self, bench_csv, compare_summary_csv, first_success_csv, metrics_csv, reports_csv,
    EquivalenceOutcome, RunConfig, TrainSession,
};
use parr::rng;

#[derive(Parser)]
#[command(name = "parr", about = "Replay-refresh deep Q-learning laboratory", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config's out_dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Re-derive every seed from this master value.
    #[arg(long)]
    seed_override: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a full training session; writes metrics, refresh reports, and a
    /// final checkpoint.
    Train(CommonArgs),
    /// Greedy evaluation of a checkpointed agent.
    Evaluate {
        #[command(flatten)]
        common: CommonArgs,
        /// Checkpoint written by `train`.
        checkpoint: PathBuf,
    },
    /// Run both new-experience valuation modes with matched seeds.
    CompareModes(CommonArgs),
    /// Frozen-replay equivalence of stored-target training vs the classic
    /// target-network baseline; nonzero exit if they diverge.
    Equivalence(CommonArgs),
    /// Time each refresh phase at several replay sizes.
    RefreshBench(CommonArgs),
}

fn load_config(common: &CommonArgs) -> parr::Result<RunConfig> {
    let mut cfg = harness::read_config(&common.config)?;
    if let Some(seed) = common.seed_override {
        cfg.run.master_seed = Some(seed);
    }
    Ok(cfg)
}

fn out_dir(common: &CommonArgs, cfg: &RunConfig) -> parr::Result<PathBuf> {
    let dir = common
        .out
        .clone()
        .or_else(|| cfg.run.out_dir.as_ref().map(PathBuf::from))
        .ok_or_else(|| {
            parr::Error::InvalidConfig(
                "no output directory: pass --out or set [run] out_dir".into(),
            )
        })?;
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn write(path: &Path, contents: &str) -> parr::Result<()> {
    fs::write(path, contents)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_train(common: &CommonArgs) -> parr::Result<()> {
    let cfg = load_config(common)?;
    let dir = out_dir(common, &cfg)?;
    let mut session = TrainSession::new(cfg)?;
    session.run_to_completion()?;

    write(&dir.join("metrics.csv"), &metrics_csv(session.metrics()))?;
    write(&dir.join("refresh_reports.csv"), &reports_csv(session.reports()))?;
    let mut ckpt = Vec::new();
    session.write_checkpoint(&mut ckpt)?;
    fs::write(dir.join("checkpoint.bin"), &ckpt)?;
    println!("wrote {}", dir.join("checkpoint.bin").display());

    let agent = session.agent();
    println!(
        "done: {} env steps, {} train steps, {} refreshes",
        agent.env_steps(),
        agent.train_steps(),
        agent.refreshes()
    );
    if let Some(row) = session.metrics().last() {
        println!("final eval return: {}", row.eval_return);
    }
    Ok(())
}

fn cmd_evaluate(common: &CommonArgs, checkpoint: &Path) -> parr::Result<()> {
    let cfg = load_config(common)?;
    let bytes = fs::read(checkpoint)?;
    let session = TrainSession::resume(cfg.clone(), &mut &bytes[..])?;
    let agent = session.agent();
    let result = harness::evaluate_greedy(
        agent.online(),
        agent.qspec(),
        &cfg.env,
        cfg.run.eval_episodes,
        cfg.run.eval_episode_cap,
        rng::derive_seed(agent.config().seeds.eval, 0xE0A1),
    )?;
    println!("episode returns: {:?}", result.returns);
    println!("mean greedy return: {}", result.mean_return);
    Ok(())
}

fn cmd_compare_modes(common: &CommonArgs) -> parr::Result<()> {
    let cfg = load_config(common)?;
    let dir = out_dir(common, &cfg)?;
    let outcome = harness::run_compare_modes(&cfg)?;

    write(
        &dir.join("metrics_online_new.csv"),
        &metrics_csv(&outcome.online.metrics),
    )?;
    write(
        &dir.join("metrics_snapshot_new.csv"),
        &metrics_csv(&outcome.snapshot.metrics),
    )?;
    write(&dir.join("compare_summary.csv"), &compare_summary_csv(&outcome))?;
    write(&dir.join("first_success.csv"), &first_success_csv(&outcome))?;

    for run in [&outcome.online, &outcome.snapshot] {
        println!(
            "{:?}: refresh-boundary record equality {}/{} checks passed",
            run.mode, run.boundary_passed, run.boundary_total
        );
    }
    if !outcome.boundary_ok() {
        return Err(parr::Error::Contract(
            "refresh-boundary record-equality assertion failed".into(),
        ));
    }
    Ok(())
}

fn cmd_equivalence(common: &CommonArgs) -> parr::Result<()> {
    let cfg = load_config(common)?;
    let outcome = harness::run_equivalence(&cfg)?;
    println!(
        "max per-parameter deviation after {} steps: {:e}{}",
        outcome.steps,
        outcome.max_deviation,
        if outcome.negative_control {
            " (negative control)"
        } else {
            ""
        }
    );
    if !outcome.passed() {
        return Err(parr::Error::Numerical(format!(
            "equivalence violated: deviation {:e} vs tolerance {:e}",
            outcome.max_deviation,
            EquivalenceOutcome::TOLERANCE
        )));
    }
    println!(
        "equivalence holds (tolerance {:e})",
        EquivalenceOutcome::TOLERANCE
    );
    Ok(())
}

fn cmd_refresh_bench(common: &CommonArgs) -> parr::Result<()> {
    let cfg = load_config(common)?;
    let dir = out_dir(common, &cfg)?;
    let rows = harness::run_refresh_bench(&cfg)?;
    for row in &rows {
        println!(
            "size {:>8}: novelty {} us, targets {} us, total {} us",
            row.size, row.novelty_us, row.target_us, row.total_us
        );
    }
    write(&dir.join("refresh_bench.csv"), &bench_csv(&rows))?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train(c) => cmd_train(c),
        Command::Evaluate { common, checkpoint } => cmd_evaluate(common, checkpoint),
        Command::CompareModes(c) => cmd_compare_modes(c),
        Command::Equivalence(c) => cmd_equivalence(c),
        Command::RefreshBench(c) => cmd_refresh_bench(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

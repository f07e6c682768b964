//! Configuration, metrics, checkpointing, and the experiment drivers
//! behind the CLI.

pub mod config;
pub mod drivers;
pub mod eval;
pub mod metrics;
pub mod session;

pub use config::{
    parse_config, read_config, write_config, ChainVariant, EnvConfig, QNetConfig, ReplayConfig,
    RunConfig, RunSection, TrainEnv, WorldEnv,
};
pub use drivers::{
    bench_csv, compare_summary_csv, first_success_csv, run_compare_modes, run_equivalence,
    run_refresh_bench, BenchRow, CompareOutcome, EquivalenceOutcome, ModeRun,
};
pub use eval::{evaluate_greedy, EvalResult};
pub use metrics::{
    metrics_csv, novelty_stats, reports_csv, MetricsRow, METRICS_HEADER, REPORTS_HEADER,
};
pub use session::TrainSession;

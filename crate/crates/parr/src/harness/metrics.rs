//! Per-refresh metrics rows and their CSV encoding.

use crate::agent::RefreshReport;
use crate::replay::ReplayBuffer;

pub const METRICS_HEADER: &str =
    "refresh,env_steps,train_steps,eval_return,mean_novelty,max_novelty,sigma,mean_priority,loss_ma,wall_ms";

pub const REPORTS_HEADER: &str = "refresh,records,sigma,sigma_floored,novelty_us,target_us,\
total_us,priority_min,priority_mean,priority_max,target_min,target_mean,target_max";

/// One metrics row, emitted at every refresh.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub refresh: u64,
    pub env_steps: u64,
    pub train_steps: u64,
    pub eval_return: f64,
    pub mean_novelty: f64,
    pub max_novelty: f64,
    pub sigma: f64,
    pub mean_priority: f64,
    pub loss_ma: f64,
    pub wall_ms: u128,
}

impl MetricsRow {
    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.refresh,
            self.env_steps,
            self.train_steps,
            self.eval_return,
            self.mean_novelty,
            self.max_novelty,
            self.sigma,
            self.mean_priority,
            self.loss_ma,
            self.wall_ms
        )
    }
}

/// Full metrics file contents (header plus one line per row).
pub fn metrics_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.to_csv_line());
        out.push('\n');
    }
    out
}

pub fn report_csv_line(r: &RefreshReport) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{}",
        r.ordinal,
        r.records,
        r.sigma,
        r.sigma_floored,
        r.novelty_us,
        r.target_us,
        r.total_us,
        r.priority_min,
        r.priority_mean,
        r.priority_max,
        r.target_min,
        r.target_mean,
        r.target_max
    )
}

pub fn reports_csv(reports: &[RefreshReport]) -> String {
    let mut out = String::from(REPORTS_HEADER);
    out.push('\n');
    for r in reports {
        out.push_str(&report_csv_line(r));
        out.push('\n');
    }
    out
}

/// Mean and max stored novelty across the replay.
pub fn novelty_stats(replay: &ReplayBuffer) -> (f64, f64) {
    let mut sum = 0.0;
    let mut max = 0.0f64;
    let mut n = 0usize;
    for &ix in &replay.iterate_oldest_to_newest() {
        let v = replay.record(ix).expect("live index").novelty;
        sum += v;
        max = max.max(v);
        n += 1;
    }
    if n == 0 {
        (0.0, 0.0)
    } else {
        (sum / n as f64, max)
    }
}

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::error::{Error, Result};
use crate::run::{
    replay_alpha_trace, run_schedule, Phase, ScheduleEvent, SwitchEvent, TestKind, TestRecord, Trajectory,
};
use crate::stats::Decision;

/// Weight of the newest loss in the smoothed loss column.
pub const LOSS_SMOOTHING: f64 = 0.01;

/// One row of `metrics.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub iteration: u64,
    pub epoch: u64,
    pub loss: f64,
    pub loss_smooth: f64,
    pub alpha: f64,
    pub phase: Phase,
    pub delta: f64,
    pub test_mean: Option<f64>,
    pub test_half_width: Option<f64>,
    pub test_n: Option<usize>,
    pub test_dof: Option<usize>,
    pub test_decision: Option<Decision>,
    pub sigma_sq_iid: Option<f64>,
    pub sigma_sq_bm: Option<f64>,
    pub sigma_sq_olbm: Option<f64>,
    pub slope: Option<f64>,
    pub slope_t: Option<f64>,
    pub slope_decision: Option<Decision>,
}

impl MetricRecord {
    fn attach(&mut self, t: &TestRecord) {
        let v = &t.verdict;
        match t.kind {
            TestKind::Stationarity => {
                self.test_mean = Some(v.mean);
                self.test_half_width = Some(v.half_width);
                self.test_n = Some(v.n_used);
                self.test_dof = Some(v.dof);
                self.test_decision = Some(v.decision);
                if let Some([iid, bm, olbm]) = t.variances {
                    self.sigma_sq_iid = Some(iid);
                    self.sigma_sq_bm = Some(bm);
                    self.sigma_sq_olbm = Some(olbm);
                }
            }
            TestKind::Slope => {
                self.slope = Some(v.mean);
                self.slope_t = Some(v.statistic);
                self.slope_decision = Some(v.decision);
            }
        }
    }
}

/// One line of `events.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum RunEvent {
    Test(TestRecord),
    Drop(ScheduleEvent),
    Switch(SwitchEvent),
}

impl RunEvent {
    fn key(&self) -> (u64, u8) {
        match self {
            RunEvent::Test(t) => (t.iteration, 0),
            RunEvent::Drop(d) => (d.iteration, 1),
            RunEvent::Switch(s) => (s.iteration, 2),
        }
    }
}

/// Contents of `summary.json`. Timestamps appear nowhere else.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub scheduler: String,
    pub seed: u64,
    pub iterations: u64,
    pub steps_per_epoch: usize,
    /// `F` at the last iterate.
    pub final_loss: f64,
    /// `F` at the mean of the final epoch's iterates.
    pub averaged_loss: f64,
    pub optimal_value: Option<f64>,
    /// Smoothed minibatch loss at the last iteration.
    pub final_loss_smooth: Option<f64>,
    pub final_alpha: f64,
    /// Mean step size over the final epoch.
    pub final_epoch_mean_alpha: Option<f64>,
    pub switch_iteration: Option<u64>,
    pub drops: usize,
    pub tests: usize,
    pub extra_evals: u64,
    pub replay_ok: bool,
    pub replay_error: Option<String>,
    pub started_unix: Option<f64>,
    pub elapsed_seconds: Option<f64>,
}

/// A finished run kept in memory.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub config: RunConfig,
    pub trajectory: Trajectory,
    pub metrics: Vec<MetricRecord>,
    pub events: Vec<RunEvent>,
    pub summary: RunSummary,
}

/// Runs the experiment without touching the filesystem. The summary carries
/// no timestamps.
pub fn execute(config: &RunConfig) -> Result<RunOutcome> {
    let (problem, x0) = config.problem.build()?;
    let spe = problem.steps_per_epoch();
    let mut schedule = config.scheduler.build(config.alpha0, spe)?;
    let total = config.total_iterations();
    let traj = run_schedule(problem.as_ref(), &config.rule, schedule.as_mut(), x0, total, config.seed)?;

    let metrics = metric_rows(&traj, spe as u64, config.log_every);
    let events = event_stream(&traj);
    let replay = replay_alpha_trace(&traj.records, &config.scheduler.replay_rules(config.alpha0));
    let tail = traj.records.len().saturating_sub(spe);
    let tail_alphas = &traj.records[tail..];
    let summary = RunSummary {
        scheduler: config.scheduler.name().to_string(),
        seed: config.seed,
        iterations: total,
        steps_per_epoch: spe,
        final_loss: problem.objective(&traj.final_x)?,
        averaged_loss: problem.objective(&traj.averaged_x)?,
        optimal_value: problem.optimal_value(),
        final_loss_smooth: metrics.last().map(|m| m.loss_smooth),
        final_alpha: traj.final_alpha,
        final_epoch_mean_alpha: (!tail_alphas.is_empty())
            .then(|| tail_alphas.iter().map(|r| r.alpha).sum::<f64>() / tail_alphas.len() as f64),
        switch_iteration: traj.switch.map(|s| s.iteration),
        drops: traj.drops.len(),
        tests: traj.tests.len(),
        extra_evals: traj.records.iter().map(|r| r.extra_evals as u64).sum(),
        replay_ok: replay.is_ok(),
        replay_error: replay.err().map(|e| e.to_string()),
        started_unix: None,
        elapsed_seconds: None,
    };
    Ok(RunOutcome {
        config: config.clone(),
        trajectory: traj,
        metrics,
        events,
        summary,
    })
}

/// Logged rows: every `log_every`-th iteration, every test iteration and the last.
pub fn metric_rows(traj: &Trajectory, steps_per_epoch: u64, log_every: u64) -> Vec<MetricRecord> {
    let mut rows = Vec::new();
    let mut tests = traj.tests.iter().peekable();
    let mut smooth = None;
    let last = traj.records.len().saturating_sub(1);
    for (i, r) in traj.records.iter().enumerate() {
        let s = match smooth {
            None => r.loss,
            Some(prev) => (1.0 - LOSS_SMOOTHING) * prev + LOSS_SMOOTHING * r.loss,
        };
        smooth = Some(s);
        let mut row = MetricRecord {
            iteration: r.iteration,
            epoch: r.iteration / steps_per_epoch.max(1),
            loss: r.loss,
            loss_smooth: s,
            alpha: r.alpha,
            phase: r.phase,
            delta: r.delta,
            test_mean: None,
            test_half_width: None,
            test_n: None,
            test_dof: None,
            test_decision: None,
            sigma_sq_iid: None,
            sigma_sq_bm: None,
            sigma_sq_olbm: None,
            slope: None,
            slope_t: None,
            slope_decision: None,
        };
        let mut tested = false;
        while let Some(t) = tests.next_if(|t| t.iteration == r.iteration) {
            row.attach(t);
            tested = true;
        }
        if tested || r.iteration % log_every == 0 || i == last {
            rows.push(row);
        }
    }
    rows
}

/// Tests, drops and the switch in iteration order.
pub fn event_stream(traj: &Trajectory) -> Vec<RunEvent> {
    let mut events: Vec<RunEvent> = traj.tests.iter().copied().map(RunEvent::Test).collect();
    events.extend(traj.drops.iter().copied().map(RunEvent::Drop));
    events.extend(traj.switch.map(RunEvent::Switch));
    events.sort_by_key(RunEvent::key);
    events
}

pub const CONFIG_FILE: &str = "config.json";
pub const METRICS_FILE: &str = "metrics.csv";
pub const EVENTS_FILE: &str = "events.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

/// Writes `config.json`, `metrics.csv`, `events.jsonl` and `summary.json`.
pub fn write_artifacts(outcome: &RunOutcome, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let path = dir.join(CONFIG_FILE);
    let mut w = create(&path)?;
    serde_json::to_writer_pretty(&mut w, &outcome.config)?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| Error::io(&path, e))?;

    let path = dir.join(METRICS_FILE);
    let mut csv = csv::Writer::from_writer(create(&path)?);
    if outcome.metrics.is_empty() {
        csv.write_record(METRIC_COLUMNS)?;
    }
    for row in &outcome.metrics {
        csv.serialize(row)?;
    }
    csv.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join(EVENTS_FILE);
    let mut w = create(&path)?;
    for e in &outcome.events {
        serde_json::to_writer(&mut w, e)?;
        writeln!(w).map_err(|err| Error::io(&path, err))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join(SUMMARY_FILE);
    let mut w = create(&path)?;
    serde_json::to_writer_pretty(&mut w, &outcome.summary)?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| Error::io(&path, e))?;
    Ok(())
}

pub const METRIC_COLUMNS: [&str; 18] = [
    "iteration",
    "epoch",
    "loss",
    "loss_smooth",
    "alpha",
    "phase",
    "delta",
    "test_mean",
    "test_half_width",
    "test_n",
    "test_dof",
    "test_decision",
    "sigma_sq_iid",
    "sigma_sq_bm",
    "sigma_sq_olbm",
    "slope",
    "slope_t",
    "slope_decision",
];

/// Executes `config` and writes its artifacts to `dir`.
pub fn run_to_dir(config: &RunConfig, dir: &Path) -> Result<RunOutcome> {
    let started = SystemTime::now();
    let clock = Instant::now();
    let mut outcome = execute(config)?;
    outcome.summary.started_unix = started.duration_since(UNIX_EPOCH).ok().map(|d| d.as_secs_f64());
    outcome.summary.elapsed_seconds = Some(clock.elapsed().as_secs_f64());
    write_artifacts(&outcome, dir)?;
    Ok(outcome)
}

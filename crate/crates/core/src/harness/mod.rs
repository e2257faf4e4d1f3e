//! Experiment plumbing: JSON configs with overrides, seeded runs that write
//! `config.json`, `metrics.csv`, `events.jsonl` and `summary.json`, parallel
//! parameter sweeps, and tidy plot-data CSVs.

mod config;
mod plot_data;
mod runner;
mod sweep;

pub use config::{apply_overrides, parse_value, set_path, CutSpec, ProblemSpec, RunConfig, SchedulerSpec};
pub use plot_data::{emit_plot_data, read_metrics, PlotKind};
pub use runner::{
    event_stream, execute, metric_rows, run_to_dir, write_artifacts, MetricRecord, RunEvent, RunOutcome, RunSummary,
    CONFIG_FILE, EVENTS_FILE, LOSS_SMOOTHING, METRICS_FILE, METRIC_COLUMNS, SUMMARY_FILE,
};
pub use sweep::{grid_points, run_sweep, GridAxis, PointResult, SweepOptions, SweepReport, THREADS_ENV};

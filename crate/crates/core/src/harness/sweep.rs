use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::Value;

use super::config::{parse_value, set_path, RunConfig};
use super::runner::{run_to_dir, RunSummary};
use crate::error::{Error, Result};

/// Environment variable capping sweep parallelism.
pub const THREADS_ENV: &str = "SALSA_OPT_THREADS";

/// One swept config field and its values.
#[derive(Debug, Clone, PartialEq)]
pub struct GridAxis {
    pub key: String,
    pub values: Vec<Value>,
}

impl GridAxis {
    /// Parses `key=v1,v2,...`. Commas inside brackets or braces do not split.
    pub fn parse(spec: &str) -> Result<Self> {
        let bad = |m: &str| Error::Config {
            path: spec.to_string(),
            message: m.to_string(),
        };
        let (key, raw) = spec.split_once('=').ok_or_else(|| bad("grid must look like key=v1,v2"))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(bad("empty grid key"));
        }
        let mut values = Vec::new();
        let mut depth = 0i32;
        let mut start = 0;
        for (i, c) in raw.char_indices() {
            match c {
                '[' | '{' => depth += 1,
                ']' | '}' => depth -= 1,
                ',' if depth == 0 => {
                    values.push(&raw[start..i]);
                    start = i + 1;
                }
                _ => {}
            }
        }
        values.push(&raw[start..]);
        let values: Vec<Value> = values.into_iter().map(|v| parse_value(v.trim())).collect();
        if values.iter().any(|v| v == &Value::String(String::new())) {
            return Err(bad("empty grid value"));
        }
        Ok(Self {
            key: key.to_string(),
            values,
        })
    }
}

/// Cartesian product, last axis varying fastest.
pub fn grid_points(axes: &[GridAxis]) -> Vec<Vec<Value>> {
    axes.iter().fold(vec![vec![]], |acc, axis| {
        acc.iter()
            .flat_map(|prefix| {
                axis.values.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push(v.clone());
                    p
                })
            })
            .collect()
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOptions {
    /// Point `i` uses seed `base_seed + i` unless `shared_seed` is set or
    /// `seed` is itself a grid axis.
    pub base_seed: u64,
    pub shared_seed: bool,
    /// `None` reads the thread cap from the environment.
    pub threads: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct PointResult {
    pub index: usize,
    /// Seed the run used.
    pub seed: u64,
    pub values: Vec<Value>,
    pub dir: PathBuf,
    pub outcome: std::result::Result<RunSummary, String>,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub keys: Vec<String>,
    pub points: Vec<PointResult>,
}

impl SweepReport {
    pub fn failures(&self) -> usize {
        self.points.iter().filter(|p| p.outcome.is_err()).count()
    }
}

fn thread_cap(explicit: Option<usize>) -> Option<usize> {
    explicit
        .or_else(|| std::env::var(THREADS_ENV).ok().and_then(|s| s.trim().parse().ok()))
        .filter(|n| *n > 0)
}

fn run_point(base: &Value, axes: &[GridAxis], values: &[Value], seed: u64, dir: &Path) -> Result<RunSummary> {
    let mut v = base.clone();
    // a grid axis over `seed` wins over the per-point seed
    set_path(&mut v, "seed", Value::from(seed))?;
    for (axis, value) in axes.iter().zip(values) {
        set_path(&mut v, &axis.key, value.clone())?;
    }
    let cfg = RunConfig::resolve(v)?;
    Ok(run_to_dir(&cfg, dir)?.summary)
}

/// Runs every grid point into `out/point_XXX` and writes `out/sweep.csv`.
/// Individual failures are recorded, not propagated.
pub fn run_sweep(base: &Value, axes: &[GridAxis], out: &Path, opts: &SweepOptions) -> Result<SweepReport> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let points = grid_points(axes);
    let work = |(index, values): (usize, Vec<Value>)| {
        let seed = if opts.shared_seed {
            opts.base_seed
        } else {
            opts.base_seed + index as u64
        };
        let dir = out.join(format!("point_{index:03}"));
        let outcome = run_point(base, axes, &values, seed, &dir).map_err(|e| e.to_string());
        let seed = outcome.as_ref().map_or(seed, |s| s.seed);
        PointResult {
            index,
            seed,
            values,
            dir,
            outcome,
        }
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_cap(opts.threads) {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let results: Vec<PointResult> =
        pool.install(|| points.into_iter().enumerate().collect::<Vec<_>>().into_par_iter().map(work).collect());
    let report = SweepReport {
        keys: axes.iter().map(|a| a.key.clone()).collect(),
        points: results,
    };
    write_sweep_csv(&report, &out.join("sweep.csv"))?;
    Ok(report)
}

fn cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_sweep_csv(report: &SweepReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["point".to_string(), "seed".into()];
    header.extend(report.keys.iter().cloned());
    header.extend(
        [
            "status",
            "final_loss",
            "averaged_loss",
            "final_alpha",
            "drops",
            "switch_iteration",
            "error",
        ]
        .map(String::from),
    );
    w.write_record(&header)?;
    for p in &report.points {
        let mut row = vec![p.index.to_string(), p.seed.to_string()];
        row.extend(p.values.iter().map(cell));
        match &p.outcome {
            Ok(s) => row.extend([
                "ok".into(),
                s.final_loss.to_string(),
                s.averaged_loss.to_string(),
                s.final_alpha.to_string(),
                s.drops.to_string(),
                opt(s.switch_iteration),
                String::new(),
            ]),
            Err(e) => row.extend([
                "failed".into(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                e.clone(),
            ]),
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

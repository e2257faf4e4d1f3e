use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::runner::{MetricRecord, METRICS_FILE};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    LrTrace,
    DeltaCi,
    VarianceComparison,
    Loss,
}

impl PlotKind {
    pub const ALL: [PlotKind; 4] = [Self::LrTrace, Self::DeltaCi, Self::VarianceComparison, Self::Loss];

    pub fn name(&self) -> &'static str {
        match self {
            Self::LrTrace => "lr_trace",
            Self::DeltaCi => "delta_ci",
            Self::VarianceComparison => "variance_comparison",
            Self::Loss => "loss",
        }
    }

    /// `(series, value)` pairs contributed by one metrics row.
    fn series(&self, m: &MetricRecord) -> Vec<(&'static str, f64)> {
        match self {
            Self::LrTrace => vec![("alpha", m.alpha)],
            Self::Loss => vec![("loss", m.loss), ("loss_smooth", m.loss_smooth)],
            Self::DeltaCi => match (m.test_mean, m.test_half_width) {
                (Some(mu), Some(w)) => vec![("mean", mu), ("lower", mu - w), ("upper", mu + w)],
                _ => vec![],
            },
            Self::VarianceComparison => [("iid", m.sigma_sq_iid), ("bm", m.sigma_sq_bm), ("olbm", m.sigma_sq_olbm)]
                .into_iter()
                .filter_map(|(s, v)| v.map(|v| (s, v)))
                .collect(),
        }
    }
}

impl FromStr for PlotKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown plot kind `{s}`")))
    }
}

pub fn read_metrics(run_dir: &Path) -> Result<Vec<MetricRecord>> {
    let path = run_dir.join(METRICS_FILE);
    if !path.is_file() {
        return Err(Error::MissingArtifact(path));
    }
    let mut reader = csv::Reader::from_path(&path)?;
    let rows = reader.deserialize().collect::<std::result::Result<Vec<MetricRecord>, _>>()?;
    Ok(rows)
}

/// Writes `plot_<kind>.csv` with columns `iteration,series,value` into the run
/// directory and returns its path.
pub fn emit_plot_data(run_dir: &Path, kind: PlotKind) -> Result<PathBuf> {
    let rows = read_metrics(run_dir)?;
    let path = run_dir.join(format!("plot_{}.csv", kind.name()));
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["iteration", "series", "value"])?;
    for m in &rows {
        for (series, value) in kind.series(m) {
            w.write_record([m.iteration.to_string(), series.to_string(), value.to_string()])?;
        }
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

//! Delimited-text datasets: one example per line, label first, fields
//! separated by commas or whitespace, `#` comment lines and blank lines
//! ignored.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::LogisticRegression;
use crate::error::{Error, Result};

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Reads a binary-label dataset. With `standardize` every feature column is
/// shifted to mean 0 and scaled to unit (population) variance; constant
/// columns are only centered.
pub fn load_dataset(path: &Path, standardize: bool, batch_size: usize) -> Result<LogisticRegression> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut width: Option<usize> = None;

    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|f| !f.is_empty())
            .collect();
        if fields.len() < 2 {
            return Err(parse_err(path, lineno, "expected a label and at least one feature"));
        }
        let label: f64 = fields[0]
            .parse()
            .map_err(|_| parse_err(path, lineno, format!("label `{}` is not a number", fields[0])))?;
        if label != 0.0 && label != 1.0 {
            return Err(parse_err(path, lineno, format!("label `{}` is not 0 or 1", fields[0])));
        }
        let p = fields.len() - 1;
        match width {
            None => width = Some(p),
            Some(w) if w != p => {
                return Err(parse_err(path, lineno, format!("expected {w} features, found {p}")));
            }
            _ => {}
        }
        for f in &fields[1..] {
            let v: f64 = f
                .parse()
                .map_err(|_| parse_err(path, lineno, format!("feature `{f}` is not a number")))?;
            if !v.is_finite() {
                return Err(parse_err(path, lineno, format!("feature `{f}` is not finite")));
            }
            features.push(v);
        }
        labels.push(label);
    }

    let Some(p) = width else {
        return Err(Error::Dataset {
            path: path.to_path_buf(),
            message: "no examples found".into(),
        });
    };
    if standardize {
        standardize_columns(&mut features, p);
    }
    let n = labels.len();
    LogisticRegression::new(features, labels, p, 0.0, batch_size.min(n)).map_err(|e| Error::Dataset {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn standardize_columns(features: &mut [f64], p: usize) {
    let n = features.len() / p;
    for j in 0..p {
        let mean = (0..n).map(|i| features[i * p + j]).sum::<f64>() / n as f64;
        let var = (0..n).map(|i| (features[i * p + j] - mean).powi(2)).sum::<f64>() / n as f64;
        let scale = if var > 0.0 { var.sqrt() } else { 1.0 };
        for i in 0..n {
            features[i * p + j] = (features[i * p + j] - mean) / scale;
        }
    }
}

/// Writes the dataset in the comma-separated form [`load_dataset`] reads.
/// Values are printed in shortest round-trip form.
pub fn write_dataset(problem: &LogisticRegression, path: &Path) -> Result<()> {
    let p = problem.n_features();
    let mut out = String::new();
    for (i, y) in problem.labels().iter().enumerate() {
        write!(out, "{}", *y as u8).unwrap();
        for v in problem.row(i) {
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    debug_assert_eq!(problem.features().len(), problem.labels().len() * p);
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

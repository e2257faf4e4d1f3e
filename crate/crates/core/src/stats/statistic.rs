use crate::error::{check_dim, Error, Result};
use crate::{dot, norm_sq};

/// `Δ = ⟨x, d⟩ − (α/2)‖d‖²`. Its expectation vanishes whenever the
/// constant-step dynamics `x ← x − α d` are stationary.
pub fn delta_statistic(x: &[f64], d: &[f64], alpha: f64) -> Result<f64> {
    check_dim(x.len(), d.len())?;
    Ok(dot(x, d) - 0.5 * alpha * norm_sq(d))
}

/// Heavy-ball form `⟨x, g⟩ − (α/2)·(1+β)/(1−β)·‖d‖²` using the raw gradient
/// `g` and the heavy-ball direction `d`.
pub fn yaida_delta(x: &[f64], g: &[f64], d: &[f64], alpha: f64, beta: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::InvalidConfig(format!(
            "momentum beta = {beta} must lie in [0, 1)"
        )));
    }
    check_dim(x.len(), g.len())?;
    check_dim(x.len(), d.len())?;
    Ok(dot(x, g) - 0.5 * alpha * (1.0 + beta) / (1.0 - beta) * norm_sq(d))
}

use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};

/// Upper tail `P(T > t)` for `t ≥ 0`: `½ I_{ν/(ν+t²)}(ν/2, ½)`.
fn upper_tail(t: f64, dof: f64) -> f64 {
    let x = dof / (dof + t * t);
    0.5 * beta_reg(0.5 * dof, 0.5, x)
}

fn check_dof(dof: f64) -> Result<()> {
    if !(dof > 0.0 && dof.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "degrees of freedom {dof} must be positive and finite"
        )));
    }
    Ok(())
}

/// Student-t cumulative distribution function.
pub fn t_cdf(t: f64, dof: f64) -> Result<f64> {
    check_dof(dof)?;
    if t.is_nan() {
        return Err(Error::InvalidArgument("t is NaN".into()));
    }
    if t.is_infinite() {
        return Ok(if t > 0.0 { 1.0 } else { 0.0 });
    }
    let tail = upper_tail(t.abs(), dof);
    Ok(if t >= 0.0 { 1.0 - tail } else { tail })
}

/// Inverse CDF of Student's t with `dof` degrees of freedom.
///
/// Brackets the root of the upper-tail probability and bisects until the
/// bracket is at the resolution of `f64`.
pub fn t_quantile(prob: f64, dof: f64) -> Result<f64> {
    check_dof(dof)?;
    if !(prob > 0.0 && prob < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "probability {prob} must lie in (0, 1)"
        )));
    }
    if prob == 0.5 {
        return Ok(0.0);
    }
    if prob < 0.5 {
        return Ok(-t_quantile(1.0 - prob, dof)?);
    }
    // exact on [0.5, 1)
    let tail = 1.0 - prob;

    let mut lo = 0.0;
    let mut hi = 1.0;
    while upper_tail(hi, dof) > tail {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "quantile of {prob} with {dof} dof overflows"
            )));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if upper_tail(mid, dof) > tail {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

use serde::{Deserialize, Serialize};

use super::{mean, t_quantile, variance_estimate, VarianceEstimatorKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Stationary,
    NotStationary,
    Decreasing,
    NotDecreasing,
}

/// Outcome of one statistical test.
///
/// For the confidence-interval tests `mean` is `μ̂_N`, `half_width` is
/// `ω_N = t* σ̂_N / √N` and `statistic` is `μ̂_N / (σ̂_N / √N)`.
/// For the slope test `mean` is the fitted slope, `sigma_sq` the squared
/// standard error of the slope, `statistic` the slope t value and
/// `half_width` the one-sided margin `|t_δ| σ̂_f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestVerdict {
    pub mean: f64,
    pub half_width: f64,
    pub sigma_sq: f64,
    pub dof: usize,
    pub statistic: f64,
    pub decision: Decision,
    pub n_used: usize,
}

impl TestVerdict {
    pub fn lower(&self) -> f64 {
        self.mean - self.half_width
    }

    pub fn upper(&self) -> f64 {
        self.mean + self.half_width
    }

    pub fn contains_zero(&self) -> bool {
        self.lower() <= 0.0 && 0.0 <= self.upper()
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "confidence parameter delta = {delta} must lie in (0, 1)"
        )));
    }
    Ok(())
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else if num == 0.0 {
        0.0
    } else {
        num.signum() * f64::INFINITY
    }
}

/// `(1 − δ)` confidence interval for the mean of `samples`; returns
/// `(mean, half_width, estimate)`.
fn confidence_interval(
    samples: &[f64],
    delta: f64,
    kind: VarianceEstimatorKind,
) -> Result<(f64, f64, super::VarianceEstimate)> {
    check_delta(delta)?;
    let est = variance_estimate(samples, kind)?;
    let n = samples.len() as f64;
    let t_star = t_quantile(1.0 - 0.5 * delta, est.dof as f64)?;
    let half_width = t_star * (est.sigma_sq / n).sqrt();
    Ok((mean(samples), half_width, est))
}

/// Fails to reject stationarity (decision `Stationary`) iff zero lies in
/// `μ̂_N ± t*_{1−δ/2} σ̂_N / √N`.
pub fn stationarity_test(
    samples: &[f64],
    delta: f64,
    kind: VarianceEstimatorKind,
) -> Result<TestVerdict> {
    let (mean, half_width, est) = confidence_interval(samples, delta, kind)?;
    let n = samples.len();
    let decision = if mean.abs() <= half_width {
        Decision::Stationary
    } else {
        Decision::NotStationary
    };
    Ok(TestVerdict {
        mean,
        half_width,
        sigma_sq: est.sigma_sq,
        dof: est.dof,
        statistic: ratio(mean, (est.sigma_sq / n as f64).sqrt()),
        decision,
        n_used: n,
    })
}

/// Equivalence-interval variant: `Stationary` iff the confidence interval of
/// the mean of `deltas` lies inside `[−ζ ν̄, ζ ν̄]`, where `ν̄` is the mean of
/// `magnitudes`.
pub fn sasa_equivalence_test(
    deltas: &[f64],
    magnitudes: &[f64],
    delta: f64,
    zeta: f64,
    kind: VarianceEstimatorKind,
) -> Result<TestVerdict> {
    if !(zeta > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "equivalence width zeta = {zeta} must be positive"
        )));
    }
    if deltas.len() != magnitudes.len() {
        return Err(Error::DimensionMismatch {
            expected: deltas.len(),
            got: magnitudes.len(),
        });
    }
    let (mean_delta, half_width, est) = confidence_interval(deltas, delta, kind)?;
    let bound = zeta * mean(magnitudes);
    let inside = -bound <= mean_delta - half_width && mean_delta + half_width <= bound;
    let n = deltas.len();
    Ok(TestVerdict {
        mean: mean_delta,
        half_width,
        sigma_sq: est.sigma_sq,
        dof: est.dof,
        statistic: ratio(mean_delta, (est.sigma_sq / n as f64).sqrt()),
        decision: if inside {
            Decision::Stationary
        } else {
            Decision::NotStationary
        },
        n_used: n,
    })
}

/// One-sided regression t-test of `H0: slope ≥ 0` against `H1: slope < 0`
/// on the points `(i, losses[i])`.
///
/// The slope's squared standard error is `RSS / ((N − 2) Σ (i − ī)²)` and the
/// statistic is compared against the `δ` quantile of `t(N − 2)`. A window
/// with zero residuals is decided by the sign of the slope.
pub fn slope_test(losses: &[f64], delta: f64) -> Result<TestVerdict> {
    check_delta(delta)?;
    let n = losses.len();
    if n < 3 {
        return Err(Error::NotEnoughSamples { needed: 3, got: n });
    }
    let nf = n as f64;
    let i_bar = (nf - 1.0) / 2.0;
    let y_bar = mean(losses);
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (i, y) in losses.iter().enumerate() {
        let dx = i as f64 - i_bar;
        sxx += dx * dx;
        sxy += dx * (y - y_bar);
    }
    let slope = sxy / sxx;
    let intercept = y_bar - slope * i_bar;
    let rss: f64 = losses
        .iter()
        .enumerate()
        .map(|(i, y)| (y - intercept - slope * i as f64).powi(2))
        .sum();
    let dof = n - 2;
    let se_sq = rss / (dof as f64 * sxx);
    let se = se_sq.sqrt();
    let threshold = t_quantile(delta, dof as f64)?;
    let statistic = ratio(slope, se);
    let decreasing = if se > 0.0 && statistic.is_finite() {
        statistic < threshold
    } else {
        slope < 0.0
    };
    Ok(TestVerdict {
        mean: slope,
        half_width: threshold.abs() * se,
        sigma_sq: se_sq,
        dof,
        statistic,
        decision: if decreasing {
            Decision::Decreasing
        } else {
            Decision::NotDecreasing
        },
        n_used: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn all_zero_window_is_stationary() {
        let v = stationarity_test(&[0.0; 50], 0.05, VarianceEstimatorKind::Olbm).unwrap();
        assert_eq!(v.half_width, 0.0);
        assert_eq!(v.decision, Decision::Stationary);
        assert!(v.contains_zero());
    }

    #[test]
    fn constant_nonzero_window_is_not_stationary() {
        for kind in VarianceEstimatorKind::ALL {
            let v = stationarity_test(&[5.0; 50], 0.05, kind).unwrap();
            assert_eq!((v.lower(), v.upper()), (5.0, 5.0));
            assert_eq!(v.decision, Decision::NotStationary);
        }
    }

    #[test]
    fn verdict_fields_are_consistent() {
        let z: Vec<f64> = (0..100).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let v = stationarity_test(&z, 0.1, VarianceEstimatorKind::Bm).unwrap();
        assert!(v.half_width >= 0.0 && v.n_used == 100 && v.dof == 9);
        assert_eq!(v.decision == Decision::Stationary, v.mean.abs() <= v.half_width);
    }

    #[test]
    fn stationarity_needs_samples() {
        assert!(matches!(
            stationarity_test(&[1.0, 2.0], 0.05, VarianceEstimatorKind::Bm),
            Err(Error::NotEnoughSamples { .. })
        ));
        assert!(stationarity_test(&[1.0; 10], 1.5, VarianceEstimatorKind::Bm).is_err());
    }

    #[test]
    fn equivalence_zero_deltas_are_stationary() {
        let v = sasa_equivalence_test(&[0.0; 40], &[1.0; 40], 0.05, 0.1, VarianceEstimatorKind::Olbm)
            .unwrap();
        assert_eq!(v.decision, Decision::Stationary);
    }

    #[test]
    fn equivalence_with_vanishing_width_never_accepts_noise() {
        let d: Vec<f64> = (0..64).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        for zeta in [1e-3, 1e-9, 1e-300] {
            let v = sasa_equivalence_test(&d, &[1.0; 64], 0.05, zeta, VarianceEstimatorKind::Iid)
                .unwrap();
            assert_eq!(v.decision, Decision::NotStationary);
        }
    }

    #[test]
    fn equivalence_and_interval_tests_can_disagree() {
        // wide interval around a small mean: covers zero but sticks out of ±ζν̄
        let d: Vec<f64> = (0..100).map(|i| 0.05 + if i % 2 == 0 { 3.0 } else { -3.0 }).collect();
        let nu = vec![1.0; 100];
        let plus = stationarity_test(&d, 0.05, VarianceEstimatorKind::Iid).unwrap();
        let equiv = sasa_equivalence_test(&d, &nu, 0.05, 0.1, VarianceEstimatorKind::Iid).unwrap();
        assert_eq!(plus.decision, Decision::Stationary);
        assert_eq!(equiv.decision, Decision::NotStationary);

        // narrow interval away from zero but inside a generous equivalence band
        let d: Vec<f64> = (0..100).map(|i| 0.5 + if i % 2 == 0 { 0.01 } else { -0.01 }).collect();
        let plus = stationarity_test(&d, 0.05, VarianceEstimatorKind::Iid).unwrap();
        let equiv = sasa_equivalence_test(&d, &nu, 0.05, 1.0, VarianceEstimatorKind::Iid).unwrap();
        assert_eq!(plus.decision, Decision::NotStationary);
        assert_eq!(equiv.decision, Decision::Stationary);
    }

    #[test]
    fn equivalence_rejects_bad_inputs() {
        assert!(sasa_equivalence_test(&[0.0; 8], &[1.0; 7], 0.05, 0.1, VarianceEstimatorKind::Iid).is_err());
        assert!(sasa_equivalence_test(&[0.0; 8], &[1.0; 8], 0.05, 0.0, VarianceEstimatorKind::Iid).is_err());
    }

    #[test]
    fn exact_decreasing_line() {
        let losses: Vec<f64> = (1..=10).rev().map(f64::from).collect();
        let v = slope_test(&losses, 0.05).unwrap();
        assert!((v.mean + 1.0).abs() < 1e-12);
        assert_eq!(v.decision, Decision::Decreasing);
    }

    #[test]
    fn flat_losses_are_not_decreasing() {
        for value in [0.0, 0.1, 7.3] {
            let v = slope_test(&[value; 25], 0.05).unwrap();
            assert_eq!(v.mean, 0.0);
            assert_eq!(v.decision, Decision::NotDecreasing);
        }
    }

    #[test]
    fn increasing_line_is_not_decreasing() {
        let losses: Vec<f64> = (0..10).map(f64::from).collect();
        assert_eq!(slope_test(&losses, 0.05).unwrap().decision, Decision::NotDecreasing);
    }

    #[test]
    fn slope_matches_textbook_regression() {
        let losses = [3.0, 0.5, -1.0, 1.5];
        let v = slope_test(&losses, 0.05).unwrap();
        // plain least squares written out
        let (i_bar, y_bar) = (1.5, 1.0);
        let sxx: f64 = (0..4).map(|i| (i as f64 - i_bar).powi(2)).sum();
        let sxy: f64 = (0..4).map(|i| (i as f64 - i_bar) * (losses[i] - y_bar)).sum();
        let slope = sxy / sxx;
        let c0 = y_bar - slope * i_bar;
        let rss: f64 = (0..4).map(|i| (losses[i] - c0 - slope * i as f64).powi(2)).sum();
        assert!((v.mean - slope).abs() < 1e-12);
        assert!((v.sigma_sq - rss / (2.0 * sxx)).abs() < 1e-12);
        assert_eq!(v.dof, 2);
    }

    #[test]
    fn slope_needs_three_points() {
        assert!(matches!(
            slope_test(&[1.0, 0.0], 0.05),
            Err(Error::NotEnoughSamples { needed: 3, got: 2 })
        ));
    }

    proptest! {
        #[test]
        fn decision_invariant_under_positive_scaling(
            z in proptest::collection::vec(-5.0f64..5.0, 16..200),
            c in 1e-3f64..1e3,
        ) {
            let scaled: Vec<f64> = z.iter().map(|v| v * c).collect();
            for kind in VarianceEstimatorKind::ALL {
                let a = stationarity_test(&z, 0.05, kind).unwrap();
                let b = stationarity_test(&scaled, 0.05, kind).unwrap();
                // skip knife-edge windows where rounding could flip the comparison
                if (a.mean.abs() - a.half_width).abs() > 1e-9 * a.half_width.max(1e-300) {
                    prop_assert_eq!(a.decision, b.decision);
                }
            }
        }

        #[test]
        fn slope_invariant_under_index_shift(
            z in proptest::collection::vec(-5.0f64..5.0, 3..100),
            offset in 0u64..1_000_000,
        ) {
            // regress on explicit indices offset..offset+N
            let n = z.len();
            let xs: Vec<f64> = (0..n).map(|i| (offset + i as u64) as f64).collect();
            let xb = xs.iter().sum::<f64>() / n as f64;
            let yb = z.iter().sum::<f64>() / n as f64;
            let sxx: f64 = xs.iter().map(|x| (x - xb).powi(2)).sum();
            let sxy: f64 = xs.iter().zip(&z).map(|(x, y)| (x - xb) * (y - yb)).sum();
            let shifted_slope = sxy / sxx;
            let v = slope_test(&z, 0.05).unwrap();
            prop_assert!((v.mean - shifted_slope).abs() <= 1e-9 * (1.0 + shifted_slope.abs()));
        }
    }
}

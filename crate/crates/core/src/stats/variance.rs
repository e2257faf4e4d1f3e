use serde::{Deserialize, Serialize};

use super::mean;
use crate::error::{Error, Result};

/// How to estimate the asymptotic variance `σ²` of a chain average, where
/// `Var(mean of N samples) ≈ σ² / N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum VarianceEstimatorKind {
    /// Unbiased sample variance; only valid for independent samples.
    Iid,
    /// Batch means with `⌈√N⌉` disjoint batches.
    Bm,
    /// Overlapping batch means with batch length `⌈√N⌉`.
    #[default]
    Olbm,
}

impl VarianceEstimatorKind {
    pub const ALL: [VarianceEstimatorKind; 3] = [Self::Iid, Self::Bm, Self::Olbm];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Iid => "iid",
            Self::Bm => "bm",
            Self::Olbm => "olbm",
        }
    }

    fn min_samples(&self) -> usize {
        match self {
            Self::Iid => 2,
            Self::Bm | Self::Olbm => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceEstimate {
    pub sigma_sq: f64,
    /// Degrees of freedom of the estimator, used for the t quantile.
    pub dof: usize,
}

fn batch_len(n: usize) -> usize {
    (n as f64).sqrt().ceil() as usize
}

/// Estimates the asymptotic variance of the mean of `samples`.
///
/// * BM: `p = ⌈√N⌉` batches of `q = ⌊N/p⌋` consecutive samples; the oldest
///   `N − pq` samples are dropped. `σ̂² = q/(p−1) Σ_j (z̄_j − z̄)²`, `p − 1` dof.
/// * OLBM: all `N − p + 1` windows of length `p = ⌈√N⌉`,
///   `σ̂² = N p / ((N−p)(N−p+1)) Σ_j (z̄ − z̄_j)²`, `N − p` dof.
/// * IID: `Σ (z − z̄)² / (N − 1)`, `N − 1` dof.
pub fn variance_estimate(samples: &[f64], kind: VarianceEstimatorKind) -> Result<VarianceEstimate> {
    let n = samples.len();
    let needed = kind.min_samples();
    if n < needed {
        return Err(Error::NotEnoughSamples { needed, got: n });
    }
    match kind {
        VarianceEstimatorKind::Iid => {
            let m = mean(samples);
            let ss: f64 = samples.iter().map(|z| (z - m).powi(2)).sum();
            Ok(VarianceEstimate {
                sigma_sq: ss / (n - 1) as f64,
                dof: n - 1,
            })
        }
        VarianceEstimatorKind::Bm => {
            let p = batch_len(n);
            let q = n / p;
            let kept = &samples[n - p * q..];
            let m = mean(kept);
            let ss: f64 = kept
                .chunks_exact(q)
                .map(|batch| (batch.iter().map(|z| z - m).sum::<f64>() / q as f64).powi(2))
                .sum();
            Ok(VarianceEstimate {
                sigma_sq: q as f64 / (p - 1) as f64 * ss,
                dof: p - 1,
            })
        }
        VarianceEstimatorKind::Olbm => {
            let p = batch_len(n);
            let m = mean(samples);
            // rolling sum over centered samples
            let mut window: f64 = samples[..p].iter().map(|z| z - m).sum();
            let mut ss = (window / p as f64).powi(2);
            for j in 1..=(n - p) {
                window += (samples[j + p - 1] - m) - (samples[j - 1] - m);
                ss += (window / p as f64).powi(2);
            }
            let (nf, pf) = (n as f64, p as f64);
            Ok(VarianceEstimate {
                sigma_sq: nf * pf / ((nf - pf) * (nf - pf + 1.0)) * ss,
                dof: n - p,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn constant_sequences_have_zero_variance() {
        for n in [4, 5, 17, 100] {
            let z = vec![3.25; n];
            for kind in VarianceEstimatorKind::ALL {
                let est = variance_estimate(&z, kind).unwrap();
                assert_eq!(est.sigma_sq, 0.0, "{kind:?} n={n}");
            }
        }
    }

    #[test]
    fn hand_computed_small_windows() {
        let z = [1.0, 2.0, 3.0, 4.0];
        // batch means 1.5, 3.5 around 2.5, scaled by q/(p-1) = 2
        let bm = variance_estimate(&z, VarianceEstimatorKind::Bm).unwrap();
        assert_relative_eq!(bm.sigma_sq, 4.0, epsilon = 1e-14);
        assert_eq!(bm.dof, 1);
        // windows 1.5, 2.5, 3.5 around 2.5, scaled by 4·2/(2·3)
        let olbm = variance_estimate(&z, VarianceEstimatorKind::Olbm).unwrap();
        assert_relative_eq!(olbm.sigma_sq, 8.0 / 3.0, epsilon = 1e-14);
        assert_eq!(olbm.dof, 2);
        let iid = variance_estimate(&z, VarianceEstimatorKind::Iid).unwrap();
        assert_relative_eq!(iid.sigma_sq, 5.0 / 3.0, epsilon = 1e-14);
        assert_eq!(iid.dof, 3);
    }

    #[test]
    fn bm_drops_oldest_remainder() {
        // N = 5: p = 3, q = 1, the two oldest samples are ignored
        let a = variance_estimate(&[100.0, -50.0, 1.0, 2.0, 3.0], VarianceEstimatorKind::Bm).unwrap();
        let b = variance_estimate(&[0.0, 0.0, 1.0, 2.0, 3.0], VarianceEstimatorKind::Bm).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.dof, 2);
        assert_relative_eq!(a.sigma_sq, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn too_few_samples() {
        assert!(matches!(
            variance_estimate(&[1.0, 2.0, 3.0], VarianceEstimatorKind::Olbm),
            Err(Error::NotEnoughSamples { needed: 4, got: 3 })
        ));
        assert!(variance_estimate(&[1.0], VarianceEstimatorKind::Iid).is_err());
        assert!(variance_estimate(&[1.0, 2.0], VarianceEstimatorKind::Iid).is_ok());
    }

    proptest! {
        #[test]
        fn shift_invariant(
            z in proptest::collection::vec(-10.0f64..10.0, 4..300),
            shift in -1e3f64..1e3,
        ) {
            let shifted: Vec<f64> = z.iter().map(|v| v + shift).collect();
            for kind in VarianceEstimatorKind::ALL {
                let a = variance_estimate(&z, kind).unwrap();
                let b = variance_estimate(&shifted, kind).unwrap();
                prop_assert_eq!(a.dof, b.dof);
                prop_assert!((a.sigma_sq - b.sigma_sq).abs() <= 1e-9 * (1.0 + a.sigma_sq),
                    "{:?}: {} vs {}", kind, a.sigma_sq, b.sigma_sq);
            }
        }

        #[test]
        fn scales_quadratically(
            z in proptest::collection::vec(-10.0f64..10.0, 4..200),
            c in 0.01f64..100.0,
        ) {
            let scaled: Vec<f64> = z.iter().map(|v| v * c).collect();
            for kind in VarianceEstimatorKind::ALL {
                let a = variance_estimate(&z, kind).unwrap().sigma_sq;
                let b = variance_estimate(&scaled, kind).unwrap().sigma_sq;
                prop_assert!((b - c * c * a).abs() <= 1e-9 * (1.0 + b));
            }
        }
    }
}

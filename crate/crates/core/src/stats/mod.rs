//! Statistical machinery shared by the step-size controllers.

mod hypothesis;
mod statistic;
mod tdist;
mod variance;
mod window;

pub use hypothesis::{sasa_equivalence_test, slope_test, stationarity_test, Decision, TestVerdict};
pub use statistic::{delta_statistic, yaida_delta};
pub use tdist::{t_cdf, t_quantile};
pub use variance::{variance_estimate, VarianceEstimate, VarianceEstimatorKind};
pub use window::{SampleWindow, DEFAULT_WINDOW_CAP};

pub(crate) fn mean(samples: &[f64]) -> f64 {
    samples.iter().sum::<f64>() / samples.len() as f64
}

//! Constant-step stochastic gradient methods (the QHM family) together with
//! statistical step-size control.
//!
//! * [`optim`]: QHM / heavy-ball / Nesterov directions and the constant-step update.
//! * [`stats`]: the `Δ` statistic, batch-means variance estimators, Student-t
//!   quantiles and the stationarity, slope and equivalence tests.
//! * [`sasa_plus`]: drop the step size when the iterates look stationary.
//! * [`ssls`]: smoothed stochastic Armijo line search for warming the step size up.
//! * [`salsa`]: line-search warmup followed by the statistical drop schedule.
//! * [`problems`]: stochastic oracles (noisy quadratics, logistic regression).
//! * [`checks`]: executable verifications of the stationarity identities.
//! * [`harness`]: configuration, seeded runs, sweeps and CSV/JSON artifacts.

pub mod baselines;
pub mod checks;
pub mod error;
pub mod harness;
pub mod optim;
pub mod problems;
pub mod run;
pub mod salsa;
pub mod sasa_plus;
pub mod ssls;
pub mod stats;

pub use error::{Error, Result};
pub use optim::{DirectionRule, IterateState};
pub use problems::{LogisticRegression, Minibatch, NoisyQuadratic, StochasticProblem};
pub use run::{replay_alpha_trace, run_schedule, IterationRecord, Phase, Schedule, StepRecord, Trajectory};
pub use stats::{Decision, SampleWindow, TestVerdict, VarianceEstimatorKind};

/// Deterministic, portable generator used for every seeded run.
pub type SeededRng = rand_chacha::ChaCha8Rng;

/// Builds the run generator from a seed.
pub fn seeded_rng(seed: u64) -> SeededRng {
    use rand::SeedableRng;
    SeededRng::seed_from_u64(seed)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm_sq(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum()
}

//! Stochastic objective oracles.
//!
//! A problem draws a [`Minibatch`] from a seeded generator; `loss` and
//! `gradient` are then deterministic functions of that minibatch and the
//! point, so line-search probes and look-ahead gradients can reuse a sample.

mod dataset;
mod logistic;
mod quadratic;

use rand::RngCore;

pub use dataset::{load_dataset, write_dataset};
pub use logistic::LogisticRegression;
pub use quadratic::NoisyQuadratic;

use crate::error::Result;

/// A sampled `ξ`.
#[derive(Debug, Clone, PartialEq)]
pub enum Minibatch {
    /// Example indices into a finite dataset, sorted ascending.
    Indices(Vec<usize>),
    /// Standard-normal gradient noise for synthetic objectives.
    Noise(Vec<f64>),
}

/// `F(x) = E_ξ[f_ξ(x)]` with per-sample loss and gradient.
pub trait StochasticProblem: Send + Sync {
    fn dim(&self) -> usize;

    /// Number of examples, `None` for synthetic objectives without a dataset.
    fn dataset_size(&self) -> Option<usize>;

    fn batch_size(&self) -> usize;

    /// `⌈n/b⌉` for finite datasets, a configured value otherwise.
    fn steps_per_epoch(&self) -> usize;

    fn sample(&self, rng: &mut dyn RngCore) -> Minibatch;

    fn loss(&self, xi: &Minibatch, x: &[f64]) -> Result<f64>;

    fn gradient(&self, xi: &Minibatch, x: &[f64]) -> Result<Vec<f64>>;

    fn loss_and_gradient(&self, xi: &Minibatch, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        Ok((self.loss(xi, x)?, self.gradient(xi, x)?))
    }

    /// The full objective `F(x)`.
    fn objective(&self, x: &[f64]) -> Result<f64>;

    /// `min F` when known in closed form.
    fn optimal_value(&self) -> Option<f64> {
        None
    }
}

#[cfg(test)]
pub(crate) mod test_util {
    use super::*;

    /// Worst relative error between central differences of `loss` and `gradient`.
    pub fn finite_difference_error(problem: &dyn StochasticProblem, xi: &Minibatch, x: &[f64]) -> f64 {
        let g = problem.gradient(xi, x).unwrap();
        let mut worst: f64 = 0.0;
        for j in 0..x.len() {
            let h = 1e-5 * (1.0 + x[j].abs());
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[j] += h;
            xm[j] -= h;
            let fd = (problem.loss(xi, &xp).unwrap() - problem.loss(xi, &xm).unwrap()) / (2.0 * h);
            let scale = g.iter().map(|v| v.abs()).fold(1e-3, f64::max);
            worst = worst.max((fd - g[j]).abs() / scale);
        }
        worst
    }
}

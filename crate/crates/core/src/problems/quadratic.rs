use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use super::{Minibatch, StochasticProblem};
use crate::error::{check_dim, Error, Result};

/// `F(x) = ½ Σ λ_i (x_i − x*_i)²` observed through gradients with additive
/// isotropic Gaussian noise of scale `σ`.
///
/// The per-sample loss is `F(x) + σ ⟨ξ, x − x*⟩`, whose gradient is
/// `∇F(x) + σ ξ` and whose expectation over `ξ ~ N(0, I)` is `F(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyQuadratic {
    eigenvalues: Vec<f64>,
    optimum: Vec<f64>,
    sigma: f64,
    steps_per_epoch: usize,
}

/// Stationary mean and variance of one coordinate of constant-step SGD.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaryMoments {
    pub mean: f64,
    pub variance: f64,
}

impl NoisyQuadratic {
    pub fn new(eigenvalues: Vec<f64>, optimum: Vec<f64>, sigma: f64) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::InvalidConfig("quadratic needs at least one eigenvalue".into()));
        }
        check_dim(eigenvalues.len(), optimum.len())?;
        if let Some(l) = eigenvalues.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
            return Err(Error::InvalidConfig(format!("eigenvalue {l} must be positive")));
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidConfig(format!("noise scale {sigma} must be nonnegative")));
        }
        Ok(Self {
            eigenvalues,
            optimum,
            sigma,
            steps_per_epoch: 1000,
        })
    }

    /// `p` eigenvalues spaced evenly on `[lambda_min, lambda_max]`, optimum at the origin.
    pub fn evenly_spaced(p: usize, lambda_min: f64, lambda_max: f64, sigma: f64) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidConfig("dimension must be positive".into()));
        }
        let eigenvalues = if p == 1 {
            vec![lambda_min]
        } else {
            (0..p)
                .map(|i| lambda_min + (lambda_max - lambda_min) * i as f64 / (p - 1) as f64)
                .collect()
        };
        Self::new(eigenvalues, vec![0.0; p], sigma)
    }

    /// Sets the nominal epoch length used for defaults that depend on `n/b`.
    pub fn with_steps_per_epoch(mut self, steps: usize) -> Self {
        self.steps_per_epoch = steps.max(1);
        self
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn optimum(&self) -> &[f64] {
        &self.optimum
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Per-coordinate stationary law of `x ← x − α (λ (x − x*) + σ ξ)`:
    /// mean `x*`, variance `α σ² / (λ (2 − α λ))`.
    pub fn stationary_moments(&self, alpha: f64) -> Result<Vec<StationaryMoments>> {
        self.eigenvalues
            .iter()
            .zip(&self.optimum)
            .map(|(&lambda, &mean)| {
                let product = alpha * lambda;
                if !(product < 2.0) {
                    return Err(Error::UnstableStep { product });
                }
                Ok(StationaryMoments {
                    mean,
                    variance: alpha * self.sigma * self.sigma / (lambda * (2.0 - product)),
                })
            })
            .collect()
    }
}

impl StochasticProblem for NoisyQuadratic {
    fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    fn dataset_size(&self) -> Option<usize> {
        None
    }

    fn batch_size(&self) -> usize {
        1
    }

    fn steps_per_epoch(&self) -> usize {
        self.steps_per_epoch
    }

    fn sample(&self, rng: &mut dyn RngCore) -> Minibatch {
        Minibatch::Noise(
            (0..self.dim())
                .map(|_| StandardNormal.sample(&mut *rng))
                .collect(),
        )
    }

    fn loss(&self, xi: &Minibatch, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        let noise = noise_of(xi, self.dim())?;
        let mut f = 0.0;
        for j in 0..x.len() {
            let e = x[j] - self.optimum[j];
            f += 0.5 * self.eigenvalues[j] * e * e + self.sigma * noise[j] * e;
        }
        Ok(f)
    }

    fn gradient(&self, xi: &Minibatch, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        let noise = noise_of(xi, self.dim())?;
        Ok((0..x.len())
            .map(|j| self.eigenvalues[j] * (x[j] - self.optimum[j]) + self.sigma * noise[j])
            .collect())
    }

    fn objective(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        Ok(x.iter()
            .zip(&self.optimum)
            .zip(&self.eigenvalues)
            .map(|((xi, oi), l)| 0.5 * l * (xi - oi).powi(2))
            .sum())
    }

    fn optimal_value(&self) -> Option<f64> {
        Some(0.0)
    }
}

fn noise_of(xi: &Minibatch, p: usize) -> Result<&[f64]> {
    match xi {
        Minibatch::Noise(v) => {
            check_dim(p, v.len())?;
            Ok(v)
        }
        Minibatch::Indices(_) => Err(Error::InvalidArgument(
            "noisy quadratic expects a noise sample, got dataset indices".into(),
        )),
    }
}

use rand::{seq::index, Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};

use super::{Minibatch, StochasticProblem};
use crate::error::{check_dim, Error, Result};
use crate::seeded_rng;

/// Binary logistic regression with optional L2 penalty.
///
/// Per-example loss `log(1 + exp(−s ⟨w, a⟩)) + (l2/2)‖w‖²` with `s = 2y − 1`;
/// minibatch losses and gradients are means over the batch.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticRegression {
    /// Row-major `n × p`.
    features: Vec<f64>,
    labels: Vec<f64>,
    n: usize,
    p: usize,
    l2: f64,
    batch_size: usize,
}

/// `log(1 + e^u)` without overflow.
fn softplus(u: f64) -> f64 {
    if u > 0.0 {
        u + (-u).exp().ln_1p()
    } else {
        u.exp().ln_1p()
    }
}

fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

impl LogisticRegression {
    pub fn new(features: Vec<f64>, labels: Vec<f64>, p: usize, l2: f64, batch_size: usize) -> Result<Self> {
        let n = labels.len();
        if n == 0 || p == 0 {
            return Err(Error::InvalidConfig("dataset is empty".into()));
        }
        check_dim(n * p, features.len())?;
        if let Some(y) = labels.iter().find(|y| **y != 0.0 && **y != 1.0) {
            return Err(Error::InvalidConfig(format!("label {y} is not 0 or 1")));
        }
        if !(l2 >= 0.0 && l2.is_finite()) {
            return Err(Error::InvalidConfig(format!("l2 = {l2} must be nonnegative")));
        }
        if batch_size == 0 || batch_size > n {
            return Err(Error::InvalidConfig(format!(
                "batch size {batch_size} must lie in 1..={n}"
            )));
        }
        Ok(Self {
            features,
            labels,
            n,
            p,
            l2,
            batch_size,
        })
    }

    /// Gaussian features with labels drawn from a logistic model whose
    /// weights have norm about 2.
    pub fn synthetic(n: usize, p: usize, batch_size: usize, seed: u64) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidConfig("dimension must be positive".into()));
        }
        let mut rng = seeded_rng(seed);
        let scale = 2.0 / (p as f64).sqrt();
        let w: Vec<f64> = (0..p)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                scale * z
            })
            .collect();
        let mut features = Vec::with_capacity(n * p);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let row: Vec<f64> = (0..p).map(|_| StandardNormal.sample(&mut rng)).collect();
            let z: f64 = row.iter().zip(&w).map(|(a, b)| a * b).sum();
            let y = if rng.random::<f64>() < sigmoid(z) { 1.0 } else { 0.0 };
            features.extend(row);
            labels.push(y);
        }
        Self::new(features, labels, p, 0.0, batch_size)
    }

    pub fn with_l2(mut self, l2: f64) -> Result<Self> {
        if !(l2 >= 0.0 && l2.is_finite()) {
            return Err(Error::InvalidConfig(format!("l2 = {l2} must be nonnegative")));
        }
        self.l2 = l2;
        Ok(self)
    }

    pub fn with_batch_size(self, batch_size: usize) -> Result<Self> {
        Self::new(self.features, self.labels, self.p, self.l2, batch_size)
    }

    pub fn n_examples(&self) -> usize {
        self.n
    }

    pub fn n_features(&self) -> usize {
        self.p
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.p..(i + 1) * self.p]
    }

    fn margin(&self, i: usize, w: &[f64]) -> f64 {
        let s = 2.0 * self.labels[i] - 1.0;
        s * self.row(i).iter().zip(w).map(|(a, b)| a * b).sum::<f64>()
    }

    fn penalty(&self, w: &[f64]) -> f64 {
        0.5 * self.l2 * w.iter().map(|v| v * v).sum::<f64>()
    }

    fn indices<'a>(&self, xi: &'a Minibatch) -> Result<&'a [usize]> {
        match xi {
            Minibatch::Indices(idx) if !idx.is_empty() => {
                if let Some(i) = idx.iter().find(|i| **i >= self.n) {
                    return Err(Error::InvalidArgument(format!("example index {i} out of range")));
                }
                Ok(idx)
            }
            Minibatch::Indices(_) => Err(Error::InvalidArgument("empty minibatch".into())),
            Minibatch::Noise(_) => Err(Error::InvalidArgument(
                "logistic regression expects dataset indices, got a noise sample".into(),
            )),
        }
    }

    fn mean_loss(&self, idx: impl ExactSizeIterator<Item = usize>, w: &[f64]) -> f64 {
        let m = idx.len() as f64;
        idx.map(|i| softplus(-self.margin(i, w))).sum::<f64>() / m + self.penalty(w)
    }
}

impl StochasticProblem for LogisticRegression {
    fn dim(&self) -> usize {
        self.p
    }

    fn dataset_size(&self) -> Option<usize> {
        Some(self.n)
    }

    fn batch_size(&self) -> usize {
        self.batch_size
    }

    fn steps_per_epoch(&self) -> usize {
        self.n.div_ceil(self.batch_size)
    }

    /// Uniform without replacement inside the batch, independent across calls.
    fn sample(&self, rng: &mut dyn RngCore) -> Minibatch {
        if self.batch_size == self.n {
            return Minibatch::Indices((0..self.n).collect());
        }
        let mut idx = index::sample(rng, self.n, self.batch_size).into_vec();
        idx.sort_unstable();
        Minibatch::Indices(idx)
    }

    fn loss(&self, xi: &Minibatch, x: &[f64]) -> Result<f64> {
        check_dim(self.p, x.len())?;
        let idx = self.indices(xi)?;
        Ok(self.mean_loss(idx.iter().copied(), x))
    }

    fn gradient(&self, xi: &Minibatch, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.loss_and_gradient(xi, x)?.1)
    }

    fn loss_and_gradient(&self, xi: &Minibatch, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        check_dim(self.p, x.len())?;
        let idx = self.indices(xi)?;
        let m = idx.len() as f64;
        let mut g = vec![0.0; self.p];
        let mut loss = 0.0;
        for &i in idx {
            let margin = self.margin(i, x);
            loss += softplus(-margin);
            // d/dw log(1 + e^{−s⟨w,a⟩}) = −s σ(−margin) a
            let coef = -(2.0 * self.labels[i] - 1.0) * sigmoid(-margin) / m;
            for (gj, aj) in g.iter_mut().zip(self.row(i)) {
                *gj += coef * aj;
            }
        }
        for (gj, wj) in g.iter_mut().zip(x) {
            *gj += self.l2 * wj;
        }
        Ok((loss / m + self.penalty(x), g))
    }

    fn objective(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.p, x.len())?;
        Ok(self.mean_loss(0..self.n, x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::test_util::finite_difference_error;

    fn toy() -> LogisticRegression {
        LogisticRegression::synthetic(200, 5, 8, 42).unwrap()
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let prob = toy().with_l2(0.1).unwrap();
        let mut rng = seeded_rng(9);
        for _ in 0..20 {
            let xi = prob.sample(&mut rng);
            let x: Vec<f64> = (0..5).map(|_| rng.random_range(-3.0..3.0)).collect();
            assert!(finite_difference_error(&prob, &xi, &x) < 1e-5);
        }
    }

    #[test]
    fn full_batch_is_deterministic() {
        let prob = toy().with_batch_size(200).unwrap();
        let mut rng = seeded_rng(1);
        let a = prob.sample(&mut rng);
        let b = prob.sample(&mut rng);
        assert_eq!(a, b);
        assert_eq!(a, Minibatch::Indices((0..200).collect()));
        let w = vec![0.3; 5];
        assert_eq!(prob.loss(&a, &w).unwrap(), prob.objective(&w).unwrap());
    }

    #[test]
    fn seeded_batches_repeat() {
        let prob = toy();
        let draw = |seed| {
            let mut rng = seeded_rng(seed);
            (0..50).map(|_| prob.sample(&mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(5), draw(5));
        assert_ne!(draw(5), draw(6));
        for batch in draw(5) {
            let Minibatch::Indices(idx) = batch else { panic!() };
            assert_eq!(idx.len(), 8);
            assert!(idx.windows(2).all(|w| w[0] < w[1]), "distinct and sorted");
        }
    }

    #[test]
    fn batch_larger_than_dataset_is_rejected() {
        assert!(toy().with_batch_size(201).is_err());
        assert!(toy().with_batch_size(0).is_err());
    }

    #[test]
    fn rejects_nonbinary_labels() {
        assert!(LogisticRegression::new(vec![1.0, 2.0], vec![0.0, 2.0], 1, 0.0, 1).is_err());
    }

    #[test]
    fn softplus_is_stable() {
        assert_eq!(softplus(-1000.0), 0.0);
        assert_eq!(softplus(1000.0), 1000.0);
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn loss_is_midpoint_convex() {
        let prob = toy().with_l2(0.01).unwrap();
        let mut rng = seeded_rng(17);
        for _ in 0..100 {
            let a: Vec<f64> = (0..5).map(|_| rng.random_range(-4.0..4.0)).collect();
            let b: Vec<f64> = (0..5).map(|_| rng.random_range(-4.0..4.0)).collect();
            let mid: Vec<f64> = a.iter().zip(&b).map(|(u, v)| 0.5 * (u + v)).collect();
            let fa = prob.objective(&a).unwrap();
            let fb = prob.objective(&b).unwrap();
            let fm = prob.objective(&mid).unwrap();
            assert!(fm <= 0.5 * (fa + fb) + 1e-12);
        }
    }
}

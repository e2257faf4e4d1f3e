//! Smoothed stochastic Armijo line search.
//!
//! Each step probes a trial step `η` on the current minibatch, starting from
//! `ρ_inc · α_{k−1}` and shrinking by `ρ_dec` on failure, then blends it into
//! the running step size: `α_k = (1 − γ) α_{k−1} + γ η_k`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problems::{Minibatch, StochasticProblem};
use crate::run::{Phase, Schedule, StepContext, StepRecord};
use crate::stats::delta_statistic;
use crate::{dot, norm_sq};

/// Which vector the sufficient-decrease probe moves along.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeDirection {
    /// The raw minibatch gradient `g^k`.
    #[default]
    Gradient,
    /// The momentum direction `d^k`, with decrease bound `c η ⟨g, d⟩`.
    Direction,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SslsConfig {
    pub c: f64,
    pub rho_inc: f64,
    pub rho_dec: f64,
    /// Maximum number of probes per step.
    pub m: u32,
    pub gamma: f64,
    #[serde(default)]
    pub probe: ProbeDirection,
}

impl SslsConfig {
    /// Defaults with `γ = √(b/n)`.
    pub fn defaults(dataset_size: usize, batch_size: usize) -> Self {
        Self::with_gamma((batch_size as f64 / dataset_size.max(1) as f64).sqrt())
    }

    /// Defaults with `γ = 1/√(steps per epoch)`, for objectives without a dataset.
    pub fn defaults_for_epoch(steps_per_epoch: usize) -> Self {
        Self::with_gamma(1.0 / (steps_per_epoch.max(1) as f64).sqrt())
    }

    /// Defaults appropriate for `problem`.
    pub fn defaults_for(problem: &dyn StochasticProblem) -> Self {
        match problem.dataset_size() {
            Some(n) => Self::defaults(n, problem.batch_size()),
            None => Self::defaults_for_epoch(problem.steps_per_epoch()),
        }
    }

    fn with_gamma(gamma: f64) -> Self {
        Self {
            c: 0.05,
            rho_inc: 2.0,
            rho_dec: 0.5,
            m: 2,
            gamma: gamma.min(1.0),
            probe: ProbeDirection::Gradient,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.c > 0.0 && self.c < 0.5) {
            return bad(format!("ssls.c = {} must lie in (0, 0.5)", self.c));
        }
        if !(self.rho_inc >= 1.0 && self.rho_inc.is_finite()) {
            return bad(format!("ssls.rho_inc = {} must be at least 1", self.rho_inc));
        }
        if !(self.rho_dec > 0.0 && self.rho_dec < 1.0) {
            return bad(format!("ssls.rho_dec = {} must lie in (0, 1)", self.rho_dec));
        }
        if self.m == 0 {
            return bad("ssls.m must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad(format!("ssls.gamma = {} must lie in [0, 1]", self.gamma));
        }
        Ok(())
    }

    /// Smallest and largest possible `α_k / α_{k−1}`.
    pub fn step_ratio_bounds(&self) -> (f64, f64) {
        let floor = self.rho_inc * self.rho_dec.powi(self.m as i32);
        (
            1.0 - self.gamma + self.gamma * floor,
            1.0 - self.gamma + self.gamma * self.rho_inc,
        )
    }

    /// Largest growth of `α` over `steps` consecutive iterations.
    pub fn max_growth(&self, steps: usize) -> f64 {
        self.step_ratio_bounds().1.powi(steps as i32)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeOutcome {
    pub eta: f64,
    /// Whether the returned `η` satisfied the sufficient-decrease condition.
    pub accepted: bool,
    /// Loss evaluations at trial points (never more than `m`).
    pub evaluations: u32,
}

/// Backtracking along `dir` from `x`, where `slope = ⟨g, dir⟩` and `f_x` is
/// the minibatch loss at `x`.
fn probe_along(
    problem: &dyn StochasticProblem,
    xi: &Minibatch,
    x: &[f64],
    f_x: f64,
    dir: &[f64],
    slope: f64,
    alpha_prev: f64,
    config: &SslsConfig,
) -> Result<ProbeOutcome> {
    let mut eta = config.rho_inc * alpha_prev;
    let mut trial = vec![0.0; x.len()];
    for i in 0..config.m {
        for ((t, xj), dj) in trial.iter_mut().zip(x).zip(dir) {
            *t = xj - eta * dj;
        }
        let f_trial = problem.loss(xi, &trial)?;
        // NaN compares false, so a non-finite loss counts as a failed try
        if f_trial.is_finite() && f_trial < f_x - config.c * eta * slope {
            return Ok(ProbeOutcome {
                eta,
                accepted: true,
                evaluations: i + 1,
            });
        }
        eta *= config.rho_dec;
    }
    Ok(ProbeOutcome {
        eta,
        accepted: false,
        evaluations: config.m,
    })
}

/// Armijo probe along the sampled gradient `g` at `x` on minibatch `xi`.
pub fn armijo_probe(
    problem: &dyn StochasticProblem,
    xi: &Minibatch,
    x: &[f64],
    g: &[f64],
    alpha_prev: f64,
    config: &SslsConfig,
) -> Result<ProbeOutcome> {
    crate::error::check_dim(x.len(), g.len())?;
    let f_x = problem.loss(xi, x)?;
    probe_along(problem, xi, x, f_x, g, norm_sq(g), alpha_prev, config)
}

/// Report of one line-search step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SslsStep {
    pub loss: f64,
    pub probe: ProbeOutcome,
    /// The smoothed step size applied at this iteration.
    pub alpha: f64,
    pub delta: f64,
}

/// Line-search step-size state.
#[derive(Debug, Clone, PartialEq)]
pub struct Ssls {
    config: SslsConfig,
    alpha: f64,
}

impl Ssls {
    pub fn new(config: SslsConfig, alpha0: f64) -> Result<Self> {
        config.validate()?;
        crate::optim::check_alpha(alpha0)?;
        Ok(Self {
            config,
            alpha: alpha0,
        })
    }

    pub fn config(&self) -> &SslsConfig {
        &self.config
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Samples a minibatch, updates `α`, and moves `ctx.state` along the
    /// momentum direction with the new `α`.
    pub fn step(&mut self, ctx: StepContext<'_>) -> Result<SslsStep> {
        let xi = ctx.problem.sample(ctx.rng);
        let (loss, g) = ctx.problem.loss_and_gradient(&xi, &ctx.state.x)?;
        ctx.rule.apply(ctx.state, &g)?;
        let x = &ctx.state.x;
        let probe = match self.config.probe {
            ProbeDirection::Gradient => {
                probe_along(ctx.problem, &xi, x, loss, &g, norm_sq(&g), self.alpha, &self.config)?
            }
            ProbeDirection::Direction => {
                let d = &ctx.state.d;
                probe_along(ctx.problem, &xi, x, loss, d, dot(&g, d), self.alpha, &self.config)?
            }
        };
        let alpha = (1.0 - self.config.gamma) * self.alpha + self.config.gamma * probe.eta;
        crate::optim::check_alpha(alpha)?;
        self.alpha = alpha;
        let delta = delta_statistic(&ctx.state.x, &ctx.state.d, alpha)?;
        ctx.state.advance(alpha)?;
        Ok(SslsStep {
            loss,
            probe,
            alpha,
            delta,
        })
    }
}

impl Schedule for Ssls {
    fn alpha(&self) -> f64 {
        self.alpha
    }

    fn step(&mut self, ctx: StepContext<'_>) -> Result<StepRecord> {
        let s = Ssls::step(self, ctx)?;
        let mut rec = StepRecord::plain(s.loss, s.alpha, s.delta, Phase::Warmup);
        rec.extra_evals = s.probe.evaluations;
        Ok(rec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::DirectionRule;
    use crate::problems::NoisyQuadratic;
    use crate::run::run_schedule;
    use proptest::prelude::*;

    fn half_square() -> NoisyQuadratic {
        NoisyQuadratic::new(vec![1.0], vec![0.0], 0.0).unwrap()
    }

    fn cfg() -> SslsConfig {
        SslsConfig::defaults_for_epoch(100)
    }

    fn probe(x: f64, g: f64, alpha_prev: f64) -> ProbeOutcome {
        let q = half_square();
        armijo_probe(&q, &Minibatch::Noise(vec![0.0]), &[x], &[g], alpha_prev, &cfg()).unwrap()
    }

    #[test]
    fn zero_gradient_always_fails() {
        let p = probe(1.0, 0.0, 0.3);
        assert!(!p.accepted);
        assert_eq!(p.evaluations, 2);
        assert_eq!(p.eta, 0.3 * 2.0 * 0.25);
    }

    #[test]
    fn first_try_accepted() {
        // f(0.9) = 0.405 < 0.5 − 0.05·0.1 = 0.495
        let p = probe(1.0, 1.0, 0.05);
        assert!(p.accepted);
        assert_eq!(p.evaluations, 1);
        assert_eq!(p.eta, 0.1);
    }

    #[test]
    fn forced_exit_after_m_tries() {
        // η = 4: f(−3) = 4.5 fails; η = 2: f(−1) = 0.5 fails; the loop exits
        // after shrinking once more, at ρ_inc ρ_dec^m α_prev = 1
        let p = probe(1.0, 1.0, 2.0);
        assert!(!p.accepted);
        assert_eq!(p.evaluations, 2);
        assert_eq!(p.eta, 1.0);
    }

    #[test]
    fn nonfinite_loss_is_a_failure() {
        struct Blowup;
        impl StochasticProblem for Blowup {
            fn dim(&self) -> usize {
                1
            }
            fn dataset_size(&self) -> Option<usize> {
                None
            }
            fn batch_size(&self) -> usize {
                1
            }
            fn steps_per_epoch(&self) -> usize {
                1
            }
            fn sample(&self, _: &mut dyn rand::RngCore) -> Minibatch {
                Minibatch::Noise(vec![0.0])
            }
            fn loss(&self, _: &Minibatch, x: &[f64]) -> Result<f64> {
                Ok(if x[0] < 1.0 { f64::NAN } else { x[0] })
            }
            fn gradient(&self, _: &Minibatch, _: &[f64]) -> Result<Vec<f64>> {
                Ok(vec![1.0])
            }
            fn objective(&self, x: &[f64]) -> Result<f64> {
                Ok(x[0])
            }
        }
        let p = armijo_probe(&Blowup, &Minibatch::Noise(vec![0.0]), &[1.5], &[1.0], 1.0, &cfg()).unwrap();
        assert!(!p.accepted);
        assert_eq!(p.evaluations, 2);
    }

    #[test]
    fn gamma_zero_keeps_alpha() {
        let q = NoisyQuadratic::evenly_spaced(4, 0.1, 1.0, 0.5).unwrap();
        let mut c = cfg();
        c.gamma = 0.0;
        let mut s = Ssls::new(c, 0.3).unwrap();
        let t = run_schedule(&q, &DirectionRule::shb(0.9).unwrap(), &mut s, vec![1.0; 4], 200, 5).unwrap();
        assert!(t.alphas().all(|a| a == 0.3));
    }

    #[test]
    fn gamma_one_uses_raw_eta() {
        let q = half_square();
        let mut c = cfg();
        c.gamma = 1.0;
        let mut s = Ssls::new(c, 0.05).unwrap();
        let t = run_schedule(&q, &DirectionRule::sgd(), &mut s, vec![1.0], 1, 0).unwrap();
        assert_eq!(t.records[0].alpha, 0.1);
        assert_eq!(t.final_x, vec![0.9]);
    }

    #[test]
    fn doubling_growth_over_an_epoch_is_about_e() {
        for steps in [100usize, 313, 1000] {
            let mut c = cfg();
            c.gamma = 1.0 / steps as f64;
            let growth = c.max_growth(steps);
            assert!((growth / std::f64::consts::E - 1.0).abs() < 0.02, "{steps}: {growth}");
        }
    }

    #[test]
    fn sqrt_gamma_growth_is_not_e_squared() {
        // (1 + √(b/n))^{n/b} grows like e^{√(n/b)}; e² per epoch corresponds to γ ≈ 2b/n
        let c = SslsConfig::defaults(10_000, 100);
        assert!(c.max_growth(100) > 1000.0 * std::f64::consts::E.powi(2));
        let mut c = cfg();
        c.gamma = 2.0 / 1000.0;
        assert!((c.max_growth(1000) / std::f64::consts::E.powi(2) - 1.0).abs() < 0.01);
    }

    #[test]
    fn config_validation() {
        let mut c = cfg();
        c.c = 0.5;
        assert!(c.validate().is_err());
        let mut c = cfg();
        c.m = 0;
        assert!(c.validate().is_err());
        let mut c = cfg();
        c.rho_dec = 1.0;
        assert!(c.validate().is_err());
        assert!(cfg().validate().is_ok());
    }

    proptest! {
        #[test]
        fn step_ratio_stays_in_bracket(
            seed in 0u64..1000,
            alpha0 in 1e-4f64..10.0,
            gamma in 0.0f64..=1.0,
            m in 1u32..5,
            beta in 0.0f64..0.95,
        ) {
            let q = NoisyQuadratic::evenly_spaced(3, 0.1, 2.0, 0.3).unwrap();
            let mut c = cfg();
            c.gamma = gamma;
            c.m = m;
            let (lo, hi) = c.step_ratio_bounds();
            let mut s = Ssls::new(c, alpha0).unwrap();
            let t = run_schedule(&q, &DirectionRule::shb(beta).unwrap(), &mut s, vec![1.0; 3], 50, seed).unwrap();
            let mut prev = alpha0;
            for r in &t.records {
                let ratio = r.alpha / prev;
                prop_assert!(ratio >= lo * (1.0 - 1e-12) && ratio <= hi * (1.0 + 1e-12));
                prop_assert!(r.extra_evals <= m);
                prev = r.alpha;
            }
        }
    }
}

//! Statistical step-size drops: collect `Δ_k` at constant `α`, and every
//! `k_test` iterations, once the window holds more than `n_min` samples,
//! test whether its mean is zero. If stationarity is not rejected, multiply
//! `α` by `τ` and restart the window.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problems::StochasticProblem;
use crate::run::{Phase, Schedule, ScheduleEvent, StepContext, StepRecord, TestKind, TestRecord};
use crate::stats::{
    delta_statistic, stationarity_test, variance_estimate, Decision, SampleWindow, TestVerdict,
    VarianceEstimatorKind, DEFAULT_WINDOW_CAP,
};

fn default_cap() -> usize {
    DEFAULT_WINDOW_CAP
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SasaPlusConfig {
    pub n_min: usize,
    pub k_test: u64,
    pub delta: f64,
    pub theta: f64,
    pub tau: f64,
    #[serde(default)]
    pub estimator: VarianceEstimatorKind,
    #[serde(default = "default_cap")]
    pub window_cap: usize,
}

impl SasaPlusConfig {
    /// `n_min = min(1000, n/b)`, `k_test = min(100, n/b)`, `δ = 0.05`,
    /// `θ = 1/8`, `τ = 1/10`, OLBM variance.
    pub fn defaults(steps_per_epoch: usize) -> Self {
        let spe = steps_per_epoch.max(1);
        Self {
            n_min: spe.min(1000),
            k_test: spe.min(100) as u64,
            delta: 0.05,
            theta: 0.125,
            tau: 0.1,
            estimator: VarianceEstimatorKind::Olbm,
            window_cap: DEFAULT_WINDOW_CAP,
        }
    }

    pub fn defaults_for(problem: &dyn StochasticProblem) -> Self {
        Self::defaults(problem.steps_per_epoch())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.k_test == 0 {
            return bad("sasa_plus.k_test must be positive".into());
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("sasa_plus.delta = {} must lie in (0, 1)", self.delta));
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return bad(format!("sasa_plus.theta = {} must lie in (0, 1]", self.theta));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return bad(format!("sasa_plus.tau = {} must lie in (0, 1)", self.tau));
        }
        if self.window_cap == 0 {
            return bad("sasa_plus.window_cap must be positive".into());
        }
        Ok(())
    }

    pub fn new_window(&self) -> SampleWindow {
        SampleWindow::with_cap(self.theta, self.window_cap)
    }

    /// Whether a test runs at iteration `k` for a window anchored at its own `k_o`.
    pub fn test_due(&self, window: &SampleWindow, k: u64) -> bool {
        k % self.k_test == 0 && window.target_len(k) > self.n_min
    }
}

/// Runs `test` on the window, treating a too-short window as "no test".
pub(crate) fn gated<F>(test: F) -> Result<Option<TestVerdict>>
where
    F: FnOnce() -> Result<TestVerdict>,
{
    match test() {
        Ok(v) => Ok(Some(v)),
        Err(Error::NotEnoughSamples { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// `σ̂²` under IID, BM and OLBM on the same samples.
pub(crate) fn variance_triple(samples: &[f64]) -> Option<[f64; 3]> {
    let mut out = [0.0; 3];
    for (slot, kind) in out.iter_mut().zip(VarianceEstimatorKind::ALL) {
        *slot = variance_estimate(samples, kind).ok()?.sigma_sq;
    }
    Some(out)
}

/// Result of feeding one iteration to the controller.
#[derive(Debug, Clone, PartialEq)]
pub struct SasaPlusUpdate {
    pub delta: f64,
    /// Step size in force at this iteration.
    pub alpha: f64,
    pub test: Option<TestRecord>,
    pub drop: Option<ScheduleEvent>,
}

#[derive(Debug, Clone)]
pub struct SasaPlus {
    config: SasaPlusConfig,
    alpha: f64,
    window: SampleWindow,
    diagnostics: bool,
}

impl SasaPlus {
    pub fn new(config: SasaPlusConfig, alpha0: f64) -> Result<Self> {
        Self::starting_at(config, alpha0, 0)
    }

    /// Controller whose window is anchored at `k_o`.
    pub fn starting_at(config: SasaPlusConfig, alpha: f64, k_o: u64) -> Result<Self> {
        config.validate()?;
        crate::optim::check_alpha(alpha)?;
        let mut window = config.new_window();
        window.reset(k_o);
        Ok(Self {
            config,
            alpha,
            window,
            diagnostics: true,
        })
    }

    /// Enables or disables the per-test IID/BM/OLBM comparison.
    pub fn with_diagnostics(mut self, on: bool) -> Self {
        self.diagnostics = on;
        self
    }

    pub fn config(&self) -> &SasaPlusConfig {
        &self.config
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn window(&self) -> &SampleWindow {
        &self.window
    }

    /// Records `Δ_k` for iterate `x` and direction `d` at the current `α`,
    /// tests if due, and drops `α` for subsequent iterations on a
    /// `Stationary` verdict.
    pub fn observe(&mut self, k: u64, x: &[f64], d: &[f64]) -> Result<SasaPlusUpdate> {
        let alpha = self.alpha;
        let delta = delta_statistic(x, d, alpha)?;
        self.push_delta(k, delta)
    }

    /// Same as [`observe`](Self::observe) with a precomputed `Δ_k`.
    pub fn push_delta(&mut self, k: u64, delta: f64) -> Result<SasaPlusUpdate> {
        let alpha = self.alpha;
        self.window.push(k, delta);
        let mut update = SasaPlusUpdate {
            delta,
            alpha,
            test: None,
            drop: None,
        };
        if !self.config.test_due(&self.window, k) {
            return Ok(update);
        }
        let cfg = self.config;
        let samples = self.window.samples();
        let Some(verdict) = gated(|| stationarity_test(samples, cfg.delta, cfg.estimator))? else {
            return Ok(update);
        };
        let variances = if self.diagnostics { variance_triple(samples) } else { None };
        update.test = Some(TestRecord {
            iteration: k,
            kind: TestKind::Stationarity,
            verdict,
            variances,
        });
        if verdict.decision == Decision::Stationary {
            let next = alpha * cfg.tau;
            self.window.reset(k);
            // below the normal range the step size stays put
            if next.is_normal() {
                self.alpha = next;
                update.drop = Some(ScheduleEvent {
                    iteration: k,
                    old_alpha: alpha,
                    new_alpha: next,
                    verdict: Some(verdict),
                });
            }
        }
        Ok(update)
    }
}

impl Schedule for SasaPlus {
    fn alpha(&self) -> f64 {
        self.alpha
    }

    fn step(&mut self, ctx: StepContext<'_>) -> Result<StepRecord> {
        let xi = ctx.problem.sample(ctx.rng);
        let (loss, g) = ctx.problem.loss_and_gradient(&xi, &ctx.state.x)?;
        ctx.rule.apply(ctx.state, &g)?;
        let update = self.observe(ctx.k, &ctx.state.x, &ctx.state.d)?;
        ctx.state.advance(update.alpha)?;
        let mut rec = StepRecord::plain(loss, update.alpha, update.delta, Phase::Adaptive);
        rec.tests.extend(update.test);
        rec.drop = update.drop;
        Ok(rec)
    }
}

/// Runs the controller from `x0` for `total_iters` iterations.
pub fn run_sasa_plus(
    problem: &dyn StochasticProblem,
    rule: &crate::optim::DirectionRule,
    config: SasaPlusConfig,
    alpha0: f64,
    x0: Vec<f64>,
    total_iters: u64,
    seed: u64,
) -> Result<crate::run::Trajectory> {
    let mut s = SasaPlus::new(config, alpha0)?;
    crate::run::run_schedule(problem, rule, &mut s, x0, total_iters, seed)
}

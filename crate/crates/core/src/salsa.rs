//! Line-search warmup handing over to statistical drops.
//!
//! While warming up, every iteration is an SSLS step and both `Δ_k` and the
//! minibatch loss are collected. At each test point the run switches when
//! the `Δ` window looks stationary or the loss window stops decreasing. From
//! then on the step size is controlled by [`SasaPlus`] alone, starting from
//! the smoothed warmup step size with an empty window.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::problems::StochasticProblem;
use crate::run::{Phase, Schedule, StepContext, StepRecord, SwitchEvent, TestKind, TestRecord};
use crate::sasa_plus::{gated, variance_triple, SasaPlus, SasaPlusConfig};
use crate::ssls::{Ssls, SslsConfig};
use crate::stats::{slope_test, stationarity_test, Decision, SampleWindow};

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SalsaConfig {
    pub sasa_plus: SasaPlusConfig,
    pub ssls: SslsConfig,
    /// Whether a non-decreasing loss trend can end the warmup.
    #[serde(default = "yes")]
    pub slope: bool,
}

impl SalsaConfig {
    pub fn defaults_for(problem: &dyn StochasticProblem) -> Self {
        Self {
            sasa_plus: SasaPlusConfig::defaults_for(problem),
            ssls: SslsConfig::defaults_for(problem),
            slope: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.sasa_plus.validate()?;
        self.ssls.validate()
    }
}

#[derive(Debug, Clone)]
pub struct Salsa {
    config: SalsaConfig,
    ssls: Ssls,
    delta_window: SampleWindow,
    loss_window: SampleWindow,
    adaptive: Option<SasaPlus>,
    switched_at: Option<u64>,
    diagnostics: bool,
}

impl Salsa {
    pub fn new(config: SalsaConfig, alpha0: f64) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            ssls: Ssls::new(config.ssls, alpha0)?,
            delta_window: config.sasa_plus.new_window(),
            loss_window: config.sasa_plus.new_window(),
            adaptive: None,
            switched_at: None,
            diagnostics: true,
            config,
        })
    }

    pub fn with_diagnostics(mut self, on: bool) -> Self {
        self.diagnostics = on;
        self
    }

    pub fn phase(&self) -> Phase {
        if self.adaptive.is_some() {
            Phase::Adaptive
        } else {
            Phase::Warmup
        }
    }

    pub fn switched_at(&self) -> Option<u64> {
        self.switched_at
    }

    fn warmup_step(&mut self, ctx: StepContext<'_>) -> Result<StepRecord> {
        let k = ctx.k;
        let s = self.ssls.step(ctx)?;
        self.delta_window.push(k, s.delta);
        self.loss_window.push(k, s.loss);

        let mut rec = StepRecord::plain(s.loss, s.alpha, s.delta, Phase::Warmup);
        rec.extra_evals = s.probe.evaluations;
        let sp = self.config.sasa_plus;
        if !sp.test_due(&self.delta_window, k) {
            return Ok(rec);
        }

        let deltas = self.delta_window.samples();
        let x_verdict = gated(|| stationarity_test(deltas, sp.delta, sp.estimator))?;
        if let Some(verdict) = x_verdict {
            let variances = if self.diagnostics { variance_triple(deltas) } else { None };
            rec.tests.push(TestRecord {
                iteration: k,
                kind: TestKind::Stationarity,
                verdict,
                variances,
            });
        }
        let f_verdict = if self.config.slope {
            gated(|| slope_test(self.loss_window.samples(), sp.delta))?
        } else {
            None
        };
        if let Some(verdict) = f_verdict {
            rec.tests.push(TestRecord {
                iteration: k,
                kind: TestKind::Slope,
                verdict,
                variances: None,
            });
        }

        let x_stationary = x_verdict.is_some_and(|v| v.decision == Decision::Stationary);
        let f_stationary = f_verdict.is_some_and(|v| v.decision == Decision::NotDecreasing);
        if x_stationary || f_stationary {
            self.adaptive = Some(SasaPlus::starting_at(sp, s.alpha, k)?.with_diagnostics(self.diagnostics));
            self.switched_at = Some(k);
            rec.switch = Some(SwitchEvent {
                iteration: k,
                alpha: s.alpha,
                x_stationary,
                f_stationary,
            });
        }
        Ok(rec)
    }
}

impl Schedule for Salsa {
    fn alpha(&self) -> f64 {
        match &self.adaptive {
            Some(a) => a.alpha(),
            None => self.ssls.alpha(),
        }
    }

    fn step(&mut self, ctx: StepContext<'_>) -> Result<StepRecord> {
        match &mut self.adaptive {
            Some(a) => a.step(ctx),
            None => self.warmup_step(ctx),
        }
    }
}

/// Runs warmup followed by statistical drops from `x0`.
pub fn run_salsa(
    problem: &dyn StochasticProblem,
    rule: &crate::optim::DirectionRule,
    config: SalsaConfig,
    alpha0: f64,
    x0: Vec<f64>,
    total_iters: u64,
    seed: u64,
) -> Result<crate::run::Trajectory> {
    let mut s = Salsa::new(config, alpha0)?;
    crate::run::run_schedule(problem, rule, &mut s, x0, total_iters, seed)
}

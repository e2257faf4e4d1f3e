//! Reference schedules: constant step, constant-and-cut, and slope-only drops.

use crate::error::{Error, Result};
use crate::run::{qhm_iteration, Phase, Schedule, ScheduleEvent, StepContext, StepRecord, TestKind, TestRecord};
use crate::sasa_plus::{gated, SasaPlusConfig};
use crate::stats::{slope_test, Decision, SampleWindow};

/// Fixed step size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constant {
    alpha: f64,
}

impl Constant {
    pub fn new(alpha: f64) -> Result<Self> {
        crate::optim::check_alpha(alpha)?;
        Ok(Self { alpha })
    }
}

impl Schedule for Constant {
    fn alpha(&self) -> f64 {
        self.alpha
    }

    fn step(&mut self, ctx: StepContext<'_>) -> Result<StepRecord> {
        let (loss, delta) = qhm_iteration(ctx, self.alpha)?;
        Ok(StepRecord::plain(loss, self.alpha, delta, Phase::Adaptive))
    }
}

/// Multiplies `α` by `factor` at the start of each listed iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantAndCut {
    alpha: f64,
    factor: f64,
    milestones: Vec<u64>,
    next: usize,
}

impl ConstantAndCut {
    /// `milestones` are iteration indices; they are sorted and deduplicated.
    pub fn new(alpha0: f64, factor: f64, mut milestones: Vec<u64>) -> Result<Self> {
        crate::optim::check_alpha(alpha0)?;
        if !(factor > 0.0 && factor < 1.0) {
            return Err(Error::InvalidConfig(format!("cut factor {factor} must lie in (0, 1)")));
        }
        milestones.sort_unstable();
        milestones.dedup();
        Ok(Self {
            alpha: alpha0,
            factor,
            milestones,
            next: 0,
        })
    }

    /// Milestones at whole epochs.
    pub fn at_epochs(alpha0: f64, factor: f64, epochs: &[u64], steps_per_epoch: usize) -> Result<Self> {
        let spe = steps_per_epoch as u64;
        Self::new(alpha0, factor, epochs.iter().map(|e| e * spe).collect())
    }
}

impl Schedule for ConstantAndCut {
    fn alpha(&self) -> f64 {
        self.alpha
    }

    fn step(&mut self, ctx: StepContext<'_>) -> Result<StepRecord> {
        let k = ctx.k;
        let mut drop = None;
        while self.milestones.get(self.next).is_some_and(|m| *m <= k) {
            self.next += 1;
            if k == 0 {
                continue;
            }
            let old = self.alpha;
            self.alpha = old * self.factor;
            drop = Some(ScheduleEvent {
                iteration: k,
                old_alpha: old,
                new_alpha: self.alpha,
                verdict: None,
            });
        }
        let (loss, delta) = qhm_iteration(ctx, self.alpha)?;
        let mut rec = StepRecord::plain(loss, self.alpha, delta, Phase::Adaptive);
        rec.drop = drop;
        Ok(rec)
    }
}

/// Drops `α` by `τ` whenever the loss window stops decreasing, with the
/// same window and cadence rules as the stationarity controller.
#[derive(Debug, Clone)]
pub struct SlopeOnly {
    config: SasaPlusConfig,
    alpha: f64,
    window: SampleWindow,
}

impl SlopeOnly {
    pub fn new(config: SasaPlusConfig, alpha0: f64) -> Result<Self> {
        config.validate()?;
        crate::optim::check_alpha(alpha0)?;
        Ok(Self {
            window: config.new_window(),
            config,
            alpha: alpha0,
        })
    }
}

impl Schedule for SlopeOnly {
    fn alpha(&self) -> f64 {
        self.alpha
    }

    fn step(&mut self, ctx: StepContext<'_>) -> Result<StepRecord> {
        let k = ctx.k;
        let alpha = self.alpha;
        let (loss, delta) = qhm_iteration(ctx, alpha)?;
        self.window.push(k, loss);
        let mut rec = StepRecord::plain(loss, alpha, delta, Phase::Adaptive);
        if !self.config.test_due(&self.window, k) {
            return Ok(rec);
        }
        let cfg = self.config;
        let Some(verdict) = gated(|| slope_test(self.window.samples(), cfg.delta))? else {
            return Ok(rec);
        };
        rec.tests.push(TestRecord {
            iteration: k,
            kind: TestKind::Slope,
            verdict,
            variances: None,
        });
        if verdict.decision == Decision::NotDecreasing {
            let next = alpha * cfg.tau;
            self.window.reset(k);
            // below the normal range the step size stays put
            if next.is_normal() {
                self.alpha = next;
                rec.drop = Some(ScheduleEvent {
                    iteration: k,
                    old_alpha: alpha,
                    new_alpha: next,
                    verdict: Some(verdict),
                });
            }
        }
        Ok(rec)
    }
}

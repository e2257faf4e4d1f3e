//! The optimizer loop shared by every step-size schedule.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::optim::{DirectionRule, IterateState};
use crate::problems::StochasticProblem;
use crate::stats::{delta_statistic, TestVerdict};
use crate::seeded_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// Step size set by the line search.
    Warmup,
    /// Step size constant between multiplicative drops.
    Adaptive,
}

impl Phase {
    pub fn name(&self) -> &'static str {
        match self {
            Phase::Warmup => "warmup",
            Phase::Adaptive => "adaptive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    Stationarity,
    Slope,
}

/// One statistical test performed during a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestRecord {
    pub iteration: u64,
    pub kind: TestKind,
    pub verdict: TestVerdict,
    /// `σ̂²` of the same window under the IID, BM and OLBM estimators.
    pub variances: Option<[f64; 3]>,
}

/// A multiplicative step-size drop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEvent {
    pub iteration: u64,
    pub old_alpha: f64,
    pub new_alpha: f64,
    pub verdict: Option<TestVerdict>,
}

/// Hand-over from line-search warmup to the statistical schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchEvent {
    pub iteration: u64,
    pub alpha: f64,
    pub x_stationary: bool,
    pub f_stationary: bool,
}

/// What a schedule reports for one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    /// Minibatch loss `f_ξ(x^k)`.
    pub loss: f64,
    /// Step size applied at this iteration.
    pub alpha: f64,
    /// `Δ_k` computed with the applied step size.
    pub delta: f64,
    pub phase: Phase,
    /// Loss evaluations beyond the one at `x^k` (line-search probes).
    pub extra_evals: u32,
    pub tests: Vec<TestRecord>,
    pub drop: Option<ScheduleEvent>,
    pub switch: Option<SwitchEvent>,
}

impl StepRecord {
    pub(crate) fn plain(loss: f64, alpha: f64, delta: f64, phase: Phase) -> Self {
        Self {
            loss,
            alpha,
            delta,
            phase,
            extra_evals: 0,
            tests: Vec::new(),
            drop: None,
            switch: None,
        }
    }
}

/// Everything a schedule needs to perform iteration `k`.
pub struct StepContext<'a> {
    pub k: u64,
    pub state: &'a mut IterateState,
    pub problem: &'a dyn StochasticProblem,
    pub rule: &'a DirectionRule,
    pub rng: &'a mut dyn RngCore,
}

/// A step-size policy. Each call samples a minibatch, updates the iterate in
/// `ctx.state` and reports what happened.
pub trait Schedule {
    /// Step size that the next iteration will start from.
    fn alpha(&self) -> f64;

    fn step(&mut self, ctx: StepContext<'_>) -> Result<StepRecord>;
}

/// One constant-step QHM iteration: sample, direction, `Δ_k`, update.
/// Returns `(loss, Δ_k)`.
pub(crate) fn qhm_iteration(ctx: StepContext<'_>, alpha: f64) -> Result<(f64, f64)> {
    let xi = ctx.problem.sample(ctx.rng);
    let (loss, g) = ctx.problem.loss_and_gradient(&xi, &ctx.state.x)?;
    ctx.rule.apply(ctx.state, &g)?;
    let delta = delta_statistic(&ctx.state.x, &ctx.state.d, alpha)?;
    ctx.state.advance(alpha)?;
    Ok((loss, delta))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: u64,
    pub loss: f64,
    pub alpha: f64,
    pub delta: f64,
    pub phase: Phase,
    pub extra_evals: u32,
}

/// Full log of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub records: Vec<IterationRecord>,
    pub tests: Vec<TestRecord>,
    pub drops: Vec<ScheduleEvent>,
    pub switch: Option<SwitchEvent>,
    pub final_x: Vec<f64>,
    /// Mean of the iterates produced during the final epoch.
    pub averaged_x: Vec<f64>,
    pub final_alpha: f64,
}

impl Trajectory {
    pub fn alphas(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|r| r.alpha)
    }
}

/// Runs `schedule` for `total_iters` iterations from `x0`, drawing minibatches
/// from a generator seeded with `seed`.
pub fn run_schedule(
    problem: &dyn StochasticProblem,
    rule: &DirectionRule,
    schedule: &mut dyn Schedule,
    x0: Vec<f64>,
    total_iters: u64,
    seed: u64,
) -> Result<Trajectory> {
    crate::error::check_dim(problem.dim(), x0.len())?;
    let mut rng = seeded_rng(seed);
    let mut state = IterateState::new(x0, schedule.alpha())?;
    let epoch = problem.steps_per_epoch() as u64;
    let avg_from = total_iters.saturating_sub(epoch);
    let mut averaged = state.x.clone();
    let mut averaged_count = 0u64;

    let mut traj = Trajectory {
        records: Vec::with_capacity(total_iters as usize),
        tests: Vec::new(),
        drops: Vec::new(),
        switch: None,
        final_x: Vec::new(),
        averaged_x: Vec::new(),
        final_alpha: schedule.alpha(),
    };

    for k in 0..total_iters {
        let rec = schedule.step(StepContext {
            k,
            state: &mut state,
            problem,
            rule,
            rng: &mut rng,
        })?;
        traj.records.push(IterationRecord {
            iteration: k,
            loss: rec.loss,
            alpha: rec.alpha,
            delta: rec.delta,
            phase: rec.phase,
            extra_evals: rec.extra_evals,
        });
        traj.tests.extend(rec.tests);
        traj.drops.extend(rec.drop);
        if let Some(sw) = rec.switch {
            traj.switch = Some(sw);
        }
        if k >= avg_from {
            averaged_count += 1;
            let w = 1.0 / averaged_count as f64;
            for (a, x) in averaged.iter_mut().zip(&state.x) {
                *a += w * (x - *a);
            }
        }
    }
    traj.final_alpha = schedule.alpha();
    traj.final_x = state.x;
    traj.averaged_x = averaged;
    Ok(traj)
}

/// Replay rules for [`replay_alpha_trace`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplayRules {
    /// Step size the run started from.
    pub alpha0: f64,
    /// The only factor allowed between consecutive adaptive step sizes.
    pub tau: f64,
    /// Per-step bracket for `α_k / α_{k−1}` during warmup.
    pub warmup_ratio: Option<(f64, f64)>,
    /// Maximum line-search probes per warmup iteration.
    pub max_probes: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ReplaySummary {
    pub drops: usize,
    /// Last warmup iteration before the first adaptive one.
    pub switch: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("step-size trace invalid at iteration {iteration}: {message}")]
pub struct ReplayError {
    pub iteration: u64,
    pub message: String,
}

/// Checks a logged step-size trace: warmup ratios stay in their bracket,
/// warmup never follows an adaptive iteration, and adaptive step sizes only
/// change by exact factors of `τ`.
pub fn replay_alpha_trace(
    records: &[IterationRecord],
    rules: &ReplayRules,
) -> std::result::Result<ReplaySummary, ReplayError> {
    let fail = |iteration, message: String| Err(ReplayError { iteration, message });
    let mut summary = ReplaySummary::default();
    let mut prev = rules.alpha0;
    let mut adaptive = false;
    let mut last_warmup = None;
    for r in records {
        let k = r.iteration;
        if !(r.alpha > 0.0 && r.alpha.is_finite()) {
            return fail(k, format!("step size {} is not positive", r.alpha));
        }
        match r.phase {
            Phase::Warmup => {
                if adaptive {
                    return fail(k, "warmup after the switch".into());
                }
                if let Some((lo, hi)) = rules.warmup_ratio {
                    let ratio = r.alpha / prev;
                    if ratio < lo * (1.0 - 1e-12) || ratio > hi * (1.0 + 1e-12) {
                        return fail(k, format!("warmup ratio {ratio} outside [{lo}, {hi}]"));
                    }
                }
                if let Some(m) = rules.max_probes {
                    if r.extra_evals > m {
                        return fail(k, format!("{} probes exceed {m}", r.extra_evals));
                    }
                }
                last_warmup = Some(k);
            }
            Phase::Adaptive => {
                if !adaptive {
                    adaptive = true;
                    summary.switch = last_warmup;
                }
                if r.extra_evals != 0 {
                    return fail(k, "adaptive iteration evaluated extra losses".into());
                }
                if r.alpha == prev {
                } else if r.alpha == prev * rules.tau {
                    summary.drops += 1;
                } else {
                    return fail(k, format!("step size changed from {prev} to {}", r.alpha));
                }
            }
        }
        prev = r.alpha;
    }
    Ok(summary)
}

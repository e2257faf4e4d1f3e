//! Executable checks of the stationarity identities on simulated chains.

use crate::error::{Error, Result};
use crate::optim::{nag_direction, DirectionRule, IterateState};
use crate::problems::{NoisyQuadratic, StochasticProblem};
use crate::stats::{delta_statistic, variance_estimate, yaida_delta, VarianceEstimatorKind};
use crate::{norm_sq, seeded_rng};

/// How a simulated chain chooses its direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChainMethod {
    Qhm(DirectionRule),
    /// Look-ahead gradient plus `β d_prev`.
    Nesterov { beta: f64 },
}

impl ChainMethod {
    pub fn label(&self) -> String {
        match self {
            ChainMethod::Qhm(r) if r.is_sgd() => "sgd".into(),
            ChainMethod::Qhm(r) if r.is_shb() => format!("shb({})", r.beta()),
            ChainMethod::Qhm(r) => format!("qhm({}, {})", r.beta(), r.nu()),
            ChainMethod::Nesterov { beta } => format!("nesterov({beta})"),
        }
    }
}

/// Per-iteration statistics of a constant-step chain after burn-in.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ChainTrace {
    pub delta: Vec<f64>,
    /// Only recorded for heavy-ball chains.
    pub yaida: Vec<f64>,
    pub dnorm_sq: Vec<f64>,
    pub final_x: Vec<f64>,
}

/// Runs `burn_in + samples` constant-step iterations from `x0` and records
/// the last `samples` of them.
pub fn simulate_chain(
    problem: &dyn StochasticProblem,
    method: ChainMethod,
    alpha: f64,
    x0: Vec<f64>,
    burn_in: usize,
    samples: usize,
    seed: u64,
) -> Result<ChainTrace> {
    crate::error::check_dim(problem.dim(), x0.len())?;
    let mut rng = seeded_rng(seed);
    let mut state = IterateState::new(x0, alpha)?;
    let shb_beta = match method {
        ChainMethod::Qhm(r) if r.is_shb() => Some(r.beta()),
        _ => None,
    };
    let mut trace = ChainTrace {
        delta: Vec::with_capacity(samples),
        yaida: Vec::with_capacity(if shb_beta.is_some() { samples } else { 0 }),
        dnorm_sq: Vec::with_capacity(samples),
        final_x: Vec::new(),
    };
    for k in 0..burn_in + samples {
        let xi = problem.sample(&mut rng);
        let g = match method {
            ChainMethod::Qhm(rule) => {
                let g = problem.gradient(&xi, &state.x)?;
                rule.apply(&mut state, &g)?;
                g
            }
            ChainMethod::Nesterov { beta } => {
                let d = nag_direction(beta, &state, |y| problem.gradient(&xi, y))?;
                state.d = d;
                Vec::new()
            }
        };
        if k >= burn_in {
            trace.delta.push(delta_statistic(&state.x, &state.d, alpha)?);
            trace.dnorm_sq.push(norm_sq(&state.d));
            if let Some(beta) = shb_beta {
                trace.yaida.push(yaida_delta(&state.x, &g, &state.d, alpha, beta)?);
            }
        }
        state.advance(alpha)?;
    }
    trace.final_x = state.x;
    Ok(trace)
}

/// Sample mean with a batch-means standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanEstimate {
    pub mean: f64,
    pub std_error: f64,
}

impl MeanEstimate {
    pub fn of(samples: &[f64]) -> Result<Self> {
        let est = variance_estimate(samples, VarianceEstimatorKind::Olbm)?;
        let n = samples.len() as f64;
        Ok(Self {
            mean: samples.iter().sum::<f64>() / n,
            std_error: (est.sigma_sq / n).sqrt(),
        })
    }

    /// `|mean| / SE`; zero for an identically zero series, infinite for a
    /// constant nonzero one.
    pub fn z_score(&self) -> f64 {
        if self.std_error > 0.0 {
            self.mean.abs() / self.std_error
        } else if self.mean == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }

    pub fn within(&self, standard_errors: f64) -> bool {
        self.z_score() <= standard_errors
    }
}

/// Long-run means that should vanish at stationarity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationarityReport {
    pub delta: MeanEstimate,
    pub yaida: Option<MeanEstimate>,
    /// Mean of `‖d^k‖² − ‖d^{k+1}‖²`.
    pub dnorm_lag: MeanEstimate,
    pub dnorm_sq_mean: f64,
}

impl StationarityReport {
    /// Every tracked mean lies within `standard_errors` of zero.
    pub fn passes(&self, standard_errors: f64) -> bool {
        self.delta.within(standard_errors)
            && self.yaida.is_none_or(|y| y.within(standard_errors))
            && self.dnorm_lag.within(standard_errors)
    }
}

/// Summarises a recorded chain.
pub fn verify_stationary_means(trace: &ChainTrace) -> Result<StationarityReport> {
    let lag: Vec<f64> = trace.dnorm_sq.windows(2).map(|w| w[0] - w[1]).collect();
    Ok(StationarityReport {
        delta: MeanEstimate::of(&trace.delta)?,
        yaida: if trace.yaida.is_empty() {
            None
        } else {
            Some(MeanEstimate::of(&trace.yaida)?)
        },
        dnorm_lag: MeanEstimate::of(&lag)?,
        dnorm_sq_mean: trace.dnorm_sq.iter().sum::<f64>() / trace.dnorm_sq.len().max(1) as f64,
    })
}

/// Iterates `x^0..x^n` and directions `d^0..d^{n−1}` of a heavy-ball run.
#[derive(Debug, Clone, PartialEq)]
pub struct ShbTrajectory {
    pub xs: Vec<Vec<f64>>,
    pub ds: Vec<Vec<f64>>,
    pub alpha: f64,
    pub beta: f64,
}

pub fn record_shb(
    problem: &dyn StochasticProblem,
    beta: f64,
    alpha: f64,
    x0: Vec<f64>,
    steps: usize,
    seed: u64,
) -> Result<ShbTrajectory> {
    let rule = DirectionRule::shb(beta)?;
    let mut rng = seeded_rng(seed);
    let mut state = IterateState::new(x0, alpha)?;
    let mut xs = vec![state.x.clone()];
    let mut ds = Vec::with_capacity(steps);
    for _ in 0..steps {
        let xi = problem.sample(&mut rng);
        let g = problem.gradient(&xi, &state.x)?;
        rule.apply(&mut state, &g)?;
        ds.push(state.d.clone());
        state.advance(alpha)?;
        xs.push(state.x.clone());
    }
    Ok(ShbTrajectory { xs, ds, alpha, beta })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityReport {
    pub max_residual: f64,
    /// `1 + max ‖x‖²` over the trajectory.
    pub scale: f64,
    pub checked: usize,
}

impl IdentityReport {
    pub fn relative(&self) -> f64 {
        self.max_residual / self.scale
    }
}

/// Largest violation of the heavy-ball telescoping identity
///
/// `⟨x^k, g^k⟩ − (α/2)(1+β)/(1−β)‖d^k‖²
///   = [(β‖x^k‖² − ‖x^{k+1}‖² − α²β‖d^k‖²) − (β‖x^{k−1}‖² − ‖x^k‖² − α²β‖d^{k−1}‖²)] / (2α(1−β))`
///
/// with `g^k = (d^k − β d^{k−1}) / (1 − β)`, over every `k ≥ 1` that has a successor.
pub fn verify_shb_identity(t: &ShbTrajectory) -> Result<IdentityReport> {
    let (alpha, beta) = (t.alpha, t.beta);
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::InvalidConfig(format!("beta = {beta} must lie in [0, 1)")));
    }
    if t.xs.len() != t.ds.len() + 1 {
        return Err(Error::InvalidArgument(format!(
            "{} iterates need {} directions, got {}",
            t.xs.len(),
            t.xs.len().saturating_sub(1),
            t.ds.len()
        )));
    }
    let scale = 1.0 + t.xs.iter().map(|x| norm_sq(x)).fold(0.0, f64::max);
    let mut max_residual: f64 = 0.0;
    let mut checked = 0;
    for k in 1..t.ds.len() {
        let (xp, x, xn) = (&t.xs[k - 1], &t.xs[k], &t.xs[k + 1]);
        let (dp, d) = (&t.ds[k - 1], &t.ds[k]);
        let g: Vec<f64> = d.iter().zip(dp).map(|(a, b)| (a - beta * b) / (1.0 - beta)).collect();
        let lhs = yaida_delta(x, &g, d, alpha, beta)?;
        let a2b = alpha * alpha * beta;
        let now = beta * norm_sq(x) - norm_sq(xn) - a2b * norm_sq(d);
        let before = beta * norm_sq(xp) - norm_sq(x) - a2b * norm_sq(dp);
        let rhs = (now - before) / (2.0 * alpha * (1.0 - beta));
        max_residual = max_residual.max((lhs - rhs).abs());
        checked += 1;
    }
    Ok(IdentityReport {
        max_residual,
        scale,
        checked,
    })
}

/// Outcome of one named check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Desk-sized versions of the identity and stationarity checks on the 1-D
/// noisy quadratic (`λ = 1`, `σ = 1`, `α = 0.1`).
pub fn standard_suite(samples: usize, seed: u64) -> Result<Vec<CheckOutcome>> {
    let q1 = NoisyQuadratic::new(vec![1.0], vec![0.0], 1.0)?;
    let mut out = Vec::new();

    let q10 = NoisyQuadratic::evenly_spaced(10, 0.1, 1.0, 0.5)?;
    for beta in [0.0, 0.5, 0.9] {
        let t = record_shb(&q10, beta, 0.1, vec![1.0; 10], 100, seed)?;
        let r = verify_shb_identity(&t)?;
        out.push(CheckOutcome {
            name: format!("shb identity, beta = {beta}"),
            passed: r.relative() < 1e-9,
            detail: format!("max residual {:.3e}, relative {:.3e}", r.max_residual, r.relative()),
        });
    }

    let methods = [
        ChainMethod::Qhm(DirectionRule::sgd()),
        ChainMethod::Qhm(DirectionRule::shb(0.9)?),
        ChainMethod::Qhm(DirectionRule::nag(0.9)?),
        ChainMethod::Qhm(DirectionRule::new(0.9, 0.7)?),
        ChainMethod::Nesterov { beta: 0.9 },
    ];
    for (i, m) in methods.into_iter().enumerate() {
        let trace = simulate_chain(&q1, m, 0.1, vec![0.0], 10_000, samples, seed + i as u64)?;
        let r = verify_stationary_means(&trace)?;
        let mut detail = format!("delta mean {:.3e} ({:.2} SE)", r.delta.mean, r.delta.z_score());
        if let Some(y) = r.yaida {
            detail += &format!(", yaida mean {:.3e} ({:.2} SE)", y.mean, y.z_score());
        }
        out.push(CheckOutcome {
            name: format!("stationary means, {}", m.label()),
            passed: r.passes(3.0),
            detail,
        });
    }

    // slow contraction keeps the whole window far from stationarity
    let slow = NoisyQuadratic::new(vec![0.002], vec![0.0], 0.1)?;
    let transient = simulate_chain(&slow, ChainMethod::Qhm(DirectionRule::shb(0.9)?), 0.1, vec![30.0], 0, 20_000, seed)?;
    let r = verify_stationary_means(&transient)?;
    out.push(CheckOutcome {
        name: "transient chain is rejected".into(),
        passed: r.delta.z_score() > 5.0,
        detail: format!("delta mean {:.3e} ({:.2} SE)", r.delta.mean, r.delta.z_score()),
    });
    Ok(out)
}

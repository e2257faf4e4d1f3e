//! Constant-step update `x ← x − α d` with directions from the
//! quasi-hyperbolic momentum (QHM) family:
//!
//! ```text
//! h = (1 − β) g + β h_prev
//! d = (1 − ν) g + ν h
//! ```
//!
//! `ν = 0` (or `β = 0`) is plain SGD, `ν = 1` is stochastic heavy ball and
//! `β = ν` is the QHM form of Nesterov momentum.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// `(β, ν)` pair selecting a member of the QHM family. Immutable once built.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRule", into = "RawRule")]
pub struct DirectionRule {
    beta: f64,
    nu: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRule {
    beta: f64,
    nu: f64,
}

impl TryFrom<RawRule> for DirectionRule {
    type Error = Error;

    fn try_from(raw: RawRule) -> Result<Self> {
        DirectionRule::new(raw.beta, raw.nu)
    }
}

impl From<DirectionRule> for RawRule {
    fn from(rule: DirectionRule) -> Self {
        RawRule {
            beta: rule.beta,
            nu: rule.nu,
        }
    }
}

impl DirectionRule {
    pub fn new(beta: f64, nu: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&beta) {
            return Err(Error::InvalidConfig(format!(
                "momentum beta = {beta} must lie in [0, 1)"
            )));
        }
        if !(0.0..=1.0).contains(&nu) {
            return Err(Error::InvalidConfig(format!(
                "mixing weight nu = {nu} must lie in [0, 1]"
            )));
        }
        Ok(Self { beta, nu })
    }

    pub fn sgd() -> Self {
        Self { beta: 0.0, nu: 0.0 }
    }

    /// Stochastic heavy ball, `d = (1 − β) g + β d_prev`.
    pub fn shb(beta: f64) -> Result<Self> {
        Self::new(beta, 1.0)
    }

    /// Nesterov momentum in QHM form, `ν = β`.
    pub fn nag(beta: f64) -> Result<Self> {
        Self::new(beta, beta)
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn is_sgd(&self) -> bool {
        self.beta == 0.0 || self.nu == 0.0
    }

    pub fn is_shb(&self) -> bool {
        self.nu == 1.0
    }

    /// Computes the new momentum buffer and direction for gradient `g`.
    pub fn direction(&self, h_prev: &[f64], g: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        check_dim(h_prev.len(), g.len())?;
        let (beta, nu) = (self.beta, self.nu);
        let h: Vec<f64> = g
            .iter()
            .zip(h_prev)
            .map(|(gi, hi)| (1.0 - beta) * gi + beta * hi)
            .collect();
        let d = g
            .iter()
            .zip(&h)
            .map(|(gi, hi)| (1.0 - nu) * gi + nu * hi)
            .collect();
        Ok((h, d))
    }

    /// Updates `state.h` and `state.d` in place from gradient `g`.
    pub fn apply(&self, state: &mut IterateState, g: &[f64]) -> Result<()> {
        let (h, d) = qhm_direction(self, state, g)?;
        state.h = h;
        state.d = d;
        Ok(())
    }
}

impl Default for DirectionRule {
    /// Heavy ball with `β = 0.9`.
    fn default() -> Self {
        Self { beta: 0.9, nu: 1.0 }
    }
}

/// Iterate, momentum buffer, last direction, step size and iteration index.
#[derive(Debug, Clone, PartialEq)]
pub struct IterateState {
    pub x: Vec<f64>,
    pub h: Vec<f64>,
    pub d: Vec<f64>,
    pub alpha: f64,
    pub k: u64,
}

impl IterateState {
    /// Starts at `x0` with zero momentum and direction buffers.
    pub fn new(x0: Vec<f64>, alpha: f64) -> Result<Self> {
        if x0.is_empty() {
            return Err(Error::InvalidConfig("parameter vector is empty".into()));
        }
        check_alpha(alpha)?;
        let p = x0.len();
        Ok(Self {
            x: x0,
            h: vec![0.0; p],
            d: vec![0.0; p],
            alpha,
            k: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    /// In-place form of [`step`] along the stored direction.
    pub fn advance(&mut self, alpha: f64) -> Result<()> {
        check_alpha(alpha)?;
        for (xi, di) in self.x.iter_mut().zip(&self.d) {
            *xi -= alpha * di;
        }
        self.alpha = alpha;
        self.k += 1;
        Ok(())
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "step size alpha = {alpha} must be positive and finite"
        )));
    }
    Ok(())
}

/// Returns `(h, d)` for gradient `g` given the buffers in `state`.
pub fn qhm_direction(
    rule: &DirectionRule,
    state: &IterateState,
    g: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_dim(state.x.len(), g.len())?;
    rule.direction(&state.h, g)
}

/// `x ← x − α d`; increments `k` and carries the buffers forward.
pub fn step(state: &IterateState, d: &[f64], alpha: f64) -> Result<IterateState> {
    check_dim(state.x.len(), d.len())?;
    check_alpha(alpha)?;
    let x = state.x.iter().zip(d).map(|(xi, di)| xi - alpha * di).collect();
    Ok(IterateState {
        x,
        h: state.h.clone(),
        d: d.to_vec(),
        alpha,
        k: state.k + 1,
    })
}

/// Nesterov direction `g(x − α β d_prev) + β d_prev`, where `lookahead_gradient`
/// evaluates the sampled gradient (same sample as the current step) at the
/// point it is given. `state.d` holds `d_prev`.
pub fn nag_direction<F>(beta: f64, state: &IterateState, mut lookahead_gradient: F) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::InvalidConfig(format!(
            "momentum beta = {beta} must lie in [0, 1)"
        )));
    }
    let shift = state.alpha * beta;
    let y: Vec<f64> = state
        .x
        .iter()
        .zip(&state.d)
        .map(|(xi, di)| xi - shift * di)
        .collect();
    let g = lookahead_gradient(&y)?;
    check_dim(state.x.len(), g.len())?;
    Ok(g.iter().zip(&state.d).map(|(gi, di)| gi + beta * di).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn state_with_h(x: Vec<f64>, h: Vec<f64>) -> IterateState {
        let mut s = IterateState::new(x, 1.0).unwrap();
        s.h = h;
        s
    }

    #[test]
    fn nu_zero_is_plain_gradient() {
        let rule = DirectionRule::new(0.9, 0.0).unwrap();
        let s = state_with_h(vec![0.0], vec![10.0]);
        let (h, d) = qhm_direction(&rule, &s, &[2.0]).unwrap();
        assert_relative_eq!(h[0], 9.2, epsilon = 1e-12);
        assert_eq!(d, vec![2.0]);
    }

    #[test]
    fn nu_one_first_step_is_heavy_ball() {
        let rule = DirectionRule::shb(0.9).unwrap();
        let s = state_with_h(vec![0.0], vec![0.0]);
        let (h, d) = qhm_direction(&rule, &s, &[1.0]).unwrap();
        assert_relative_eq!(h[0], 0.1, epsilon = 1e-15);
        assert_relative_eq!(d[0], 0.1, epsilon = 1e-15);
    }

    #[test]
    fn half_half_matches_scalar_recurrence() {
        // scalar recurrence written out independently
        let (beta, nu, g, h_prev) = (0.5_f64, 0.5_f64, 4.0_f64, 2.0_f64);
        let h_ref = (1.0 - beta) * g + beta * h_prev;
        let d_ref = (1.0 - nu) * g + nu * h_ref;
        assert_eq!((h_ref, d_ref), (3.0, 3.5));

        let rule = DirectionRule::new(beta, nu).unwrap();
        let s = state_with_h(vec![0.0], vec![h_prev]);
        let (h, d) = qhm_direction(&rule, &s, &[g]).unwrap();
        assert_eq!(h, vec![3.0]);
        assert_eq!(d, vec![3.5]);
    }

    #[test]
    fn direction_rejects_dimension_mismatch() {
        let s = IterateState::new(vec![0.0, 0.0], 1.0).unwrap();
        let err = qhm_direction(&DirectionRule::sgd(), &s, &[1.0]).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 2, got: 1 }));
    }

    #[test]
    fn rule_validation() {
        assert!(DirectionRule::new(1.0, 0.5).is_err());
        assert!(DirectionRule::new(-0.1, 0.5).is_err());
        assert!(DirectionRule::new(0.5, 1.1).is_err());
        assert!(DirectionRule::new(0.0, 1.0).unwrap().is_sgd());
        assert!(DirectionRule::new(0.7, 0.0).unwrap().is_sgd());
        assert!(DirectionRule::shb(0.9).unwrap().is_shb());
        let nag = DirectionRule::nag(0.9).unwrap();
        assert_eq!((nag.beta(), nag.nu()), (0.9, 0.9));
    }

    #[test]
    fn rule_rejects_bad_values_when_deserialized() {
        let bad: std::result::Result<DirectionRule, _> =
            serde_json::from_str(r#"{"beta": 1.5, "nu": 1.0}"#);
        assert!(bad.is_err());
        let unknown: std::result::Result<DirectionRule, _> =
            serde_json::from_str(r#"{"beta": 0.5, "nu": 1.0, "gamma": 1}"#);
        assert!(unknown.is_err());
    }

    #[test]
    fn step_arithmetic() {
        let s = IterateState::new(vec![0.0, 0.0], 0.5).unwrap();
        let next = step(&s, &[1.0, -1.0], 0.5).unwrap();
        assert_eq!(next.x, vec![-0.5, 0.5]);
        assert_eq!(next.k, 1);
    }

    #[test]
    fn zero_direction_is_fixed_point() {
        let s = IterateState::new(vec![3.0, -2.0], 1.0).unwrap();
        for alpha in [1e-3, 1.0, 7.5] {
            assert_eq!(step(&s, &[0.0, 0.0], alpha).unwrap().x, s.x);
        }
    }

    #[test]
    fn step_rejects_nonpositive_alpha() {
        let s = IterateState::new(vec![1.0], 1.0).unwrap();
        assert!(step(&s, &[1.0], 0.0).is_err());
        assert!(step(&s, &[1.0], -1.0).is_err());
    }

    #[test]
    fn sgd_on_quadratic_decays_geometrically() {
        let (lambda, alpha) = (2.0, 0.25);
        let rule = DirectionRule::sgd();
        let mut s = IterateState::new(vec![1.0], alpha).unwrap();
        for _ in 0..10 {
            let g = vec![lambda * s.x[0]];
            rule.apply(&mut s, &g).unwrap();
            s.advance(alpha).unwrap();
        }
        assert_relative_eq!(s.x[0], (1.0f64 - alpha * lambda).powi(10), epsilon = 1e-15);
        assert_relative_eq!(s.x[0], 9.765625e-4, epsilon = 1e-15);
    }

    #[test]
    fn nag_degenerate_cases() {
        let grad = |y: &[f64]| Ok(vec![y[0]]);
        let mut s = IterateState::new(vec![2.0], 0.1).unwrap();
        s.d = vec![5.0];
        assert_eq!(nag_direction(0.0, &s, grad).unwrap(), vec![2.0]);
        s.d = vec![0.0];
        assert_eq!(nag_direction(0.9, &s, grad).unwrap(), vec![2.0]);
    }

    #[test]
    fn nag_lookahead_arithmetic() {
        // λ = 1: g(1 − 0.1·0.9·1) = 0.91, d = 0.91 + 0.9
        let mut s = IterateState::new(vec![1.0], 0.1).unwrap();
        s.d = vec![1.0];
        let d = nag_direction(0.9, &s, |y| Ok(vec![y[0]])).unwrap();
        assert_relative_eq!(d[0], 1.81, epsilon = 1e-12);
    }

    /// NAG run with step `α` and QHM(β, β) run with step `α / (1 − β)` visit
    /// the same points: the QHM iterate equals the NAG look-ahead point
    /// `x − α β d_prev` when both see the same gradient noise.
    #[test]
    fn qhm_beta_beta_tracks_nag_lookahead_sequence() {
        let (beta, alpha) = (0.9, 0.05);
        let lambdas = [1.0, 0.3];
        let noise: Vec<[f64; 2]> = (0..200)
            .map(|i| {
                let t = i as f64;
                [(t * 1.7).sin(), (t * 0.31).cos()]
            })
            .collect();
        let grad = |y: &[f64], i: usize| -> Vec<f64> {
            vec![lambdas[0] * y[0] + noise[i][0], lambdas[1] * y[1] + noise[i][1]]
        };

        let mut nag = IterateState::new(vec![1.0, -2.0], alpha).unwrap();
        let rule = DirectionRule::nag(beta).unwrap();
        let mut qhm = IterateState::new(vec![1.0, -2.0], alpha / (1.0 - beta)).unwrap();
        for i in 0..noise.len() {
            let lookahead: Vec<f64> = nag
                .x
                .iter()
                .zip(&nag.d)
                .map(|(x, d)| x - alpha * beta * d)
                .collect();
            for (a, b) in lookahead.iter().zip(&qhm.x) {
                assert!((a - b).abs() < 1e-10, "iteration {i}: {a} vs {b}");
            }
            let d = nag_direction(beta, &nag, |y| Ok(grad(y, i))).unwrap();
            nag.d = d;
            nag.advance(alpha).unwrap();

            let g = grad(&qhm.x, i);
            rule.apply(&mut qhm, &g).unwrap();
            let a = qhm.alpha;
            qhm.advance(a).unwrap();
        }
    }

    proptest! {
        #[test]
        fn nu_one_matches_heavy_ball_recursion(
            beta in 0.0f64..0.99,
            grads in proptest::collection::vec(proptest::collection::vec(-10.0f64..10.0, 3), 1..50),
        ) {
            let rule = DirectionRule::shb(beta).unwrap();
            let mut s = IterateState::new(vec![0.0; 3], 0.1).unwrap();
            let mut d_ref = vec![0.0; 3];
            for g in &grads {
                rule.apply(&mut s, g).unwrap();
                for j in 0..3 {
                    d_ref[j] = (1.0 - beta) * g[j] + beta * d_ref[j];
                }
                for j in 0..3 {
                    prop_assert!((s.d[j] - d_ref[j]).abs() <= 1e-12 * (1.0 + d_ref[j].abs()));
                }
            }
        }

        #[test]
        fn sgd_on_quadratic_decays_monotonically_per_eigendirection(
            lambdas in proptest::collection::vec(0.01f64..5.0, 1..6),
            frac in 0.01f64..0.99,
            x0 in proptest::collection::vec(-10.0f64..10.0, 6),
        ) {
            let lmax = lambdas.iter().cloned().fold(0.0, f64::max);
            let alpha = frac * 2.0 / lmax;
            let p = lambdas.len();
            let rule = DirectionRule::new(0.5, 0.0).unwrap();
            let mut s = IterateState::new(x0[..p].to_vec(), alpha).unwrap();
            for _ in 0..50 {
                let before = s.x.clone();
                let g: Vec<f64> = s.x.iter().zip(&lambdas).map(|(x, l)| l * x).collect();
                rule.apply(&mut s, &g).unwrap();
                s.advance(alpha).unwrap();
                for j in 0..p {
                    prop_assert!(s.x[j].abs() <= before[j].abs());
                }
            }
        }
    }
}

//! M-step for the horseshoe hierarchy.
//!
//! With `λ_j² ~ β'(1/2, 1/2)` and `τ ~ C⁺(0, 1)` restricted to `(0, 1)` the
//! negative log-prior is `Σ_j [log(1+λ_j²) + ½ log λ_j²] + log(1+τ²)`. The
//! update order within one M-step is `λ²` (holding the previous `τ², σ²`),
//! then `σ²` by plug-in, then `τ²` by bounded 1-D minimization.

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moments::{PosteriorMoments, ShrinkageState};
use crate::optimize::minimize_bounded;

/// Lower bounds applied to the shrinkage state before every factorization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Floors {
    pub lambda_sq: f64,
    pub tau_sq: f64,
    pub sigma_sq: f64,
}

impl Default for Floors {
    fn default() -> Self {
        Self {
            lambda_sq: 1e-12,
            tau_sq: 1e-12,
            sigma_sq: 1e-10,
        }
    }
}

/// Shape parameters of the inverted-beta prior on `λ²` and the upper bound
/// on `τ`. Only `a = b = 1/2` has a closed-form M-step here.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HorseshoePriorConfig {
    pub a: f64,
    pub b: f64,
    pub tau_upper: f64,
}

impl Default for HorseshoePriorConfig {
    fn default() -> Self {
        Self {
            a: 0.5,
            b: 0.5,
            tau_upper: 1.0,
        }
    }
}

/// Sufficient statistics the M-step reads from the E-step.
#[derive(Debug, Clone, PartialEq)]
pub struct MStepInputs {
    /// `W_j = E[β_j²] / (2σ²τ²)` under the previous `σ², τ²`.
    pub w: Array1<f64>,
    /// `Σ_j E[β_j²] / λ_j²` under the freshly updated `λ²`.
    pub s: f64,
    pub expected_rss: f64,
    pub n: usize,
    pub p: usize,
}

/// Unique positive minimizer of `log x + w/x + log(1+x)`, clamped below at
/// `floor`.
///
/// Closed form `(√(1+6w+w²) + w − 1)/4`; the root is rewritten as
/// `(6w+w²)/(√(1+6w+w²)+1)` so that small `w` does not cancel.
pub fn update_lambda_sq(w: f64, floor: f64) -> f64 {
    debug_assert!(w >= 0.0 && w.is_finite(), "w = {w}");
    let root = (1.0 + 6.0 * w + w * w).sqrt();
    let raw = ((6.0 * w + w * w) / (root + 1.0) + w) / 4.0;
    raw.max(floor)
}

/// Plug-in noise variance `E[‖y − Xβ‖²]/n`.
pub fn update_sigma_sq(expected_rss: f64, n: usize, floor: f64) -> f64 {
    debug_assert!(n >= 1);
    (expected_rss / n as f64).max(floor)
}

/// `g(t) = (p/2) log t + s/(2σ²t) + log(1+t)`, the part of the Q-function
/// that depends on `τ² = t`.
pub fn tau_objective(t: f64, s: f64, p: usize, sigma_sq: f64) -> f64 {
    0.5 * p as f64 * t.ln() + s / (2.0 * sigma_sq * t) + t.ln_1p()
}

/// Minimizes [`tau_objective`] over `t ∈ [floor, 1]`.
///
/// The search runs in `u = log t`, where the objective is strictly convex,
/// to an absolute tolerance of `1e-10` in `u`.
pub fn update_tau_sq(s: f64, p: usize, sigma_sq: f64, floor: f64) -> Result<f64> {
    if !s.is_finite() || s < 0.0 {
        return Err(Error::Degenerate(format!("tau objective coefficient s = {s}")));
    }
    if !(sigma_sq > 0.0 && sigma_sq.is_finite()) {
        return Err(Error::Degenerate(format!("sigma_sq = {sigma_sq}")));
    }
    let lo = floor.ln();
    let best = minimize_bounded(
        |u| tau_objective(u.exp(), s, p, sigma_sq),
        lo,
        0.0,
        1e-10,
        500,
    );
    Ok(if best.x == lo {
        floor
    } else if best.x == 0.0 {
        1.0
    } else {
        best.x.exp().clamp(floor, 1.0)
    })
}

/// Which hyperparameters the M-step estimates.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HyperPolicy {
    pub fixed_sigma_sq: Option<f64>,
    pub fixed_tau_sq: Option<f64>,
}

/// Computes the inputs to the M-step from the current moments and state.
pub fn mstep_inputs(moments: &PosteriorMoments, state: &ShrinkageState, n: usize, floors: &Floors) -> MStepInputs {
    let scale = 2.0 * state.sigma_sq * state.tau_sq;
    let w = moments.second_moment.mapv(|e| e / scale);
    let s = moments
        .second_moment
        .iter()
        .zip(w.iter())
        .map(|(e, &wj)| e / update_lambda_sq(wj, floors.lambda_sq))
        .sum();
    MStepInputs {
        w,
        s,
        expected_rss: moments.expected_rss,
        n,
        p: moments.mean.len(),
    }
}

/// One full M-step.
pub fn m_step(
    moments: &PosteriorMoments,
    previous: &ShrinkageState,
    n: usize,
    policy: HyperPolicy,
    floors: &Floors,
) -> Result<ShrinkageState> {
    let scale = 2.0 * previous.sigma_sq * previous.tau_sq;
    let lambda_sq = moments
        .second_moment
        .mapv(|e| update_lambda_sq(e / scale, floors.lambda_sq));

    let sigma_sq = match policy.fixed_sigma_sq {
        Some(v) => v,
        None => update_sigma_sq(moments.expected_rss, n, floors.sigma_sq),
    };

    let tau_sq = match policy.fixed_tau_sq {
        Some(v) => v,
        None => {
            let s: f64 = moments
                .second_moment
                .iter()
                .zip(lambda_sq.iter())
                .map(|(e, l)| e / l)
                .sum();
            update_tau_sq(s, lambda_sq.len(), sigma_sq, floors.tau_sq)?
        }
    };

    Ok(ShrinkageState {
        lambda_sq,
        tau_sq,
        sigma_sq,
    })
}

/// Horseshoe negative log-prior of the hyperparameters.
pub fn neg_log_prior(state: &ShrinkageState) -> f64 {
    let local: f64 = state
        .lambda_sq
        .iter()
        .map(|l| l.ln_1p() + 0.5 * l.ln())
        .sum();
    local + state.tau_sq.ln_1p()
}

/// The Q-function: expected complete-data negative log-posterior at `state`,
/// with expectations taken under `moments`.
pub fn q_function(state: &ShrinkageState, moments: &PosteriorMoments, n: usize) -> f64 {
    let p = state.lambda_sq.len() as f64;
    let ShrinkageState {
        lambda_sq,
        tau_sq,
        sigma_sq,
    } = state;
    let weighted: f64 = moments
        .second_moment
        .iter()
        .zip(lambda_sq.iter())
        .map(|(e, l)| e / l)
        .sum();
    let log_lambda: f64 = lambda_sq.iter().map(|l| l.ln()).sum();
    0.5 * (n as f64 + p) * sigma_sq.ln()
        + moments.expected_rss / (2.0 * sigma_sq)
        + 0.5 * p * tau_sq.ln()
        + 0.5 * log_lambda
        + weighted / (2.0 * sigma_sq * tau_sq)
        + neg_log_prior(state)
}

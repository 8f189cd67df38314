//! E-step: conditional posterior moments of the coefficients.
//!
//! Given the shrinkage state, `β | λ², τ², σ², y ~ N(A⁻¹Xᵀy, σ²A⁻¹)` with
//! `A = XᵀX + τ⁻²Λ⁻¹` (weighted form `XᵀΩX + τ⁻²Λ⁻¹`). The mean always comes
//! from the Cholesky factor of `A`. Variances and the trace term of the
//! expected residual sum of squares are either exact (from `U⁻¹`) or use
//! the diagonal of `A` only.

use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::data::DesignSystem;
use crate::error::{Error, Result};
use crate::linalg::UpperFactor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum EstepMode {
    #[default]
    Exact,
    Approximate,
}

impl std::fmt::Display for EstepMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EstepMode::Exact => "exact",
            EstepMode::Approximate => "approx",
        })
    }
}

impl std::str::FromStr for EstepMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(EstepMode::Exact),
            "approx" | "approximate" => Ok(EstepMode::Approximate),
            other => Err(Error::invalid(format!("unknown E-step mode '{other}'"))),
        }
    }
}

/// The M-step's decision variables: local `λ²`, global `τ²`, noise `σ²`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShrinkageState {
    pub lambda_sq: Array1<f64>,
    pub tau_sq: f64,
    pub sigma_sq: f64,
}

impl ShrinkageState {
    pub fn validate(&self) -> Result<()> {
        if self.lambda_sq.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(Error::Degenerate(
                "local shrinkage parameters must be finite and positive".into(),
            ));
        }
        if !(self.tau_sq.is_finite() && self.tau_sq > 0.0) {
            return Err(Error::Degenerate(format!("tau_sq = {}", self.tau_sq)));
        }
        if !(self.sigma_sq.is_finite() && self.sigma_sq > 0.0) {
            return Err(Error::Degenerate(format!("sigma_sq = {}", self.sigma_sq)));
        }
        Ok(())
    }

    /// Prior precision `1/(τ²λ_j²)` added to the diagonal of `A`.
    fn prior_precision(&self, j: usize) -> f64 {
        1.0 / (self.tau_sq * self.lambda_sq[j])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorMoments {
    pub mean: Array1<f64>,
    pub var: Array1<f64>,
    pub second_moment: Array1<f64>,
    pub expected_rss: f64,
    pub mode: EstepMode,
}

impl PosteriorMoments {
    fn assemble(mean: Array1<f64>, var: Array1<f64>, expected_rss: f64, mode: EstepMode) -> Self {
        let second_moment = mean
            .iter()
            .zip(var.iter())
            .map(|(m, v)| v + m * m)
            .collect();
        Self {
            mean,
            var,
            second_moment,
            expected_rss,
            mode,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.expected_rss.is_finite()
            && self.mean.iter().all(|v| v.is_finite())
            && self.var.iter().all(|v| v.is_finite())
    }
}

/// Factors `A = XᵀΩX + τ⁻²Λ⁻¹ = UᵀU`.
pub fn build_precision_factor<D: DesignSystem + ?Sized>(
    data: &D,
    state: &ShrinkageState,
) -> Result<UpperFactor> {
    state.validate()?;
    if state.lambda_sq.len() != data.p() {
        return Err(Error::invalid(format!(
            "state has {} local parameters but the design has {} columns",
            state.lambda_sq.len(),
            data.p()
        )));
    }
    let mut a = data.gram().clone();
    for j in 0..data.p() {
        a[[j, j]] += state.prior_precision(j);
    }
    UpperFactor::factorize(&a)
}

fn conditional_mean<D: DesignSystem + ?Sized>(data: &D, factor: &UpperFactor) -> Result<Array1<f64>> {
    let mean = factor.solve(data.cross().view());
    if mean.iter().any(|v| !v.is_finite()) {
        return Err(Error::Degenerate("conditional mean is not finite".into()));
    }
    Ok(mean)
}

/// Exact moments via triangular solves against the factor of `A`.
///
/// `Var[β_j] = σ²(A⁻¹)_jj` and the trace term `tr(XᵀX·Cov[β])` is evaluated
/// as `σ²‖XU⁻¹‖²_F` without forming `A⁻¹`.
pub fn exact_moments<D: DesignSystem + ?Sized>(
    data: &D,
    state: &ShrinkageState,
    factor: &UpperFactor,
) -> Result<PosteriorMoments> {
    let mean = conditional_mean(data, factor)?;
    let var = factor.inverse_diagonal().mapv(|d| state.sigma_sq * d);
    let trace = state.sigma_sq * factor.frobenius_sq_right_inverse(data.scaled_design());
    let expected_rss = data.residual_ss(mean.view()) + trace;
    let out = PosteriorMoments::assemble(mean, var, expected_rss, EstepMode::Exact);
    if !out.is_finite() {
        return Err(Error::Degenerate("exact moments are not finite".into()));
    }
    Ok(out)
}

/// Moments with variances and the trace term taken from the diagonal of `A`.
/// The mean is still the exact conditional mean.
pub fn approx_moments<D: DesignSystem + ?Sized>(
    data: &D,
    state: &ShrinkageState,
) -> Result<PosteriorMoments> {
    let factor = build_precision_factor(data, state)?;
    let mean = conditional_mean(data, &factor)?;
    let diag = data.gram_diag();
    let mut var = Array1::zeros(data.p());
    let mut trace = 0.0;
    for j in 0..data.p() {
        let v = state.sigma_sq / (diag[j] + state.prior_precision(j));
        var[j] = v;
        trace += v * diag[j];
    }
    let expected_rss = data.residual_ss(mean.view()) + trace;
    let out = PosteriorMoments::assemble(mean, var, expected_rss, EstepMode::Approximate);
    if !out.is_finite() {
        return Err(Error::Degenerate("approximate moments are not finite".into()));
    }
    Ok(out)
}

/// Dispatches on `mode`.
pub fn moments<D: DesignSystem + ?Sized>(
    data: &D,
    state: &ShrinkageState,
    mode: EstepMode,
) -> Result<PosteriorMoments> {
    match mode {
        EstepMode::Exact => {
            let factor = build_precision_factor(data, state)?;
            exact_moments(data, state, &factor)
        }
        EstepMode::Approximate => approx_moments(data, state),
    }
}

/// Closed-form moments for the normal-means model (`X = I`, `p = n`):
/// `κ_j = 1/(1+λ_j²τ²)`, mean `(1−κ_j)y_j`, variance `σ²(1−κ_j)`.
pub fn normal_means_moments(y: ArrayView1<f64>, state: &ShrinkageState) -> PosteriorMoments {
    let p = y.len();
    let mut mean = Array1::zeros(p);
    let mut var = Array1::zeros(p);
    let mut expected_rss = 0.0;
    for j in 0..p {
        let s = state.lambda_sq[j] * state.tau_sq;
        // 1 − κ = s/(1+s), written without the cancellation in 1 − 1/(1+s).
        let keep = s / (1.0 + s);
        let m = keep * y[j];
        let v = state.sigma_sq * keep;
        mean[j] = m;
        var[j] = v;
        expected_rss += (y[j] - m) * (y[j] - m) + v;
    }
    PosteriorMoments::assemble(mean, var, expected_rss, EstepMode::Exact)
}

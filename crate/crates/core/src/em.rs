//! The EM loop: seed, then alternate M-step and E-step until the relative
//! L1 change of the conditional posterior mean drops below the tolerance,
//! then hard-threshold the final conditional mode.

use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, DesignSystem};
use crate::error::{Error, Result};
use crate::moments::{self, EstepMode, PosteriorMoments, ShrinkageState};
use crate::mstep::{m_step, q_function, update_lambda_sq, Floors, HyperPolicy};

/// Expected residual sum of squares used to seed the first M-step.
pub const SEED_EXPECTED_RSS: f64 = 1e10;
/// Initial global shrinkage `τ²`.
pub const SEED_TAU_SQ: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    pub tolerance: f64,
    pub max_iters: usize,
    pub estep_mode: EstepMode,
    /// Final coefficients with `|β_j| < threshold_scale / √n` are zeroed.
    pub threshold_scale: f64,
    pub floors: Floors,
    /// Apply the threshold to the conditional mean after every E-step
    /// instead of only at the end.
    pub zero_during_iterations: bool,
    /// Weight refresh + E-step passes per M-step for weighted models.
    pub weight_passes: usize,
    /// Hold `τ²` at this value instead of estimating it.
    pub fixed_tau_sq: Option<f64>,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-5,
            max_iters: 1000,
            estep_mode: EstepMode::Exact,
            threshold_scale: 0.2,
            floors: Floors::default(),
            zero_during_iterations: false,
            weight_passes: 1,
            fixed_tau_sq: None,
        }
    }
}

impl EmConfig {
    pub fn with_mode(mut self, mode: EstepMode) -> Self {
        self.estep_mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(Error::invalid("tolerance must be positive"));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be at least 1"));
        }
        if !(self.threshold_scale >= 0.0 && self.threshold_scale.is_finite()) {
            return Err(Error::invalid("threshold scale must be non-negative"));
        }
        if self.weight_passes == 0 {
            return Err(Error::invalid("weight_passes must be at least 1"));
        }
        if let Some(t) = self.fixed_tau_sq {
            if !(t > 0.0 && t <= 1.0) {
                return Err(Error::invalid("fixed tau_sq must lie in (0, 1]"));
            }
        }
        Ok(())
    }

    pub fn threshold(&self, n: usize) -> f64 {
        self.threshold_scale / (n as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// `Σ|β⁽ᵗ⁾ − β⁽ᵗ⁺¹⁾| / (1 + Σ|β⁽ᵗ⁺¹⁾|)`.
    pub statistic: f64,
    pub sigma_sq: f64,
    pub tau_sq: f64,
    /// Coordinates of the conditional mean at or above the threshold.
    pub active: usize,
    /// Q-function at the state entering this M-step.
    pub q_before: f64,
    /// Q-function at the state the M-step produced (same moments).
    pub q_after: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    /// Sparse estimate: the thresholded conditional posterior mode.
    pub beta: Array1<f64>,
    pub intercept: f64,
    /// Conditional posterior mean before thresholding.
    pub conditional_mean: Array1<f64>,
    pub state: ShrinkageState,
    pub iters: usize,
    pub converged: bool,
    pub trace: Vec<IterationRecord>,
}

impl FitResult {
    pub fn selected(&self) -> usize {
        self.beta.iter().filter(|b| **b != 0.0).count()
    }
}

/// Starting coefficients and noise variance supplied by a model.
#[derive(Debug, Clone)]
pub struct Seed {
    pub beta: Array1<f64>,
    pub sigma_sq: f64,
}

/// A likelihood whose coefficient posterior, given the shrinkage state, is
/// Gaussian (exactly or after reweighting).
pub trait LatentModel {
    fn n(&self) -> usize;
    fn p(&self) -> usize;
    fn seed(&self) -> Seed;

    /// Noise variance held fixed by the model, if any.
    fn fixed_sigma_sq(&self) -> Option<f64> {
        None
    }

    /// True when [`LatentModel::refresh`] changes the E-step.
    fn is_reweighted(&self) -> bool {
        false
    }

    /// Updates model-internal working quantities from the latest conditional
    /// mean before the next E-step.
    fn refresh(&mut self, _mean: ArrayView1<f64>) -> Result<()> {
        Ok(())
    }

    fn moments(&self, state: &ShrinkageState, mode: EstepMode) -> Result<PosteriorMoments>;

    /// Unpenalized intercept on the working scale.
    fn intercept(&self) -> f64 {
        0.0
    }
}

/// Gaussian linear regression on a standardized dataset.
#[derive(Debug, Clone, Copy)]
pub struct GaussianModel<'a> {
    data: &'a Dataset,
}

impl<'a> GaussianModel<'a> {
    pub fn new(data: &'a Dataset) -> Self {
        Self { data }
    }
}

impl LatentModel for GaussianModel<'_> {
    fn n(&self) -> usize {
        self.data.n()
    }

    fn p(&self) -> usize {
        self.data.p()
    }

    fn seed(&self) -> Seed {
        let beta = self
            .data
            .cross()
            .iter()
            .zip(self.data.col_norms_sq().iter())
            .map(|(c, norm)| c / norm)
            .collect();
        Seed {
            beta,
            sigma_sq: self.data.target_variance(),
        }
    }

    fn moments(&self, state: &ShrinkageState, mode: EstepMode) -> Result<PosteriorMoments> {
        moments::moments(self.data, state, mode)
    }
}

/// Normal-means model `y_j ~ N(β_j, σ²)`, the `X = I` special case with
/// closed-form O(n) moments.
#[derive(Debug, Clone)]
pub struct NormalMeansModel {
    y: Array1<f64>,
    fixed_sigma_sq: Option<f64>,
}

impl NormalMeansModel {
    pub fn new(y: Array1<f64>) -> Self {
        Self {
            y,
            fixed_sigma_sq: None,
        }
    }

    pub fn with_fixed_sigma_sq(mut self, sigma_sq: f64) -> Self {
        self.fixed_sigma_sq = Some(sigma_sq);
        self
    }
}

impl LatentModel for NormalMeansModel {
    fn n(&self) -> usize {
        self.y.len()
    }

    fn p(&self) -> usize {
        self.y.len()
    }

    fn seed(&self) -> Seed {
        let n = self.y.len() as f64;
        let mean = self.y.sum() / n;
        let sigma_sq = self.y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Seed {
            beta: self.y.clone(),
            sigma_sq,
        }
    }

    fn fixed_sigma_sq(&self) -> Option<f64> {
        self.fixed_sigma_sq
    }

    fn moments(&self, state: &ShrinkageState, _mode: EstepMode) -> Result<PosteriorMoments> {
        Ok(moments::normal_means_moments(self.y.view(), state))
    }
}

fn policy<M: LatentModel + ?Sized>(model: &M, config: &EmConfig) -> HyperPolicy {
    HyperPolicy {
        fixed_sigma_sq: model.fixed_sigma_sq(),
        fixed_tau_sq: config.fixed_tau_sq,
    }
}

/// Seeds the loop: `β⁰` from the model, `E[β_j²] = (β_j⁰)²`,
/// `E[RSS] = 10¹⁰`, `τ² = 0.25`, `σ²` from the model, and `λ²` from one
/// closed-form update on the seed moments.
pub fn initialize<M: LatentModel + ?Sized>(
    model: &M,
    config: &EmConfig,
) -> Result<(ShrinkageState, PosteriorMoments)> {
    config.validate()?;
    if model.n() == 0 || model.p() == 0 {
        return Err(Error::invalid("cannot fit an empty dataset"));
    }
    let seed = model.seed();
    if seed.beta.iter().any(|b| !b.is_finite()) {
        return Err(Error::invalid("initial coefficients are not finite"));
    }
    let floors = &config.floors;
    let sigma_sq = model
        .fixed_sigma_sq()
        .unwrap_or(seed.sigma_sq)
        .max(floors.sigma_sq);
    let tau_sq = config.fixed_tau_sq.unwrap_or(SEED_TAU_SQ);
    let second_moment = seed.beta.mapv(|b| b * b);
    let scale = 2.0 * sigma_sq * tau_sq;
    let lambda_sq = second_moment.mapv(|e| update_lambda_sq(e / scale, floors.lambda_sq));
    let p = seed.beta.len();
    let moments = PosteriorMoments {
        mean: seed.beta,
        var: Array1::zeros(p),
        second_moment,
        expected_rss: SEED_EXPECTED_RSS,
        mode: config.estep_mode,
    };
    let state = ShrinkageState {
        lambda_sq,
        tau_sq,
        sigma_sq,
    };
    Ok((state, moments))
}

/// Zeroes every entry with `|β_j| < threshold_scale / √n`.
pub fn sparsify(beta: ArrayView1<f64>, n: usize, config: &EmConfig) -> Array1<f64> {
    let threshold = config.threshold(n);
    beta.mapv(|b| if b.abs() < threshold { 0.0 } else { b })
}

/// Relative L1 change between successive conditional means.
pub fn convergence_statistic(previous: ArrayView1<f64>, current: ArrayView1<f64>) -> f64 {
    let diff: f64 = previous
        .iter()
        .zip(current.iter())
        .map(|(a, b)| (a - b).abs())
        .sum();
    let size: f64 = current.iter().map(|b| b.abs()).sum();
    diff / (1.0 + size)
}

fn numerical(iteration: usize) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::Degenerate(message) => Error::Numerical { iteration, message },
        other => other,
    }
}

/// Runs EM to convergence (or `max_iters`) and returns the sparse mode on
/// the model's working scale.
pub fn fit<M: LatentModel + ?Sized>(model: &mut M, config: &EmConfig) -> Result<FitResult> {
    let (mut state, mut moments) = initialize(model, config)?;
    let n = model.n();
    let policy = policy(model, config);
    let threshold = config.threshold(n);
    let mut previous_mean = moments.mean.clone();
    let mut trace = Vec::new();
    let mut converged = false;

    for iteration in 1..=config.max_iters {
        let next = m_step(&moments, &state, n, policy, &config.floors)
            .map_err(numerical(iteration))?;
        next.validate().map_err(numerical(iteration))?;
        let q_before = q_function(&state, &moments, n);
        let q_after = q_function(&next, &moments, n);
        state = next;

        let passes = if model.is_reweighted() {
            config.weight_passes
        } else {
            1
        };
        for _ in 0..passes {
            model.refresh(moments.mean.view()).map_err(numerical(iteration))?;
            moments = model
                .moments(&state, config.estep_mode)
                .map_err(numerical(iteration))?;
        }
        if !moments.is_finite() {
            return Err(Error::Numerical {
                iteration,
                message: "posterior moments are not finite".into(),
            });
        }
        if config.zero_during_iterations {
            for j in 0..moments.mean.len() {
                if moments.mean[j].abs() < threshold {
                    moments.mean[j] = 0.0;
                    moments.second_moment[j] = moments.var[j];
                }
            }
        }

        let statistic = convergence_statistic(previous_mean.view(), moments.mean.view());
        trace.push(IterationRecord {
            statistic,
            sigma_sq: state.sigma_sq,
            tau_sq: state.tau_sq,
            active: moments.mean.iter().filter(|b| b.abs() >= threshold).count(),
            q_before,
            q_after,
        });
        previous_mean.assign(&moments.mean);
        if statistic < config.tolerance {
            converged = true;
            break;
        }
    }

    Ok(FitResult {
        beta: sparsify(moments.mean.view(), n, config),
        intercept: model.intercept(),
        conditional_mean: moments.mean,
        state,
        iters: trace.len(),
        converged,
        trace,
    })
}

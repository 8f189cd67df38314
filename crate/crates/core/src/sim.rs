//! Synthetic benchmark designs, replicated fits and selection/error metrics.
//!
//! Each replicate owns a ChaCha stream selected by `(seed, replicate)`, so
//! results do not depend on how replicates are scheduled.

use std::time::Instant;

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::em::{EmConfig, FitResult};
use crate::error::{Error, Result};
use crate::models::{linear_fit, normal_means_fit};
use crate::parallel::{map_indexed, Execution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimModel {
    NormalMeans,
    Linear,
}

/// `n_pos` copies of `+signal`, `n_neg` copies of `−signal`, zeros after.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaPattern {
    pub signal: f64,
    pub n_pos: usize,
    pub n_neg: usize,
}

impl Default for BetaPattern {
    fn default() -> Self {
        Self {
            signal: 3.0,
            n_pos: 10,
            n_neg: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    pub model: SimModel,
    pub n: usize,
    pub p: usize,
    pub pattern: BetaPattern,
    /// AR(1) correlation between neighbouring predictors.
    pub rho: f64,
    pub sigma_sq: f64,
    pub replications: usize,
    pub seed: u64,
}

impl SimSpec {
    pub fn normal_means(n: usize, signal: f64) -> Self {
        Self {
            model: SimModel::NormalMeans,
            n,
            p: n,
            pattern: BetaPattern {
                signal,
                ..BetaPattern::default()
            },
            rho: 0.0,
            sigma_sq: 1.0,
            replications: 20,
            seed: 1,
        }
    }

    /// The `n = 70, p = 350` linear design.
    pub fn linear(rho: f64, sigma_sq: f64) -> Self {
        Self {
            model: SimModel::Linear,
            n: 70,
            p: 350,
            pattern: BetaPattern::default(),
            rho,
            sigma_sq,
            replications: 20,
            seed: 1,
        }
    }

    pub fn zero_count(&self) -> usize {
        self.p - self.pattern.n_pos - self.pattern.n_neg
    }

    pub fn validate(&self) -> Result<()> {
        if self.pattern.n_pos + self.pattern.n_neg > self.p {
            return Err(Error::invalid(format!(
                "{} signals do not fit in p = {}",
                self.pattern.n_pos + self.pattern.n_neg,
                self.p
            )));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::invalid("rho must lie in [0, 1)"));
        }
        if !(self.sigma_sq > 0.0 && self.sigma_sq.is_finite()) {
            return Err(Error::invalid("sigma_sq must be positive"));
        }
        if self.replications == 0 {
            return Err(Error::invalid("at least one replication is required"));
        }
        if self.n == 0 || self.p == 0 {
            return Err(Error::invalid("n and p must be positive"));
        }
        if self.model == SimModel::NormalMeans && self.n != self.p {
            return Err(Error::invalid("normal-means designs need n = p"));
        }
        if self.model == SimModel::Linear && self.n < 2 {
            return Err(Error::invalid("linear designs need n >= 2"));
        }
        Ok(())
    }

    pub fn true_beta(&self) -> Array1<f64> {
        let BetaPattern {
            signal,
            n_pos,
            n_neg,
        } = self.pattern;
        (0..self.p)
            .map(|j| {
                if j < n_pos {
                    signal
                } else if j < n_pos + n_neg {
                    -signal
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// RNG for one replicate.
    pub fn replicate_rng(&self, replicate: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(replicate as u64);
        rng
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// `y_i = β_i + N(0, σ²)` draws for the normal-means design.
pub fn gen_normal_means(spec: &SimSpec, rng: &mut ChaCha8Rng) -> (Array1<f64>, Array1<f64>) {
    let beta = spec.true_beta();
    let sd = spec.sigma_sq.sqrt();
    let y = beta.mapv(|b| b + sd * normal(rng));
    (y, beta)
}

#[derive(Debug, Clone)]
pub struct LinearSample {
    pub x: Array2<f64>,
    pub y: Array1<f64>,
    pub beta: Array1<f64>,
}

/// Rows of `X` are `N_p(0, Σ)` with `Σ_ij = ρ^|i−j|`, drawn through the
/// AR(1) recursion `x_j = ρx_{j−1} + √(1−ρ²)ε_j`; `y = Xβ + N(0, σ²I)`.
pub fn gen_linear(spec: &SimSpec, rng: &mut ChaCha8Rng) -> LinearSample {
    let (n, p) = (spec.n, spec.p);
    let innovation = (1.0 - spec.rho * spec.rho).sqrt();
    let mut x = Array2::zeros((n, p));
    for mut row in x.rows_mut() {
        let mut prev = normal(rng);
        row[0] = prev;
        for j in 1..p {
            prev = spec.rho * prev + innovation * normal(rng);
            row[j] = prev;
        }
    }
    let beta = spec.true_beta();
    let sd = spec.sigma_sq.sqrt();
    let mut y = x.dot(&beta);
    y.mapv_inplace(|v| v + sd * normal(rng));
    LinearSample { x, y, beta }
}

/// `Σ_ij = ρ^|i−j|`.
pub fn ar1_covariance(p: usize, rho: f64) -> Array2<f64> {
    Array2::from_shape_fn((p, p), |(i, j)| rho.powi(i.abs_diff(j) as i32))
}

/// `dᵀΣd` for `d = β̂ − β`.
pub fn quadratic_error(estimate: &Array1<f64>, truth: &Array1<f64>, sigma: &Array2<f64>) -> f64 {
    let d = estimate - truth;
    d.dot(&sigma.dot(&d))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub no_v: usize,
    pub tnz: usize,
    pub fnz: usize,
}

pub fn selection(estimate: &Array1<f64>, truth: &Array1<f64>) -> Selection {
    let mut out = Selection {
        no_v: 0,
        tnz: 0,
        fnz: 0,
    };
    for (e, t) in estimate.iter().zip(truth.iter()) {
        if *e != 0.0 {
            out.no_v += 1;
            if *t != 0.0 {
                out.tnz += 1;
            } else {
                out.fnz += 1;
            }
        }
    }
    out
}

/// Metrics for one replicate. `error` is set when the fit failed, in which
/// case the numeric fields are zero and the replicate is excluded from the
/// summaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    pub replicate: usize,
    pub mse: f64,
    pub no_v: usize,
    pub tnz: usize,
    pub fnz: usize,
    pub iters: usize,
    pub converged: bool,
    #[serde(skip)]
    pub time_sec: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation over `√count`.
    pub se: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let k = values.len();
        if k == 0 {
            return Self {
                mean: f64::NAN,
                se: f64::NAN,
            };
        }
        let mean = values.iter().sum::<f64>() / k as f64;
        if k == 1 {
            return Self { mean, se: 0.0 };
        }
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1) as f64;
        Self {
            mean,
            se: (var / k as f64).sqrt(),
        }
    }
}

/// Summaries over the successful replicates. Wall-clock time is kept out of
/// the serialized form so that reports are reproducible byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mse: Summary,
    pub no_v: Summary,
    pub tnz: Summary,
    pub fnz: Summary,
    pub iters: Summary,
    #[serde(skip)]
    pub time_sec: Option<Summary>,
    pub succeeded: usize,
    pub failed: usize,
    pub replicates: Vec<ReplicateOutcome>,
}

impl MetricsReport {
    pub fn from_outcomes(replicates: Vec<ReplicateOutcome>) -> Self {
        let ok: Vec<&ReplicateOutcome> = replicates.iter().filter(|r| r.error.is_none()).collect();
        let pick = |f: &dyn Fn(&ReplicateOutcome) -> f64| {
            Summary::of(&ok.iter().map(|r| f(r)).collect::<Vec<_>>())
        };
        Self {
            mse: pick(&|r| r.mse),
            no_v: pick(&|r| r.no_v as f64),
            tnz: pick(&|r| r.tnz as f64),
            fnz: pick(&|r| r.fnz as f64),
            iters: pick(&|r| r.iters as f64),
            time_sec: Some(pick(&|r| r.time_sec)),
            succeeded: ok.len(),
            failed: replicates.len() - ok.len(),
            replicates,
        }
    }
}

fn score(
    replicate: usize,
    result: Result<(FitResult, f64)>,
    truth: &Array1<f64>,
    sigma: Option<&Array2<f64>>,
) -> ReplicateOutcome {
    match result {
        Ok((fit, time_sec)) => {
            let sel = selection(&fit.beta, truth);
            let mse = match sigma {
                Some(s) => quadratic_error(&fit.beta, truth, s),
                None => (&fit.beta - truth).mapv(|d| d * d).sum(),
            };
            ReplicateOutcome {
                replicate,
                mse,
                no_v: sel.no_v,
                tnz: sel.tnz,
                fnz: sel.fnz,
                iters: fit.iters,
                converged: fit.converged,
                time_sec,
                error: None,
            }
        }
        Err(e) => ReplicateOutcome {
            replicate,
            mse: 0.0,
            no_v: 0,
            tnz: 0,
            fnz: 0,
            iters: 0,
            converged: false,
            time_sec: 0.0,
            error: Some(e.to_string()),
        },
    }
}

fn timed(f: impl FnOnce() -> Result<FitResult>) -> Result<(FitResult, f64)> {
    let start = Instant::now();
    let fit = f()?;
    Ok((fit, start.elapsed().as_secs_f64()))
}

/// Generates, fits and scores one replicate.
pub fn run_replicate(spec: &SimSpec, config: &EmConfig, replicate: usize, sigma: Option<&Array2<f64>>) -> ReplicateOutcome {
    let mut rng = spec.replicate_rng(replicate);
    match spec.model {
        SimModel::NormalMeans => {
            let (y, beta) = gen_normal_means(spec, &mut rng);
            let result = timed(|| normal_means_fit(y.view(), config));
            score(replicate, result, &beta, None)
        }
        SimModel::Linear => {
            let sample = gen_linear(spec, &mut rng);
            let result = timed(|| linear_fit(sample.x.view(), sample.y.view(), None, config));
            score(replicate, result, &sample.beta, sigma)
        }
    }
}

/// Runs all replicates of `spec`. Fit failures are recorded per replicate.
pub fn run_replications(spec: &SimSpec, config: &EmConfig) -> Result<MetricsReport> {
    run_replications_with(spec, config, Execution::Parallel)
}

pub fn run_replications_with(
    spec: &SimSpec,
    config: &EmConfig,
    execution: Execution,
) -> Result<MetricsReport> {
    spec.validate()?;
    config.validate()?;
    let sigma = match spec.model {
        SimModel::Linear => Some(ar1_covariance(spec.p, spec.rho)),
        SimModel::NormalMeans => None,
    };
    let outcomes = map_indexed(spec.replications, execution, |r| {
        run_replicate(spec, config, r, sigma.as_ref())
    });
    Ok(MetricsReport::from_outcomes(outcomes))
}

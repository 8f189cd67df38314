//! Data models: Gaussian linear regression, normal means, and logistic
//! regression through Pólya-gamma weights.

use ndarray::{Array1, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, DesignSystem, Standardization, WeightedDataset};
use crate::em::{fit, EmConfig, FitResult, GaussianModel, LatentModel, NormalMeansModel, Seed};
use crate::error::{Error, Result};
use crate::moments::{self, EstepMode, PosteriorMoments, ShrinkageState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Linear,
    Logistic,
    NormalMeans,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::Linear => "linear",
            ModelKind::Logistic => "logistic",
            ModelKind::NormalMeans => "normal-means",
        })
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(ModelKind::Linear),
            "logistic" => Ok(ModelKind::Logistic),
            "normal-means" => Ok(ModelKind::NormalMeans),
            other => Err(Error::invalid(format!("unknown model '{other}'"))),
        }
    }
}

fn to_raw_scale(mut result: FitResult, standardization: &Standardization, intercept: f64) -> FitResult {
    let (beta, _) = standardization.back_transform(result.beta.view());
    let (mean, _) = standardization.back_transform(result.conditional_mean.view());
    let shift: f64 = beta
        .iter()
        .zip(&standardization.col_means)
        .map(|(b, m)| b * m)
        .sum();
    result.intercept = standardization.target_mean + intercept - shift;
    result.beta = beta;
    result.conditional_mean = mean;
    result
}

/// Fits `y = β₀ + Xβ + ε` with `σ²` estimated. Coefficients and intercept
/// are reported on the raw scale of `raw_x` and `raw_y`.
pub fn linear_fit(
    raw_x: ArrayView2<f64>,
    raw_y: ArrayView1<f64>,
    names: Option<&[String]>,
    config: &EmConfig,
) -> Result<FitResult> {
    if raw_x.nrows() < 2 {
        return Err(Error::invalid("linear regression needs at least two rows"));
    }
    let data = Dataset::standardize(raw_x, raw_y, names)?;
    let result = fit(&mut GaussianModel::new(&data), config)?;
    Ok(to_raw_scale(result, data.standardization(), 0.0))
}

/// Normal-means fit in O(n) per iteration; no design matrix is formed.
pub fn normal_means_fit(y: ArrayView1<f64>, config: &EmConfig) -> Result<FitResult> {
    if y.is_empty() {
        return Err(Error::invalid("normal-means fit needs at least one observation"));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("observations must be finite"));
    }
    fit(&mut NormalMeansModel::new(y.to_owned()), config)
}

/// Pólya-gamma weight `ω(η) = tanh(η/2)/(2η)` with `ω(0) = 1/4`.
pub fn pg_weight(eta: f64) -> f64 {
    let a = eta.abs();
    if a < 1e-4 {
        // tanh(x)/(4x) with x = η/2, to fourth order.
        let e2 = eta * eta;
        0.25 - e2 / 48.0 + e2 * e2 / 480.0
    } else {
        (0.5 * a).tanh() / (2.0 * a)
    }
}

/// Weights `ω_i` and adjusted targets `z_i = (y_i − 1/2)/ω_i`.
pub fn pg_weights(eta: ArrayView1<f64>, y: ArrayView1<f64>) -> (Array1<f64>, Array1<f64>) {
    let weights = eta.mapv(pg_weight);
    let adjusted = y
        .iter()
        .zip(weights.iter())
        .map(|(yi, w)| (yi - 0.5) / w)
        .collect();
    (weights, adjusted)
}

fn validate_labels(y: ArrayView1<f64>) -> Result<()> {
    if let Some(bad) = y.iter().find(|v| **v != 0.0 && **v != 1.0) {
        let hint = if *bad == -1.0 {
            " (recode {-1,+1} labels as {0,1})"
        } else {
            ""
        };
        return Err(Error::invalid(format!(
            "logistic targets must be 0 or 1, found {bad}{hint}"
        )));
    }
    let ones = y.iter().filter(|v| **v == 1.0).count();
    if ones == 0 || ones == y.len() {
        return Err(Error::invalid(
            "logistic targets must contain both classes",
        ));
    }
    Ok(())
}

/// Logistic likelihood reweighted each iteration into a heteroskedastic
/// Gaussian with `σ² = 1`.
#[derive(Debug, Clone)]
pub struct LogisticModel<'a> {
    data: &'a Dataset,
    labels: Array1<f64>,
    intercept: f64,
    weights: Array1<f64>,
    adjusted: Array1<f64>,
}

impl<'a> LogisticModel<'a> {
    /// Starts from `η_i = logit(ȳ)`, i.e. the intercept-only fit.
    pub fn new(data: &'a Dataset, labels: ArrayView1<f64>) -> Result<Self> {
        validate_labels(labels)?;
        let rate = labels.mean().expect("labels are non-empty");
        let eta = Array1::from_elem(labels.len(), (rate / (1.0 - rate)).ln());
        let (weights, adjusted) = pg_weights(eta.view(), labels);
        let mut model = Self {
            data,
            labels: labels.to_owned(),
            intercept: 0.0,
            weights,
            adjusted,
        };
        model.intercept = model.weighted_intercept(&Array1::zeros(labels.len()));
        Ok(model)
    }

    fn weighted_intercept(&self, fitted: &Array1<f64>) -> f64 {
        let (num, den) = self
            .weights
            .iter()
            .zip(self.adjusted.iter())
            .zip(fitted.iter())
            .fold((0.0, 0.0), |(num, den), ((w, z), f)| {
                (num + w * (z - f), den + w)
            });
        num / den
    }

    pub fn weights(&self) -> &Array1<f64> {
        &self.weights
    }
}

impl LatentModel for LogisticModel<'_> {
    fn n(&self) -> usize {
        self.data.n()
    }

    fn p(&self) -> usize {
        self.data.p()
    }

    fn seed(&self) -> Seed {
        let x = self.data.design();
        let beta = x
            .columns()
            .into_iter()
            .map(|col| {
                let (num, den) = col
                    .iter()
                    .zip(self.weights.iter())
                    .zip(self.adjusted.iter())
                    .fold((0.0, 0.0), |(num, den), ((xij, w), z)| {
                        (num + w * xij * (z - self.intercept), den + w * xij * xij)
                    });
                num / den
            })
            .collect();
        Seed { beta, sigma_sq: 1.0 }
    }

    fn fixed_sigma_sq(&self) -> Option<f64> {
        Some(1.0)
    }

    fn is_reweighted(&self) -> bool {
        true
    }

    fn refresh(&mut self, mean: ArrayView1<f64>) -> Result<()> {
        let fitted = self.data.design().dot(&mean);
        let eta = fitted.mapv(|f| f + self.intercept);
        let (weights, adjusted) = pg_weights(eta.view(), self.labels.view());
        self.weights = weights;
        self.adjusted = adjusted;
        self.intercept = self.weighted_intercept(&fitted);
        if !self.intercept.is_finite() {
            return Err(Error::Degenerate("logistic intercept is not finite".into()));
        }
        Ok(())
    }

    fn moments(&self, state: &ShrinkageState, mode: EstepMode) -> Result<PosteriorMoments> {
        let weighted =
            WeightedDataset::new(self.data, self.weights.clone(), self.adjusted.clone(), self.intercept)
                .map_err(|e| Error::Degenerate(e.to_string()))?;
        moments::moments(&weighted, state, mode)
    }

    fn intercept(&self) -> f64 {
        self.intercept
    }
}

/// Sparse logistic regression for 0/1 targets. Coefficients and intercept
/// are on the raw scale of `raw_x` (log-odds).
pub fn logistic_fit(
    raw_x: ArrayView2<f64>,
    labels: ArrayView1<f64>,
    names: Option<&[String]>,
    config: &EmConfig,
) -> Result<FitResult> {
    validate_labels(labels)?;
    let data = Dataset::standardize(raw_x, labels, names)?;
    let mut model = LogisticModel::new(&data, labels)?;
    let result = fit(&mut model, config)?;
    let mut standardization = data.standardization().clone();
    // Labels were not centered for the logistic working model.
    standardization.target_mean = 0.0;
    Ok(to_raw_scale(result.clone(), &standardization, result.intercept))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn pg_limit_and_adjusted_target() {
        assert_eq!(pg_weight(0.0), 0.25);
        let (w, z) = pg_weights(array![0.0].view(), array![1.0].view());
        assert_eq!(w[0], 0.25);
        assert_eq!(z[0], 2.0);
    }

    #[test]
    fn pg_known_value() {
        assert!((pg_weight(2.0) - 1f64.tanh() / 4.0).abs() < 1e-15);
        assert!((pg_weight(2.0) - 0.190_398_9).abs() < 1e-6);
    }

    #[test]
    fn pg_series_branch_is_continuous() {
        assert!((pg_weight(1e-5) - 0.25).abs() < 1e-9);
        let below = pg_weight(0.999_999e-4);
        let above = pg_weight(1.000_001e-4);
        assert!((below - above).abs() < 1e-12);
    }

    #[test]
    fn pg_tails_vanish() {
        assert!(pg_weight(1e6) < 1e-6);
        assert_eq!(pg_weight(-3.0), pg_weight(3.0));
    }

    #[test]
    fn labels_validated() {
        let x = array![[1.0], [2.0], [3.0]];
        let cfg = EmConfig::default();
        let err = logistic_fit(x.view(), array![1.0, 1.0, 1.0].view(), None, &cfg).unwrap_err();
        assert!(err.to_string().contains("both classes"));
        let err = logistic_fit(x.view(), array![-1.0, 1.0, 1.0].view(), None, &cfg).unwrap_err();
        assert!(err.to_string().contains("{0,1}"));
    }

    #[test]
    fn constant_target_gives_intercept_only() {
        let x = array![[1.0, 0.0, 2.0], [2.0, 1.0, 0.0], [3.0, 0.0, 1.0], [4.0, 1.0, 5.0]];
        let y = Array1::from_elem(4, 3.5);
        let fit = linear_fit(x.view(), y.view(), None, &EmConfig::default()).unwrap();
        assert!(fit.beta.iter().all(|b| *b == 0.0));
        assert!((fit.intercept - 3.5).abs() < 1e-12);
    }

    #[test]
    fn zero_normal_means() {
        let fit = normal_means_fit(Array1::zeros(10).view(), &EmConfig::default()).unwrap();
        assert!(fit.beta.iter().all(|b| *b == 0.0));
    }

    #[test]
    fn model_kind_parses() {
        assert_eq!("normal-means".parse::<ModelKind>().unwrap(), ModelKind::NormalMeans);
        assert!("poisson".parse::<ModelKind>().is_err());
    }
}

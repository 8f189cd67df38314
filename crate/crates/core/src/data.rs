//! Standardized datasets and the Gaussian systems the E-step factorizes.
//!
//! Columns are standardized with the population standard deviation (divide
//! by `n`), so every standardized column has `‖x_j‖² = n`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::linalg::gram;

/// Per-column location and scale removed at ingestion, plus the target mean.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardization {
    pub col_means: Vec<f64>,
    pub col_sds: Vec<f64>,
    pub target_mean: f64,
}

impl Standardization {
    /// Identity transform for data that is used as-is.
    pub fn identity(p: usize) -> Self {
        Self {
            col_means: vec![0.0; p],
            col_sds: vec![1.0; p],
            target_mean: 0.0,
        }
    }

    /// Maps standardized-scale coefficients to the raw scale and returns the
    /// matching intercept.
    pub fn back_transform(&self, beta_std: ArrayView1<f64>) -> (Array1<f64>, f64) {
        let raw: Array1<f64> = beta_std
            .iter()
            .zip(&self.col_sds)
            .map(|(b, sd)| b / sd)
            .collect();
        let shift: f64 = raw.iter().zip(&self.col_means).map(|(b, m)| b * m).sum();
        (raw, self.target_mean - shift)
    }
}

/// Anything the E-step can treat as `z ~ N(Xβ, σ²Ω⁻¹)`.
///
/// For unweighted data `Ω = I`. The trait exposes exactly what the Cholesky
/// route needs: the (weighted) Gram matrix, the (weighted) cross product
/// `XᵀΩz`, the Gram diagonal, the residual quadratic form and `Ω^{1/2}X`.
pub trait DesignSystem {
    fn n(&self) -> usize;
    fn p(&self) -> usize;
    fn gram(&self) -> &Array2<f64>;
    fn cross(&self) -> &Array1<f64>;
    fn gram_diag(&self) -> &Array1<f64>;
    /// `Ω^{1/2} X`.
    fn scaled_design(&self) -> ArrayView2<'_, f64>;
    /// `(z − Xβ)ᵀ Ω (z − Xβ)`.
    fn residual_ss(&self, beta: ArrayView1<f64>) -> f64;
}

#[derive(Debug, Clone)]
pub struct Dataset {
    design: Array2<f64>,
    target: Array1<f64>,
    col_norms_sq: Array1<f64>,
    gram: Array2<f64>,
    cross: Array1<f64>,
    standardization: Standardization,
}

impl Dataset {
    /// Standardizes `raw_x` column-wise and centers `raw_y`.
    ///
    /// `names` is used only for error messages; columns are numbered from 1
    /// when it is absent.
    pub fn standardize(
        raw_x: ArrayView2<f64>,
        raw_y: ArrayView1<f64>,
        names: Option<&[String]>,
    ) -> Result<Self> {
        let (n, p) = raw_x.dim();
        if n == 0 || p == 0 {
            return Err(Error::invalid("dataset has no rows or no columns"));
        }
        if raw_y.len() != n {
            return Err(Error::invalid(format!(
                "target has {} entries but the design has {n} rows",
                raw_y.len()
            )));
        }
        if raw_x.iter().chain(raw_y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("dataset contains non-finite values"));
        }

        let nf = n as f64;
        let mut design = raw_x.to_owned();
        let mut col_means = Vec::with_capacity(p);
        let mut col_sds = Vec::with_capacity(p);
        for (j, mut col) in design.axis_iter_mut(Axis(1)).enumerate() {
            let mean = col.sum() / nf;
            col.mapv_inplace(|v| v - mean);
            let sd = (col.iter().map(|v| v * v).sum::<f64>() / nf).sqrt();
            if sd.is_nan() || sd <= 1e-12 * mean.abs().max(1.0) {
                let name = names
                    .and_then(|ns| ns.get(j).cloned())
                    .unwrap_or_else(|| format!("{}", j + 1));
                return Err(Error::ConstantColumn { name });
            }
            col.mapv_inplace(|v| v / sd);
            // Re-center to remove rounding drift from the division.
            let drift = col.sum() / nf;
            col.mapv_inplace(|v| v - drift);
            col_means.push(mean);
            col_sds.push(sd);
        }
        let target_mean = raw_y.sum() / nf;
        let target = raw_y.mapv(|v| v - target_mean);

        Ok(Self::assemble(
            design,
            target,
            Standardization {
                col_means,
                col_sds,
                target_mean,
            },
        ))
    }

    /// Wraps a design and target that are used exactly as given, with an
    /// identity standardization record. Used for embeddings such as the
    /// normal-means model (`X = I`) where standardization does not apply.
    pub fn from_parts(design: Array2<f64>, target: Array1<f64>) -> Result<Self> {
        let (n, p) = design.dim();
        if n == 0 || p == 0 || target.len() != n {
            return Err(Error::invalid("design and target dimensions disagree"));
        }
        Ok(Self::assemble(design, target, Standardization::identity(p)))
    }

    fn assemble(design: Array2<f64>, target: Array1<f64>, standardization: Standardization) -> Self {
        let design = design.as_standard_layout().into_owned();
        let gram = gram(design.view());
        let col_norms_sq = gram.diag().to_owned();
        let cross = design.t().dot(&target);
        Self {
            design,
            target,
            col_norms_sq,
            gram,
            cross,
            standardization,
        }
    }

    pub fn design(&self) -> &Array2<f64> {
        &self.design
    }

    pub fn target(&self) -> &Array1<f64> {
        &self.target
    }

    pub fn col_norms_sq(&self) -> &Array1<f64> {
        &self.col_norms_sq
    }

    pub fn standardization(&self) -> &Standardization {
        &self.standardization
    }

    /// Population variance of the (centered) target.
    /// Population variance of the target.
    pub fn target_variance(&self) -> f64 {
        let mean = self.target.mean().unwrap_or(0.0);
        self.target.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / self.n() as f64
    }
}

impl DesignSystem for Dataset {
    fn n(&self) -> usize {
        self.design.nrows()
    }

    fn p(&self) -> usize {
        self.design.ncols()
    }

    fn gram(&self) -> &Array2<f64> {
        &self.gram
    }

    fn cross(&self) -> &Array1<f64> {
        &self.cross
    }

    fn gram_diag(&self) -> &Array1<f64> {
        &self.col_norms_sq
    }

    fn scaled_design(&self) -> ArrayView2<'_, f64> {
        self.design.view()
    }

    fn residual_ss(&self, beta: ArrayView1<f64>) -> f64 {
        let fitted = self.design.dot(&beta);
        self.target
            .iter()
            .zip(fitted.iter())
            .map(|(y, f)| (y - f) * (y - f))
            .sum()
    }
}

/// A dataset paired with observation weights `ω` and adjusted targets `z`,
/// as produced by the Pólya-gamma representation of the logistic likelihood.
///
/// The E-step sees `z − offset ~ N(Xβ, Ω⁻¹)`, where `offset` carries the
/// unpenalized intercept.
#[derive(Debug, Clone)]
pub struct WeightedDataset<'a> {
    base: &'a Dataset,
    weights: Array1<f64>,
    adjusted_target: Array1<f64>,
    offset: f64,
    gram: Array2<f64>,
    cross: Array1<f64>,
    gram_diag: Array1<f64>,
    scaled_design: Array2<f64>,
}

impl<'a> WeightedDataset<'a> {
    pub fn new(
        base: &'a Dataset,
        weights: Array1<f64>,
        adjusted_target: Array1<f64>,
        offset: f64,
    ) -> Result<Self> {
        let n = base.n();
        if weights.len() != n || adjusted_target.len() != n {
            return Err(Error::invalid(format!(
                "weights ({}) and adjusted targets ({}) must have length {n}",
                weights.len(),
                adjusted_target.len()
            )));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::invalid("weights must be finite and positive"));
        }
        if adjusted_target.iter().any(|z| !z.is_finite()) || !offset.is_finite() {
            return Err(Error::invalid("adjusted targets must be finite"));
        }

        let mut scaled_design = base.design().clone();
        for (mut row, w) in scaled_design.rows_mut().into_iter().zip(weights.iter()) {
            let s = w.sqrt();
            row.mapv_inplace(|v| v * s);
        }
        let gram = gram(scaled_design.view());
        let gram_diag = gram.diag().to_owned();
        let weighted_target: Array1<f64> = adjusted_target
            .iter()
            .zip(weights.iter())
            .map(|(z, w)| w * (z - offset))
            .collect();
        let cross = base.design().t().dot(&weighted_target);

        Ok(Self {
            base,
            weights,
            adjusted_target,
            offset,
            gram,
            cross,
            gram_diag,
            scaled_design,
        })
    }

    pub fn base(&self) -> &Dataset {
        self.base
    }

    pub fn weights(&self) -> &Array1<f64> {
        &self.weights
    }

    pub fn adjusted_target(&self) -> &Array1<f64> {
        &self.adjusted_target
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }
}

impl DesignSystem for WeightedDataset<'_> {
    fn n(&self) -> usize {
        self.base.n()
    }

    fn p(&self) -> usize {
        self.base.p()
    }

    fn gram(&self) -> &Array2<f64> {
        &self.gram
    }

    fn cross(&self) -> &Array1<f64> {
        &self.cross
    }

    fn gram_diag(&self) -> &Array1<f64> {
        &self.gram_diag
    }

    fn scaled_design(&self) -> ArrayView2<'_, f64> {
        self.scaled_design.view()
    }

    fn residual_ss(&self, beta: ArrayView1<f64>) -> f64 {
        let fitted = self.base.design().dot(&beta);
        self.adjusted_target
            .iter()
            .zip(fitted.iter())
            .zip(self.weights.iter())
            .map(|((z, f), w)| {
                let r = z - self.offset - f;
                w * r * r
            })
            .sum()
    }
}

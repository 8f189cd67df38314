//! File formats: CSV ingestion, the fit report, the simulation report and
//! the shrinkage-profile CSV.
//!
//! Machine-readable numbers are written with 17 significant digits so they
//! round-trip exactly; human-readable tables use 4.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::em::{EmConfig, FitResult, LatentModel, NormalMeansModel};
use crate::error::{Error, Result};
use crate::models::ModelKind;
use crate::parallel::{map_indexed, Execution};
use crate::sim::{MetricsReport, SimSpec, Summary};

/// Formats a float with 17 significant digits.
pub fn fmt_exact(v: f64) -> String {
    format!("{v:.16e}")
}

/// Which columns of a CSV file to load.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvSelection {
    pub target: String,
    /// Feature columns in order; `None` means every column except the target.
    pub features: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub feature_names: Vec<String>,
    pub target_name: String,
    pub x: Array2<f64>,
    pub y: Array1<f64>,
}

impl RawTable {
    pub fn rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn cols(&self) -> usize {
        self.x.ncols()
    }
}

fn parse_cell(cell: &str, row: usize, column: &str) -> Result<f64> {
    let trimmed = cell.trim();
    match trimmed.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::Unparseable {
            row,
            column: column.to_string(),
        }),
    }
}

/// Reads a headered numeric CSV. Rows are numbered from 1, excluding the
/// header. Cells are parsed with `.` as the decimal separator regardless of
/// locale; empty, `NA` or otherwise non-numeric cells are errors.
pub fn read_csv_from<R: Read>(reader: R, selection: &CsvSelection) -> Result<RawTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::Headers)
        .from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if headers.is_empty() || headers.iter().all(|h| h.is_empty()) {
        return Err(Error::invalid("CSV input is empty"));
    }
    let index_of = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::invalid(format!("column '{name}' not found in header")))
    };
    let target_idx = index_of(&selection.target)?;
    let feature_idx: Vec<usize> = match &selection.features {
        Some(names) => names.iter().map(|n| index_of(n)).collect::<Result<_>>()?,
        None => (0..headers.len()).filter(|&i| i != target_idx).collect(),
    };
    if feature_idx.contains(&target_idx) {
        return Err(Error::invalid("the target column cannot also be a feature"));
    }

    let p = feature_idx.len();
    let mut values = Vec::new();
    let mut y = Vec::new();
    for (k, record) in rdr.records().enumerate() {
        let record = record?;
        let row = k + 1;
        let get = |i: usize| -> Result<f64> {
            let cell = record.get(i).ok_or_else(|| Error::Unparseable {
                row,
                column: headers[i].clone(),
            })?;
            parse_cell(cell, row, &headers[i])
        };
        y.push(get(target_idx)?);
        for &i in &feature_idx {
            values.push(get(i)?);
        }
    }
    if y.is_empty() {
        return Err(Error::invalid("CSV input has a header but no data rows"));
    }
    let n = y.len();
    Ok(RawTable {
        feature_names: feature_idx.iter().map(|&i| headers[i].clone()).collect(),
        target_name: headers[target_idx].clone(),
        x: Array2::from_shape_vec((n, p), values).expect("one value per selected cell"),
        y: Array1::from(y),
    })
}

pub fn read_csv(path: &Path, selection: &CsvSelection) -> Result<RawTable> {
    let file = std::fs::File::open(path)?;
    read_csv_from(file, selection)
}

/// Settings echoed into a fit report.
#[derive(Debug, Clone, PartialEq)]
pub struct FitEcho {
    pub model: ModelKind,
    pub target: String,
    pub n: usize,
    pub config: EmConfig,
}

/// Writes a fit report: `key=value` lines followed by a `[coefficients]`
/// CSV block with columns `name,estimate,zero`.
pub fn write_fit<W: Write>(
    out: &mut W,
    result: &FitResult,
    names: &[String],
    echo: &FitEcho,
) -> Result<()> {
    if names.len() != result.beta.len() {
        return Err(Error::invalid(format!(
            "{} names for {} coefficients",
            names.len(),
            result.beta.len()
        )));
    }
    let c = &echo.config;
    writeln!(out, "# hsem fit report")?;
    writeln!(out, "model={}", echo.model)?;
    writeln!(out, "target={}", echo.target)?;
    writeln!(out, "estep={}", c.estep_mode)?;
    writeln!(out, "tolerance={}", fmt_exact(c.tolerance))?;
    writeln!(out, "max_iters={}", c.max_iters)?;
    writeln!(out, "threshold_scale={}", fmt_exact(c.threshold_scale))?;
    writeln!(out, "n={}", echo.n)?;
    writeln!(out, "p={}", result.beta.len())?;
    writeln!(out, "intercept={}", fmt_exact(result.intercept))?;
    writeln!(out, "sigma_sq={}", fmt_exact(result.state.sigma_sq))?;
    writeln!(out, "tau_sq={}", fmt_exact(result.state.tau_sq))?;
    writeln!(out, "iterations={}", result.iters)?;
    writeln!(out, "converged={}", result.converged)?;
    writeln!(out, "selected={}", result.selected())?;
    writeln!(out, "[coefficients]")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["name", "estimate", "zero"])?;
    for (name, b) in names.iter().zip(result.beta.iter()) {
        w.write_record([name.as_str(), &fmt_exact(*b), if *b == 0.0 { "true" } else { "false" }])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_fit_file(path: &Path, result: &FitResult, names: &[String], echo: &FitEcho) -> Result<()> {
    let mut buf = Vec::new();
    write_fit(&mut buf, result, names, echo)?;
    std::fs::write(path, buf)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientRow {
    pub name: String,
    pub estimate: f64,
    pub zero: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub fields: BTreeMap<String, String>,
    pub coefficients: Vec<CoefficientRow>,
}

impl FitReport {
    pub fn get_f64(&self, key: &str) -> Option<f64> {
        self.fields.get(key).and_then(|v| v.parse().ok())
    }
}

/// Parses a report produced by [`write_fit`].
pub fn read_fit<R: Read>(reader: R) -> Result<FitReport> {
    let mut lines = BufReader::new(reader);
    let mut fields = BTreeMap::new();
    let mut line = String::new();
    loop {
        line.clear();
        if lines.read_line(&mut line)? == 0 {
            return Err(Error::invalid("fit report has no [coefficients] block"));
        }
        let l = line.trim_end();
        if l == "[coefficients]" {
            break;
        }
        if l.starts_with('#') || l.is_empty() {
            continue;
        }
        let (k, v) = l
            .split_once('=')
            .ok_or_else(|| Error::invalid(format!("malformed report line '{l}'")))?;
        fields.insert(k.to_string(), v.to_string());
    }
    let mut rdr = csv::Reader::from_reader(lines);
    let mut coefficients = Vec::new();
    for (k, record) in rdr.records().enumerate() {
        let record = record?;
        let name = record.get(0).unwrap_or_default().to_string();
        let estimate = parse_cell(record.get(1).unwrap_or_default(), k + 1, "estimate")?;
        let zero = match record.get(2) {
            Some("true") => true,
            Some("false") => false,
            _ => {
                return Err(Error::Unparseable {
                    row: k + 1,
                    column: "zero".into(),
                })
            }
        };
        coefficients.push(CoefficientRow {
            name,
            estimate,
            zero,
        });
    }
    Ok(FitReport {
        fields,
        coefficients,
    })
}

/// Structured output of a simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub spec: SimSpec,
    pub config: EmConfig,
    pub metrics: MetricsReport,
}

/// Pretty-printed JSON. Timings are not included, so identical inputs give
/// identical bytes.
pub fn write_simulation_report<W: Write>(out: &mut W, report: &SimulationReport) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, report)?;
    writeln!(out)?;
    Ok(())
}

fn cell(s: &Summary) -> String {
    format!("{:.4} ({:.4})", s.mean, s.se)
}

/// Human-readable summary table with 4 decimals and standard errors in
/// parentheses.
pub fn format_metrics_table(report: &MetricsReport) -> String {
    let mut rows = vec![
        ("MSE", cell(&report.mse)),
        ("No.V", cell(&report.no_v)),
        ("TNZ", cell(&report.tnz)),
        ("FNZ", cell(&report.fnz)),
        ("Iters", cell(&report.iters)),
    ];
    if let Some(t) = &report.time_sec {
        rows.push(("Time (s)", cell(t)));
    }
    let mut s = String::new();
    for (k, v) in rows {
        s.push_str(&format!("{k:<10}{v}\n"));
    }
    s.push_str(&format!(
        "{:<10}{} ok, {} failed\n",
        "Runs", report.succeeded, report.failed
    ));
    s
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Grid {
    /// Grid points `k·step` for every integer `k` with `lo ≤ k·step ≤ hi`.
    /// Symmetric bounds give exactly negated pairs.
    pub fn points(&self) -> Result<Vec<f64>> {
        if !(self.step > 0.0 && self.step.is_finite()) || self.lo.is_nan() || self.hi.is_nan() || self.lo > self.hi {
            return Err(Error::invalid("grid needs lo <= hi and step > 0"));
        }
        let eps = 1e-9;
        let first = (self.lo / self.step - eps).ceil() as i64;
        let last = (self.hi / self.step + eps).floor() as i64;
        if last - first > 10_000_000 {
            return Err(Error::invalid("grid has too many points"));
        }
        Ok((first..=last).map(|k| k as f64 * self.step).collect())
    }
}

impl std::str::FromStr for Grid {
    type Err = Error;

    /// Parses `lo:hi:step`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::invalid(format!("grid '{s}' is not lo:hi:step"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let v: Vec<f64> = parts
            .iter()
            .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        Ok(Grid {
            lo: v[0],
            hi: v[1],
            step: v[2],
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfilePoint {
    pub beta_ls: f64,
    pub beta_hat: f64,
}

/// Posterior mode of the scalar problem `y = β + ε`, `σ² = 1`, with `τ`
/// held fixed, after final thresholding (`n = 1`).
pub fn profile_mode(beta_ls: f64, tau: f64, config: &EmConfig) -> Result<f64> {
    let config = EmConfig {
        fixed_tau_sq: Some(tau * tau),
        ..config.clone()
    };
    let mut model = NormalMeansModel::new(Array1::from_elem(1, beta_ls)).with_fixed_sigma_sq(1.0);
    debug_assert_eq!(model.n(), 1);
    Ok(crate::em::fit(&mut model, &config)?.beta[0])
}

/// Shrinkage profile: the thresholded mode for each least-squares value on
/// the grid.
pub fn emit_shrinkage_profile(tau: f64, grid: Grid, config: &EmConfig) -> Result<Vec<ProfilePoint>> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::invalid("profile tau must lie in (0, 1)"));
    }
    let points = grid.points()?;
    map_indexed(points.len(), Execution::Parallel, |i| {
        profile_mode(points[i], tau, config).map(|beta_hat| ProfilePoint {
            beta_ls: points[i],
            beta_hat,
        })
    })
    .into_iter()
    .collect()
}

pub fn write_profile<W: Write>(out: &mut W, profile: &[ProfilePoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["beta_ls", "beta_hat"])?;
    for pt in profile {
        w.write_record([fmt_exact(pt.beta_ls), fmt_exact(pt.beta_hat)])?;
    }
    w.flush()?;
    Ok(())
}

#![allow(dead_code)]

use horseshoe_em::{Dataset, ShrinkageState};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_matrix(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((n, p), || rng.sample(StandardNormal))
}

pub fn normal_vector(rng: &mut ChaCha8Rng, n: usize) -> Array1<f64> {
    Array1::from_shape_simple_fn(n, || rng.sample(StandardNormal))
}

/// Gauss-Jordan inverse with partial pivoting.
pub fn dense_inverse(a: &Array2<f64>) -> Array2<f64> {
    let p = a.nrows();
    let mut m = a.clone();
    let mut inv = Array2::<f64>::eye(p);
    for col in 0..p {
        let pivot = (col..p)
            .max_by(|&i, &j| m[[i, col]].abs().total_cmp(&m[[j, col]].abs()))
            .unwrap();
        if pivot != col {
            for k in 0..p {
                m.swap([col, k], [pivot, k]);
                inv.swap([col, k], [pivot, k]);
            }
        }
        let d = m[[col, col]];
        assert!(d.abs() > 0.0, "singular matrix");
        for k in 0..p {
            m[[col, k]] /= d;
            inv[[col, k]] /= d;
        }
        for i in 0..p {
            if i != col {
                let f = m[[i, col]];
                if f != 0.0 {
                    for k in 0..p {
                        m[[i, k]] -= f * m[[col, k]];
                        inv[[i, k]] -= f * inv[[col, k]];
                    }
                }
            }
        }
    }
    inv
}

/// Lower Cholesky factor, used only to draw correlated samples.
pub fn lower_cholesky(a: &Array2<f64>) -> Array2<f64> {
    let p = a.nrows();
    let mut l = Array2::<f64>::zeros((p, p));
    for i in 0..p {
        for j in 0..=i {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = if i == j { s.sqrt() } else { s / l[[j, j]] };
        }
    }
    l
}

pub fn rel_err(actual: f64, expected: f64) -> f64 {
    (actual - expected).abs() / expected.abs().max(1e-300)
}

/// `|a − b| ≤ tol·max(|a|, |b|, floor)`.
pub fn close(a: f64, b: f64, tol: f64, floor: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(floor)
}

/// Random design, target and shrinkage state. `λ²` spans several orders of
/// magnitude so that some coordinates are strongly shrunk.
pub fn random_instance(rng: &mut ChaCha8Rng, n: usize, p: usize) -> (Dataset, ShrinkageState) {
    let x = normal_matrix(rng, n, p);
    let y = normal_vector(rng, n) * 2.0;
    let lambda_sq = Array1::from_shape_simple_fn(p, || 10f64.powf(rng.random_range(-3.0..3.0)));
    let state = ShrinkageState {
        lambda_sq,
        tau_sq: rng.random_range(0.01..1.0),
        sigma_sq: rng.random_range(0.2..4.0),
    };
    (Dataset::from_parts(x, y).unwrap(), state)
}

/// `A = XᵀΩX + diag(1/(τ²λ²))` assembled densely.
pub fn dense_precision(x: &Array2<f64>, weights: Option<&Array1<f64>>, state: &ShrinkageState) -> Array2<f64> {
    let p = x.ncols();
    let mut a = Array2::<f64>::zeros((p, p));
    for i in 0..x.nrows() {
        let w = weights.map_or(1.0, |w| w[i]);
        for j in 0..p {
            for k in 0..p {
                a[[j, k]] += w * x[[i, j]] * x[[i, k]];
            }
        }
    }
    for j in 0..p {
        a[[j, j]] += 1.0 / (state.tau_sq * state.lambda_sq[j]);
    }
    a
}

/// Reference moments from an explicit inverse: mean, variances and
/// `E‖Ω^{1/2}(z − Xβ)‖²` for `z = y − offset`.
pub fn dense_moments(
    x: &Array2<f64>,
    y: &Array1<f64>,
    weights: Option<&Array1<f64>>,
    offset: f64,
    state: &ShrinkageState,
) -> (Array1<f64>, Array1<f64>, f64) {
    let n = x.nrows();
    let w = weights.cloned().unwrap_or_else(|| Array1::ones(n));
    let z = y.mapv(|v| v - offset);
    let inv = dense_inverse(&dense_precision(x, Some(&w), state));
    let wz = &z * &w;
    let mean = inv.dot(&x.t().dot(&wz));
    let var = inv.diag().mapv(|d| state.sigma_sq * d);
    let resid = &z - &x.dot(&mean);
    let rss: f64 = resid.iter().zip(w.iter()).map(|(r, wi)| wi * r * r).sum();
    let mut xtwx = x.t().to_owned();
    for i in 0..n {
        xtwx.column_mut(i).mapv_inplace(|v| v * w[i]);
    }
    let xtwx = xtwx.dot(x);
    let trace: f64 = (0..x.ncols()).map(|j| xtwx.row(j).dot(&inv.column(j))).sum();
    (mean, var, rss + state.sigma_sq * trace)
}

/// Columns with exactly orthogonal directions (Gram-Schmidt, twice) and
/// arbitrary positive norms.
pub fn orthogonal_design(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Array2<f64> {
    assert!(p <= n);
    let mut q = normal_matrix(rng, n, p);
    for _ in 0..2 {
        for j in 0..p {
            for k in 0..j {
                let proj = q.column(j).dot(&q.column(k));
                let basis = q.column(k).to_owned();
                q.column_mut(j).scaled_add(-proj, &basis);
            }
            let norm = q.column(j).dot(&q.column(j)).sqrt();
            q.column_mut(j).mapv_inplace(|v| v / norm);
        }
    }
    for j in 0..p {
        let scale = rng.random_range(0.5..3.0);
        q.column_mut(j).mapv_inplace(|v| v * scale);
    }
    q
}

//! Dense kernels for the E-step: upper Cholesky factorization and the
//! triangular solves built on it.
//!
//! Matrices are row-major `ndarray` arrays. All inner loops run over
//! contiguous row slices.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

/// Upper-triangular `U` with strictly positive diagonal such that `A = UᵀU`.
#[derive(Debug, Clone)]
pub struct UpperFactor {
    upper: Array2<f64>,
}

impl UpperFactor {
    /// Factorizes a symmetric positive definite matrix. Only the upper
    /// triangle of `a` is read.
    pub fn factorize(a: &Array2<f64>) -> Result<Self> {
        let p = a.nrows();
        if a.ncols() != p {
            return Err(Error::invalid(format!(
                "cannot factorize a {}x{} matrix",
                p,
                a.ncols()
            )));
        }
        let mut m = a.as_standard_layout().into_owned();
        let buf = m
            .as_slice_mut()
            .expect("standard layout arrays are contiguous");

        for i in 0..p {
            let pivot = buf[i * p + i];
            if !(pivot > 0.0 && pivot.is_finite()) {
                return Err(Error::Degenerate(format!(
                    "pivot {i} of the precision matrix is {pivot}"
                )));
            }
            let d = pivot.sqrt();
            let (head, tail) = buf.split_at_mut((i + 1) * p);
            let row_i = &mut head[i * p..];
            row_i[i] = d;
            let inv = 1.0 / d;
            for v in &mut row_i[i + 1..] {
                *v *= inv;
            }
            // Rank-one downdate of the trailing upper block.
            for k in i + 1..p {
                let f = row_i[k];
                if f == 0.0 {
                    continue;
                }
                let row_k = &mut tail[(k - i - 1) * p + k..(k - i) * p];
                for (x, u) in row_k.iter_mut().zip(&row_i[k..]) {
                    *x -= f * u;
                }
            }
        }
        for i in 1..p {
            for v in &mut buf[i * p..i * p + i] {
                *v = 0.0;
            }
        }
        Ok(Self { upper: m })
    }

    pub fn dim(&self) -> usize {
        self.upper.nrows()
    }

    pub fn upper(&self) -> &Array2<f64> {
        &self.upper
    }

    fn rows(&self) -> &[f64] {
        self.upper.as_slice().expect("factor is contiguous")
    }

    /// Solves `Uᵀ v = b`.
    pub fn forward_solve(&self, b: ArrayView1<f64>) -> Array1<f64> {
        let p = self.dim();
        let u = self.rows();
        let mut v = b.to_owned();
        for i in 0..p {
            let row = &u[i * p..(i + 1) * p];
            let vi = v[i] / row[i];
            v[i] = vi;
            if vi != 0.0 {
                for j in i + 1..p {
                    v[j] -= row[j] * vi;
                }
            }
        }
        v
    }

    /// Solves `U x = v`.
    pub fn back_solve(&self, v: ArrayView1<f64>) -> Array1<f64> {
        let p = self.dim();
        let u = self.rows();
        let mut x = v.to_owned();
        for i in (0..p).rev() {
            let row = &u[i * p..(i + 1) * p];
            let mut acc = x[i];
            for j in i + 1..p {
                acc -= row[j] * x[j];
            }
            x[i] = acc / row[i];
        }
        x
    }

    /// Solves `A x = b` via a forward then a back substitution.
    pub fn solve(&self, b: ArrayView1<f64>) -> Array1<f64> {
        let v = self.forward_solve(b);
        self.back_solve(v.view())
    }

    /// Diagonal of `A⁻¹`, i.e. the squared column norms of `U⁻ᵀ`.
    ///
    /// `C = U⁻ᵀ` is lower triangular; row `i` only has entries in `0..=i`.
    pub fn inverse_diagonal(&self) -> Array1<f64> {
        let p = self.dim();
        let u = self.rows();
        let mut c = vec![0.0; p * p];
        for i in 0..p {
            c[i * p + i] = 1.0;
        }
        let mut diag = vec![0.0; p];
        for i in 0..p {
            let row_u = &u[i * p..(i + 1) * p];
            let (head, tail) = c.split_at_mut((i + 1) * p);
            let row_c = &mut head[i * p..i * p + i + 1];
            let inv = 1.0 / row_u[i];
            for v in row_c.iter_mut() {
                *v *= inv;
            }
            for (d, v) in diag.iter_mut().zip(row_c.iter()) {
                *d += v * v;
            }
            for j in i + 1..p {
                let f = row_u[j];
                if f == 0.0 {
                    continue;
                }
                let row_j = &mut tail[(j - i - 1) * p..(j - i - 1) * p + i + 1];
                for (x, v) in row_j.iter_mut().zip(row_c.iter()) {
                    *x -= f * v;
                }
            }
        }
        Array1::from(diag)
    }

    /// `‖B U⁻¹‖²_F` for an `n×p` matrix `B`, via one forward solve of
    /// `Uᵀ W = Bᵀ`.
    pub fn frobenius_sq_right_inverse(&self, b: ArrayView2<f64>) -> f64 {
        let p = self.dim();
        let n = b.nrows();
        assert_eq!(b.ncols(), p, "column count must match the factor");
        let u = self.rows();
        let bt = b.t().as_standard_layout().into_owned();
        let mut w = bt.into_raw_vec_and_offset().0;
        let mut total = 0.0;
        for i in 0..p {
            let row_u = &u[i * p..(i + 1) * p];
            let (head, tail) = w.split_at_mut((i + 1) * n);
            let row_w = &mut head[i * n..];
            let inv = 1.0 / row_u[i];
            for v in row_w.iter_mut() {
                *v *= inv;
            }
            total += row_w.iter().map(|v| v * v).sum::<f64>();
            for j in i + 1..p {
                let f = row_u[j];
                if f == 0.0 {
                    continue;
                }
                let row_j = &mut tail[(j - i - 1) * n..(j - i) * n];
                for (x, v) in row_j.iter_mut().zip(row_w.iter()) {
                    *x -= f * v;
                }
            }
        }
        total
    }
}

/// `XᵀX` for a row-major `n×p` matrix, accumulated as a sum of row outer
/// products over the upper triangle and mirrored.
pub fn gram(x: ArrayView2<f64>) -> Array2<f64> {
    let p = x.ncols();
    let mut g = vec![0.0; p * p];
    for row in x.rows() {
        let row = row.to_vec();
        for (i, &xi) in row.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let dst = &mut g[i * p + i..(i + 1) * p];
            for (d, &xj) in dst.iter_mut().zip(&row[i..]) {
                *d += xi * xj;
            }
        }
    }
    for i in 0..p {
        for j in 0..i {
            g[i * p + j] = g[j * p + i];
        }
    }
    Array2::from_shape_vec((p, p), g).expect("shape matches buffer")
}

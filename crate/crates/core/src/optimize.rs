//! Bounded scalar minimization (Brent: golden-section steps with parabolic
//! interpolation when it is safe).

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum {
    pub x: f64,
    pub value: f64,
    pub evaluations: usize,
}

const GOLDEN: f64 = 0.381_966_011_250_105_1; // (3 - sqrt 5) / 2

/// Minimizes `f` on `[lo, hi]` to absolute tolerance `xtol` in `x`.
///
/// Converges to the global minimizer when `f` is unimodal on the interval.
/// The interior search never evaluates the endpoints, so both are checked at
/// the end and the best of the three points is returned.
pub fn minimize_bounded<F>(mut f: F, lo: f64, hi: f64, xtol: f64, max_iter: usize) -> Minimum
where
    F: FnMut(f64) -> f64,
{
    assert!(lo <= hi, "empty bracket [{lo}, {hi}]");
    let mut evaluations = 0;
    let mut eval = |x: f64| {
        evaluations += 1;
        f(x)
    };
    if lo == hi {
        let value = eval(lo);
        return Minimum {
            x: lo,
            value,
            evaluations,
        };
    }

    let (mut a, mut b) = (lo, hi);
    let mut x = a + GOLDEN * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = eval(x);
    let (mut fw, mut fv) = (fx, fx);
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;

    for _ in 0..max_iter {
        let mid = 0.5 * (a + b);
        let tol1 = f64::EPSILON.sqrt() * x.abs() * 1e-3 + xtol / 3.0;
        let tol2 = 2.0 * tol1;
        if (x - mid).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }

        let mut golden = true;
        if e.abs() > tol1 {
            // Parabola through (v, fv), (w, fw), (x, fx).
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let e_prev = e;
            e = d;
            if p.abs() < (0.5 * q * e_prev).abs() && p > q * (a - x) && p < q * (b - x) {
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if x < mid { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= mid { a - x } else { b - x };
            d = GOLDEN * e;
        }

        let u = if d.abs() >= tol1 {
            x + d
        } else if d > 0.0 {
            x + tol1
        } else {
            x - tol1
        };
        let fu = eval(u);

        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }

    let mut best = (x, fx);
    for edge in [lo, hi] {
        let fe = eval(edge);
        if fe < best.1 {
            best = (edge, fe);
        }
    }
    Minimum {
        x: best.0,
        value: best.1,
        evaluations,
    }
}

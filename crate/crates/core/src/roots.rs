//! Bracketed scalar root finding.
//!
//! Bisection safeguarded secant steps: a secant step is taken when it lands
//! inside the current bracket and the bracket shrank by at least half on the
//! previous step, otherwise the bracket is bisected.

use crate::error::{Error, Result};

/// Points used by the fallback sign-change scan.
pub const SCAN_POINTS: usize = 10_000;

#[derive(Debug, Clone, Copy)]
pub struct RootOptions {
    /// Absolute width of the final bracket. `0.0` runs to the last ulp.
    pub x_tol: f64,
    pub max_iter: usize,
}

impl Default for RootOptions {
    fn default() -> Self {
        Self {
            x_tol: 1e-12,
            max_iter: 400,
        }
    }
}

impl RootOptions {
    pub fn full_precision() -> Self {
        Self {
            x_tol: 0.0,
            max_iter: 2000,
        }
    }
}

/// Root of `f` in `[lo, hi]`, given `f(lo)` and `f(hi)` of opposite sign (or zero).
pub fn bisect_secant<F>(mut f: F, lo: f64, hi: f64, opts: RootOptions) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut fa = f(a);
    let mut fb = f(b);
    if fa.is_nan() || fb.is_nan() {
        return Err(Error::numeric(
            "root bracket",
            format!("NaN at bracket ends [{a}, {b}]"),
        ));
    }
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::numeric(
            "root bracket",
            format!("no sign change on [{a}, {b}]: f = ({fa:e}, {fb:e})"),
        ));
    }
    let mut last_width = b - a;
    let mut use_secant = true;
    for _ in 0..opts.max_iter {
        let width = b - a;
        let mid = a + 0.5 * width;
        if width <= opts.x_tol || mid <= a || mid >= b {
            break;
        }
        let mut x = mid;
        if use_secant {
            let xs = b - fb * (b - a) / (fb - fa);
            if xs.is_finite() && xs > a && xs < b {
                x = xs;
            }
        }
        let fx = f(x);
        if fx.is_nan() {
            return Err(Error::numeric("root iteration", format!("NaN at x = {x}")));
        }
        if fx == 0.0 {
            return Ok(x);
        }
        if fx.signum() == fa.signum() {
            a = x;
            fa = fx;
        } else {
            b = x;
            fb = fx;
        }
        let new_width = b - a;
        use_secant = new_width <= 0.5 * last_width;
        last_width = new_width;
    }
    Ok(if fa.abs() <= fb.abs() { a } else { b })
}

/// Like [`bisect_secant`], but when the ends do not bracket a root it scans
/// [`SCAN_POINTS`] points for the first sign change and refines there.
pub fn find_root<F>(mut f: F, lo: f64, hi: f64, opts: RootOptions) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let fl = f(lo);
    let fh = f(hi);
    if fl == 0.0 {
        return Ok(lo);
    }
    if fh == 0.0 {
        return Ok(hi);
    }
    if fl.signum() != fh.signum() && fl.is_finite() && fh.is_finite() {
        return bisect_secant(f, lo, hi, opts);
    }
    let step = (hi - lo) / SCAN_POINTS as f64;
    let mut x0 = lo;
    let mut f0 = fl;
    for i in 1..=SCAN_POINTS {
        let x1 = if i == SCAN_POINTS {
            hi
        } else {
            lo + step * i as f64
        };
        let f1 = f(x1);
        if f0.is_finite() && f1.is_finite() && (f1 == 0.0 || f0.signum() != f1.signum()) {
            return bisect_secant(f, x0, x1, opts);
        }
        x0 = x1;
        f0 = f1;
    }
    Err(Error::numeric(
        "root scan",
        format!("no sign change among {SCAN_POINTS} samples on [{lo}, {hi}]"),
    ))
}

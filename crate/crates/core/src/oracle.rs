//! Brute-force minimization of the average failure probability over the
//! feasible set, sharing no code with the parametric solvers.
//!
//! The lower boundary of the feasible set is a function `q2_lo(q1)`: at fixed
//! `q1` the unitarity expression is concave in `q2` and increasing up to its
//! peak, so the smallest feasible `q2` is found by bisection on the rising
//! side. `eta1 q1 + eta2 q2_lo(q1)` is convex, so a grid scan followed by a
//! golden-section search on the best grid cell finds the minimum.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{FailureBudget, FailurePoint, OverlapSpec, Priors};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleConfig {
    grid_size: usize,
    refine_iters: usize,
    tolerance: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            grid_size: 4096,
            refine_iters: 60,
            tolerance: 1e-8,
        }
    }
}

impl OracleConfig {
    pub fn new(grid_size: usize, refine_iters: usize, tolerance: f64) -> Result<Self> {
        if grid_size < 100 {
            return Err(Error::domain(format!(
                "grid_size = {grid_size} is below 100"
            )));
        }
        if tolerance.is_nan() || tolerance <= 0.0 {
            return Err(Error::domain(format!(
                "tolerance = {tolerance} must be positive"
            )));
        }
        Ok(Self {
            grid_size,
            refine_iters,
            tolerance,
        })
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    pub fn refine_iters(&self) -> usize {
        self.refine_iters
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }
}

/// Smallest feasible `q2` at this `q1`, or `None` if the column misses the set.
fn lowest_feasible_q2(q1: f64, s: f64, beta: f64) -> Option<f64> {
    let a = beta * (1.0 - q1).max(0.0).sqrt();
    let b = q1.max(0.0).sqrt();
    let g = |q2: f64| a * (1.0 - q2).max(0.0).sqrt() + b * q2.max(0.0).sqrt() - s;
    let peak_sq = a * a + b * b;
    if peak_sq.sqrt() < s {
        return None;
    }
    if g(0.0) >= 0.0 {
        return Some(0.0);
    }
    let (mut lo, mut hi) = (0.0, b * b / peak_sq);
    if g(hi) < 0.0 {
        // rounding at the peak; the column touches the set in a single point
        return Some(hi);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

struct Scan<'a> {
    eta1: f64,
    eta2: f64,
    s: f64,
    beta: f64,
    cfg: &'a OracleConfig,
}

impl Scan<'_> {
    fn objective(&self, q1: f64) -> (f64, f64) {
        match lowest_feasible_q2(q1, self.s, self.beta) {
            Some(q2) => (self.eta1 * q1 + self.eta2 * q2, q2),
            None => (f64::INFINITY, f64::NAN),
        }
    }

    fn minimize(&self) -> Result<(f64, FailurePoint)> {
        let n = self.cfg.grid_size;
        let q1_at = |k: usize| k as f64 / (n - 1) as f64;
        let mut best = (f64::INFINITY, 0usize);
        for k in 0..n {
            let (f, _) = self.objective(q1_at(k));
            // strict comparison keeps the smaller q1 on ties
            if f < best.0 {
                best = (f, k);
            }
        }
        if !best.0.is_finite() {
            return Err(Error::numeric("oracle", "no feasible grid point"));
        }
        let k = best.1;
        let (mut a, mut b) = (q1_at(k.saturating_sub(1)), q1_at((k + 1).min(n - 1)));
        let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
        let mut c = b - inv_phi * (b - a);
        let mut d = a + inv_phi * (b - a);
        let mut fc = self.objective(c).0;
        let mut fd = self.objective(d).0;
        for _ in 0..self.cfg.refine_iters {
            if b - a <= self.cfg.tolerance {
                break;
            }
            if fc <= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - inv_phi * (b - a);
                fc = self.objective(c).0;
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + inv_phi * (b - a);
                fd = self.objective(d).0;
            }
        }
        // candidates: refined interior point, best grid point, both endpoints
        let s2 = self.s * self.s;
        let mut cands = vec![0.5 * (a + b), c, d, q1_at(k), 1.0];
        if s2 > 0.0 {
            cands.push(s2);
        }
        let mut out = (f64::INFINITY, FailurePoint { q1: 1.0, q2: 1.0 });
        for q1 in cands {
            let (f, q2) = self.objective(q1);
            if f < out.0 || (f == out.0 && q1 < out.1.q1) {
                out = (f, FailurePoint { q1, q2 });
            }
        }
        Ok(out)
    }
}

/// Minimum of `eta1 q1 + eta2 q2` over the feasible set, with its minimizer.
pub fn oracle_qmin(
    pr: Priors,
    ov: OverlapSpec,
    cfg: OracleConfig,
) -> Result<(FailureBudget, FailurePoint)> {
    let scan = Scan {
        eta1: pr.eta1(),
        eta2: pr.eta2(),
        s: ov.s(),
        beta: ov.beta(),
        cfg: &cfg,
    };
    let (q, pt) = scan.minimize()?;
    Ok((FailureBudget::new(q.clamp(0.0, 1.0))?, pt))
}

/// Smallest `s'` (to the configured tolerance) whose minimum failure
/// probability stays within `q_max`, assuming optimal flags.
pub fn oracle_max_separation(
    pr: Priors,
    s: f64,
    q_max: FailureBudget,
    cfg: OracleConfig,
) -> Result<f64> {
    let q_of = |sp: f64| -> Result<f64> {
        let ov = OverlapSpec::with_optimal_flags(s, sp)?;
        Ok(oracle_qmin(pr, ov, cfg)?.0.value())
    };
    let q = q_max.value();
    if q_of(0.0)? <= q {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (0.0, s);
    while hi - lo > cfg.tolerance {
        let mid = 0.5 * (lo + hi);
        if q_of(mid)? <= q {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Dense minimization over the hyperbola `q1 q2 = s^2`, `q1` in `[s^2, 1]`.
pub fn oracle_qud(pr: Priors, s: f64, n_points: usize) -> f64 {
    let s2 = s * s;
    let n = n_points.max(2);
    (0..n)
        .map(|k| s2 + (1.0 - s2) * k as f64 / (n - 1) as f64)
        .map(|q1| {
            let q2 = if q1 > 0.0 { s2 / q1 } else { 1.0 };
            pr.eta1() * q1 + pr.eta2() * q2
        })
        .fold(f64::INFINITY, f64::min)
}

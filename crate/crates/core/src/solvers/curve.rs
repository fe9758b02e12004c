//! Fixed separation: the lower half of the unitarity curve in parametric form
//! and the minimum failure probability as a function of the prior.
//!
//! With `x = s (1 - (1 + s') t) / s'` and `y = s (1 - (1 - s') t) / s'`,
//!
//! ```text
//! q1 = (1 - x y + sqrt(1 - x^2) sqrt(1 - y^2)) / 2
//! q2 = (1 - x y - sqrt(1 - x^2) sqrt(1 - y^2)) / 2
//! ```
//!
//! runs from the diagonal vertex at `t_-1` (slope -1) through the zero-slope
//! point at `t_0` to the endpoint `(1, s^2)` at `t = 1`. Matching the curve
//! slope to `-eta1 / eta2` gives `eta1(t)` and `Q_min(t)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{sqrt_clamped, FailureBudget, FailurePoint, OverlapSpec, Priors};
use crate::roots::{bisect_secant, RootOptions};
use crate::solvers::ud::q_ud_point;

/// Allowed increase of `eta1` between consecutive sweep samples.
pub const MONOTONE_TOL: f64 = 1e-10;

/// A value of the curve parameter `t`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
#[serde(transparent)]
pub struct CurveParam(pub f64);

impl CurveParam {
    /// `(t_-1, t_0)`: parameters of the slope -1 and slope 0 points.
    pub fn range(s: f64, s_prime: f64) -> (f64, f64) {
        let r = s_prime / s;
        (
            (1.0 - r) / (1.0 - s_prime),
            (1.0 - r * r) / (1.0 - s_prime * s_prime),
        )
    }

    /// `(x, y)` for this parameter.
    pub fn xy(&self, s: f64, s_prime: f64) -> (f64, f64) {
        let k = s / s_prime;
        (
            k * (1.0 - (1.0 + s_prime) * self.0),
            k * (1.0 - (1.0 - s_prime) * self.0),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QminSample {
    pub t: CurveParam,
    pub eta1: f64,
    pub q_min: f64,
    pub point: FailurePoint,
    /// `dq1/dt`, `dq2/dt`; infinite at `t_-1`.
    pub dq1: f64,
    pub dq2: f64,
}

struct CurveEval {
    point: FailurePoint,
    /// `sqrt(1 - x^2)`, `sqrt(1 - y^2)`
    rx: f64,
    ry: f64,
}

fn check_interior(s: f64, beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta < s && s < 1.0) {
        return Err(Error::domain(format!(
            "parametric curve needs 0 < s' < s < 1, got s = {s}, s' = {beta}"
        )));
    }
    Ok(())
}

fn eval(t: f64, s: f64, sp: f64) -> Result<CurveEval> {
    let (t_m1, _) = CurveParam::range(s, sp);
    let (x, y) = CurveParam(t).xy(s, sp);
    let rx = sqrt_clamped((1.0 - x) * (1.0 + x))?;
    // y = 1 exactly at the vertex; rounding in t_-1 would otherwise leave a
    // sqrt-sized gap between q1 and q2
    let ry = if t <= t_m1 {
        0.0
    } else {
        sqrt_clamped((1.0 - y) * (1.0 + y))?
    };
    let r = rx * ry;
    let xy = x * y;
    let q1 = (0.5 * (1.0 - xy + r)).clamp(0.0, 1.0);
    let q2 = (0.5 * (1.0 - xy - r)).clamp(0.0, 1.0);
    Ok(CurveEval {
        point: FailurePoint { q1, q2 },
        rx,
        ry,
    })
}

/// Point of the full lower half, `t` in `[t_-1, 1]`.
pub fn lower_half_point(t: CurveParam, s: f64, s_prime: f64) -> Result<FailurePoint> {
    check_interior(s, s_prime)?;
    let (t_m1, _) = CurveParam::range(s, s_prime);
    if !(t_m1..=1.0).contains(&t.0) {
        return Err(Error::OutOfRange {
            value: t.0,
            lo: t_m1,
            hi: 1.0,
        });
    }
    Ok(eval(t.0, s, s_prime)?.point)
}

/// Point of the curve between the slope -1 and slope 0 points (`q2 <= q1`).
/// Uses `beta` from `ov` as the effective final overlap.
pub fn curve_point(t: CurveParam, ov: OverlapSpec) -> Result<FailurePoint> {
    let (s, sp) = (ov.s(), ov.beta());
    check_interior(s, sp)?;
    let (t_m1, t_0) = CurveParam::range(s, sp);
    if !(t_m1..=t_0).contains(&t.0) {
        return Err(Error::OutOfRange {
            value: t.0,
            lo: t_m1,
            hi: t_0,
        });
    }
    Ok(eval(t.0, s, sp)?.point)
}

/// Prior and minimum failure probability of the tangency at `t`.
pub fn qmin_sample(t: CurveParam, s: f64, sp: f64) -> Result<QminSample> {
    let ev = eval(t.0, s, sp)?;
    let FailurePoint { q1, q2 } = ev.point;
    let c1 = (q1 * (1.0 - q1)).sqrt();
    let c2 = (q2 * (1.0 - q2)).sqrt();
    // derivatives multiplied through by sqrt(1-x^2) sqrt(1-y^2) s'/s, which
    // cancels in the slope ratio and stays finite at the vertex
    let a = (1.0 + sp) * ev.ry;
    let b = (1.0 - sp) * ev.rx;
    let d1 = c1 * (a + b);
    let d2 = c2 * (a - b);
    let den = d2 - d1;
    let (eta1, q_min) = if den == 0.0 {
        (0.5, 0.5 * (q1 + q2))
    } else {
        (d2 / den, (d2 * q1 - d1 * q2) / den)
    };
    let scale = s / (sp * ev.rx * ev.ry);
    Ok(QminSample {
        t,
        eta1,
        q_min,
        point: ev.point,
        dq1: d1 * scale,
        dq2: d2 * scale,
    })
}

/// Samples `Q_min(eta1)` uniformly in `t` over `[t_-1, t_0]`.
///
/// `eta1` decreases from 1/2 to 0 along the sweep; an increase beyond
/// [`MONOTONE_TOL`] is reported as an error rather than returned.
pub fn qmin_curve(ov: OverlapSpec, n_samples: usize) -> Result<Vec<QminSample>> {
    let (s, sp) = (ov.s(), ov.beta());
    check_interior(s, sp)?;
    if n_samples < 2 {
        return Err(Error::domain("qmin_curve needs at least 2 samples"));
    }
    let (t_m1, t_0) = CurveParam::range(s, sp);
    let last = (n_samples - 1) as f64;
    let mut out: Vec<QminSample> = Vec::with_capacity(n_samples);
    for k in 0..n_samples {
        let t = if k + 1 == n_samples {
            t_0
        } else {
            t_m1 + (t_0 - t_m1) * k as f64 / last
        };
        let mut sample = qmin_sample(CurveParam(t), s, sp)?;
        if k + 1 == n_samples {
            // slope exactly zero at t_0
            sample.eta1 = 0.0;
            sample.q_min = sample.point.q2;
        }
        if let Some(prev) = out.last() {
            if sample.eta1 > prev.eta1 + MONOTONE_TOL {
                return Err(Error::numeric(
                    "qmin_curve",
                    format!(
                        "eta1 not monotone: {} at t = {} after {} at t = {} (s = {s}, s' = {sp})",
                        sample.eta1, t, prev.eta1, prev.t.0
                    ),
                ));
            }
        }
        out.push(sample);
    }
    Ok(out)
}

/// Minimum average failure probability for fixed `(s, beta)`, and the
/// optimal failure point.
pub fn qmin_at(pr: Priors, ov: OverlapSpec) -> Result<(FailureBudget, FailurePoint)> {
    qmin_at_with(pr, ov, RootOptions::default())
}

pub(crate) fn qmin_at_with(
    pr: Priors,
    ov: OverlapSpec,
    opts: RootOptions,
) -> Result<(FailureBudget, FailurePoint)> {
    let (s, beta) = (ov.s(), ov.beta());
    if beta == 0.0 {
        return Ok(q_ud_point(pr, s));
    }
    if beta >= s {
        return Ok((
            FailureBudget::clamped(0.0),
            FailurePoint { q1: 0.0, q2: 0.0 },
        ));
    }
    if s >= 1.0 {
        // identical inputs can only be separated by always failing
        return Ok((
            FailureBudget::clamped(1.0),
            FailurePoint { q1: 1.0, q2: 1.0 },
        ));
    }
    let (npr, swapped) = pr.normalized();
    let target = npr.eta1();
    let (t_m1, t_0) = CurveParam::range(s, beta);
    let t = if target >= 0.5 {
        t_m1
    } else if target <= 0.0 {
        t_0
    } else {
        let f = |t: f64| match qmin_sample(CurveParam(t), s, beta) {
            Ok(smp) => smp.eta1 - target,
            Err(_) => f64::NAN,
        };
        bisect_secant(f, t_m1, t_0, opts).map_err(|e| {
            Error::numeric(
                "qmin_at",
                format!("eta1 = {target}, s = {s}, beta = {beta}: {e}"),
            )
        })?
    };
    let smp = qmin_sample(CurveParam(t), s, beta)?;
    let pt = smp.point;
    // evaluate the objective at the tangency point with the requested prior
    let q = npr.eta1() * pt.q1 + npr.eta2() * pt.q2;
    Ok((FailureBudget::clamped(q), pt.swap_if(swapped)))
}

/// `dq2/dq1` on the lower half where `q1 = 1 - offset`, by central differences.
pub(crate) fn lower_half_slope_near_endpoint(s: f64, sp: f64, offset: f64) -> Result<f64> {
    check_interior(s, sp)?;
    let (t_m1, _) = CurveParam::range(s, sp);
    let target = 1.0 - offset;
    let f = |t: f64| match eval(t, s, sp) {
        Ok(ev) => ev.point.q1 - target,
        Err(_) => f64::NAN,
    };
    let t = bisect_secant(f, t_m1, 1.0, RootOptions::full_precision())?;
    let h = (1.0 - t) * 1e-3;
    let a = eval(t + h, s, sp)?.point;
    let b = eval(t - h, s, sp)?.point;
    Ok((a.q2 - b.q2) / (a.q1 - b.q1))
}

//! The `(u, v)` plane: geometric and arithmetic means of `(q1, q2)`.
//!
//! There the unitarity curve is a parabola indexed by `(s, s')` and each
//! iso-failure line `eta1 q1 + eta2 q2 = Q` is an ellipse parametrized by a
//! polar angle measured from its center. Optimal protocols sit where the two
//! families touch.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{sqrt_clamped, FailureBudget, FailurePoint, Priors};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConicPoint {
    /// `sqrt(q1 q2)`
    pub u: f64,
    /// `(q1 + q2) / 2`
    pub v: f64,
}

/// Polar angle on an iso-failure ellipse, measured from its center
/// relative to the `v = 0` axis.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
#[serde(transparent)]
pub struct PolarAngle(pub f64);

impl PolarAngle {
    pub fn radians(&self) -> f64 {
        self.0
    }
}

pub fn to_conic(pt: FailurePoint) -> ConicPoint {
    let u = (pt.q1 * pt.q2).max(0.0).sqrt();
    let v = 0.5 * (pt.q1 + pt.q2);
    // keep AM >= GM exact under rounding
    ConicPoint { u: u.min(v), v }
}

/// Both preimages of `cp`: `(larger q1, larger q2)`.
pub fn from_conic(cp: ConicPoint) -> Result<(FailurePoint, FailurePoint)> {
    if cp.u < 0.0 || cp.v < cp.u {
        return Err(Error::domain(format!(
            "no real preimage for (u, v) = ({}, {})",
            cp.u, cp.v
        )));
    }
    let d = sqrt_clamped((cp.v - cp.u) * (cp.v + cp.u))?;
    let hi = cp.v + d;
    let lo = cp.v - d;
    Ok((
        FailurePoint { q1: hi, q2: lo },
        FailurePoint { q1: lo, q2: hi },
    ))
}

/// Upper envelope `v = (1 + u^2) / 2` of the parabola family.
pub fn parabola_envelope(u: f64) -> f64 {
    0.5 * (1.0 + u * u)
}

/// The unitarity curve in the conic plane, `v(u)` for overlaps `(s, s')`.
///
/// At `s' = 0` the parabola collapses to the segment `u = s`; use
/// [`vertical_segment`] for that case.
pub fn parabola_v(u: f64, s: f64, s_prime: f64) -> Result<f64> {
    if s_prime <= 0.0 {
        return Err(Error::DegenerateParabola);
    }
    let d = u - s;
    Ok(parabola_envelope(u) - d * d / (2.0 * s_prime * s_prime))
}

/// The `s' = 0` unitarity set: `u = s`, `0 <= v <= (1 + s^2) / 2`.
/// Returns the segment's `v` range.
pub fn vertical_segment(s: f64) -> (f64, f64) {
    (0.0, parabola_envelope(s))
}

fn ellipse_scale(pr: Priors) -> Result<(f64, f64)> {
    let delta = pr.delta();
    let one_minus = 1.0 - delta * delta;
    if one_minus <= 0.0 {
        return Err(Error::DegeneratePriors);
    }
    Ok((delta, one_minus))
}

/// Point of the iso-failure ellipse for `Q` at polar angle `theta`.
pub fn ellipse_point(theta: PolarAngle, q: FailureBudget, pr: Priors) -> Result<ConicPoint> {
    let q = q.value();
    let (sin, cos) = theta.0.sin_cos();
    if pr.delta() == 0.0 {
        // horizontal segment v = Q, 0 <= u <= Q
        return Ok(ConicPoint { u: q * cos, v: q });
    }
    let (delta, one_minus) = ellipse_scale(pr)?;
    Ok(ConicPoint {
        u: q * cos / one_minus.sqrt(),
        v: q * (1.0 + delta * sin) / one_minus,
    })
}

/// `(ellipse slope, parabola slope)` as `dv/du`.
///
/// The ellipse slope is a signed infinity where `sin(theta) = 0`.
pub fn conic_slopes(
    theta: PolarAngle,
    q: FailureBudget,
    pr: Priors,
    u: f64,
    s: f64,
    s_prime: f64,
) -> Result<(f64, f64)> {
    // Q scales the ellipse but not its slope at a given angle
    let _ = q;
    if s_prime <= 0.0 {
        return Err(Error::DegenerateParabola);
    }
    let ellipse = if pr.delta() == 0.0 {
        0.0
    } else {
        let (delta, one_minus) = ellipse_scale(pr)?;
        let (sin, cos) = theta.0.sin_cos();
        -delta * cos / (sin * one_minus.sqrt())
    };
    let parabola = u - (u - s) / (s_prime * s_prime);
    Ok((ellipse, parabola))
}

/// Residuals of the tangency system: the ellipse point lies on the parabola,
/// and the two slopes agree. Both vanish at the optimum.
pub fn tangency_residuals(
    theta: PolarAngle,
    q: FailureBudget,
    pr: Priors,
    s: f64,
    s_prime: f64,
) -> Result<(f64, f64)> {
    let cp = ellipse_point(theta, q, pr)?;
    let membership = cp.v - parabola_v(cp.u, s, s_prime)?;
    let (ellipse, parabola) = conic_slopes(theta, q, pr, cp.u, s, s_prime)?;
    Ok((membership, parabola - ellipse))
}

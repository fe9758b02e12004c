//! Maximum separation under a failure budget.
//!
//! The tangency of the iso-failure ellipse with the unitarity parabola gives
//! `s'` and `s` in closed form as functions of the ellipse angle `theta`, for
//! `-asin(Delta) <= theta <= theta_max`. For a given `s` we root-find the
//! angle. Internally the angle is carried as `sigma = sin(theta) / Delta`,
//! in which both expressions lose their common factor of `Delta` and stay
//! well conditioned for nearly equal priors.

use serde::Serialize;

use crate::conics::PolarAngle;
use crate::error::{Error, Result};
use crate::model::{sqrt_clamped, FailureBudget, Priors};
use crate::roots::{find_root, RootOptions};
use crate::solvers::ud::q_ud;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MaxSeparation {
    /// Smallest reachable final overlap.
    pub s_prime: f64,
    /// Tangency angle, for the parametric (unequal, nondegenerate prior) branch.
    pub theta: Option<PolarAngle>,
}

/// Upper end of the angle range, `theta_max`.
pub fn theta_max(q: f64, delta: f64) -> f64 {
    if q <= 1.0 - delta {
        0.0
    } else {
        ((1.0 - q - delta) / q).asin()
    }
}

/// `(s', s)` on the optimal tangency at angle `theta`, as written in the
/// angle parametrization. Requires `0 < |Delta| < 1`.
pub fn separation_from_angle(
    theta: PolarAngle,
    q: FailureBudget,
    pr: Priors,
) -> Result<(f64, f64)> {
    let (delta, q) = (pr.delta(), q.value());
    if delta.abs() >= 1.0 {
        return Err(Error::DegeneratePriors);
    }
    let (sin, cos) = theta.0.sin_cos();
    let den = delta + q * sin;
    let root = sqrt_clamped((1.0 - q).powi(2) - den * den)?;
    let s_prime = -root / den * theta.0.tan();
    let s = (q * delta * (1.0 + sin * sin) - (1.0 - delta * delta - 2.0 * q) * sin)
        / ((1.0 - delta * delta).sqrt() * den * cos);
    Ok((s_prime, s))
}

/// Same as [`separation_from_angle`] with `sin(theta) = delta * sigma`.
fn separation_from_sigma(sigma: f64, q: f64, delta: f64) -> Result<(f64, f64)> {
    let cos = sqrt_clamped(1.0 - delta * delta * sigma * sigma)?;
    let lead = 1.0 + q * sigma;
    let root = sqrt_clamped((1.0 - q).powi(2) - delta * delta * lead * lead)?;
    let s_prime = -sigma * root / (lead * cos);
    let s = (q * (1.0 + delta * delta * sigma * sigma) - (1.0 - delta * delta - 2.0 * q) * sigma)
        / ((1.0 - delta * delta).sqrt() * lead * cos);
    Ok((s_prime, s))
}

fn sigma_max(q: f64, delta: f64) -> f64 {
    if q <= 1.0 - delta {
        0.0
    } else {
        (1.0 - q - delta) / (q * delta)
    }
}

fn check_args(s: f64, q_max: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::domain(format!("s = {s} is not in [0, 1]")));
    }
    if !(0.0..1.0).contains(&q_max) {
        return Err(Error::domain(format!("Q_max = {q_max} is not in [0, 1)")));
    }
    Ok(())
}

/// Smallest final overlap reachable from overlap `s` with average failure
/// probability at most `q_max`.
pub fn max_separation(pr: Priors, s: f64, q_max: FailureBudget) -> Result<MaxSeparation> {
    let q = q_max.value();
    check_args(s, q)?;
    let (npr, _) = pr.normalized();
    let closed = |s_prime: f64| {
        Ok(MaxSeparation {
            s_prime,
            theta: None,
        })
    };
    if s <= critical_overlap(npr, q_max) || q >= q_ud(npr, s).value() {
        return closed(0.0);
    }
    if q == 0.0 {
        return closed(s);
    }
    if s >= 1.0 {
        return closed(1.0);
    }
    let delta = npr.delta();
    if delta == 0.0 {
        return closed((s - q) / (1.0 - q));
    }
    if npr.eta1() == 0.0 {
        // Q = q2 only; the cheapest point is the zero-slope one
        return closed(sqrt_clamped((s * s - q) / (1.0 - q))?);
    }
    let f = |sigma: f64| match separation_from_sigma(sigma, q, delta) {
        Ok((_, s_of)) => s_of - s,
        Err(_) => f64::NAN,
    };
    let sigma = find_root(f, -1.0, sigma_max(q, delta), RootOptions::default()).map_err(|e| {
        Error::numeric(
            "max_separation",
            format!("eta1 = {}, s = {s}, Q_max = {q}: {e}", npr.eta1()),
        )
    })?;
    let (s_prime, _) = separation_from_sigma(sigma, q, delta)?;
    Ok(MaxSeparation {
        s_prime: s_prime.clamp(0.0, s),
        theta: Some(PolarAngle((delta * sigma).asin())),
    })
}

/// Largest initial overlap that can still be fully separated within `q_max`.
pub fn critical_overlap(pr: Priors, q_max: FailureBudget) -> f64 {
    let (npr, _) = pr.normalized();
    let (e1, e2, q) = (npr.eta1(), npr.eta2(), q_max.value());
    if q == 0.0 {
        return 0.0;
    }
    let s_cr = if q <= 2.0 * e1 {
        q / (2.0 * (e1 * e2).sqrt())
    } else {
        ((q - e1) / e2).sqrt()
    };
    s_cr.min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CloneLimit {
    Bounded(u64),
    /// The budget allows full separation, hence any number of clones.
    Unbounded,
}

/// Maximum number of perfect clones `n` (final overlap `s^n`) producible
/// within the failure budget.
pub fn max_clones(s: f64, q_max: FailureBudget, pr: Priors) -> Result<CloneLimit> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::domain(format!(
            "max_clones needs 0 < s < 1, got {s}"
        )));
    }
    let ms = max_separation(pr, s, q_max)?;
    if ms.s_prime <= 0.0 {
        return Ok(CloneLimit::Unbounded);
    }
    // s^n >= s'_min; the slack absorbs rounding when s'_min is an exact power
    let n = (ms.s_prime.ln() / s.ln() + 1e-12).floor();
    Ok(CloneLimit::Bounded(n.max(1.0) as u64))
}

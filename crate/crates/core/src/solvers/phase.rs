//! Numerical detection of the second-derivative jump of `Q(eta1)`.
//!
//! At full separation the optimum moves from the endpoint `(1, s^2)` to the
//! interior of the hyperbola at `eta1 = s^2 / (1 + s^2)`, and the second
//! derivative of the optimal failure probability jumps there. For any
//! `s' > 0` the optimal value is smooth in the prior.

use crate::error::{Error, Result};
use crate::model::{OverlapSpec, Priors};
use crate::roots::RootOptions;
use crate::solvers::curve::qmin_at_with;
use crate::solvers::ud::{lower_critical_prior, q_ud};

fn optimal_failure(eta1: f64, ov: OverlapSpec) -> Result<f64> {
    let pr = Priors::new(eta1)?;
    if ov.beta() == 0.0 {
        return Ok(q_ud(pr, ov.s()).value());
    }
    Ok(qmin_at_with(pr, ov, RootOptions::full_precision())?
        .0
        .value())
}

/// Right minus left one-sided second differences of the optimal failure
/// probability at `eta_star`, each from three points spaced by `h`.
pub fn phase_transition_probe(s: f64, s_prime: f64, eta_star: f64, h: f64) -> Result<f64> {
    if !(eta_star > 0.0 && eta_star < 0.5) {
        return Err(Error::domain(format!(
            "eta_star = {eta_star} is not in (0, 1/2)"
        )));
    }
    if !(h > 0.0 && h < eta_star / 4.0) {
        return Err(Error::domain(format!(
            "step h = {h} is not in (0, eta_star / 4)"
        )));
    }
    let ov = OverlapSpec::with_optimal_flags(s, s_prime)?;
    let q = |k: f64| optimal_failure(eta_star + k * h, ov);
    let centre = q(0.0)?;
    let left = (centre - 2.0 * q(-1.0)? + q(-2.0)?) / (h * h);
    let right = (q(2.0)? - 2.0 * q(1.0)? + centre) / (h * h);
    Ok(right - left)
}

/// Second derivative of the interior full-separation branch,
/// `-s / (2 (eta1 eta2)^{3/2})`, minus that of the linear endpoint branch.
pub fn analytic_ud_jump(s: f64) -> f64 {
    let e = lower_critical_prior(s);
    -s / (2.0 * (e * (1.0 - e)).powf(1.5))
}

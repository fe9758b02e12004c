//! Problem data and the unitarity constraint in the failure-probability square.
//!
//! A separation protocol maps `|psi_i>` to `|psi'_i>` with success probability
//! `p_i = 1 - q_i`. It is physical iff
//!
//! ```text
//! s = sqrt(p1 p2) * beta + sqrt(q1 q2),     beta = s' * kappa
//! ```
//!
//! and the superlevel set `{residual >= 0}` is convex, nested in `beta`, and
//! bounded by a smooth curve joining `(1, s^2)` and `(s^2, 1)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::solvers::curve;

/// Absolute tolerance on the unitarity residual used by feasibility tests.
pub const FEASIBILITY_TOL: f64 = 1e-12;

/// Negative square-root arguments closer to zero than this are rounding noise.
pub const SQRT_CLAMP: f64 = 1e-14;

/// Tolerance on `eta1 + eta2 = 1`.
pub const PRIOR_SUM_TOL: f64 = 1e-12;

pub(crate) fn sqrt_clamped(x: f64) -> Result<f64> {
    if x >= 0.0 {
        Ok(x.sqrt())
    } else if x >= -SQRT_CLAMP {
        Ok(0.0)
    } else {
        Err(Error::NegativeRadicand(x))
    }
}

fn check_unit(name: &str, x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::domain(format!("{name} = {x} is not in [0, 1]")));
    }
    Ok(())
}

/// A priori probabilities of the two input states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Priors {
    eta1: f64,
    eta2: f64,
}

impl Priors {
    /// Priors `(eta1, 1 - eta1)`.
    pub fn new(eta1: f64) -> Result<Self> {
        check_unit("eta1", eta1)?;
        Ok(Self {
            eta1,
            eta2: 1.0 - eta1,
        })
    }

    pub fn from_pair(eta1: f64, eta2: f64) -> Result<Self> {
        check_unit("eta1", eta1)?;
        check_unit("eta2", eta2)?;
        if (eta1 + eta2 - 1.0).abs() > PRIOR_SUM_TOL {
            return Err(Error::domain(format!(
                "priors must sum to 1, got {}",
                eta1 + eta2
            )));
        }
        Ok(Self { eta1, eta2 })
    }

    pub fn equal() -> Self {
        Self {
            eta1: 0.5,
            eta2: 0.5,
        }
    }

    pub fn eta1(&self) -> f64 {
        self.eta1
    }

    pub fn eta2(&self) -> f64 {
        self.eta2
    }

    /// `eta2 - eta1`.
    pub fn delta(&self) -> f64 {
        self.eta2 - self.eta1
    }

    pub fn swapped(&self) -> Self {
        Self {
            eta1: self.eta2,
            eta2: self.eta1,
        }
    }

    /// Returns priors with `eta1 <= 1/2`, and whether a swap was needed.
    pub fn normalized(&self) -> (Self, bool) {
        if self.eta1 > 0.5 {
            (self.swapped(), true)
        } else {
            (*self, false)
        }
    }
}

/// Initial overlap `s`, target overlap `s'` and success-flag overlap `kappa`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OverlapSpec {
    s: f64,
    s_prime: f64,
    kappa: f64,
}

impl OverlapSpec {
    pub fn new(s: f64, s_prime: f64, kappa: f64) -> Result<Self> {
        check_unit("s", s)?;
        check_unit("s'", s_prime)?;
        check_unit("kappa", kappa)?;
        if s_prime > s {
            return Err(Error::domain(format!("s' = {s_prime} exceeds s = {s}")));
        }
        Ok(Self { s, s_prime, kappa })
    }

    /// Optimal flags, `kappa = 1`.
    pub fn with_optimal_flags(s: f64, s_prime: f64) -> Result<Self> {
        Self::new(s, s_prime, 1.0)
    }

    /// Same overlaps with `kappa = 0`, i.e. unambiguous discrimination flags.
    pub fn discrimination(s: f64) -> Result<Self> {
        Self::new(s, 0.0, 0.0)
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn s_prime(&self) -> f64 {
        self.s_prime
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn beta(&self) -> f64 {
        self.s_prime * self.kappa
    }
}

/// Conditional failure probabilities `(q1, q2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FailurePoint {
    pub q1: f64,
    pub q2: f64,
}

impl FailurePoint {
    pub fn new(q1: f64, q2: f64) -> Result<Self> {
        check_unit("q1", q1)?;
        check_unit("q2", q2)?;
        Ok(Self { q1, q2 })
    }

    pub fn p1(&self) -> f64 {
        1.0 - self.q1
    }

    pub fn p2(&self) -> f64 {
        1.0 - self.q2
    }

    pub fn swapped(&self) -> Self {
        Self {
            q1: self.q2,
            q2: self.q1,
        }
    }

    pub(crate) fn swap_if(self, swap: bool) -> Self {
        if swap {
            self.swapped()
        } else {
            self
        }
    }

    /// Convex combination `lambda * self + (1 - lambda) * other`.
    pub fn mix(&self, other: &Self, lambda: f64) -> Self {
        Self {
            q1: lambda * self.q1 + (1.0 - lambda) * other.q1,
            q2: lambda * self.q2 + (1.0 - lambda) * other.q2,
        }
    }
}

/// An average failure probability `Q` (or a cap `Q_max`).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
#[serde(transparent)]
pub struct FailureBudget(f64);

impl FailureBudget {
    pub fn new(q: f64) -> Result<Self> {
        check_unit("Q", q)?;
        Ok(Self(q))
    }

    pub(crate) fn clamped(q: f64) -> Self {
        Self(q.clamp(0.0, 1.0))
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

/// `Q = eta1 q1 + eta2 q2`.
pub fn average_failure(pt: FailurePoint, pr: Priors) -> FailureBudget {
    FailureBudget::clamped(pr.eta1 * pt.q1 + pr.eta2 * pt.q2)
}

/// `sqrt(p1 p2) beta + sqrt(q1 q2) - s`; zero on the unitarity curve.
pub fn unitarity_residual(pt: FailurePoint, ov: OverlapSpec) -> f64 {
    residual_with_beta(pt, ov.s, ov.beta())
}

pub(crate) fn residual_with_beta(pt: FailurePoint, s: f64, beta: f64) -> f64 {
    let pp = (pt.p1() * pt.p2()).max(0.0).sqrt();
    let qq = (pt.q1 * pt.q2).max(0.0).sqrt();
    pp * beta + qq - s
}

pub fn in_feasible_set(pt: FailurePoint, ov: OverlapSpec) -> bool {
    unitarity_residual(pt, ov) >= -FEASIBILITY_TOL
}

/// Finite-difference slopes of the unitarity curve next to its endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EndpointTangency {
    /// `dq2/dq1` at `q1 = 1 - offset` on the lower half, approaching `(1, s^2)`.
    pub lower_slope: f64,
    /// `dq2/dq1` at `q2 = 1 - offset` on the upper half, approaching `(s^2, 1)`.
    pub upper_slope: f64,
    pub offset: f64,
    pub vertical_at_lower: bool,
    pub horizontal_at_upper: bool,
}

/// Slope threshold above which the curve is reported as vertical.
pub const VERTICAL_SLOPE: f64 = 1e2;

/// Estimates the curve slope `offset` away from each endpoint.
///
/// For `beta = 0` the curve is the hyperbola `q1 q2 = s^2` with finite
/// endpoint slopes; this is reported as [`Error::Cusp`].
pub fn endpoint_tangency_check(ov: OverlapSpec, offset: f64) -> Result<EndpointTangency> {
    let s = ov.s();
    let beta = ov.beta();
    if beta == 0.0 {
        return Err(Error::Cusp {
            lower_slope: -s * s,
            upper_slope: -1.0 / (s * s),
        });
    }
    if !(beta < s && s < 1.0) {
        return Err(Error::domain(format!(
            "endpoint check needs 0 < beta < s < 1, got beta = {beta}, s = {s}"
        )));
    }
    if !(offset > 0.0 && offset < 1.0 - s * s) {
        return Err(Error::domain(format!("offset {offset} out of range")));
    }
    let lower = curve::lower_half_slope_near_endpoint(s, beta, offset)?;
    // the upper half is the mirror image, so the slope inverts
    let upper = 1.0 / lower;
    Ok(EndpointTangency {
        lower_slope: lower,
        upper_slope: upper,
        offset,
        vertical_at_lower: lower.abs() > VERTICAL_SLOPE,
        horizontal_at_upper: upper.abs() < 1.0 / VERTICAL_SLOPE,
    })
}

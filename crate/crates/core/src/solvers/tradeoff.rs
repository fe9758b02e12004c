//! Tradeoff between final overlap and failure probability at fixed `s`.
//!
//! Solving the tangency system for `(Q, s'^2)` instead of `(s, s')` gives a
//! second parametrization in the ellipse angle. As in [`super::maxsep`] the
//! angle is handled as `sigma = sin(theta) / Delta`.

use serde::Serialize;

use crate::conics::PolarAngle;
use crate::error::{Error, Result};
use crate::model::{sqrt_clamped, FailureBudget, Priors};
use crate::roots::{find_root, RootOptions};
use crate::solvers::ud::{lower_critical_prior, q_ud};

/// `s'^2` values in `[-SQUARE_CLAMP, 0)` are rounded to zero.
pub const SQUARE_CLAMP: f64 = 1e-12;

/// Allowed monotonicity violation between consecutive sweep samples.
pub const SWEEP_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TradeoffSample {
    /// Ellipse angle in the `eta1 <= 1/2` frame; `None` on closed-form branches.
    pub theta: Option<PolarAngle>,
    pub s: f64,
    pub s_prime: f64,
    pub q: FailureBudget,
}

/// `(theta_min, theta_max)` of the tradeoff sweep, for normalized priors.
pub fn theta_range(pr: Priors, s: f64) -> (f64, f64) {
    let (npr, _) = pr.normalized();
    let delta = npr.delta();
    let r = (1.0 - delta * delta).sqrt();
    let lo = -(s * delta / r).atan();
    let hi = if npr.eta1() >= lower_critical_prior(s) {
        0.0
    } else {
        -(2.0 * s * r / (1.0 - delta + s * s * (1.0 + delta))).acos()
    };
    (lo, hi)
}

fn sigma_range(s: f64, delta: f64, eta1: f64) -> (f64, f64) {
    let r2 = 1.0 - delta * delta;
    let lo = -s / (r2 + s * s * delta * delta).sqrt();
    let hi = if eta1 >= lower_critical_prior(s) {
        0.0
    } else {
        let c = 2.0 * s * r2.sqrt() / (1.0 - delta + s * s * (1.0 + delta));
        -(1.0 - c * c).max(0.0).sqrt() / delta
    };
    (lo, hi)
}

fn clamp_square(x: f64) -> Result<f64> {
    if x >= 0.0 {
        Ok(x)
    } else if x >= -SQUARE_CLAMP {
        Ok(0.0)
    } else {
        Err(Error::numeric(
            "tradeoff",
            format!("s'^2 = {x:e} is negative"),
        ))
    }
}

/// `(s'^2, Q)` at `sin(theta) = delta * sigma`.
fn tradeoff_from_sigma(sigma: f64, s: f64, delta: f64) -> Result<(f64, f64)> {
    let r = (1.0 - delta * delta).sqrt();
    let cos = sqrt_clamped(1.0 - delta * delta * sigma * sigma)?;
    let lead = 1.0 + sigma;
    let num = r * (1.0 + s * s) * cos - 2.0 * s * (1.0 + delta * delta * sigma);
    let sp2 = clamp_square(r * (sigma / lead).powi(2) * num / cos)?;
    // Delta s'^2 cot(theta) = r sigma num / (1 + sigma)^2, finite at sigma = 0
    let cot_term = r * sigma * num / (lead * lead);
    let q = (s * r + cot_term) / ((1.0 - sp2) * cos);
    Ok((sp2, q))
}

/// The tradeoff formulas evaluated at angle `theta`: `(s'^2, Q)`.
/// Requires `0 < |Delta| < 1` and `sin(theta) != 0` unless `s'^2` vanishes there.
pub fn tradeoff_from_angle(theta: PolarAngle, s: f64, pr: Priors) -> Result<(f64, f64)> {
    let delta = pr.delta();
    if delta.abs() >= 1.0 {
        return Err(Error::DegeneratePriors);
    }
    let r = (1.0 - delta * delta).sqrt();
    let (sin, cos) = theta.0.sin_cos();
    let ratio = sin / (delta + sin);
    let sp2 = clamp_square(
        r * ratio * ratio * (r * (1.0 + s * s) * cos - 2.0 * s * (1.0 + delta * sin)) / cos,
    )?;
    let cot_term = if sp2 == 0.0 {
        0.0
    } else {
        delta * sp2 * cos / sin
    };
    let q = (s * r + cot_term) / ((1.0 - sp2) * cos);
    Ok((sp2, q))
}

fn check_s(s: f64) -> Result<()> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::domain(format!("tradeoff needs 0 < s < 1, got {s}")));
    }
    Ok(())
}

fn closed_equal(s: f64, q: f64) -> TradeoffSample {
    TradeoffSample {
        theta: None,
        s,
        s_prime: if q >= s { 0.0 } else { (s - q) / (1.0 - q) },
        q: FailureBudget::clamped(q),
    }
}

fn closed_one_sided(s: f64, q: f64) -> TradeoffSample {
    let s2 = s * s;
    TradeoffSample {
        theta: None,
        s,
        s_prime: if q >= s2 {
            0.0
        } else {
            ((s2 - q) / (1.0 - q)).sqrt()
        },
        q: FailureBudget::clamped(q),
    }
}

fn sample_at_sigma(sigma: f64, s: f64, delta: f64) -> Result<TradeoffSample> {
    let (sp2, q) = tradeoff_from_sigma(sigma, s, delta)?;
    Ok(TradeoffSample {
        theta: Some(PolarAngle((delta * sigma).asin())),
        s,
        s_prime: sp2.sqrt().min(s),
        q: FailureBudget::clamped(q),
    })
}

/// Samples the optimal `(Q, s')` tradeoff, uniformly in the ellipse angle,
/// from `(0, s)` to `(Q_UD, 0)`.
pub fn tradeoff_curve(pr: Priors, s: f64, n_samples: usize) -> Result<Vec<TradeoffSample>> {
    check_s(s)?;
    if n_samples < 2 {
        return Err(Error::domain("tradeoff_curve needs at least 2 samples"));
    }
    let (npr, _) = pr.normalized();
    let delta = npr.delta();
    let q_end = q_ud(npr, s).value();
    let last = (n_samples - 1) as f64;
    let frac = |k: usize| k as f64 / last;

    let samples: Vec<TradeoffSample> = if delta == 0.0 {
        (0..n_samples)
            .map(|k| closed_equal(s, q_end * frac(k)))
            .collect()
    } else if npr.eta1() == 0.0 {
        (0..n_samples)
            .map(|k| closed_one_sided(s, q_end * frac(k)))
            .collect()
    } else {
        let (lo, hi) = sigma_range(s, delta, npr.eta1());
        let mut out = Vec::with_capacity(n_samples);
        for k in 0..n_samples {
            let mut smp = if k == 0 {
                TradeoffSample {
                    theta: Some(PolarAngle((delta * lo).asin())),
                    s,
                    s_prime: s,
                    q: FailureBudget::clamped(0.0),
                }
            } else if k + 1 == n_samples {
                TradeoffSample {
                    theta: Some(PolarAngle((delta * hi).asin())),
                    s,
                    s_prime: 0.0,
                    q: FailureBudget::clamped(q_end),
                }
            } else {
                sample_at_sigma(lo + (hi - lo) * frac(k), s, delta)?
            };
            smp.s = s;
            out.push(smp);
        }
        out
    };

    for (k, w) in samples.windows(2).enumerate() {
        if w[1].q.value() < w[0].q.value() - SWEEP_TOL || w[1].s_prime > w[0].s_prime + SWEEP_TOL {
            return Err(Error::numeric(
                "tradeoff_curve",
                format!(
                    "not monotone between samples {k} and {}: ({}, {}) -> ({}, {})",
                    k + 1,
                    w[0].q.value(),
                    w[0].s_prime,
                    w[1].q.value(),
                    w[1].s_prime
                ),
            ));
        }
    }
    Ok(samples)
}

/// The point of the tradeoff curve with average failure probability `q`.
pub fn tradeoff_at(pr: Priors, s: f64, q: FailureBudget) -> Result<TradeoffSample> {
    check_s(s)?;
    let (npr, _) = pr.normalized();
    let delta = npr.delta();
    let q = q.value();
    if delta == 0.0 {
        return Ok(closed_equal(s, q));
    }
    if npr.eta1() == 0.0 {
        return Ok(closed_one_sided(s, q));
    }
    let (lo, hi) = sigma_range(s, delta, npr.eta1());
    if q >= q_ud(npr, s).value() {
        let mut smp = sample_at_sigma(hi, s, delta)?;
        smp.s_prime = 0.0;
        smp.q = FailureBudget::clamped(q);
        return Ok(smp);
    }
    if q <= 0.0 {
        let mut smp = sample_at_sigma(lo, s, delta)?;
        smp.s_prime = s;
        smp.q = FailureBudget::clamped(0.0);
        return Ok(smp);
    }
    let f = |sigma: f64| match tradeoff_from_sigma(sigma, s, delta) {
        Ok((_, q_of)) => q_of - q,
        Err(_) => f64::NAN,
    };
    let sigma = find_root(f, lo, hi, RootOptions::default()).map_err(|e| {
        Error::numeric(
            "tradeoff_at",
            format!("eta1 = {}, s = {s}, Q = {q}: {e}", npr.eta1()),
        )
    })?;
    let mut smp = sample_at_sigma(sigma, s, delta)?;
    smp.q = FailureBudget::clamped(q);
    Ok(smp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::maxsep::max_separation;

    #[test]
    fn endpoints_from_the_formulas() {
        for &(e1, s) in &[(0.1, 0.6), (0.3, 0.4), (0.45, 0.9), (0.02, 0.9)] {
            let pr = Priors::new(e1).unwrap();
            let (lo, hi) = theta_range(pr, s);
            let (sp2, q) = tradeoff_from_angle(PolarAngle(lo), s, pr).unwrap();
            assert!(
                (sp2.sqrt() - s).abs() < 1e-9 && q.abs() < 1e-9,
                "{e1} {s}: {sp2} {q}"
            );
            let (sp2, q) = tradeoff_from_angle(PolarAngle(hi), s, pr).unwrap();
            assert!(sp2.abs() < 1e-12);
            assert!((q - q_ud(pr, s).value()).abs() < 1e-9, "{q}");
        }
    }

    #[test]
    fn sigma_form_matches_angle_form() {
        let pr = Priors::new(0.1).unwrap();
        let d = pr.delta();
        let (lo, hi) = sigma_range(0.6, d, 0.1);
        for k in 1..10 {
            let sigma = lo + (hi - lo) * k as f64 / 10.0;
            let a = tradeoff_from_sigma(sigma, 0.6, d).unwrap();
            let b = tradeoff_from_angle(PolarAngle((d * sigma).asin()), 0.6, pr).unwrap();
            assert!((a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12);
        }
    }

    #[test]
    fn curve_shape() {
        let pr = Priors::new(0.1).unwrap();
        let c = tradeoff_curve(pr, 0.6, 128).unwrap();
        assert_eq!(c.len(), 128);
        assert_eq!((c[0].q.value(), c[0].s_prime), (0.0, 0.6));
        let end = c.last().unwrap();
        assert_eq!(end.s_prime, 0.0);
        assert!((end.q.value() - 0.424).abs() < 1e-12);
    }

    #[test]
    fn equal_priors_follow_closed_form() {
        let c = tradeoff_curve(Priors::equal(), 0.6, 50).unwrap();
        for smp in &c {
            let q = smp.q.value();
            assert!((smp.s_prime - (0.6 - q) / (1.0 - q)).abs() < 1e-15);
        }
        // the parametric branch agrees just off equal priors
        let near = tradeoff_curve(Priors::new(0.5 - 1e-7).unwrap(), 0.6, 50).unwrap();
        for smp in &near[1..] {
            let q = smp.q.value();
            assert!((smp.s_prime - (0.6 - q) / (1.0 - q)).abs() < 1e-8);
        }
    }

    #[test]
    fn inverse_of_max_separation() {
        let pr = Priors::new(0.2).unwrap();
        for &q in &[0.05, 0.2, 0.35] {
            let t = tradeoff_at(pr, 0.7, FailureBudget::new(q).unwrap()).unwrap();
            let m = max_separation(pr, 0.7, FailureBudget::new(q).unwrap()).unwrap();
            assert!(
                (t.s_prime - m.s_prime).abs() < 1e-9,
                "{} {}",
                t.s_prime,
                m.s_prime
            );
        }
    }

    #[test]
    fn rejects_bad_overlap() {
        assert!(tradeoff_curve(Priors::equal(), 1.0, 10).is_err());
        assert!(tradeoff_curve(Priors::equal(), 0.5, 1).is_err());
    }
}

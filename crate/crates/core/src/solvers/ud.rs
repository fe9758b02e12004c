//! Full separation (`s' = 0`), equivalently unambiguous discrimination.

use crate::model::{FailureBudget, FailurePoint, Priors};

/// `eta1` below which the optimum pivots on the endpoint `(1, s^2)`.
pub fn lower_critical_prior(s: f64) -> f64 {
    s * s / (1.0 + s * s)
}

/// `eta1` above which the optimum pivots on the endpoint `(s^2, 1)`.
pub fn upper_critical_prior(s: f64) -> f64 {
    1.0 / (1.0 + s * s)
}

/// Minimum average failure probability for full separation of states with
/// overlap `s` (`0 <= s <= 1`).
pub fn q_ud(pr: Priors, s: f64) -> FailureBudget {
    q_ud_point(pr, s).0
}

/// [`q_ud`] together with the optimal failure point on the hyperbola `q1 q2 = s^2`.
pub fn q_ud_point(pr: Priors, s: f64) -> (FailureBudget, FailurePoint) {
    debug_assert!((0.0..=1.0).contains(&s));
    let (e1, e2) = (pr.eta1(), pr.eta2());
    let s2 = s * s;
    let (q, pt) = if e1 <= lower_critical_prior(s) {
        (e1 + s2 * e2, FailurePoint { q1: 1.0, q2: s2 })
    } else if e1 >= upper_critical_prior(s) {
        (e1 * s2 + e2, FailurePoint { q1: s2, q2: 1.0 })
    } else {
        let g = (e1 * e2).sqrt();
        (
            2.0 * g * s,
            FailurePoint {
                q1: g * s / e1,
                q2: g * s / e2,
            },
        )
    };
    (FailureBudget::clamped(q), pt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::average_failure;

    fn qud(e1: f64, s: f64) -> f64 {
        q_ud(Priors::new(e1).unwrap(), s).value()
    }

    #[test]
    fn examples() {
        assert!((qud(0.5, 0.6) - 0.6).abs() < 1e-15);
        // 0.1 + 0.36 * 0.9
        assert!((qud(0.1, 0.6) - 0.424).abs() < 1e-15);
        assert!((qud(0.9, 0.6) - 0.424).abs() < 1e-15);
    }

    #[test]
    fn continuous_at_branch_points() {
        let s = 0.6;
        for eta in [lower_critical_prior(s), upper_critical_prior(s)] {
            let a = qud(eta - 1e-12, s);
            let b = qud(eta + 1e-12, s);
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn point_is_on_hyperbola_and_consistent() {
        for &e1 in &[0.05, 0.3, 0.5, 0.7, 0.95] {
            let pr = Priors::new(e1).unwrap();
            let (q, pt) = q_ud_point(pr, 0.6);
            assert!((pt.q1 * pt.q2 - 0.36).abs() < 1e-14);
            assert!((average_failure(pt, pr).value() - q.value()).abs() < 1e-14);
        }
    }

    #[test]
    fn dense_minimum_over_hyperbola() {
        for &(e1, s) in &[(0.1, 0.6), (0.3, 0.6), (0.5, 0.2), (0.8, 0.9)] {
            let s2: f64 = s * s;
            let brute = (0..=200_000)
                .map(|k| s2 + (1.0 - s2) * k as f64 / 200_000.0)
                .map(|q1| e1 * q1 + (1.0 - e1) * s2 / q1)
                .fold(f64::INFINITY, f64::min);
            assert!((brute - qud(e1, s)).abs() < 1e-8, "({e1}, {s})");
        }
    }
}

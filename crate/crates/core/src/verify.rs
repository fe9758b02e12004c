//! Self-checks run by `qsep verify` and the acceptance suite. Each check
//! reports its worst observed deviation next to the tolerance it must meet.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::model::{
    in_feasible_set, unitarity_residual, FailureBudget, FailurePoint, OverlapSpec, Priors,
};
use crate::optics::{apply, build_interferometer, certify_separation, InputIndex, ModeState};
use crate::oracle::{oracle_qmin, oracle_qud, OracleConfig};
use crate::solvers::{
    analytic_ud_jump, lower_critical_prior, max_separation, phase_transition_probe, q_ud, qmin_at,
    qmin_curve, tradeoff_at, upper_critical_prior,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub worst: f64,
    pub tol: f64,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &'static str, worst: f64, tol: f64, detail: impl Into<String>) -> Self {
        Self {
            name,
            worst,
            tol,
            passed: worst <= tol,
            detail: detail.into(),
        }
    }

    fn failed(name: &'static str, tol: f64, detail: impl Into<String>) -> Self {
        Self {
            name,
            worst: f64::INFINITY,
            tol,
            passed: false,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Random trials for the nesting and convexity properties.
    pub property_trials: usize,
    /// Points per axis of the oracle agreement grid.
    pub oracle_grid: usize,
    pub round_trip_instances: usize,
    pub shots: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            seed: 2015,
            property_trials: 10_000,
            oracle_grid: 10,
            round_trip_instances: 1000,
            shots: 1_000_000,
        }
    }
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn linspace(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |k| match k {
        0 => lo,
        _ if k + 1 == n => hi,
        _ => lo + (hi - lo) * k as f64 / (n - 1) as f64,
    })
}

/// Residual at `(1, s^2)` and `(s^2, 1)` for `beta` in `[0, s]`.
pub fn check_endpoints() -> CheckResult {
    let mut worst: f64 = 0.0;
    for s in linspace(0.05, 0.95, 19) {
        for beta in linspace(0.0, s, 21) {
            let ov = OverlapSpec::new(s, beta, 1.0).expect("valid grid");
            for pt in [
                FailurePoint { q1: 1.0, q2: s * s },
                FailurePoint { q1: s * s, q2: 1.0 },
            ] {
                worst = worst.max(unitarity_residual(pt, ov).abs());
            }
        }
    }
    CheckResult::new("feasible_endpoints", worst, 1e-12, "19 x 21 (s, beta) grid")
}

/// Feasible at `beta` implies feasible at any larger `beta`.
pub fn check_nesting(trials: usize, seed: u64) -> CheckResult {
    let mut r = rng(seed, 1);
    let mut violations = 0usize;
    for _ in 0..trials {
        let s: f64 = r.random_range(0.05..0.95);
        let b1: f64 = r.random_range(0.0..s);
        let b2: f64 = r.random_range(b1..=s);
        let pt = FailurePoint {
            q1: r.random(),
            q2: r.random(),
        };
        let lo = OverlapSpec::new(s, b1, 1.0).expect("valid");
        let hi = OverlapSpec::new(s, b2, 1.0).expect("valid");
        if in_feasible_set(pt, lo) && !in_feasible_set(pt, hi) {
            violations += 1;
        }
    }
    CheckResult::new(
        "feasible_nesting",
        violations as f64,
        0.0,
        format!("{trials} random triples"),
    )
}

/// Convex combinations of feasible points stay feasible.
pub fn check_convexity(trials: usize, seed: u64) -> CheckResult {
    let mut r = rng(seed, 2);
    let mut violations = 0usize;
    let grid: Vec<(f64, f64)> = [0.3, 0.6, 0.9]
        .iter()
        .flat_map(|&s| [0.0, 0.5 * s, 0.9 * s].map(move |b| (s, b)))
        .collect();
    for &(s, beta) in &grid {
        let ov = OverlapSpec::new(s, beta, 1.0).expect("valid");
        let draw = |r: &mut ChaCha8Rng| loop {
            let pt = FailurePoint {
                q1: r.random(),
                q2: r.random(),
            };
            if in_feasible_set(pt, ov) {
                return pt;
            }
        };
        for _ in 0..trials {
            let a = draw(&mut r);
            let b = draw(&mut r);
            let lambda: f64 = r.random();
            if !in_feasible_set(a.mix(&b, lambda), ov) {
                violations += 1;
            }
        }
    }
    CheckResult::new(
        "feasible_convexity",
        violations as f64,
        0.0,
        format!("{trials} random pairs at each of {} (s, beta)", grid.len()),
    )
}

/// Closed-form full-separation failure against a dense hyperbola scan, on a
/// 50-point grid that covers all three branches.
pub fn check_ud_dense() -> CheckResult {
    let mut cases = Vec::with_capacity(50);
    for s in [0.2, 0.4, 0.6, 0.8, 0.95] {
        let (lo, hi) = (lower_critical_prior(s), upper_critical_prior(s));
        let etas = [
            0.5 * lo,
            0.9 * lo,
            lo,
            lo + 0.25 * (hi - lo),
            0.5,
            lo + 0.75 * (hi - lo),
            hi,
            hi + 0.1 * (1.0 - hi),
            hi + 0.5 * (1.0 - hi),
            0.999,
        ];
        cases.extend(etas.map(|e| (e, s)));
    }
    let worst = cases
        .par_iter()
        .map(|&(e, s)| {
            let pr = Priors::new(e).expect("valid");
            (q_ud(pr, s).value() - oracle_qud(pr, s, 400_001)).abs()
        })
        .reduce(|| 0.0, f64::max);
    CheckResult::new(
        "ud_dense",
        worst,
        1e-8,
        format!("{} (eta1, s) points", cases.len()),
    )
}

/// The `n x n x n` grid of the oracle agreement check.
pub fn oracle_grid(n: usize) -> Vec<(f64, f64, f64)> {
    let mut out = Vec::with_capacity(n * n * n);
    for e in linspace(0.02, 0.5, n) {
        for s in linspace(0.1, 0.9, n) {
            for sp in linspace(0.0, s, n) {
                out.push((e, s, sp));
            }
        }
    }
    out
}

type GridPoint = (f64, f64, f64);

/// `qmin_at` against the brute-force oracle.
pub fn check_oracle_agreement(n: usize) -> CheckResult {
    let grid = oracle_grid(n);
    let cfg = OracleConfig::default();
    let res: Result<Vec<(f64, GridPoint)>> = grid
        .par_iter()
        .map(|&(e, s, sp)| {
            let pr = Priors::new(e)?;
            let ov = OverlapSpec::with_optimal_flags(s, sp)?;
            let a = qmin_at(pr, ov)?.0.value();
            let b = oracle_qmin(pr, ov, cfg)?.0.value();
            Ok(((a - b).abs(), (e, s, sp)))
        })
        .collect();
    match res {
        Ok(v) => {
            let (worst, at) =
                v.into_iter().fold(
                    (0.0, (0.0, 0.0, 0.0)),
                    |acc, x| if x.0 > acc.0 { x } else { acc },
                );
            CheckResult::new(
                "oracle_agreement",
                worst,
                1e-6,
                format!("{} instances; worst at (eta1, s, s') = {at:?}", grid.len()),
            )
        }
        Err(e) => CheckResult::failed("oracle_agreement", 1e-6, e.to_string()),
    }
}

/// Signature of a max-separation solver: `(priors, s, Q_max) -> s'_min`.
pub type MaxSepFn<'a> = dyn Fn(Priors, f64, FailureBudget) -> Result<f64> + Sync + 'a;

/// The library's own max-separation solver in [`MaxSepFn`] form.
pub fn default_max_separation(pr: Priors, s: f64, q: FailureBudget) -> Result<f64> {
    Ok(max_separation(pr, s, q)?.s_prime)
}

/// One random instance of the round-trip check: a point `(eta1, Q_min, s')`
/// sampled from the fixed-separation curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RoundTripCase {
    pub s: f64,
    pub s_prime: f64,
    pub eta1: f64,
    pub q_min: f64,
}

pub fn round_trip_cases(n: usize, seed: u64) -> Result<Vec<RoundTripCase>> {
    let mut r = rng(seed, 3);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let s: f64 = r.random_range(0.1..0.9);
        let sp: f64 = s * r.random_range(0.02..0.98);
        let k: usize = r.random_range(0..64);
        let curve = qmin_curve(OverlapSpec::with_optimal_flags(s, sp)?, 64)?;
        let smp = curve[k];
        if smp.q_min >= q_ud(Priors::new(smp.eta1)?, s).value() {
            continue;
        }
        out.push(RoundTripCase {
            s,
            s_prime: sp,
            eta1: smp.eta1,
            q_min: smp.q_min,
        });
    }
    Ok(out)
}

/// `(worst max-separation gap, worst tradeoff gap)` over the cases.
pub fn round_trip_gaps(cases: &[RoundTripCase], maxsep: &MaxSepFn<'_>) -> Result<(f64, f64)> {
    let gaps: Result<Vec<(f64, f64)>> = cases
        .par_iter()
        .map(|c| {
            let pr = Priors::new(c.eta1)?;
            let q = FailureBudget::new(c.q_min)?;
            let a = maxsep(pr, c.s, q)?;
            let b = tradeoff_at(pr, c.s, q)?;
            Ok((
                (a - c.s_prime).abs(),
                (b.s_prime - c.s_prime)
                    .abs()
                    .max((b.q.value() - c.q_min).abs()),
            ))
        })
        .collect();
    Ok(gaps?
        .into_iter()
        .fold((0.0, 0.0), |acc, g| (acc.0.max(g.0), acc.1.max(g.1))))
}

pub fn check_round_trip(n: usize, seed: u64, maxsep: &MaxSepFn<'_>) -> CheckResult {
    let run = || -> Result<(f64, f64)> { round_trip_gaps(&round_trip_cases(n, seed)?, maxsep) };
    match run() {
        Ok((a, b)) => CheckResult::new(
            "round_trip",
            a.max(b),
            1e-6,
            format!("{n} instances; max-separation gap {a:.3e}, tradeoff gap {b:.3e}"),
        ),
        Err(e) => CheckResult::failed("round_trip", 1e-6, e.to_string()),
    }
}

/// Unitarity, factorization and protocol amplitudes for random `(s, s')`.
pub fn check_optics_exact(n: usize, seed: u64) -> CheckResult {
    let mut r = rng(seed, 4);
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let s: f64 = r.random_range(0.0..0.99);
        let sp: f64 = r.random_range(0.0..=s);
        let itf = match build_interferometer(s, sp) {
            Ok(i) => i,
            Err(e) => return CheckResult::failed("optics_exact", 1e-12, e.to_string()),
        };
        worst = worst
            .max(itf.unitarity_deviation())
            .max(itf.factorization_deviation());
        let q = itf.target_failure();
        let p = (1.0 - q).sqrt();
        let want = [
            [p, 0.0, q.sqrt()],
            [p * sp, p * (1.0 - sp * sp).sqrt(), q.sqrt()],
        ];
        for (ix, w) in [InputIndex::First, InputIndex::Second]
            .into_iter()
            .zip(want)
        {
            let out = apply(&itf, &ModeState::input(ix, s)).amplitudes();
            for k in 0..3 {
                worst = worst.max((out[k].re - w[k]).abs()).max(out[k].im.abs());
            }
        }
    }
    CheckResult::new("optics_exact", worst, 1e-12, format!("{n} random (s, s')"))
}

/// Shot statistics at `(0.6, 0.3)` and `(0.6, 0)`; `worst` is the largest
/// `|z|` of the failure rates.
pub fn check_optics_statistics(shots: u64, seed: u64) -> CheckResult {
    let mut worst: f64 = 0.0;
    let mut ok = true;
    let mut notes = Vec::new();
    for (s, sp) in [(0.6, 0.3), (0.6, 0.0)] {
        let rep =
            match build_interferometer(s, sp).and_then(|i| certify_separation(&i, shots, seed)) {
                Ok(r) => r,
                Err(e) => return CheckResult::failed("optics_statistics", 3.0, e.to_string()),
            };
        for inp in &rep.inputs {
            worst = worst.max(inp.z.abs());
        }
        ok &= rep.passed;
        notes.push(format!(
            "(s, s') = ({s}, {sp}): {}",
            if rep.passed { "certified" } else { "rejected" }
        ));
    }
    let mut c = CheckResult::new("optics_statistics", worst, 3.0, notes.join("; "));
    c.passed &= ok;
    c
}

/// Relative error of the full-separation jump and size of the `s' = 0.05` jump.
pub fn phase_probe_values(h: f64) -> Result<(f64, f64)> {
    let s = 0.6;
    let eta = lower_critical_prior(s);
    let exact = analytic_ud_jump(s);
    let rel = ((phase_transition_probe(s, 0.0, eta, h)? - exact) / exact).abs();
    let smooth = phase_transition_probe(s, 0.05, eta, h)?.abs();
    Ok((rel, smooth))
}

pub fn check_phase_transition() -> CheckResult {
    match phase_probe_values(1e-4) {
        Ok((rel, smooth)) => {
            let mut c = CheckResult::new(
                "phase_transition",
                rel,
                0.05,
                format!(
                    "relative jump error {rel:.3e}; jump at s' = 0.05: {smooth:.3e} (limit 1e-2)"
                ),
            );
            c.passed &= smooth < 1e-2;
            c
        }
        Err(e) => CheckResult::failed("phase_transition", 0.05, e.to_string()),
    }
}

/// All checks, in a fixed order.
pub fn run_all(opts: &VerifyOptions) -> Vec<CheckResult> {
    vec![
        check_endpoints(),
        check_nesting(opts.property_trials, opts.seed),
        check_convexity(opts.property_trials, opts.seed),
        check_ud_dense(),
        check_oracle_agreement(opts.oracle_grid),
        check_round_trip(
            opts.round_trip_instances,
            opts.seed,
            &default_max_separation,
        ),
        check_phase_transition(),
        check_optics_exact(100, opts.seed),
        check_optics_statistics(opts.shots, opts.seed),
    ]
}

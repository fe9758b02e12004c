//! Acceptance gate: one line per criterion, nonzero exit if any fails.

use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use qsep_core::model::{in_feasible_set, unitarity_residual, FailurePoint};
use qsep_core::optics::{apply, build_interferometer, certify_separation, InputIndex, ModeState};
use qsep_core::oracle::{oracle_qmin, OracleConfig};
use qsep_core::solvers::{
    max_separation, phase_transition_probe, q_ud, qmin_at, qmin_curve, tradeoff_at,
};
use qsep_core::{FailureBudget, OverlapSpec, Priors};

type CsvCheck<'a> = &'a dyn Fn(&[String], &[Vec<f64>]) -> Result<(), String>;
type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| {
            if k + 1 == n {
                hi
            } else {
                lo + (hi - lo) * k as f64 / (n - 1) as f64
            }
        })
        .collect()
}

fn figure_example() -> Outcome {
    let t = Instant::now();
    let r = max_separation(
        Priors::new(0.3).unwrap(),
        0.4,
        FailureBudget::new(0.35).unwrap(),
    );
    let dt = t.elapsed();
    match r {
        Ok(m) => outcome(
            (m.s_prime - 0.032).abs() <= 1e-3 && dt < Duration::from_secs(1),
            format!("s'_min = {:.6} (target 0.032 +- 0.001)", m.s_prime),
        ),
        Err(e) => outcome(false, e.to_string()),
    }
}

/// Dense scan of `eta1 q1 + eta2 s^2 / q1` over `q1` in `[s^2, 1]`.
fn hyperbola_scan(e1: f64, s: f64) -> f64 {
    let s2 = s * s;
    let n = 1_000_000;
    let mut best = f64::INFINITY;
    for k in 0..=n {
        let q1 = s2 + (1.0 - s2) * k as f64 / n as f64;
        best = best.min(e1 * q1 + (1.0 - e1) * s2 / q1);
    }
    best
}

fn ud_closed_form() -> Outcome {
    let mut cases = Vec::new();
    for s in [0.2, 0.45, 0.6, 0.8, 0.95] {
        let lo = s * s / (1.0 + s * s);
        let hi = 1.0 / (1.0 + s * s);
        for e in [
            0.3 * lo,
            0.8 * lo,
            lo,
            0.5 * (lo + 0.5),
            0.5,
            0.5 * (0.5 + hi),
            hi,
            0.5 * (hi + 1.0),
            0.98,
            1.0,
        ] {
            cases.push((e, s));
        }
    }
    let branches = |e: f64, s: f64| {
        let s2 = s * s;
        if e <= s2 / (1.0 + s2) {
            0
        } else if e >= 1.0 / (1.0 + s2) {
            2
        } else {
            1
        }
    };
    let covered: std::collections::BTreeSet<_> =
        cases.iter().map(|&(e, s)| branches(e, s)).collect();
    let worst = cases
        .par_iter()
        .map(|&(e, s)| (q_ud(Priors::new(e).unwrap(), s).value() - hyperbola_scan(e, s)).abs())
        .reduce(|| 0.0, f64::max);
    outcome(
        worst <= 1e-8 && covered.len() == 3 && cases.len() == 50,
        format!(
            "{} points, {} branches, worst gap {worst:.2e} (tol 1e-8)",
            cases.len(),
            covered.len()
        ),
    )
}

fn oracle_equivalence() -> Outcome {
    let mut grid = Vec::new();
    for e in linspace(0.02, 0.5, 10) {
        for s in linspace(0.1, 0.9, 10) {
            for sp in linspace(0.0, s, 10) {
                grid.push((e, s, sp));
            }
        }
    }
    let cfg = OracleConfig::default();
    let res: Result<Vec<f64>, String> = grid
        .par_iter()
        .map(|&(e, s, sp)| {
            let pr = Priors::new(e).map_err(|x| x.to_string())?;
            let ov = OverlapSpec::with_optimal_flags(s, sp).map_err(|x| x.to_string())?;
            let a = qmin_at(pr, ov).map_err(|x| format!("qmin_at({e}, {s}, {sp}): {x}"))?;
            let b = oracle_qmin(pr, ov, cfg).map_err(|x| format!("oracle({e}, {s}, {sp}): {x}"))?;
            Ok((a.0.value() - b.0.value()).abs())
        })
        .collect();
    match res {
        Ok(v) => {
            let worst = v.iter().cloned().fold(0.0, f64::max);
            outcome(
                worst <= 1e-6,
                format!("{} instances, worst gap {worst:.2e} (tol 1e-6)", v.len()),
            )
        }
        Err(e) => outcome(false, e),
    }
}

fn round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut cases = Vec::new();
    while cases.len() < 1000 {
        let s: f64 = rng.random_range(0.1..0.9);
        let sp = s * rng.random_range(0.02..0.98);
        let k: usize = rng.random_range(0..128);
        let smp = qmin_curve(OverlapSpec::with_optimal_flags(s, sp).unwrap(), 128).unwrap()[k];
        if smp.q_min < q_ud(Priors::new(smp.eta1).unwrap(), s).value() {
            cases.push((s, sp, smp.eta1, smp.q_min));
        }
    }
    let res: Result<Vec<(f64, f64)>, String> = cases
        .par_iter()
        .map(|&(s, sp, e, q)| {
            let pr = Priors::new(e).map_err(|x| x.to_string())?;
            let budget = FailureBudget::new(q).map_err(|x| x.to_string())?;
            let m = max_separation(pr, s, budget)
                .map_err(|x| format!("max_separation({e}, {s}, {q}): {x}"))?;
            let t =
                tradeoff_at(pr, s, budget).map_err(|x| format!("tradeoff({e}, {s}, {q}): {x}"))?;
            Ok((
                (m.s_prime - sp).abs(),
                (t.s_prime - sp).abs().max((t.q.value() - q).abs()),
            ))
        })
        .collect();
    match res {
        Ok(v) => {
            let a = v.iter().map(|x| x.0).fold(0.0, f64::max);
            let b = v.iter().map(|x| x.1).fold(0.0, f64::max);
            outcome(
                a <= 1e-6 && b <= 1e-6,
                format!(
                    "{} instances, max-separation gap {a:.2e}, tradeoff gap {b:.2e} (tol 1e-6)",
                    v.len()
                ),
            )
        }
        Err(e) => outcome(false, e),
    }
}

fn feasible_set_suite() -> Outcome {
    let mut endpoint_worst: f64 = 0.0;
    for s in linspace(0.0, 1.0, 41) {
        for beta in linspace(0.0, s, 21) {
            let ov = OverlapSpec::new(s, beta, 1.0).unwrap();
            let a = unitarity_residual(FailurePoint::new(1.0, s * s).unwrap(), ov).abs();
            let b = unitarity_residual(FailurePoint::new(s * s, 1.0).unwrap(), ov).abs();
            endpoint_worst = endpoint_worst.max(a).max(b);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let mut nest_bad = 0;
    for _ in 0..10_000 {
        let s: f64 = rng.random_range(0.01..1.0);
        let b1: f64 = rng.random_range(0.0..s);
        let b2: f64 = rng.random_range(b1..=s);
        let pt = FailurePoint::new(rng.random(), rng.random()).unwrap();
        if in_feasible_set(pt, OverlapSpec::new(s, b1, 1.0).unwrap())
            && !in_feasible_set(pt, OverlapSpec::new(s, b2, 1.0).unwrap())
        {
            nest_bad += 1;
        }
    }
    let mut conv_bad = 0;
    let mut trials = 0;
    while trials < 10_000 {
        let s: f64 = rng.random_range(0.05..0.95);
        let ov = OverlapSpec::new(s, s * rng.random::<f64>(), 1.0).unwrap();
        let a = FailurePoint::new(rng.random(), rng.random()).unwrap();
        let b = FailurePoint::new(rng.random(), rng.random()).unwrap();
        if !(in_feasible_set(a, ov) && in_feasible_set(b, ov)) {
            continue;
        }
        trials += 1;
        if !in_feasible_set(a.mix(&b, rng.random()), ov) {
            conv_bad += 1;
        }
    }
    outcome(
        endpoint_worst <= 1e-12 && nest_bad == 0 && conv_bad == 0,
        format!(
            "endpoint residual {endpoint_worst:.1e}, nesting violations {nest_bad}/10000, convexity violations {conv_bad}/{trials}"
        ),
    )
}

fn phase_transition() -> Outcome {
    let s: f64 = 0.6;
    let eta = s * s / (1.0 + s * s);
    // interior branch 2 s sqrt(eta (1 - eta)) has second derivative
    // -s / (2 (eta (1 - eta))^{3/2}); the endpoint branch is linear
    let exact = -s / (2.0 * (eta * (1.0 - eta)).powf(1.5));
    let run = || -> Result<(f64, f64), String> {
        let full = phase_transition_probe(s, 0.0, eta, 1e-4).map_err(|e| e.to_string())?;
        let smooth = phase_transition_probe(s, 0.05, eta, 1e-4).map_err(|e| e.to_string())?;
        Ok((full, smooth))
    };
    match run() {
        Ok((full, smooth)) => {
            let rel = ((full - exact) / exact).abs();
            outcome(
                rel <= 0.05 && smooth.abs() < 1e-2,
                format!("jump {full:.5} vs analytic {exact:.5} (rel {rel:.2e}, tol 5%); s' = 0.05 jump {smooth:.2e} (tol 1e-2)"),
            )
        }
        Err(e) => outcome(false, e),
    }
}

fn optics_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let s: f64 = rng.random_range(0.0..0.999);
        let sp: f64 = rng.random_range(0.0..=s);
        let itf = build_interferometer(s, sp).unwrap();
        let u = itf.u();
        let utu = u.transpose() * u;
        for i in 0..3 {
            for j in 0..3 {
                let id = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((utu[(i, j)] - id).abs());
            }
        }
        let prod = itf.bs1() * itf.bs2();
        worst = worst.max((prod - u).iter().fold(0.0, |m: f64, x| m.max(x.abs())));
        let q = (s - sp) / (1.0 - sp);
        let (p, r) = ((1.0 - q).sqrt(), q.sqrt());
        let want1 = [p, 0.0, r];
        let want2 = [p * sp, p * (1.0 - sp * sp).sqrt(), r];
        let got1 = apply(&itf, &ModeState::input(InputIndex::First, s)).amplitudes();
        let got2 = apply(&itf, &ModeState::input(InputIndex::Second, s)).amplitudes();
        for k in 0..3 {
            worst = worst
                .max((got1[k].re - want1[k]).abs())
                .max(got1[k].im.abs());
            worst = worst
                .max((got2[k].re - want2[k]).abs())
                .max(got2[k].im.abs());
        }
    }
    outcome(
        worst <= 1e-12,
        format!("100 random (s, s'), worst deviation {worst:.2e} (tol 1e-12)"),
    )
}

fn optics_statistics() -> Outcome {
    let t = Instant::now();
    let shots = 1_000_000u64;
    let mut ok = true;
    let mut notes = Vec::new();
    for (sp, q) in [(0.3, 3.0 / 7.0), (0.0, 0.6)] {
        let itf = build_interferometer(0.6, sp).unwrap();
        let rep = certify_separation(&itf, shots, 2024).unwrap();
        let band = 3.0 * (q * (1.0 - q) / shots as f64).sqrt();
        for inp in &rep.inputs {
            let dev = (inp.empirical_failure - q).abs();
            ok &= dev <= band && inp.chi_square.passed;
            notes.push(format!(
                "s'={sp} in{}: |dQ|/3sigma {:.2}, chi2 {:.2}/{:.2}",
                if inp.input == InputIndex::First { 1 } else { 2 },
                dev / band,
                inp.chi_square.statistic,
                inp.chi_square.critical.unwrap_or(f64::NAN)
            ));
        }
    }
    let dt = t.elapsed();
    outcome(ok && dt < Duration::from_secs(30), notes.join("; "))
}

fn run_cli(args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_qsep"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(out.stdout)
}

fn parse_csv(bytes: &[u8]) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut rdr = csv::Reader::from_reader(bytes);
    let header = rdr
        .headers()
        .map(|h| h.iter().map(str::to_string).collect())
        .unwrap_or_default();
    let rows = rdr
        .records()
        .filter_map(|r| r.ok())
        .map(|r| {
            r.iter()
                .map(|x| x.parse::<f64>().unwrap_or(f64::NAN))
                .collect()
        })
        .collect();
    (header, rows)
}

fn column(rows: &[Vec<f64>], k: usize) -> Vec<f64> {
    rows.iter().map(|r| r[k]).collect()
}

fn nondecreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] >= w[0] - 1e-12)
}

fn nonincreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] <= w[0] + 1e-12)
}

fn figure_data() -> Outcome {
    let mut problems = Vec::new();
    let mut files = 0;
    let mut check = |args: Vec<String>, verify: CsvCheck| {
        let argv: Vec<&str> = args.iter().map(String::as_str).collect();
        match (run_cli(&argv), run_cli(&argv)) {
            (Ok(a), Ok(b)) => {
                files += 1;
                if a != b {
                    problems.push(format!("{argv:?}: output differs between runs"));
                }
                let (h, rows) = parse_csv(&a);
                if let Err(e) = verify(&h, &rows) {
                    problems.push(format!("{argv:?}: {e}"));
                }
            }
            (Err(e), _) | (_, Err(e)) => problems.push(e),
        }
    };
    for sp in ["0.05", "0.3", "0.5", "0.59"] {
        let spv: f64 = sp.parse().unwrap();
        check(
            ["qmin", "--s", "0.6", "--s-prime", sp]
                .map(String::from)
                .to_vec(),
            &|h, rows| {
                if h != ["t", "eta1", "q_min", "q1", "q2"] || rows.len() != 512 {
                    return Err("bad header or row count".into());
                }
                let (eta, q) = (column(rows, 1), column(rows, 2));
                // Q_min increases with eta1; the sweep runs from eta1 = 1/2 down to 0
                if !(nonincreasing(&eta) && nonincreasing(&q)) {
                    return Err("Q_min not monotone in eta1".into());
                }
                let q_m1 = (0.6 - spv) / (1.0 - spv);
                let q_0 = (0.36 - spv * spv) / (1.0 - spv * spv);
                if (q[0] - q_m1).abs() > 1e-12 || (q[511] - q_0).abs() > 1e-12 {
                    return Err(format!("end values {} {} vs {q_m1} {q_0}", q[0], q[511]));
                }
                Ok(())
            },
        );
    }
    for (e, q) in [
        ("0.5", "0.2"),
        ("0.3", "0.35"),
        ("0.1", "0.4"),
        ("0.3", "0"),
    ] {
        let qv: f64 = q.parse().unwrap();
        let ev: f64 = e.parse().unwrap();
        check(
            ["maxsep", "--eta1", e, "--q-max", q]
                .map(String::from)
                .to_vec(),
            &|h, rows| {
                if h != ["s", "s_prime_min"] {
                    return Err("bad header".into());
                }
                let (s, sp) = (column(rows, 0), column(rows, 1));
                if !(nondecreasing(&s) && nondecreasing(&sp)) {
                    return Err("s'_min not monotone in s".into());
                }
                if sp.iter().zip(&s).any(|(a, b)| *a > *b + 1e-12) {
                    return Err("s'_min above s".into());
                }
                if qv == 0.0 && sp.iter().zip(&s).any(|(a, b)| (a - b).abs() > 1e-12) {
                    return Err("zero budget is not the identity".into());
                }
                if ev == 0.5 {
                    for (a, b) in s.iter().zip(&sp) {
                        let want = if *a <= qv { 0.0 } else { (a - qv) / (1.0 - qv) };
                        if (b - want).abs() > 1e-12 {
                            return Err(format!("equal priors at s = {a}: {b} vs {want}"));
                        }
                    }
                }
                Ok(())
            },
        );
    }
    for e in ["0.5", "0.3", "0.1", "0.02"] {
        let ev: f64 = e.parse().unwrap();
        check(
            ["tradeoff", "--eta1", e, "--s", "0.6"]
                .map(String::from)
                .to_vec(),
            &|h, rows| {
                if h != ["theta", "q", "s_prime"] || rows.len() != 512 {
                    return Err("bad header or row count".into());
                }
                let (q, sp) = (column(rows, 1), column(rows, 2));
                if !(nondecreasing(&q) && nonincreasing(&sp)) {
                    return Err("tradeoff not monotone".into());
                }
                let q_end = q_ud(Priors::new(ev).unwrap(), 0.6).value();
                if q[0] != 0.0
                    || (sp[0] - 0.6).abs() > 1e-15
                    || sp[511] != 0.0
                    || (q[511] - q_end).abs() > 1e-9
                {
                    return Err("endpoints wrong".into());
                }
                Ok(())
            },
        );
    }
    outcome(
        problems.is_empty(),
        if problems.is_empty() {
            format!("{files} files monotone and byte-stable")
        } else {
            problems.join("; ")
        },
    )
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("max separation figure example", figure_example),
        ("full-separation closed form vs dense scan", ud_closed_form),
        ("qmin_at vs brute-force oracle", oracle_equivalence),
        ("round trip across solution families", round_trip),
        ("feasible-set properties", feasible_set_suite),
        ("phase transition", phase_transition),
        ("optics exactness", optics_exactness),
        ("optics statistics", optics_statistics),
        ("figure data regeneration", figure_data),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let o = f();
        let dt = t.elapsed();
        if !o.passed {
            failed += 1;
        }
        println!(
            "criterion {} {}: {name}: {} [{:.2?}]",
            k + 1,
            if o.passed { "PASS" } else { "FAIL" },
            o.detail,
            dt
        );
    }
    println!(
        "acceptance: {}/{} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

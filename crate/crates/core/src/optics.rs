//! Single-photon, three-port interferometer realizing optimal separation for
//! equal priors, and a Monte Carlo model of its detectors.
//!
//! Input states live in the span of ports 1 and 2:
//! `|psi1> = |1>`, `|psi2> = s |1> + sqrt(1 - s^2) |2>`, port 3 in vacuum.
//! A click at output port 3' signals failure; ports 1' and 2' carry the
//! separated states `|psi1'> = |1'>`, `|psi2'> = s' |1'> + sqrt(1 - s'^2) |2'>`.

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

/// Tolerance on state norms and on the exact matrix identities.
pub const EXACT_TOL: f64 = 1e-12;

/// Number of independently seeded shot batches.
pub const SHARDS: u64 = 64;

/// Minimum number of shots accepted by [`certify_separation`].
pub const MIN_CERTIFY_SHOTS: u64 = 10_000;

/// Single-photon amplitudes over ports `(1, 2, 3)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeState {
    amplitudes: [Complex64; 3],
}

impl ModeState {
    pub fn new(amplitudes: [Complex64; 3]) -> Result<Self> {
        let st = Self { amplitudes };
        let n = st.norm_sqr();
        if (n - 1.0).abs() > EXACT_TOL {
            return Err(Error::domain(format!("state norm^2 = {n} is not 1")));
        }
        Ok(st)
    }

    pub fn from_real(a: [f64; 3]) -> Result<Self> {
        Self::new(a.map(|x| Complex64::new(x, 0.0)))
    }

    /// `|psi1>` (index 1) or `|psi2>` (index 2) for initial overlap `s`.
    pub fn input(index: InputIndex, s: f64) -> Self {
        let a = match index {
            InputIndex::First => [1.0, 0.0, 0.0],
            InputIndex::Second => [s, (1.0 - s * s).max(0.0).sqrt(), 0.0],
        };
        Self {
            amplitudes: a.map(|x| Complex64::new(x, 0.0)),
        }
    }

    pub fn amplitudes(&self) -> [Complex64; 3] {
        self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Detection probabilities `|a_k|^2` per port.
    pub fn probabilities(&self) -> [f64; 3] {
        self.amplitudes.map(|a| a.norm_sqr())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum InputIndex {
    First,
    Second,
}

impl InputIndex {
    fn stream_tag(self) -> u64 {
        match self {
            InputIndex::First => 1,
            InputIndex::Second => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Interferometer {
    u: Matrix3<f64>,
    bs1: Matrix3<f64>,
    bs2: Matrix3<f64>,
    s: f64,
    s_prime: f64,
}

fn max_abs(m: &Matrix3<f64>) -> f64 {
    m.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

fn unitarity_gap(m: &Matrix3<f64>) -> f64 {
    max_abs(&(m.transpose() * m - Matrix3::identity()))
}

impl Interferometer {
    /// Assembles an interferometer from arbitrary matrices without checks.
    pub fn from_parts(
        u: Matrix3<f64>,
        bs1: Matrix3<f64>,
        bs2: Matrix3<f64>,
        s: f64,
        s_prime: f64,
    ) -> Self {
        Self {
            u,
            bs1,
            bs2,
            s,
            s_prime,
        }
    }

    /// Copy with `U[(row, col)]` shifted by `delta`.
    pub fn with_perturbed_entry(&self, row: usize, col: usize, delta: f64) -> Self {
        let mut out = self.clone();
        out.u[(row, col)] += delta;
        out
    }

    pub fn u(&self) -> &Matrix3<f64> {
        &self.u
    }

    pub fn bs1(&self) -> &Matrix3<f64> {
        &self.bs1
    }

    pub fn bs2(&self) -> &Matrix3<f64> {
        &self.bs2
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn s_prime(&self) -> f64 {
        self.s_prime
    }

    /// Failure probability of the ideal protocol, `(s - s') / (1 - s')`.
    pub fn target_failure(&self) -> f64 {
        (self.s - self.s_prime) / (1.0 - self.s_prime)
    }

    /// Largest of `max |U^T U - I|` over `U` and both beam splitters.
    pub fn unitarity_deviation(&self) -> f64 {
        unitarity_gap(&self.u)
            .max(unitarity_gap(&self.bs1))
            .max(unitarity_gap(&self.bs2))
    }

    /// `max |M1 M2 - U|`.
    pub fn factorization_deviation(&self) -> f64 {
        max_abs(&(self.bs1 * self.bs2 - self.u))
    }
}

/// The equal-prior separation interferometer for `0 <= s' <= s < 1`.
pub fn build_interferometer(s: f64, s_prime: f64) -> Result<Interferometer> {
    if !(0.0..1.0).contains(&s) {
        return Err(Error::domain(format!(
            "interferometer needs 0 <= s < 1, got s = {s}"
        )));
    }
    if !(0.0..=s).contains(&s_prime) {
        return Err(Error::domain(format!(
            "interferometer needs 0 <= s' <= s, got s' = {s_prime}, s = {s}"
        )));
    }
    let d = s - s_prime;
    let t1 = ((1.0 - s) / (1.0 - s_prime)).sqrt();
    let r1 = (d / (1.0 - s_prime)).sqrt();
    let t2 = ((1.0 + s_prime) / (1.0 + s)).sqrt();
    let r2 = (d / (1.0 + s)).sqrt();
    let u = Matrix3::new(
        t1,
        -d / ((1.0 - s_prime) * (1.0 + s)).sqrt(),
        -((1.0 + s_prime) * d / ((1.0 - s_prime) * (1.0 + s))).sqrt(),
        0.0,
        t2,
        -r2,
        r1,
        ((1.0 - s) * d / ((1.0 + s) * (1.0 - s_prime))).sqrt(),
        ((1.0 - s) * (1.0 + s_prime) / ((1.0 - s_prime) * (1.0 + s))).sqrt(),
    );
    let bs1 = Matrix3::new(t1, 0.0, -r1, 0.0, 1.0, 0.0, r1, 0.0, t1);
    let bs2 = Matrix3::new(1.0, 0.0, 0.0, 0.0, t2, -r2, 0.0, r2, t2);
    Ok(Interferometer {
        u,
        bs1,
        bs2,
        s,
        s_prime,
    })
}

/// Output state `U |st>`.
pub fn apply(itf: &Interferometer, st: &ModeState) -> ModeState {
    let v = Vector3::from(st.amplitudes);
    let out = itf.u.map(|x| Complex64::new(x, 0.0)) * v;
    ModeState {
        amplitudes: [out[0], out[1], out[2]],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ShotCounts {
    pub n1: u64,
    pub n2: u64,
    pub n3: u64,
    pub shots: u64,
    pub seed: u64,
}

impl ShotCounts {
    /// Empirical failure rate `n3 / shots`.
    pub fn failure_rate(&self) -> f64 {
        self.n3 as f64 / self.shots as f64
    }

    pub fn as_array(&self) -> [u64; 3] {
        [self.n1, self.n2, self.n3]
    }
}

fn sample_ports(probs: [f64; 3], shots: u64, seed: u64, tag: u64) -> Result<[u64; 3]> {
    let dist = WeightedIndex::new(probs).map_err(|e| {
        Error::numeric(
            "simulate",
            format!("bad detection probabilities {probs:?}: {e}"),
        )
    })?;
    let per = shots / SHARDS;
    let extra = shots % SHARDS;
    let counts: Vec<[u64; 3]> = (0..SHARDS)
        .into_par_iter()
        .map(|shard| {
            let n = per + u64::from(shard < extra);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream((tag << 32) | shard);
            let mut c = [0u64; 3];
            for _ in 0..n {
                c[dist.sample(&mut rng)] += 1;
            }
            c
        })
        .collect();
    Ok(counts.iter().fold([0; 3], |acc, c| {
        [acc[0] + c[0], acc[1] + c[1], acc[2] + c[2]]
    }))
}

/// Detector counts for `shots` photons sent in as input `index`.
///
/// Shots are split into [`SHARDS`] batches, each drawing from its own ChaCha8
/// stream of `seed`, so counts depend only on `(seed, index, shots)`.
pub fn simulate(
    itf: &Interferometer,
    index: InputIndex,
    shots: u64,
    seed: u64,
) -> Result<ShotCounts> {
    if shots == 0 {
        return Err(Error::domain("simulate needs at least one shot"));
    }
    let out = apply(itf, &ModeState::input(index, itf.s));
    let [n1, n2, n3] = sample_ports(out.probabilities(), shots, seed, index.stream_tag())?;
    Ok(ShotCounts {
        n1,
        n2,
        n3,
        shots,
        seed,
    })
}

/// `|<a|b>| / (|a| |b|)` over the success ports 1' and 2'.
pub fn success_overlap(a: &ModeState, b: &ModeState) -> f64 {
    let (x, y) = (a.amplitudes, b.amplitudes);
    let inner = x[0].conj() * y[0] + x[1].conj() * y[1];
    let na = (x[0].norm_sqr() + x[1].norm_sqr()).sqrt();
    let nb = (y[0].norm_sqr() + y[1].norm_sqr()).sqrt();
    inner.norm() / (na * nb)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    /// 99th percentile of the chi-square distribution; `None` when `dof = 0`.
    pub critical: Option<f64>,
    pub passed: bool,
}

/// Pearson test of observed counts against port probabilities at the 1% level.
/// Ports with zero expected probability must stay empty.
pub fn chi_square_test(counts: [u64; 3], probs: [f64; 3]) -> Result<ChiSquareTest> {
    let shots: u64 = counts.iter().sum();
    let mut stat = 0.0;
    let mut cats = 0usize;
    let mut impossible_hit = false;
    for (&n, &p) in counts.iter().zip(probs.iter()) {
        if p > 0.0 {
            let e = p * shots as f64;
            stat += (n as f64 - e).powi(2) / e;
            cats += 1;
        } else if n > 0 {
            impossible_hit = true;
        }
    }
    let dof = cats.saturating_sub(1);
    let critical = if dof == 0 {
        None
    } else {
        let dist =
            ChiSquared::new(dof as f64).map_err(|e| Error::numeric("chi-square", e.to_string()))?;
        Some(dist.inverse_cdf(0.99))
    };
    let passed = !impossible_hit && critical.is_none_or(|c| stat <= c);
    Ok(ChiSquareTest {
        statistic: stat,
        dof,
        critical,
        passed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputReport {
    pub input: InputIndex,
    pub counts: ShotCounts,
    /// `|amplitude at 3'|^2` from the matrix.
    pub exact_failure: f64,
    pub empirical_failure: f64,
    /// Binomial standard deviation of `n3 / shots` at the target `Q`.
    pub sigma: f64,
    /// `(empirical - target) / sigma`.
    pub z: f64,
    pub within_3_sigma: bool,
    pub chi_square: ChiSquareTest,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificationReport {
    pub s: f64,
    pub target_s_prime: f64,
    pub target_failure: f64,
    pub shots: u64,
    pub seed: u64,
    pub unitarity_deviation: f64,
    pub factorization_deviation: f64,
    /// Overlap of the success components, computed from output amplitudes.
    pub exact_s_prime: f64,
    pub exact_s_prime_ok: bool,
    pub exact_failure_ok: bool,
    pub inputs: [InputReport; 2],
    /// Two-proportion z statistic comparing the failure rates of both inputs.
    pub inputs_z: f64,
    pub inputs_agree: bool,
    pub passed: bool,
}

/// Ideal port probabilities of the protocol for each input.
fn ideal_probabilities(index: InputIndex, q: f64, s_prime: f64) -> [f64; 3] {
    let p = 1.0 - q;
    match index {
        InputIndex::First => [p, 0.0, q],
        InputIndex::Second => [p * s_prime * s_prime, p * (1.0 - s_prime * s_prime), q],
    }
}

/// Simulates both inputs and checks the exact amplitudes and the photon
/// statistics against the ideal protocol.
pub fn certify_separation(
    itf: &Interferometer,
    shots: u64,
    seed: u64,
) -> Result<CertificationReport> {
    if shots < MIN_CERTIFY_SHOTS {
        return Err(Error::domain(format!(
            "certification needs at least {MIN_CERTIFY_SHOTS} shots, got {shots}"
        )));
    }
    let q = itf.target_failure();
    let sigma = (q * (1.0 - q) / shots as f64).sqrt();
    let outs = [InputIndex::First, InputIndex::Second]
        .map(|ix| (ix, apply(itf, &ModeState::input(ix, itf.s))));
    let exact_s_prime = success_overlap(&outs[0].1, &outs[1].1);

    let mut reports = Vec::with_capacity(2);
    for (ix, out) in outs {
        let counts = simulate(itf, ix, shots, seed)?;
        let emp = counts.failure_rate();
        let z = if sigma > 0.0 {
            (emp - q) / sigma
        } else if emp == q {
            0.0
        } else {
            f64::INFINITY
        };
        reports.push(InputReport {
            input: ix,
            counts,
            exact_failure: out.probabilities()[2],
            empirical_failure: emp,
            sigma,
            z,
            within_3_sigma: z.abs() <= 3.0,
            chi_square: chi_square_test(
                counts.as_array(),
                ideal_probabilities(ix, q, itf.s_prime),
            )?,
        });
    }
    let [a, b]: [InputReport; 2] = reports.try_into().expect("two inputs");

    let pooled = (a.counts.n3 + b.counts.n3) as f64 / (2 * shots) as f64;
    let pooled_sd = (pooled * (1.0 - pooled) * 2.0 / shots as f64).sqrt();
    let diff = a.empirical_failure - b.empirical_failure;
    let inputs_z = if pooled_sd > 0.0 {
        diff / pooled_sd
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };

    let unitarity_deviation = itf.unitarity_deviation();
    let factorization_deviation = itf.factorization_deviation();
    let exact_s_prime_ok = (exact_s_prime - itf.s_prime).abs() <= EXACT_TOL;
    let exact_failure_ok = [&a, &b]
        .iter()
        .all(|r| (r.exact_failure - q).abs() <= EXACT_TOL);
    let inputs_agree = inputs_z.abs() <= 3.0;
    let passed = unitarity_deviation <= EXACT_TOL
        && factorization_deviation <= EXACT_TOL
        && exact_s_prime_ok
        && exact_failure_ok
        && inputs_agree
        && [&a, &b]
            .iter()
            .all(|r| r.within_3_sigma && r.chi_square.passed);
    Ok(CertificationReport {
        s: itf.s,
        target_s_prime: itf.s_prime,
        target_failure: q,
        shots,
        seed,
        unitarity_deviation,
        factorization_deviation,
        exact_s_prime,
        exact_s_prime_ok,
        exact_failure_ok,
        inputs: [a, b],
        inputs_z,
        inputs_agree,
        passed,
    })
}

//! Argument handling, dispatch and table output for the `qsep` binary.

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use qsep_core::optics::{build_interferometer, certify_separation};
use qsep_core::solvers::{
    critical_overlap, max_separation, q_ud_point, qmin_curve, tradeoff_curve,
};
use qsep_core::verify::{run_all, VerifyOptions};
use qsep_core::{Error, FailureBudget, OverlapSpec, Priors};

#[derive(Debug, Parser)]
#[command(
    name = "qsep",
    version,
    about = "Optimal separation of two pure quantum states"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Initial overlap.
    #[arg(long = "s", global = true)]
    pub s: Option<f64>,

    /// Final overlap.
    #[arg(long = "s-prime", global = true)]
    pub s_prime: Option<f64>,

    /// Prior probability of the first state.
    #[arg(long, global = true)]
    pub eta1: Option<f64>,

    /// Failure budget.
    #[arg(long = "q-max", global = true)]
    pub q_max: Option<f64>,

    /// Number of sweep samples.
    #[arg(long, global = true, default_value_t = 512)]
    pub samples: usize,

    /// Photons per input for the optics simulation.
    #[arg(long, global = true, default_value_t = 1_000_000)]
    pub shots: u64,

    /// RNG seed for simulated detector clicks
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,

    /// Output format
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,

    /// Output file; standard output when omitted.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Full-separation failure probability against the prior (needs --s).
    Ud,
    /// Minimum failure probability against the prior at fixed separation (--s, --s-prime).
    Qmin,
    /// Smallest final overlap against the initial overlap (--eta1, --q-max).
    Maxsep,
    /// Final overlap against failure probability (--eta1, --s).
    Tradeoff,
    /// Simulated interferometer certification for equal priors (--s, --s-prime).
    Optics,
    /// Run the self-check suite.
    Verify,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Ud => "ud",
            Command::Qmin => "qmin",
            Command::Maxsep => "maxsep",
            Command::Tradeoff => "tradeoff",
            Command::Optics => "optics",
            Command::Verify => "verify",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("verification failed: {0}")]
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Verification(_) => 4,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Domain(_) | Error::OutOfRange { .. } | Error::DegeneratePriors => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
    Bool(bool),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(x) => fmt_num(*x),
            Cell::Int(n) => n.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(x) => Value::from(*x),
            Cell::Int(n) => Value::from(*n),
            Cell::Text(s) => Value::from(s.as_str()),
            Cell::Bool(b) => Value::from(*b),
        }
    }
}

/// 17 significant digits; `NaN` marks an undefined parameter.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else if x == 0.0 {
        "0".to_string()
    } else {
        format!("{x:.16e}")
    }
}

/// A command's result: a table plus optional structured extras.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub command: Command,
    pub params: Map<String, Value>,
    pub seed: u64,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    pub extra: Option<(&'static str, Value)>,
    /// Set when the command ran but its checks did not pass.
    pub failure: Option<String>,
}

impl Output {
    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => {
                let mut w = csv::WriterBuilder::new()
                    .terminator(csv::Terminator::Any(b'\n'))
                    .from_writer(Vec::new());
                w.write_record(&self.columns).expect("in-memory write");
                for row in &self.rows {
                    w.write_record(row.iter().map(Cell::csv))
                        .expect("in-memory write");
                }
                String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
            }
            Format::Json => {
                let rows: Vec<Value> = self
                    .rows
                    .iter()
                    .map(|row| {
                        let obj: Map<String, Value> = self
                            .columns
                            .iter()
                            .zip(row)
                            .map(|(c, v)| (c.to_string(), v.json()))
                            .collect();
                        Value::Object(obj)
                    })
                    .collect();
                let mut top = Map::new();
                top.insert(
                    "meta".into(),
                    json!({
                        "command": self.command.name(),
                        "params": Value::Object(self.params.clone()),
                        "seed": self.seed,
                        "version": env!("CARGO_PKG_VERSION"),
                    }),
                );
                top.insert("rows".into(), Value::Array(rows));
                if let Some((k, v)) = &self.extra {
                    top.insert(k.to_string(), v.clone());
                }
                let mut s =
                    serde_json::to_string_pretty(&Value::Object(top)).expect("serializable");
                s.push('\n');
                s
            }
        }
    }
}

fn need(name: &str, v: Option<f64>) -> Result<f64, CliError> {
    let x = v.ok_or_else(|| CliError::Usage(format!("--{name} is required")))?;
    if !(0.0..=1.0).contains(&x) {
        return Err(CliError::Usage(format!("--{name} = {x} is not in [0, 1]")));
    }
    Ok(x)
}

fn need_samples(n: usize) -> Result<usize, CliError> {
    if n < 2 {
        return Err(CliError::Usage(format!(
            "--samples = {n} must be at least 2"
        )));
    }
    Ok(n)
}

fn grid(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |k| match k {
        0 => lo,
        _ if k + 1 == n => hi,
        _ => lo + (hi - lo) * k as f64 / (n - 1) as f64,
    })
}

fn params(pairs: &[(&str, Value)]) -> Map<String, Value> {
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), v.clone()))
        .collect()
}

fn table(
    cli: &Cli,
    params: Map<String, Value>,
    columns: Vec<&'static str>,
    rows: Vec<Vec<Cell>>,
) -> Output {
    Output {
        command: cli.command,
        params,
        seed: cli.seed,
        columns,
        rows,
        extra: None,
        failure: None,
    }
}

fn cmd_ud(cli: &Cli) -> Result<Output, CliError> {
    let s = need("s", cli.s)?;
    let n = need_samples(cli.samples)?;
    let rows = grid(0.0, 1.0, n)
        .map(|e| {
            let (q, pt) = q_ud_point(Priors::new(e)?, s);
            Ok(vec![
                Cell::Num(e),
                Cell::Num(q.value()),
                Cell::Num(pt.q1),
                Cell::Num(pt.q2),
            ])
        })
        .collect::<Result<Vec<_>, Error>>()?;
    Ok(table(
        cli,
        params(&[("s", json!(s)), ("samples", json!(n))]),
        vec!["eta1", "q_ud", "q1", "q2"],
        rows,
    ))
}

fn cmd_qmin(cli: &Cli) -> Result<Output, CliError> {
    let s = need("s", cli.s)?;
    let sp = need("s-prime", cli.s_prime)?;
    let n = need_samples(cli.samples)?;
    let ov = OverlapSpec::with_optimal_flags(s, sp)?;
    let closed = |f: &dyn Fn(f64) -> Result<[f64; 3], Error>| {
        grid(0.5, 0.0, n)
            .map(|e| {
                let [q, q1, q2] = f(e)?;
                Ok(vec![
                    Cell::Num(f64::NAN),
                    Cell::Num(e),
                    Cell::Num(q),
                    Cell::Num(q1),
                    Cell::Num(q2),
                ])
            })
            .collect::<Result<Vec<_>, Error>>()
    };
    let rows = if sp == 0.0 {
        closed(&|e| {
            let (q, pt) = q_ud_point(Priors::new(e)?, s);
            Ok([q.value(), pt.q1, pt.q2])
        })?
    } else if sp == s {
        closed(&|_| Ok([0.0, 0.0, 0.0]))?
    } else {
        qmin_curve(ov, n)?
            .into_iter()
            .map(|smp| {
                vec![
                    Cell::Num(smp.t.0),
                    Cell::Num(smp.eta1),
                    Cell::Num(smp.q_min),
                    Cell::Num(smp.point.q1),
                    Cell::Num(smp.point.q2),
                ]
            })
            .collect()
    };
    Ok(table(
        cli,
        params(&[
            ("s", json!(s)),
            ("s_prime", json!(sp)),
            ("samples", json!(n)),
        ]),
        vec!["t", "eta1", "q_min", "q1", "q2"],
        rows,
    ))
}

fn cmd_maxsep(cli: &Cli) -> Result<Output, CliError> {
    let e = need("eta1", cli.eta1)?;
    let q = need("q-max", cli.q_max)?;
    let n = need_samples(cli.samples)?;
    if q >= 1.0 {
        return Err(CliError::Usage("--q-max must be below 1".into()));
    }
    let pr = Priors::new(e)?;
    let budget = FailureBudget::new(q)?;
    let s_cr = critical_overlap(pr, budget);
    let mut ss: Vec<f64> = grid(0.0, 1.0, n).collect();
    ss.push(s_cr);
    ss.sort_by(f64::total_cmp);
    ss.dedup();
    let rows = ss
        .into_iter()
        .map(|s| {
            Ok(vec![
                Cell::Num(s),
                Cell::Num(max_separation(pr, s, budget)?.s_prime),
            ])
        })
        .collect::<Result<Vec<_>, Error>>()?;
    Ok(table(
        cli,
        params(&[
            ("eta1", json!(e)),
            ("q_max", json!(q)),
            ("samples", json!(n)),
            ("s_cr", json!(s_cr)),
        ]),
        vec!["s", "s_prime_min"],
        rows,
    ))
}

fn cmd_tradeoff(cli: &Cli) -> Result<Output, CliError> {
    let e = need("eta1", cli.eta1)?;
    let s = need("s", cli.s)?;
    let n = need_samples(cli.samples)?;
    let rows = tradeoff_curve(Priors::new(e)?, s, n)?
        .into_iter()
        .map(|smp| {
            vec![
                Cell::Num(smp.theta.map_or(f64::NAN, |t| t.radians())),
                Cell::Num(smp.q.value()),
                Cell::Num(smp.s_prime),
            ]
        })
        .collect();
    Ok(table(
        cli,
        params(&[("eta1", json!(e)), ("s", json!(s)), ("samples", json!(n))]),
        vec!["theta", "q", "s_prime"],
        rows,
    ))
}

fn cmd_optics(cli: &Cli) -> Result<Output, CliError> {
    let s = need("s", cli.s)?;
    let sp = need("s-prime", cli.s_prime)?;
    let itf = build_interferometer(s, sp)?;
    let rep = certify_separation(&itf, cli.shots, cli.seed)?;
    let rows = rep
        .inputs
        .iter()
        .enumerate()
        .map(|(k, r)| {
            vec![
                Cell::Int(k as u64 + 1),
                Cell::Int(r.counts.n1),
                Cell::Int(r.counts.n2),
                Cell::Int(r.counts.n3),
                Cell::Int(r.counts.shots),
                Cell::Num(r.exact_failure),
                Cell::Num(r.empirical_failure),
                Cell::Num(r.sigma),
                Cell::Num(r.z),
                Cell::Num(r.chi_square.statistic),
                Cell::Num(r.chi_square.critical.unwrap_or(f64::NAN)),
                Cell::Bool(r.within_3_sigma && r.chi_square.passed),
            ]
        })
        .collect();
    let mut out = table(
        cli,
        params(&[
            ("s", json!(s)),
            ("s_prime", json!(sp)),
            ("shots", json!(cli.shots)),
        ]),
        vec![
            "input",
            "n1",
            "n2",
            "n3",
            "shots",
            "q_exact",
            "q_empirical",
            "sigma",
            "z",
            "chi_square",
            "chi_square_critical",
            "passed",
        ],
        rows,
    );
    out.extra = Some(("report", serde_json::to_value(&rep).expect("serializable")));
    if !rep.passed {
        out.failure = Some(format!(
            "interferometer for (s, s') = ({s}, {sp}) failed certification: unitarity {:.3e}, exact s' {}",
            rep.unitarity_deviation, rep.exact_s_prime
        ));
    }
    Ok(out)
}

fn cmd_verify(cli: &Cli) -> Result<Output, CliError> {
    let opts = VerifyOptions {
        seed: cli.seed,
        shots: cli.shots,
        ..VerifyOptions::default()
    };
    let checks = run_all(&opts);
    let failing: Vec<&str> = checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.name)
        .collect();
    let rows = checks
        .iter()
        .map(|c| {
            vec![
                Cell::Text(c.name.to_string()),
                Cell::Num(c.worst),
                Cell::Num(c.tol),
                Cell::Bool(c.passed),
                Cell::Text(c.detail.clone()),
            ]
        })
        .collect();
    let mut out = table(
        cli,
        params(&[("shots", json!(cli.shots))]),
        vec!["check", "worst", "tol", "passed", "detail"],
        rows,
    );
    if !failing.is_empty() {
        out.failure = Some(format!("failing checks: {}", failing.join(", ")));
    }
    Ok(out)
}

pub fn run(cli: &Cli) -> Result<Output, CliError> {
    match cli.command {
        Command::Ud => cmd_ud(cli),
        Command::Qmin => cmd_qmin(cli),
        Command::Maxsep => cmd_maxsep(cli),
        Command::Tradeoff => cmd_tradeoff(cli),
        Command::Optics => cmd_optics(cli),
        Command::Verify => cmd_verify(cli),
    }
}

/// Runs the command, writes its output and returns the process exit code.
pub fn main_with(cli: &Cli) -> i32 {
    let out = match run(cli) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("qsep: {e}");
            return e.exit_code();
        }
    };
    let text = out.render(cli.format);
    let written = match &cli.output {
        Some(path) => {
            std::fs::write(path, &text).map_err(|e| format!("cannot write {}: {e}", path.display()))
        }
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(text.as_bytes())
                .map_err(|e| e.to_string())
        }
    };
    if let Err(e) = written {
        eprintln!("qsep: {e}");
        return 2;
    }
    match out.failure {
        Some(msg) => {
            let e = CliError::Verification(msg);
            eprintln!("qsep: {e}");
            e.exit_code()
        }
        None => 0,
    }
}

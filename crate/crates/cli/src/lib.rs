//! Command-line front end for BER sweeps: flag parsing, figure presets and
//! CSV output.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use nsp_precoding::alphabet::{AlphabetSpec, QamSpec};
use nsp_precoding::harness::{Algorithm, BerCurve, SimConfig};
use nsp_precoding::solver::{SolveMode, SolverConfig, EXACT_MM_DEFAULT};

/// Column names of the results file, in order.
pub const CSV_HEADER: &str = "algorithm,scenario,M,N,K,T,qam,snr_db,trials,failed_trials,bit_errors,total_bits,ber,mean_solve_seconds,seed";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scenario {
    #[value(name = "one-bit")]
    OneBit,
    Ce,
    Dce,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Gemm,
    #[value(name = "exact-mm")]
    ExactMm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Fig3,
    Fig4,
    Fig5,
    Fig7,
    Fig8,
}

/// Raw flags. Everything is optional so presets can fill the gaps.
#[derive(Debug, Parser)]
#[command(name = "nsp-sim", version, about = "Monte-Carlo BER sweeps for one-bit and constant-envelope precoding")]
struct Cli {
    /// Load a figure's settings; explicit flags override it.
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    #[arg(long, value_enum)]
    scenario: Option<Scenario>,
    /// Number of DCE phases (even, at least 4).
    #[arg(long = "M")]
    m: Option<usize>,
    #[arg(long = "N")]
    n: Option<usize>,
    #[arg(long = "K")]
    k: Option<usize>,
    #[arg(long = "T")]
    t: Option<usize>,
    #[arg(long, value_parser = ["4", "16", "64", "256"])]
    qam: Option<String>,
    /// SNR grid in dB as start:step:stop, or a single value.
    #[arg(long, allow_hyphen_values = true)]
    snr: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated subset of gemm, exact-mm, zf, qzf.
    #[arg(long)]
    algo: Option<String>,
    /// Solver used when --algo is not given.
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    lambda0: Option<f64>,
    #[arg(long = "lambda-mult")]
    lambda_mult: Option<f64>,
    /// Iterations per penalty stage.
    #[arg(long = "J")]
    j: Option<usize>,
    /// Squared-step threshold that advances the penalty.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long = "lambda-upp")]
    lambda_upp: Option<f64>,
    /// Record solver wall time (makes output run-dependent).
    #[arg(long)]
    timing: bool,
    /// Output CSV path; stdout if absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// A parsed command line.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub config: SimConfig,
    pub out: Option<PathBuf>,
}

/// Why the command line was not accepted.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// `--help` or `--version`; print and exit 0.
    Info(String),
    /// Usage error; exit code 2.
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Info(_) => 0,
            CliError::Usage(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Info(s) => f.write_str(s),
            CliError::Usage(s) => write!(f, "error: {s}"),
        }
    }
}

fn usage<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Usage(msg.into()))
}

struct Defaults {
    scenario: Scenario,
    m: Option<usize>,
    n: usize,
    k: usize,
    t: usize,
    qam: usize,
    snr: &'static str,
    trials: usize,
    algorithms: &'static [Algorithm],
}

const BASE: Defaults = Defaults {
    scenario: Scenario::OneBit,
    m: None,
    n: 128,
    k: 16,
    t: 10,
    qam: 16,
    snr: "0:2:20",
    trials: 100,
    algorithms: &[],
};

fn preset(p: Preset) -> Defaults {
    use Algorithm::*;
    let compare: &'static [Algorithm] = &[Gemm, Qzf, Zf];
    match p {
        Preset::Fig3 => Defaults { snr: "0:1:16", trials: 10_000, algorithms: compare, ..BASE },
        Preset::Fig4 => Defaults { qam: 64, snr: "0:2:30", trials: 10_000, algorithms: compare, ..BASE },
        Preset::Fig5 => Defaults { scenario: Scenario::Ce, snr: "0:1:16", trials: 10_000, algorithms: compare, ..BASE },
        Preset::Fig7 => Defaults { scenario: Scenario::Ce, t: 50, qam: 64, snr: "0:2:30", trials: 10_000, algorithms: &[Gemm], ..BASE },
        Preset::Fig8 => Defaults {
            scenario: Scenario::Dce,
            m: Some(8),
            t: 100,
            qam: 64,
            snr: "6:1:30",
            trials: 10_000,
            algorithms: &[Gemm],
            ..BASE
        },
    }
}

/// Expands `start:step:stop` (inclusive, `step > 0`) or a single value.
pub fn parse_snr_range(text: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = text.split(':').collect();
    let num = |s: &str| {
        s.trim().parse::<f64>().map_err(|_| format!("--snr: cannot parse '{s}' as a number"))
    };
    match parts.as_slice() {
        [one] => {
            let v = num(one)?;
            if v.is_nan() {
                return Err("--snr: NaN is not an SNR".into());
            }
            Ok(vec![v])
        }
        [start, step, stop] => {
            let (start, step, stop) = (num(start)?, num(step)?, num(stop)?);
            if !(start.is_finite() && step.is_finite() && stop.is_finite()) {
                return Err("--snr: range bounds must be finite".into());
            }
            if step <= 0.0 {
                return Err(format!("--snr: step must be positive, got {step}"));
            }
            if stop < start {
                return Err(format!("--snr: stop {stop} is below start {start}"));
            }
            let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
            if count > 10_000 {
                return Err(format!("--snr: {count} grid points is too many"));
            }
            Ok((0..count).map(|i| start + step * i as f64).collect())
        }
        _ => Err(format!("--snr: expected start:step:stop, got '{text}'")),
    }
}

fn parse_algorithms(text: &str) -> Result<Vec<Algorithm>, String> {
    let mut out = Vec::new();
    for name in text.split(',').map(str::trim) {
        let algorithm = Algorithm::from_name(name)
            .ok_or_else(|| format!("--algo: unknown algorithm '{name}' (expected gemm, exact-mm, zf, qzf)"))?;
        if !out.contains(&algorithm) {
            out.push(algorithm);
        }
    }
    Ok(out)
}

/// Parses a full argument vector (program name first).
pub fn parse_cli<I, T>(argv: I) -> Result<RunSpec, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(|e| {
        use clap::error::ErrorKind;
        match e.kind() {
            ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => CliError::Info(e.to_string()),
            _ => {
                let rendered = e.to_string();
                let first = rendered.lines().next().unwrap_or("invalid arguments");
                CliError::Usage(first.trim_start_matches("error: ").to_string())
            }
        }
    })?;
    let base = cli.preset.map(preset).unwrap_or(BASE);

    let scenario = cli.scenario.unwrap_or(base.scenario);
    if cli.m.is_some() && scenario != Scenario::Dce {
        let shown = ScenarioName(scenario);
        return usage(format!("--M is only valid with --scenario dce (got --scenario {shown})"));
    }
    let spec = match scenario {
        Scenario::OneBit => AlphabetSpec::OneBit,
        Scenario::Ce => AlphabetSpec::ContinuousCe,
        Scenario::Dce => {
            let Some(m) = cli.m.or(base.m) else {
                return usage("--scenario dce requires --M");
            };
            if m < 4 || m % 2 != 0 {
                return usage(format!("--M must be an even integer >= 4 (got {m})"));
            }
            AlphabetSpec::DiscreteCe(m)
        }
    };

    let qam_order = match &cli.qam {
        Some(q) => q.parse::<usize>().expect("validated by clap"),
        None => base.qam,
    };
    let qam = QamSpec::from_order(qam_order).map_err(|e| CliError::Usage(format!("--qam: {e}")))?;
    let snr_db_list = parse_snr_range(cli.snr.as_deref().unwrap_or(base.snr)).map_err(CliError::Usage)?;

    let (n, k, t) = (cli.n.unwrap_or(base.n), cli.k.unwrap_or(base.k), cli.t.unwrap_or(base.t));
    if k == 0 || t == 0 {
        return usage("--K and --T must be at least 1");
    }
    if n < k {
        return usage(format!("--N ({n}) must be at least --K ({k})"));
    }
    let trials = cli.trials.unwrap_or(base.trials);
    if trials == 0 {
        return usage("--trials must be at least 1");
    }

    let mode = cli.mode.unwrap_or(Mode::Gemm);
    let algorithms = match &cli.algo {
        Some(text) => parse_algorithms(text).map_err(CliError::Usage)?,
        None if !base.algorithms.is_empty() => {
            let nsp = if mode == Mode::ExactMm { Algorithm::ExactMm } else { Algorithm::Gemm };
            base.algorithms.iter().map(|&a| if a == Algorithm::Gemm { nsp } else { a }).collect()
        }
        None => match mode {
            Mode::Gemm => vec![Algorithm::Gemm, Algorithm::Zf],
            Mode::ExactMm => vec![Algorithm::ExactMm, Algorithm::Zf],
        },
    };

    let mut solver = SolverConfig { alphabet: spec, record_stationarity: false, ..SolverConfig::default() };
    if mode == Mode::ExactMm {
        solver.mode = EXACT_MM_DEFAULT;
    }
    if let Some(v) = cli.sigma {
        solver.sigma = v;
    }
    if let Some(v) = cli.lambda0 {
        solver.lambda0 = v;
    }
    if let Some(v) = cli.lambda_mult {
        solver.lambda_mult = v;
    }
    if let Some(v) = cli.j {
        solver.inner_cap = v;
    }
    if let Some(v) = cli.delta {
        solver.move_tol = v;
    }
    if let Some(v) = cli.lambda_upp {
        solver.lambda_upp = v;
    }
    solver.validate().map_err(|e| CliError::Usage(solver_flag_message(&e.to_string())))?;

    let config = SimConfig {
        n,
        k,
        t,
        qam,
        spec,
        snr_db_list,
        trials,
        base_seed: cli.seed.unwrap_or(1),
        algorithms,
        solver,
        power: 1.0,
        record_timing: cli.timing,
    };
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(RunSpec { config, out: cli.out })
}

fn solver_flag_message(msg: &str) -> String {
    let msg = msg.trim_start_matches("invalid argument: ");
    msg.replace("sigma", "--sigma")
        .replace("lambda0", "--lambda0")
        .replace("lambda_mult", "--lambda-mult")
        .replace("inner_cap", "--J")
        .replace("move_tol", "--delta")
        .replace("lambda_upp", "--lambda-upp")
}

struct ScenarioName(Scenario);

impl std::fmt::Display for ScenarioName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self.0 {
            Scenario::OneBit => "one-bit",
            Scenario::Ce => "ce",
            Scenario::Dce => "dce",
        })
    }
}

fn snr_flag(list: &[f64]) -> String {
    match list {
        [one] => format!("{one}"),
        [first, second, ..] => format!("{first}:{}:{}", second - first, list[list.len() - 1]),
        [] => String::new(),
    }
}

/// Flag string that reproduces `cfg` when passed back to [`parse_cli`].
pub fn canonical_flags(cfg: &SimConfig) -> String {
    let mut s = String::new();
    let _ = write!(s, "--scenario {}", cfg.spec.scenario_name());
    if let Some(m) = cfg.spec.phases() {
        let _ = write!(s, " --M {m}");
    }
    let algos: Vec<&str> = cfg.algorithms.iter().map(|a| a.name()).collect();
    let mode = match cfg.solver.mode {
        SolveMode::Gemm => "gemm",
        SolveMode::ExactMm { .. } => "exact-mm",
    };
    let _ = write!(
        s,
        " --N {} --K {} --T {} --qam {} --snr {} --trials {} --seed {} --algo {} --mode {mode}",
        cfg.n,
        cfg.k,
        cfg.t,
        cfg.qam.order(),
        snr_flag(&cfg.snr_db_list),
        cfg.trials,
        cfg.base_seed,
        algos.join(","),
    );
    let sv = &cfg.solver;
    let _ = write!(
        s,
        " --sigma {} --lambda0 {} --lambda-mult {} --J {} --delta {} --lambda-upp {}",
        sv.sigma, sv.lambda0, sv.lambda_mult, sv.inner_cap, sv.move_tol, sv.lambda_upp
    );
    if cfg.record_timing {
        s.push_str(" --timing");
    }
    s
}

/// `x` with six significant digits in scientific notation.
fn six_digits(x: f64) -> String {
    format!("{x:.5e}")
}

/// Renders the results file: a `# config:` line, the header and one row per
/// cell in the curve's order.
pub fn render_csv(curve: &BerCurve) -> String {
    let cfg = &curve.config;
    let mut out = String::new();
    let _ = writeln!(out, "# config: {} ; snr = P/noise_variance", canonical_flags(cfg));
    out.push_str(CSV_HEADER);
    out.push('\n');
    let m = cfg.spec.phases().map(|m| m.to_string()).unwrap_or_default();
    let mut cells: Vec<_> = curve.cells.iter().collect();
    cells.sort_by(|a, b| a.algorithm.name().cmp(b.algorithm.name()).then(a.snr_db.total_cmp(&b.snr_db)));
    for c in cells {
        let seconds = if cfg.record_timing { six_digits(c.mean_solve_seconds()) } else { String::new() };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            c.algorithm.name(),
            cfg.spec.scenario_name(),
            m,
            cfg.n,
            cfg.k,
            cfg.t,
            cfg.qam.order(),
            c.snr_db,
            c.trials,
            c.failed_trials,
            c.bit_errors,
            c.total_bits,
            six_digits(c.ber()),
            seconds,
            cfg.base_seed,
        );
    }
    out
}

#[derive(Debug, thiserror::Error)]
pub enum OutputError {
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: csv::Error },
    #[error("{path}: line {line}: {message}")]
    Parse { path: PathBuf, line: u64, message: String },
}

/// Writes [`render_csv`] to `path`.
pub fn write_results(curve: &BerCurve, path: &Path) -> Result<(), OutputError> {
    fs::write(path, render_csv(curve)).map_err(|source| OutputError::Write { path: path.to_path_buf(), source })
}

/// One data row of a results file.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub algorithm: String,
    pub scenario: String,
    pub m: Option<usize>,
    pub n: usize,
    pub k: usize,
    pub t: usize,
    pub qam: usize,
    pub snr_db: f64,
    pub trials: u64,
    pub failed_trials: u64,
    pub bit_errors: u64,
    pub total_bits: u64,
    pub ber: f64,
    pub mean_solve_seconds: Option<f64>,
    pub seed: u64,
}

/// Reads a results file back, skipping `#` comment lines.
pub fn read_results(path: &Path) -> Result<Vec<CsvRow>, OutputError> {
    let err = |source| OutputError::Read { path: path.to_path_buf(), source };
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path).map_err(err)?;
    let header: Vec<String> = reader.headers().map_err(err)?.iter().map(str::to_string).collect();
    if header.join(",") != CSV_HEADER {
        return Err(OutputError::Parse { path: path.to_path_buf(), line: 1, message: "unexpected header".into() });
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(err)?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |col: usize| OutputError::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("bad value '{}' in column {}", &record[col], CSV_HEADER.split(',').nth(col).unwrap_or("?")),
        };
        if record.len() != 15 {
            return Err(OutputError::Parse { path: path.to_path_buf(), line, message: format!("expected 15 fields, got {}", record.len()) });
        }
        fn opt<T: std::str::FromStr>(s: &str) -> Result<Option<T>, ()> {
            if s.is_empty() { Ok(None) } else { s.parse().map(Some).map_err(|_| ()) }
        }
        macro_rules! num {
            ($i:expr) => {
                record[$i].parse().map_err(|_| bad($i))?
            };
        }
        rows.push(CsvRow {
            algorithm: record[0].to_string(),
            scenario: record[1].to_string(),
            m: opt(&record[2]).map_err(|_| bad(2))?,
            n: num!(3),
            k: num!(4),
            t: num!(5),
            qam: num!(6),
            snr_db: num!(7),
            trials: num!(8),
            failed_trials: num!(9),
            bit_errors: num!(10),
            total_bits: num!(11),
            ber: num!(12),
            mean_solve_seconds: opt(&record[13]).map_err(|_| bad(13))?,
            seed: num!(14),
        });
    }
    Ok(rows)
}

//! Monte-Carlo bit-error-rate sweeps.
//!
//! Every trial draws its own channel, data bits, solver start point and noise
//! from generators keyed on `(base_seed, trial_index, purpose)`, so results do
//! not depend on scheduling. Precoders are solved once per trial and reused
//! across the SNR grid, since none of them looks at the noise level.
//!
//! SNR is `P / σ_η²`: total transmit power over per-user noise variance.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::alphabet::{bit_errors, bits_to_symbols, detect_symbol, AlphabetSpec, QamSpec};
use crate::baselines::{qzf_precode, zf_precode};
use crate::error::{PrecodingError, Result};
use crate::objective::ProblemInstance;
use crate::solver::{random_init, solve, SolveMode, SolverConfig, EXACT_MM_DEFAULT};

/// Precoders the harness knows how to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Algorithm {
    ExactMm,
    Gemm,
    Qzf,
    Zf,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::ExactMm, Algorithm::Gemm, Algorithm::Qzf, Algorithm::Zf];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::ExactMm => "exact-mm",
            Algorithm::Gemm => "gemm",
            Algorithm::Qzf => "qzf",
            Algorithm::Zf => "zf",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n: usize,
    pub k: usize,
    pub t: usize,
    pub qam: QamSpec,
    pub spec: AlphabetSpec,
    /// `f64::INFINITY` means noiseless.
    pub snr_db_list: Vec<f64>,
    pub trials: usize,
    pub base_seed: u64,
    pub algorithms: Vec<Algorithm>,
    /// Used by `gemm`; `exact_mm` reuses it with its mode forced to exact MM.
    pub solver: SolverConfig,
    pub power: f64,
    /// Measure solver wall time. Off by default so repeated sweeps produce
    /// identical output.
    pub record_timing: bool,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(PrecodingError::InvalidArgument(msg));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.snr_db_list.is_empty() || self.snr_db_list.iter().any(|s| s.is_nan()) {
            return bad("SNR list must be nonempty and free of NaN".into());
        }
        if self.n < self.k || self.k == 0 || self.t == 0 {
            return bad(format!("need N >= K >= 1 and T >= 1, got N={} K={} T={}", self.n, self.k, self.t));
        }
        if self.algorithms.is_empty() {
            return bad("no algorithms selected".into());
        }
        if !(self.power > 0.0 && self.power.is_finite()) {
            return bad(format!("power must be positive, got {}", self.power));
        }
        self.qam.bits_per_symbol()?;
        self.spec.validate()?;
        self.solver.validate()
    }

    fn solver_for(&self, algorithm: Algorithm) -> SolverConfig {
        let mut cfg = self.solver;
        cfg.alphabet = self.spec;
        cfg.record_stationarity = false;
        match algorithm {
            Algorithm::ExactMm if !matches!(cfg.mode, SolveMode::ExactMm { .. }) => cfg.mode = EXACT_MM_DEFAULT,
            Algorithm::Gemm => cfg.mode = SolveMode::Gemm,
            _ => {}
        }
        cfg
    }
}

/// Noise standard deviation for a given SNR in dB.
pub fn noise_std(power: f64, snr_db: f64) -> f64 {
    if snr_db == f64::INFINITY {
        0.0
    } else {
        (power / 10f64.powf(snr_db / 10.0)).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stream {
    Instance = 1,
    Init = 2,
    Noise = 3,
}

fn stream(base_seed: u64, trial: u64, purpose: Stream, extra: u64) -> ChaCha8Rng {
    let mut seed = [0u8; 32];
    seed[..8].copy_from_slice(&base_seed.to_le_bytes());
    seed[8..16].copy_from_slice(&trial.to_le_bytes());
    seed[16..24].copy_from_slice(&(purpose as u64).to_le_bytes());
    seed[24..].copy_from_slice(&extra.to_le_bytes());
    ChaCha8Rng::from_seed(seed)
}

/// Circular Gaussian sample with `E|z|² = variance`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let scale = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * scale, im * scale)
}

/// Channel `H` (K×N, unit-variance entries) and data bits for one trial.
pub fn draw_instance(cfg: &SimConfig, trial: u64) -> Result<(DMatrix<Complex64>, Vec<bool>)> {
    let mut rng = stream(cfg.base_seed, trial, Stream::Instance, 0);
    let h = DMatrix::from_fn(cfg.k, cfg.n, |_, _| complex_gaussian(&mut rng, 1.0));
    let nbits = cfg.qam.bits_per_symbol()? * cfg.k * cfg.t;
    let bits = (0..nbits).map(|_| rng.random_bool(0.5)).collect();
    Ok((h, bits))
}

/// Noise block `K×T` for one `(trial, snr)`; shared by all algorithms.
pub fn draw_noise(cfg: &SimConfig, trial: u64, snr_db: f64) -> DMatrix<Complex64> {
    let sigma = noise_std(cfg.power, snr_db);
    let mut rng = stream(cfg.base_seed, trial, Stream::Noise, snr_db.to_bits());
    DMatrix::from_fn(cfg.k, cfg.t, |_, _| complex_gaussian(&mut rng, sigma * sigma))
}

/// Noiseless received block and receiver spacings `[dR; dI]` of one precoder.
struct Precoded {
    clean: DMatrix<Complex64>,
    d: DVector<f64>,
    seconds: f64,
}

fn precode(cfg: &SimConfig, inst: &ProblemInstance, algorithm: Algorithm, trial: u64) -> Result<Precoded> {
    let start = Instant::now();
    let k = cfg.k;
    let (clean, d) = match algorithm {
        Algorithm::Zf => {
            let (xi, d) = zf_precode(inst)?;
            (inst.h() * xi, DVector::from_element(2 * k, d))
        }
        Algorithm::Qzf => {
            let (u, d) = qzf_precode(inst, cfg.spec)?;
            (inst.received(&u), d)
        }
        Algorithm::Gemm | Algorithm::ExactMm => {
            let mut rng = stream(cfg.base_seed, trial, Stream::Init, 0);
            let init = random_init(inst, cfg.spec, &mut rng);
            let sol = solve(inst, &cfg.solver_for(algorithm), &init)?;
            (inst.received(&sol.u_discrete), sol.d)
        }
    };
    let seconds = match algorithm {
        Algorithm::Gemm | Algorithm::ExactMm if cfg.record_timing => start.elapsed().as_secs_f64(),
        _ => 0.0,
    };
    Ok(Precoded { clean, d, seconds })
}

fn count_errors(clean: &DMatrix<Complex64>, noise: &DMatrix<Complex64>, d: &DVector<f64>, s: &[Complex64], qam: QamSpec) -> Result<u64> {
    let k = clean.nrows();
    let mut errors = 0u64;
    for t in 0..clean.ncols() {
        for i in 0..k {
            // a collapsed spacing still decides by sign: every sample lands
            // on an outer level
            let dr = d[i].max(f64::MIN_POSITIVE);
            let di = d[i + k].max(f64::MIN_POSITIVE);
            let y = clean[(i, t)] + noise[(i, t)];
            let detected = detect_symbol(y, dr, di, qam)?;
            errors += bit_errors(s[t * k + i], detected, qam) as u64;
        }
    }
    Ok(errors)
}

/// Outcome of one algorithm on one trial at one SNR.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub algorithm: Algorithm,
    pub snr_db: f64,
    pub result: Result<TrialCounts>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialCounts {
    pub bit_errors: u64,
    pub bits: u64,
    pub seconds: f64,
}

/// Runs every configured algorithm on one trial over the whole SNR list.
///
/// Outcomes are ordered by algorithm (as configured), then SNR.
pub fn run_trial_all(cfg: &SimConfig, trial_index: u64) -> Result<Vec<TrialOutcome>> {
    run_trial_snrs(cfg, trial_index, &cfg.snr_db_list)
}

/// Runs every configured algorithm on one trial at a single SNR.
pub fn run_trial(cfg: &SimConfig, trial_index: u64, snr_db: f64) -> Result<Vec<TrialOutcome>> {
    run_trial_snrs(cfg, trial_index, &[snr_db])
}

fn run_trial_snrs(cfg: &SimConfig, trial: u64, snrs: &[f64]) -> Result<Vec<TrialOutcome>> {
    cfg.validate()?;
    let (h, bits) = draw_instance(cfg, trial)?;
    let s_vec = bits_to_symbols(&bits, cfg.qam)?;
    let s = DMatrix::from_column_slice(cfg.k, cfg.t, &s_vec);
    let inst = ProblemInstance::new(h, s, cfg.power, cfg.qam, cfg.solver.sigma, 0.0)?;
    let noises: Vec<_> = snrs.iter().map(|&snr| draw_noise(cfg, trial, snr)).collect();
    let mut out = Vec::with_capacity(cfg.algorithms.len() * snrs.len());
    for &algorithm in &cfg.algorithms {
        let precoded = precode(cfg, &inst, algorithm, trial);
        for (&snr_db, noise) in snrs.iter().zip(&noises) {
            let result = match &precoded {
                Ok(p) => count_errors(&p.clean, noise, &p.d, &s_vec, cfg.qam).map(|bit_errors| TrialCounts {
                    bit_errors,
                    bits: bits.len() as u64,
                    seconds: p.seconds,
                }),
                Err(e) => Err(e.clone()),
            };
            out.push(TrialOutcome { algorithm, snr_db, result });
        }
    }
    Ok(out)
}

/// Aggregate for one `(algorithm, snr)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct BerCell {
    pub algorithm: Algorithm,
    pub snr_db: f64,
    pub trials: u64,
    pub failed_trials: u64,
    pub bit_errors: u64,
    pub total_bits: u64,
    /// Sum over successful trials; see [`BerCell::mean_solve_seconds`].
    pub solve_seconds: f64,
}

impl BerCell {
    pub fn ber(&self) -> f64 {
        if self.total_bits == 0 {
            0.0
        } else {
            self.bit_errors as f64 / self.total_bits as f64
        }
    }

    pub fn mean_solve_seconds(&self) -> f64 {
        let ok = self.trials - self.failed_trials;
        if ok == 0 {
            0.0
        } else {
            self.solve_seconds / ok as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BerCurve {
    pub config: SimConfig,
    /// Sorted by algorithm name, then ascending SNR.
    pub cells: Vec<BerCell>,
}

impl BerCurve {
    pub fn cell(&self, algorithm: Algorithm, snr_db: f64) -> Option<&BerCell> {
        self.cells.iter().find(|c| c.algorithm == algorithm && c.snr_db == snr_db)
    }

    /// `(snr_db, ber)` points of one algorithm, ascending SNR.
    pub fn series(&self, algorithm: Algorithm) -> Vec<(f64, f64)> {
        self.cells.iter().filter(|c| c.algorithm == algorithm).map(|c| (c.snr_db, c.ber())).collect()
    }

    pub fn failed_trials(&self) -> u64 {
        self.cells.iter().map(|c| c.failed_trials).sum()
    }
}

/// First SNR at which a curve falls to `target`, interpolating `log10(BER)`
/// linearly between grid points. `None` if it never gets there.
pub fn snr_at_ber(series: &[(f64, f64)], target: f64) -> Option<f64> {
    if let Some(&(snr, ber)) = series.first() {
        if ber <= target {
            return Some(snr);
        }
    }
    series.windows(2).find_map(|w| {
        let ((s0, b0), (s1, b1)) = (w[0], w[1]);
        if b0 > target && b1 <= target {
            if b1 == 0.0 {
                // no errors observed: the crossing is somewhere in the
                // interval, take the right end
                return Some(s1);
            }
            let (l0, l1, lt) = (b0.log10(), b1.log10(), target.log10());
            Some(s0 + (s1 - s0) * (l0 - lt) / (l0 - l1))
        } else {
            None
        }
    })
}

/// Sweeps all trials with the worker count taken from the `THREADS`
/// environment variable (default: rayon's global pool).
pub fn run_sweep(cfg: &SimConfig) -> Result<BerCurve> {
    let threads = std::env::var("THREADS").ok().and_then(|v| v.parse::<usize>().ok()).filter(|&n| n > 0);
    run_sweep_with(cfg, threads, |_, _| {})
}

/// Sweeps all trials on `threads` workers (`None`: rayon's global pool),
/// calling `progress(done, total)` as trials finish.
pub fn run_sweep_with<F>(cfg: &SimConfig, threads: Option<usize>, progress: F) -> Result<BerCurve>
where
    F: Fn(usize, usize) + Sync,
{
    cfg.validate()?;
    let total = cfg.trials;
    let done = std::sync::atomic::AtomicUsize::new(0);
    let job = || -> Result<Vec<Vec<TrialOutcome>>> {
        (0..total as u64)
            .into_par_iter()
            .map(|trial| {
                let r = run_trial_all(cfg, trial);
                let finished = done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1;
                progress(finished, total);
                r
            })
            .collect()
    };
    let per_trial = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| PrecodingError::InvalidArgument(format!("thread pool: {e}")))?
            .install(job)?,
        None => job()?,
    };
    Ok(aggregate(cfg, &per_trial))
}

fn aggregate(cfg: &SimConfig, per_trial: &[Vec<TrialOutcome>]) -> BerCurve {
    let mut algorithms = cfg.algorithms.clone();
    algorithms.sort_by_key(|a| a.name());
    algorithms.dedup();
    let mut snrs = cfg.snr_db_list.clone();
    snrs.sort_by(f64::total_cmp);
    snrs.dedup();
    let mut cells = Vec::with_capacity(algorithms.len() * snrs.len());
    for &algorithm in &algorithms {
        for &snr_db in &snrs {
            let mut cell = BerCell {
                algorithm,
                snr_db,
                trials: 0,
                failed_trials: 0,
                bit_errors: 0,
                total_bits: 0,
                solve_seconds: 0.0,
            };
            for outcome in per_trial
                .iter()
                .filter_map(|t| t.iter().find(|o| o.algorithm == algorithm && o.snr_db == snr_db))
            {
                cell.trials += 1;
                match &outcome.result {
                    Ok(c) => {
                        cell.bit_errors += c.bit_errors;
                        cell.total_bits += c.bits;
                        cell.solve_seconds += c.seconds;
                    }
                    Err(_) => cell.failed_trials += 1,
                }
            }
            cells.push(cell);
        }
    }
    BerCurve { config: cfg.clone(), cells }
}

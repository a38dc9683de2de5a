//! Negative-square-penalty reformulation and its first-order solvers.
//!
//! The discrete (or unit-modulus) constraint `U ∈ 𝒰^{N×T}` is relaxed to the
//! convex hull and a concave penalty `−λ·Σ_t ‖u_t‖²` is subtracted from the
//! smoothed objective:
//!
//! ```text
//! F_λ(U, d) = f(U, d) − λ·Σ_t ‖u_t‖²,   U ∈ conv(𝒰)^{N×T},  0 ≤ d ≤ ρ.
//! ```
//!
//! Linearizing the penalty at an anchor `Ū` gives the convex majorant
//!
//! ```text
//! G_λ(U, d | Ū) = f(U, d) − 2λ⟨Ū, U − Ū⟩ − λ‖Ū‖²
//! ```
//!
//! which touches `F_λ` at `Ū` with matching gradient. [`solve`] takes one
//! extrapolated projected-gradient step on `G_λ(·|U^k)` per iteration (GEMM);
//! [`exact_mm_solve`] minimizes each majorant with an inner accelerated loop.
//! Both raise `λ` geometrically until it exceeds `λ_upp` and round the result
//! onto the alphabet.

mod gemm;
mod nsp;
mod oracle;

pub use gemm::{exact_mm_solve, gemm_step, solve, GemmState, StepInfo};
pub use nsp::{lambda_bar, nsp_counterexample_check};
pub use oracle::{brute_force_solve, optimal_spacings, solve_spacing_1d, BRUTE_FORCE_CAP};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::alphabet::{distance_to_alphabet, project_hull, AlphabetSpec};
use crate::error::{PrecodingError, Result};
use crate::objective::{evaluate, rho_bound, smoothed_value, PrecoderVars, ProblemInstance};

/// Momentum rule for the extrapolation coefficients `α_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Extrapolation {
    /// FISTA recurrence `ξ_k = (1 + √(1 + 4ξ²_{k−1}))/2`, `α_k = (ξ_{k−1} − 1)/ξ_k`,
    /// clamped at zero.
    Fista,
    /// FISTA coefficients capped at `ᾱ < 1`.
    Capped(f64),
}

/// Whether each majorant is minimized by one step or by an inner loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolveMode {
    Gemm,
    ExactMm { inner_tol: f64, inner_max: usize },
}

/// Hyperparameters of the penalty continuation and the step rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub alphabet: AlphabetSpec,
    /// Smoothing parameter `σ`; overrides the one stored in the instance.
    pub sigma: f64,
    pub lambda0: f64,
    /// Growth factor `c > 1` of the penalty.
    pub lambda_mult: f64,
    /// Iterations per penalty stage (`J`).
    pub inner_cap: usize,
    /// Squared-step threshold `δ` for early stage advance.
    pub move_tol: f64,
    /// Stop once `λ` exceeds this.
    pub lambda_upp: f64,
    pub beta0: f64,
    pub beta_grow: f64,
    pub beta_shrink: f64,
    pub extrapolation: Extrapolation,
    pub mode: SolveMode,
    /// Record the projected-gradient residual of every iterate (one extra
    /// gradient evaluation per iteration).
    pub record_stationarity: bool,
}

/// Defaults: `σ = 0.05`, `λ0 = 1e−5`, `c = 5`, `J = 400`, `δ = 1e−4`,
/// `λ_upp = 100`, FISTA extrapolation.
///
/// `λ0` is small because the penalty `λ‖U‖²` sums over all `NT` entries
/// while `f` moves by O(1); a larger start pins `U` to the vertices before
/// the relaxed problem has been solved.
impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            alphabet: AlphabetSpec::OneBit,
            sigma: 0.05,
            lambda0: 1e-5,
            lambda_mult: 5.0,
            inner_cap: 400,
            move_tol: 1e-4,
            lambda_upp: 100.0,
            beta0: 1.0,
            beta_grow: 2.0,
            beta_shrink: 0.9,
            extrapolation: Extrapolation::Fista,
            mode: SolveMode::Gemm,
            record_stationarity: true,
        }
    }
}

/// Default inner settings for [`SolveMode::ExactMm`].
pub const EXACT_MM_DEFAULT: SolveMode = SolveMode::ExactMm { inner_tol: 1e-4, inner_max: 100 };

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        self.alphabet.validate()?;
        let bad = |what: &str| Err(PrecodingError::InvalidArgument(what.to_string()));
        if !(self.sigma > 0.0) {
            return bad("sigma must be positive");
        }
        if !(self.lambda0 > 0.0) {
            return bad("lambda0 must be positive");
        }
        if !(self.lambda_mult > 1.0) {
            return bad("lambda_mult must exceed 1");
        }
        if self.inner_cap == 0 {
            return bad("inner_cap (J) must be at least 1");
        }
        if !(self.move_tol > 0.0) {
            return bad("move_tol (delta) must be positive");
        }
        if !(self.lambda_upp > 0.0) {
            return bad("lambda_upp must be positive");
        }
        if !(self.beta0 > 0.0) || !(self.beta_grow > 1.0) {
            return bad("beta0 must be positive and beta_grow must exceed 1");
        }
        if !(self.beta_shrink > 0.0 && self.beta_shrink <= 1.0) {
            return bad("beta_shrink must lie in (0, 1]");
        }
        if let Extrapolation::Capped(a) = self.extrapolation {
            if !(0.0..1.0).contains(&a) {
                return bad("extrapolation cap must lie in [0, 1)");
            }
        }
        if let SolveMode::ExactMm { inner_tol, inner_max } = self.mode {
            if !(inner_tol > 0.0) || inner_max == 0 {
                return bad("exact MM needs inner_tol > 0 and inner_max >= 1");
            }
        }
        Ok(())
    }

    /// The penalty values visited by the continuation schedule.
    pub fn lambda_schedule(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut lambda = self.lambda0;
        while lambda <= self.lambda_upp {
            out.push(lambda);
            lambda *= self.lambda_mult;
        }
        out
    }
}

/// One iteration of a solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub lambda: f64,
    pub penalized: f64,
    pub objective: f64,
    pub step_norm: f64,
    pub beta: f64,
    pub alpha: f64,
    /// `None` unless [`SolverConfig::record_stationarity`] is set.
    pub stationarity: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveTrace {
    pub records: Vec<IterationRecord>,
    pub iterations: usize,
    pub line_search_evals: usize,
    pub wall_seconds: f64,
}

/// Output of a solve: rounded transmit block, spacings and diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    /// Entries are exact alphabet points.
    pub u_discrete: DMatrix<Complex64>,
    /// The hull iterate before rounding.
    pub u_relaxed: DMatrix<Complex64>,
    pub d: DVector<f64>,
    /// Smallest margin of the rounded block, `−minimax_value`.
    pub margin: f64,
    /// Smoothed objective of the rounded block.
    pub objective: f64,
    pub trace: SolveTrace,
}

impl Solution {
    /// Largest entrywise distance from the relaxed iterate to the alphabet.
    pub fn max_relaxed_distance(&self, spec: AlphabetSpec) -> f64 {
        self.u_relaxed
            .iter()
            .map(|&z| distance_to_alphabet(z, spec))
            .fold(0.0, f64::max)
    }

    pub fn vars(&self) -> PrecoderVars {
        PrecoderVars::new(self.u_discrete.clone(), self.d.clone())
    }
}

/// Projection onto `conv(𝒰)^{N×T} × [0, ρ]`.
pub fn project_feasible(vars: &PrecoderVars, spec: AlphabetSpec, rho: &DVector<f64>) -> PrecoderVars {
    PrecoderVars {
        u: vars.u.map(|z| project_hull(z, spec)),
        d: DVector::from_fn(vars.d.len(), |i, _| vars.d[i].clamp(0.0, rho[i])),
    }
}

/// `⟨a, b⟩ = Re(aᴴb)` summed over both blocks.
pub(crate) fn inner(a_u: &DMatrix<Complex64>, a_d: &DVector<f64>, b: &PrecoderVars) -> f64 {
    let u: f64 = a_u.iter().zip(b.u.iter()).map(|(x, y)| x.re * y.re + x.im * y.im).sum();
    u + a_d.dot(&b.d)
}

fn penalty(u: &DMatrix<Complex64>) -> f64 {
    u.iter().map(|z| z.norm_sqr()).sum()
}

/// `F_λ(U, d) = f(U, d) − λ·‖U‖²`.
pub fn penalized_objective(inst: &ProblemInstance, vars: &PrecoderVars, lambda: f64) -> f64 {
    smoothed_value(inst, &vars.u, &vars.d) - lambda * penalty(&vars.u)
}

/// Gradient of the majorant `G_λ(·|anchor)`: `∇f − 2λ·anchor` in the `U`
/// block, `∇_d f` in the `d` block.
pub fn penalized_gradient(
    inst: &ProblemInstance,
    vars: &PrecoderVars,
    lambda: f64,
    anchor: &DMatrix<Complex64>,
) -> (DMatrix<Complex64>, DVector<f64>) {
    let e = evaluate(inst, &vars.u, &vars.d);
    (e.grad_u - anchor * Complex64::new(2.0 * lambda, 0.0), e.grad_d)
}

/// `G_λ(x | x̄) = f(x) − 2λ⟨Ū, U − Ū⟩ − λ‖Ū‖²`.
pub fn majorant_value(
    inst: &ProblemInstance,
    vars: &PrecoderVars,
    lambda: f64,
    anchor: &DMatrix<Complex64>,
) -> f64 {
    let lin: f64 = anchor
        .iter()
        .zip(vars.u.iter())
        .map(|(a, u)| {
            let diff = u - a;
            a.re * diff.re + a.im * diff.im
        })
        .sum();
    smoothed_value(inst, &vars.u, &vars.d) - 2.0 * lambda * lin - lambda * penalty(anchor)
}

/// Unit-step projected-gradient residual `‖x − Π_X(x − ∇F_λ(x))‖`.
pub fn stationarity_residual(
    inst: &ProblemInstance,
    vars: &PrecoderVars,
    lambda: f64,
    spec: AlphabetSpec,
) -> f64 {
    let rho = rho_bound(inst);
    let (gu, gd) = penalized_gradient(inst, vars, lambda, &vars.u);
    residual_from_gradient(vars, &gu, &gd, spec, &rho)
}

pub(crate) fn residual_from_gradient(
    vars: &PrecoderVars,
    gu: &DMatrix<Complex64>,
    gd: &DVector<f64>,
    spec: AlphabetSpec,
    rho: &DVector<f64>,
) -> f64 {
    let stepped = PrecoderVars { u: &vars.u - gu, d: &vars.d - gd };
    project_feasible(&stepped, spec, rho).dist_sq(vars).sqrt()
}

/// Random feasible start: `U⁰ = Π_hull(g)` with `g` standard circular complex
/// Gaussian, `d⁰ = ρ/2`.
pub fn random_init<R: Rng + ?Sized>(inst: &ProblemInstance, spec: AlphabetSpec, rng: &mut R) -> PrecoderVars {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let u = DMatrix::from_fn(inst.antennas(), inst.block_len(), |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        project_hull(Complex64::new(re * scale, im * scale), spec)
    });
    PrecoderVars::new(u, rho_bound(inst) * 0.5)
}

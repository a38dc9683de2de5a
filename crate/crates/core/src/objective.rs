//! The minimax symbol-error design objective.
//!
//! For user `i` at time `t` the noiseless received sample is
//! `√(P/N)·h_iᵀu_t`. With half inter-point spacings `dR_i, dI_i`, the margins
//!
//! ```text
//! bR = dR − (√(P/N)·Re(h_iᵀu_t) − dR·Re(s_it))
//! cR = dR + (√(P/N)·Re(h_iᵀu_t) − dR·Re(s_it))
//! ```
//!
//! (and the same with `Im`) are the distances to the two neighbouring decision
//! boundaries. The design minimizes the worst `−margin`, smoothed by a
//! log-sum-exp with parameter `σ`:
//!
//! ```text
//! f(U, d) = σ·log Σ_{i,t} (e^{−bR/σ} + e^{−bI/σ} + e^{−cR/σ} + e^{−cI/σ})
//! ```
//!
//! All exponentials are evaluated after subtracting the largest exponent, so
//! `σ = 0.05` with margins in the thousands stays finite.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use libm::erfc;

use crate::alphabet::QamSpec;
use crate::error::{PrecodingError, Result};

/// One transmission block: channel, symbols, power, smoothing and noise.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    h: DMatrix<Complex64>,
    s: DMatrix<Complex64>,
    power: f64,
    qam: QamSpec,
    sigma: f64,
    sigma_eta: f64,
}

impl ProblemInstance {
    /// `h` is `K×N` (row `i` is `h_iᵀ`), `s` is `K×T`.
    pub fn new(
        h: DMatrix<Complex64>,
        s: DMatrix<Complex64>,
        power: f64,
        qam: QamSpec,
        sigma: f64,
        sigma_eta: f64,
    ) -> Result<Self> {
        let (k, n) = h.shape();
        if k == 0 || n < k {
            return Err(PrecodingError::InvalidArgument(format!(
                "need K >= 1 and N >= K, got K={k}, N={n}"
            )));
        }
        if s.nrows() != k || s.ncols() == 0 {
            return Err(PrecodingError::ShapeMismatch(format!(
                "symbols are {}x{}, expected {k}xT with T >= 1",
                s.nrows(),
                s.ncols()
            )));
        }
        if !(power > 0.0) || !(sigma > 0.0) || !(sigma_eta >= 0.0) {
            return Err(PrecodingError::InvalidArgument(format!(
                "need P > 0, σ > 0, σ_η >= 0; got P={power}, σ={sigma}, σ_η={sigma_eta}"
            )));
        }
        if let Some(bad) = s.iter().find(|z| !qam.contains(**z)) {
            return Err(PrecodingError::InvalidArgument(format!(
                "symbol {bad} is not in {}-QAM",
                qam.order()
            )));
        }
        Ok(Self { h, s, power, qam, sigma, sigma_eta })
    }

    pub fn h(&self) -> &DMatrix<Complex64> {
        &self.h
    }

    pub fn s(&self) -> &DMatrix<Complex64> {
        &self.s
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn qam(&self) -> QamSpec {
        self.qam
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn sigma_eta(&self) -> f64 {
        self.sigma_eta
    }

    pub fn with_sigma(mut self, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(PrecodingError::InvalidArgument(format!("σ must be positive, got {sigma}")));
        }
        self.sigma = sigma;
        Ok(self)
    }

    pub fn with_sigma_eta(mut self, sigma_eta: f64) -> Result<Self> {
        if !(sigma_eta >= 0.0) {
            return Err(PrecodingError::InvalidArgument(format!(
                "σ_η must be nonnegative, got {sigma_eta}"
            )));
        }
        self.sigma_eta = sigma_eta;
        Ok(self)
    }

    /// Number of users `K`.
    pub fn users(&self) -> usize {
        self.h.nrows()
    }

    /// Number of transmit antennas `N`.
    pub fn antennas(&self) -> usize {
        self.h.ncols()
    }

    /// Block length `T`.
    pub fn block_len(&self) -> usize {
        self.s.ncols()
    }

    /// Amplitude scale `√(P/N)` applied to the normalized transmit signal.
    pub fn amplitude(&self) -> f64 {
        (self.power / self.antennas() as f64).sqrt()
    }

    /// Noiseless received samples `√(P/N)·H·U` (`K×T`).
    pub fn received(&self, u: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        (&self.h * u) * Complex64::new(self.amplitude(), 0.0)
    }

    fn check(&self, vars: &PrecoderVars) -> Result<()> {
        let (n, t, k) = (self.antennas(), self.block_len(), self.users());
        if vars.u.shape() != (n, t) || vars.d.len() != 2 * k {
            return Err(PrecodingError::ShapeMismatch(format!(
                "U is {:?} and d has {} entries; expected ({n}, {t}) and {}",
                vars.u.shape(),
                vars.d.len(),
                2 * k
            )));
        }
        Ok(())
    }
}

/// Decision variables: normalized transmit block `U` (`N×T`) and spacings
/// `d = [dR_1..dR_K, dI_1..dI_K]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderVars {
    pub u: DMatrix<Complex64>,
    pub d: DVector<f64>,
}

impl PrecoderVars {
    pub fn new(u: DMatrix<Complex64>, d: DVector<f64>) -> Self {
        Self { u, d }
    }

    /// Squared Euclidean distance between two points of the joint space.
    pub fn dist_sq(&self, other: &PrecoderVars) -> f64 {
        let du: f64 = self.u.iter().zip(other.u.iter()).map(|(a, b)| (a - b).norm_sqr()).sum();
        let dd: f64 = self.d.iter().zip(other.d.iter()).map(|(a, b)| (a - b).powi(2)).sum();
        du + dd
    }

    /// Squared Euclidean norm of the joint vector.
    pub fn norm_sq(&self) -> f64 {
        self.u.iter().map(|z| z.norm_sqr()).sum::<f64>() + self.d.norm_squared()
    }

    /// `self + alpha·(self − prev)`.
    pub fn extrapolate(&self, prev: &PrecoderVars, alpha: f64) -> PrecoderVars {
        if alpha == 0.0 {
            return self.clone();
        }
        PrecoderVars {
            u: &self.u + (&self.u - &prev.u) * Complex64::new(alpha, 0.0),
            d: &self.d + (&self.d - &prev.d) * alpha,
        }
    }
}

/// Margin terms `bR, cR, bI, cI`, each `K×T`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginTerms {
    pub br: DMatrix<f64>,
    pub cr: DMatrix<f64>,
    pub bi: DMatrix<f64>,
    pub ci: DMatrix<f64>,
}

impl MarginTerms {
    /// Smallest of all `4KT` margins.
    pub fn min_margin(&self) -> f64 {
        [&self.br, &self.cr, &self.bi, &self.ci]
            .iter()
            .flat_map(|m| m.iter())
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

fn margins_from_received(inst: &ProblemInstance, r: &DMatrix<Complex64>, d: &DVector<f64>) -> MarginTerms {
    let (k, t) = r.shape();
    let mut m = MarginTerms {
        br: DMatrix::zeros(k, t),
        cr: DMatrix::zeros(k, t),
        bi: DMatrix::zeros(k, t),
        ci: DMatrix::zeros(k, t),
    };
    for col in 0..t {
        for i in 0..k {
            let (dr, di) = (d[i], d[i + k]);
            let s = inst.s[(i, col)];
            let res_r = r[(i, col)].re - dr * s.re;
            let res_i = r[(i, col)].im - di * s.im;
            m.br[(i, col)] = dr - res_r;
            m.cr[(i, col)] = dr + res_r;
            m.bi[(i, col)] = di - res_i;
            m.ci[(i, col)] = di + res_i;
        }
    }
    m
}

/// Margins of every user and symbol time.
pub fn margin_terms(inst: &ProblemInstance, vars: &PrecoderVars) -> Result<MarginTerms> {
    inst.check(vars)?;
    Ok(margins_from_received(inst, &inst.received(&vars.u), &vars.d))
}

/// Box bound `ρ` on the spacings: `ρ_i = ρ_{i+K} = √(P/N)·Σ_n |h_in|`.
pub fn rho_bound(inst: &ProblemInstance) -> DVector<f64> {
    let k = inst.users();
    let a = inst.amplitude();
    let mut rho = DVector::zeros(2 * k);
    for i in 0..k {
        let l1: f64 = inst.h.row(i).iter().map(|z| z.norm()).sum();
        rho[i] = a * l1;
        rho[i + k] = a * l1;
    }
    rho
}

/// Unsmoothed objective `max_{i,t} max{−bR, −cR, −bI, −cI}`.
pub fn minimax_value(inst: &ProblemInstance, vars: &PrecoderVars) -> Result<f64> {
    Ok(-margin_terms(inst, vars)?.min_margin())
}

/// Value and gradients of the smoothed objective at one point.
#[derive(Debug, Clone)]
pub(crate) struct Evaluation {
    pub value: f64,
    pub grad_u: DMatrix<Complex64>,
    pub grad_d: DVector<f64>,
}

/// The four exponents `−margin/σ` of entry `(i, t)`: `(bR, cR, bI, cI)`.
#[inline]
fn exponents(inst: &ProblemInstance, r: &DMatrix<Complex64>, d: &DVector<f64>, i: usize, t: usize) -> [f64; 4] {
    let k = r.nrows();
    let (dr, di) = (d[i], d[i + k]);
    let s = inst.s[(i, t)];
    let res_r = r[(i, t)].re - dr * s.re;
    let res_i = r[(i, t)].im - di * s.im;
    let inv = -1.0 / inst.sigma;
    [(dr - res_r) * inv, (dr + res_r) * inv, (di - res_i) * inv, (di + res_i) * inv]
}

/// Largest exponent and the shifted sum `Σ e^{x − shift}`.
fn lse_parts(inst: &ProblemInstance, r: &DMatrix<Complex64>, d: &DVector<f64>) -> (f64, f64) {
    let (k, t) = r.shape();
    let mut shift = f64::NEG_INFINITY;
    for col in 0..t {
        for i in 0..k {
            for x in exponents(inst, r, d, i, col) {
                shift = shift.max(x);
            }
        }
    }
    let mut z = 0.0;
    for col in 0..t {
        for i in 0..k {
            for x in exponents(inst, r, d, i, col) {
                z += (x - shift).exp();
            }
        }
    }
    (shift, z)
}

pub(crate) fn smoothed_value(inst: &ProblemInstance, u: &DMatrix<Complex64>, d: &DVector<f64>) -> f64 {
    smoothed_from_received(inst, &inst.received(u), d)
}

/// `f` from precomputed received samples `√(P/N)·H·U`.
pub(crate) fn smoothed_from_received(inst: &ProblemInstance, r: &DMatrix<Complex64>, d: &DVector<f64>) -> f64 {
    let (shift, z) = lse_parts(inst, r, d);
    inst.sigma * (shift + z.ln())
}

pub(crate) fn evaluate(inst: &ProblemInstance, u: &DMatrix<Complex64>, d: &DVector<f64>) -> Evaluation {
    evaluate_received(inst, &inst.received(u), d)
}

/// Value and gradients from precomputed received samples.
pub(crate) fn evaluate_received(inst: &ProblemInstance, r: &DMatrix<Complex64>, d: &DVector<f64>) -> Evaluation {
    let sigma = inst.sigma;
    let (shift, z) = lse_parts(inst, r, d);
    let (k, t) = r.shape();

    // w_it = (e^{−bR/σ} − e^{−cR/σ}) + j(e^{−bI/σ} − e^{−cI/σ}), shifted, over Z.
    let mut w = DMatrix::<Complex64>::zeros(k, t);
    let mut grad_d = DVector::zeros(2 * k);
    for col in 0..t {
        for i in 0..k {
            let [xb_r, xc_r, xb_i, xc_i] = exponents(inst, r, d, i, col);
            let eb_r = (xb_r - shift).exp();
            let ec_r = (xc_r - shift).exp();
            let eb_i = (xb_i - shift).exp();
            let ec_i = (xc_i - shift).exp();
            w[(i, col)] = Complex64::new(eb_r - ec_r, eb_i - ec_i) / z;
            let s = inst.s[(i, col)];
            grad_d[i] += (-(1.0 + s.re) * eb_r + (s.re - 1.0) * ec_r) / z;
            grad_d[i + k] += (-(1.0 + s.im) * eb_i + (s.im - 1.0) * ec_i) / z;
        }
    }
    // ∂/∂Re(u) + j∂/∂Im(u) of Re/Im(h_iᵀu) pulls back through conj(h_i).
    let grad_u = inst.h.ad_mul(&w) * Complex64::new(inst.amplitude(), 0.0);
    Evaluation { value: sigma * (shift + z.ln()), grad_u, grad_d }
}

/// Log-sum-exp smoothed objective `f(U, d)`.
pub fn smoothed_objective(inst: &ProblemInstance, vars: &PrecoderVars) -> Result<f64> {
    inst.check(vars)?;
    Ok(smoothed_value(inst, &vars.u, &vars.d))
}

/// Gradients of `f` with respect to `U` (complex convention
/// `∇_Re + j∇_Im`) and `d`.
pub fn objective_gradient(
    inst: &ProblemInstance,
    vars: &PrecoderVars,
) -> Result<(DMatrix<Complex64>, DVector<f64>)> {
    inst.check(vars)?;
    let e = evaluate(inst, &vars.u, &vars.d);
    Ok((e.grad_u, e.grad_d))
}

/// Gaussian tail `Q(x) = erfc(x/√2)/2`.
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

fn tail(margin: f64, sigma_eta: f64) -> f64 {
    if sigma_eta > 0.0 {
        q_function(std::f64::consts::SQRT_2 * margin / sigma_eta)
    } else if margin > 0.0 {
        0.0
    } else if margin < 0.0 {
        1.0
    } else {
        0.5
    }
}

fn sep_one_dim(level: f64, b: f64, c: f64, qam: QamSpec, sigma_eta: f64) -> f64 {
    let top = qam.max_level();
    if level >= top {
        tail(c, sigma_eta)
    } else if level <= -top {
        tail(b, sigma_eta)
    } else {
        tail(b, sigma_eta) + tail(c, sigma_eta)
    }
}

/// Exact real/imaginary symbol error probabilities for user `i` at time `t`.
///
/// With `σ_η = 0` the tails collapse to their step limits.
pub fn exact_sep(inst: &ProblemInstance, vars: &PrecoderVars, i: usize, t: usize) -> Result<(f64, f64)> {
    let m = margin_terms(inst, vars)?;
    if i >= inst.users() || t >= inst.block_len() {
        return Err(PrecodingError::ShapeMismatch(format!("index ({i}, {t}) out of range")));
    }
    let s = inst.s[(i, t)];
    Ok((
        sep_one_dim(s.re, m.br[(i, t)], m.cr[(i, t)], inst.qam, inst.sigma_eta),
        sep_one_dim(s.im, m.bi[(i, t)], m.ci[(i, t)], inst.qam, inst.sigma_eta),
    ))
}

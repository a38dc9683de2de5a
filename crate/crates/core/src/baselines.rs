//! Zero-forcing references.
//!
//! ZF ignores the transmit alphabet: `ξ_t = d·Hᴴ(HHᴴ)⁻¹s_t`, with `d` set so
//! that the average transmit energy per slot equals `P`. QZF quantizes each
//! ZF entry to the alphabet and lets every user fit its decision spacing to
//! the block by least squares.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::alphabet::{project_alphabet, AlphabetSpec};
use crate::error::{PrecodingError, Result};
use crate::objective::ProblemInstance;

/// Lower clamp on fitted QZF spacings.
pub const QZF_MIN_SPACING: f64 = 1e-9;

/// ZF transmit block `Ξ` (N×T) and the common receiver spacing `d`.
///
/// ```
/// use nalgebra::DMatrix;
/// use num_complex::Complex64;
/// use nsp_precoding::alphabet::QamSpec;
/// use nsp_precoding::baselines::zf_precode;
/// use nsp_precoding::objective::ProblemInstance;
///
/// let h = DMatrix::<Complex64>::identity(2, 2);
/// let s = DMatrix::from_element(2, 3, Complex64::new(1.0, -1.0));
/// let inst = ProblemInstance::new(h, s.clone(), 4.0, QamSpec::new(1)?, 0.05, 0.0)?;
/// let (xi, d) = zf_precode(&inst)?;
/// assert!((d - 1.0).abs() < 1e-12);
/// assert!((xi - s).norm() < 1e-12);
/// # Ok::<(), nsp_precoding::PrecodingError>(())
/// ```
pub fn zf_precode(inst: &ProblemInstance) -> Result<(DMatrix<Complex64>, f64)> {
    let h = inst.h();
    let k = inst.users();
    if inst.antennas() < k {
        return Err(PrecodingError::FactorizationFailure);
    }
    let gram = h * h.adjoint();
    let chol = gram.clone().cholesky().ok_or(PrecodingError::FactorizationFailure)?;
    // nalgebra accepts nearly singular Gram matrices; reject them by pivot size
    let l = chol.l_dirty();
    let scale = (0..k).map(|i| gram[(i, i)].re).fold(0.0, f64::max);
    let min_pivot = (0..k).map(|i| l[(i, i)].re).fold(f64::INFINITY, f64::min);
    if !(min_pivot * min_pivot > 1e-13 * scale) {
        return Err(PrecodingError::FactorizationFailure);
    }
    let inv = chol.inverse();
    let trace: f64 = (0..k).map(|i| inv[(i, i)].re).sum();
    let d = (inst.power() / (inst.qam().second_moment() * trace)).sqrt();
    let xi = h.adjoint() * chol.solve(inst.s()) * Complex64::new(d, 0.0);
    Ok((xi, d))
}

/// Entrywise-quantized ZF block `U` (N×T, alphabet members) and fitted
/// spacings `[dR; dI]` (length 2K) for the received signal `√(P/N)·H·U`.
pub fn qzf_precode(inst: &ProblemInstance, spec: AlphabetSpec) -> Result<(DMatrix<Complex64>, DVector<f64>)> {
    spec.validate()?;
    let (xi, _) = zf_precode(inst)?;
    let u = xi.map(|x| project_alphabet(x, spec));
    let r = inst.received(&u);
    Ok((u, fit_spacings(&r, inst.s())))
}

/// Per-user, per-dimension least-squares fit of `r ≈ d·s`, clamped below at
/// [`QZF_MIN_SPACING`].
pub fn fit_spacings(r: &DMatrix<Complex64>, s: &DMatrix<Complex64>) -> DVector<f64> {
    let k = s.nrows();
    let mut d = DVector::zeros(2 * k);
    for i in 0..k {
        let (mut num_re, mut den_re, mut num_im, mut den_im) = (0.0, 0.0, 0.0, 0.0);
        for t in 0..s.ncols() {
            num_re += r[(i, t)].re * s[(i, t)].re;
            den_re += s[(i, t)].re * s[(i, t)].re;
            num_im += r[(i, t)].im * s[(i, t)].im;
            den_im += s[(i, t)].im * s[(i, t)].im;
        }
        d[i] = (num_re / den_re).max(QZF_MIN_SPACING);
        d[i + k] = (num_im / den_im).max(QZF_MIN_SPACING);
    }
    d
}

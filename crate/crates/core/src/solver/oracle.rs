//! Exhaustive search over tiny discrete instances.
//!
//! For a fixed `U` the spacing problem decouples per user and per real
//! dimension into a one-dimensional minimax of affine functions of `d`,
//!
//! ```text
//! min_{0 ≤ d ≤ ρ_i} max_t max{ −(1 + s_t)·d + y_t,  −(1 − s_t)·d − y_t },
//! ```
//!
//! which is convex and piecewise linear, so its minimum sits at an endpoint
//! or at a crossing of two pieces.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{Solution, SolveTrace};
use crate::alphabet::AlphabetSpec;
use crate::error::{PrecodingError, Result};
use crate::objective::{rho_bound, smoothed_value, ProblemInstance};

/// Largest alphabet search space `|𝒰|^{NT}` accepted by [`brute_force_solve`].
pub const BRUTE_FORCE_CAP: f64 = 1_048_576.0;

/// Minimizes `max_j (slope_j·d + offset_j)` over `d ∈ [0, upper]`.
///
/// Returns `(d, value)`; ties resolve to the smallest `d`.
pub fn solve_spacing_1d(lines: &[(f64, f64)], upper: f64) -> (f64, f64) {
    let eval = |d: f64| {
        lines.iter().map(|&(a, b)| a * d + b).fold(f64::NEG_INFINITY, f64::max)
    };
    let mut candidates = vec![0.0, upper];
    for (j, &(a1, b1)) in lines.iter().enumerate() {
        for &(a2, b2) in &lines[j + 1..] {
            if a1 != a2 {
                let d = (b2 - b1) / (a1 - a2);
                if d > 0.0 && d < upper {
                    candidates.push(d);
                }
            }
        }
    }
    candidates
        .into_iter()
        .map(|d| (d, eval(d)))
        .fold((f64::NAN, f64::INFINITY), |best, cur| {
            if cur.1 < best.1 || (cur.1 == best.1 && cur.0 < best.0) {
                cur
            } else {
                best
            }
        })
}

/// Best spacings for a fixed transmit block, with the resulting minimax value.
pub fn optimal_spacings(inst: &ProblemInstance, u: &DMatrix<Complex64>) -> (DVector<f64>, f64) {
    let r = inst.received(u);
    optimal_spacings_for_received(inst, &r, &rho_bound(inst))
}

fn optimal_spacings_for_received(
    inst: &ProblemInstance,
    r: &DMatrix<Complex64>,
    rho: &DVector<f64>,
) -> (DVector<f64>, f64) {
    let (k, t) = r.shape();
    let mut d = DVector::zeros(2 * k);
    let mut worst = f64::NEG_INFINITY;
    let mut lines = Vec::with_capacity(2 * t);
    for i in 0..k {
        for (offset, part) in [(0, 0usize), (k, 1)] {
            lines.clear();
            for col in 0..t {
                let (y, s) = if part == 0 {
                    (r[(i, col)].re, inst.s()[(i, col)].re)
                } else {
                    (r[(i, col)].im, inst.s()[(i, col)].im)
                };
                lines.push((-(1.0 + s), y));
                lines.push((-(1.0 - s), -y));
            }
            let (best_d, value) = solve_spacing_1d(&lines, rho[i + offset]);
            d[i + offset] = best_d;
            worst = worst.max(value);
        }
    }
    (d, worst)
}

/// Global minimax optimum over `𝒰^{N×T} × [0, ρ]` by enumeration.
pub fn brute_force_solve(inst: &ProblemInstance, spec: AlphabetSpec) -> Result<Solution> {
    let start = Instant::now();
    let points = spec.points().ok_or_else(|| {
        PrecodingError::InvalidArgument("brute force needs a finite alphabet".into())
    })?;
    let (n, t) = (inst.antennas(), inst.block_len());
    let cells = n * t;
    let size = (points.len() as f64).powi(cells as i32);
    if size > BRUTE_FORCE_CAP {
        return Err(PrecodingError::SearchSpaceTooLarge { size, cap: BRUTE_FORCE_CAP });
    }
    let rho = rho_bound(inst);
    let mut digits = vec![0usize; cells];
    let mut u = DMatrix::from_element(n, t, points[0]);
    let mut best: Option<(DMatrix<Complex64>, DVector<f64>, f64)> = None;
    loop {
        let r = inst.received(&u);
        let (d, value) = optimal_spacings_for_received(inst, &r, &rho);
        if best.as_ref().is_none_or(|b| value < b.2) {
            best = Some((u.clone(), d, value));
        }
        // odometer increment, column-major over U
        let mut pos = 0;
        loop {
            if pos == cells {
                let (u, d, value) = best.expect("at least one candidate");
                let objective = smoothed_value(inst, &u, &d);
                let trace = SolveTrace { wall_seconds: start.elapsed().as_secs_f64(), ..Default::default() };
                return Ok(Solution {
                    u_relaxed: u.clone(),
                    u_discrete: u,
                    d,
                    margin: -value,
                    objective,
                    trace,
                });
            }
            digits[pos] += 1;
            if digits[pos] == points.len() {
                digits[pos] = 0;
                u[pos] = points[0];
                pos += 1;
            } else {
                u[pos] = points[digits[pos]];
                break;
            }
        }
    }
}

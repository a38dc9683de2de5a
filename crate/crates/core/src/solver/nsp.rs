use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;

use crate::alphabet::AlphabetSpec;

/// Penalty level above which the penalized problem has the same global
/// minimizers as the constrained one, for an objective that is
/// `lipschitz`-Lipschitz on the hull: `√2·L` (one-bit), `L` (CE),
/// `L / sin(π/M)` (DCE).
pub fn lambda_bar(spec: AlphabetSpec, lipschitz: f64) -> f64 {
    match spec {
        AlphabetSpec::OneBit => SQRT_2 * lipschitz,
        AlphabetSpec::ContinuousCe => lipschitz,
        AlphabetSpec::DiscreteCe(m) => lipschitz / (PI / m as f64).sin(),
    }
}

/// Checks numerically that `u = 0` is a local minimizer of
/// `F_λ(u) = |u| − λ|u|²` over the unit disk, although it is not a unit-modulus
/// point. The penalty only drives iterates to the alphabet when the objective
/// is smooth; this is the nonsmooth counterexample.
///
/// Samples the disk of radius `min(1/(4λ), 1)` on a polar grid.
pub fn nsp_counterexample_check(lambda: f64) -> bool {
    if !(lambda > 0.0) {
        return false;
    }
    let penalized = |u: Complex64| u.norm() - lambda * u.norm_sqr();
    let at_zero = penalized(Complex64::new(0.0, 0.0));
    let radius = (0.25 / lambda).min(1.0);
    const RADII: usize = 2000;
    const ANGLES: usize = 32;
    (1..=RADII).all(|r| {
        let rad = radius * r as f64 / RADII as f64;
        (0..ANGLES).all(|a| {
            let u = Complex64::from_polar(rad, 2.0 * PI * a as f64 / ANGLES as f64);
            penalized(u) >= at_zero
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thresholds() {
        let l = 2.5;
        assert!((lambda_bar(AlphabetSpec::DiscreteCe(4), l) - lambda_bar(AlphabetSpec::OneBit, l)).abs() < 1e-12);
        assert_eq!(lambda_bar(AlphabetSpec::ContinuousCe, l), l);
        for spec in [AlphabetSpec::OneBit, AlphabetSpec::ContinuousCe, AlphabetSpec::DiscreteCe(8)] {
            assert_eq!(lambda_bar(spec, 0.0), 0.0);
        }
        let m = 4096;
        let ratio = lambda_bar(AlphabetSpec::DiscreteCe(m), 1.0) / (m as f64 / PI);
        assert!((ratio - 1.0).abs() < 1e-6);
    }

    #[test]
    fn counterexample_holds() {
        for lambda in [0.5, 1.0, 10.0] {
            assert!(nsp_counterexample_check(lambda));
        }
        // λ = 10 on the circle |u| = 0.025: z − λz² > 0
        let z = 0.025;
        assert!(z - 10.0 * z * z > 0.0);
        assert!(!nsp_counterexample_check(0.0));
    }
}

//! Reference computations written independently of the library.

use nalgebra::DMatrix;
use num_complex::Complex64;
use nsp_precoding::alphabet::AlphabetSpec;
use nsp_precoding::objective::{smoothed_objective, PrecoderVars, ProblemInstance};

/// Vertices of the alphabet polygon, counter-clockwise, or `None` for the
/// unit circle.
fn vertices(spec: AlphabetSpec) -> Option<Vec<Complex64>> {
    let m = match spec {
        AlphabetSpec::OneBit => 4,
        AlphabetSpec::DiscreteCe(m) => m,
        AlphabetSpec::ContinuousCe => return None,
    };
    let step = std::f64::consts::PI / m as f64;
    Some((0..m).map(|k| Complex64::from_polar(1.0, (2 * k + 1) as f64 * step)).collect())
}

fn cross(a: Complex64, b: Complex64) -> f64 {
    a.re * b.im - a.im * b.re
}

fn closest_on_segment(z: Complex64, a: Complex64, b: Complex64) -> Complex64 {
    let ab = b - a;
    let t = ((z - a).re * ab.re + (z - a).im * ab.im) / ab.norm_sqr();
    a + ab * t.clamp(0.0, 1.0)
}

/// Projection onto the hull by checking the inside test and then every edge.
pub fn project_hull(z: Complex64, spec: AlphabetSpec) -> Complex64 {
    let Some(v) = vertices(spec) else {
        return if z.norm() <= 1.0 { z } else { z / z.norm() };
    };
    let m = v.len();
    let inside = (0..m).all(|k| cross(v[(k + 1) % m] - v[k], z - v[k]) >= 0.0);
    if inside {
        return z;
    }
    (0..m)
        .map(|k| closest_on_segment(z, v[k], v[(k + 1) % m]))
        .min_by(|a, b| (a - z).norm().total_cmp(&(b - z).norm()))
        .unwrap()
}

/// Central-difference gradient of the smoothed objective, in the same real
/// coordinates as the analytic one (`∂/∂Re` in `re`, `∂/∂Im` in `im`).
pub fn fd_gradient(inst: &ProblemInstance, vars: &PrecoderVars, h: f64) -> (DMatrix<Complex64>, Vec<f64>) {
    let f = |v: &PrecoderVars| smoothed_objective(inst, v).unwrap();
    let central = |plus: PrecoderVars, minus: PrecoderVars| (f(&plus) - f(&minus)) / (2.0 * h);
    let mut gu = DMatrix::zeros(vars.u.nrows(), vars.u.ncols());
    for idx in 0..vars.u.len() {
        let mut parts = [0.0; 2];
        for (slot, dir) in [Complex64::new(h, 0.0), Complex64::new(0.0, h)].into_iter().enumerate() {
            let (mut p, mut m) = (vars.clone(), vars.clone());
            p.u[idx] += dir;
            m.u[idx] -= dir;
            parts[slot] = central(p, m);
        }
        gu[idx] = Complex64::new(parts[0], parts[1]);
    }
    let gd = (0..vars.d.len())
        .map(|i| {
            let (mut p, mut m) = (vars.clone(), vars.clone());
            p.d[i] += h;
            m.d[i] -= h;
            central(p, m)
        })
        .collect();
    (gu, gd)
}

//! QAM constellations and the three transmit alphabets.
//!
//! A transmit alphabet is one of
//!
//! * one-bit: `{±1 ± j}/√2`, the output of a pair of one-bit DACs,
//! * continuous constant envelope (CE): the unit circle,
//! * discrete constant envelope (DCE): `M` phases `e^{j(2πm/M + π/M)}`.
//!
//! Every alphabet point has unit modulus. The solver works on the convex hull
//! of the alphabet, so both the projection onto the hull ([`project_hull`]) and
//! the rounding onto the alphabet itself ([`project_alphabet`]) live here.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;

use crate::error::{PrecodingError, Result};

/// Square QAM with `2B` amplitude levels per real dimension.
///
/// Levels are the odd integers `±1, ±3, …, ±(2B−1)`; the constellation has
/// `4B²` points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct QamSpec {
    b: usize,
}

impl QamSpec {
    /// Creates a QAM spec from `B`, the number of positive levels per dimension.
    pub fn new(b: usize) -> Result<Self> {
        if b == 0 {
            return Err(PrecodingError::InvalidArgument(
                "QAM parameter B must be at least 1".into(),
            ));
        }
        Ok(Self { b })
    }

    /// Creates a QAM spec from the constellation size (4, 16, 64, 256, ...).
    pub fn from_order(order: usize) -> Result<Self> {
        let b = ((order as f64).sqrt() / 2.0).round() as usize;
        if b == 0 || 4 * b * b != order {
            return Err(PrecodingError::InvalidArgument(format!(
                "QAM order {order} is not of the form 4B²"
            )));
        }
        Ok(Self { b })
    }

    pub fn b(&self) -> usize {
        self.b
    }

    /// Constellation size `4B²`.
    pub fn order(&self) -> usize {
        4 * self.b * self.b
    }

    /// Largest level `2B − 1`.
    pub fn max_level(&self) -> f64 {
        (2 * self.b - 1) as f64
    }

    /// Number of levels per real dimension, `2B`.
    pub fn levels_per_dim(&self) -> usize {
        2 * self.b
    }

    /// The per-dimension levels in ascending order.
    pub fn levels(&self) -> Vec<f64> {
        (0..self.levels_per_dim()).map(|k| self.level(k)).collect()
    }

    /// Level with ascending index `k`.
    pub fn level(&self, k: usize) -> f64 {
        2.0 * k as f64 - self.max_level()
    }

    /// Every constellation point, real part major.
    pub fn points(&self) -> Vec<Complex64> {
        let levels = self.levels();
        let mut out = Vec::with_capacity(self.order());
        for &re in &levels {
            for &im in &levels {
                out.push(Complex64::new(re, im));
            }
        }
        out
    }

    /// Mean of `|s|²` over the uniformly used constellation, `2(4B²−1)/3`.
    pub fn second_moment(&self) -> f64 {
        2.0 * (self.order() as f64 - 1.0) / 3.0
    }

    /// Whether `s` is a point of this constellation.
    pub fn contains(&self, s: Complex64) -> bool {
        let ok = |x: f64| {
            x.fract() == 0.0 && (x as i64).rem_euclid(2) == 1 && x.abs() <= self.max_level()
        };
        ok(s.re) && ok(s.im)
    }

    /// Bits carried per real dimension, `log2(2B)`.
    pub fn bits_per_dim(&self) -> Result<usize> {
        let levels = self.levels_per_dim();
        if !levels.is_power_of_two() {
            return Err(PrecodingError::UnsupportedBitMapping { levels });
        }
        Ok(levels.trailing_zeros() as usize)
    }

    /// Bits carried per complex symbol.
    pub fn bits_per_symbol(&self) -> Result<usize> {
        Ok(2 * self.bits_per_dim()?)
    }

    /// Hard decision for one real dimension: nearest level, clipped to
    /// `±(2B−1)`.
    ///
    /// Exact midpoints go to the level of smaller magnitude; zero goes to `+1`.
    pub fn decide(&self, x: f64) -> f64 {
        let mag = x.abs();
        let level = (2.0 * (mag / 2.0).ceil() - 1.0).max(1.0);
        let level = level.min(self.max_level());
        if x < 0.0 {
            -level
        } else {
            level
        }
    }

    fn level_index(&self, level: f64) -> usize {
        ((level + self.max_level()) / 2.0).round() as usize
    }
}

/// Which transmit alphabet the base station uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AlphabetSpec {
    OneBit,
    ContinuousCe,
    /// `M` uniformly spaced phases; `M` even and at least 4.
    DiscreteCe(usize),
}

impl AlphabetSpec {
    /// Validated DCE constructor.
    pub fn discrete_ce(m: usize) -> Result<Self> {
        let spec = AlphabetSpec::DiscreteCe(m);
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            AlphabetSpec::DiscreteCe(m) if m < 4 || m % 2 != 0 => Err(
                PrecodingError::InvalidArgument(format!("M must be even and at least 4, got {m}")),
            ),
            _ => Ok(()),
        }
    }

    /// Short scenario name used in CSV output.
    pub fn scenario_name(&self) -> &'static str {
        match self {
            AlphabetSpec::OneBit => "one-bit",
            AlphabetSpec::ContinuousCe => "ce",
            AlphabetSpec::DiscreteCe(_) => "dce",
        }
    }

    /// Phase count, if the alphabet is discrete CE.
    pub fn phases(&self) -> Option<usize> {
        match *self {
            AlphabetSpec::DiscreteCe(m) => Some(m),
            _ => None,
        }
    }

    /// The finite point set, `None` for continuous CE.
    pub fn points(&self) -> Option<Vec<Complex64>> {
        match *self {
            AlphabetSpec::OneBit => Some(
                [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)]
                    .iter()
                    .map(|&(re, im)| Complex64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2))
                    .collect(),
            ),
            AlphabetSpec::ContinuousCe => None,
            AlphabetSpec::DiscreteCe(m) => Some((0..m).map(|k| dce_point(k as i64, m)).collect()),
        }
    }
}

/// `(cos(π/M), sin(π/M))`, exact `1/√2` for `M = 4`.
fn half_sector(m: usize) -> (f64, f64) {
    if m == 4 {
        (FRAC_1_SQRT_2, FRAC_1_SQRT_2)
    } else {
        let a = PI / m as f64;
        (a.cos(), a.sin())
    }
}

/// Rotation by `2πn/M`. Quarter turns are done by swapping components so
/// that the `M = 4` case introduces no rounding.
#[derive(Clone, Copy)]
enum Rotation {
    Quarter(i64),
    General(Complex64),
}

impl Rotation {
    fn new(n: i64, m: usize) -> Self {
        let m = m as i64;
        if (4 * n) % m == 0 {
            Rotation::Quarter((4 * n / m).rem_euclid(4))
        } else {
            let (sin, cos) = (2.0 * PI * n as f64 / m as f64).sin_cos();
            Rotation::General(Complex64::new(cos, sin))
        }
    }

    fn apply(self, u: Complex64, inverse: bool) -> Complex64 {
        match self {
            Rotation::Quarter(q) => match if inverse { (4 - q) % 4 } else { q } {
                0 => u,
                1 => Complex64::new(-u.im, u.re),
                2 => Complex64::new(-u.re, -u.im),
                _ => Complex64::new(u.im, -u.re),
            },
            Rotation::General(w) => {
                if inverse {
                    u * w.conj()
                } else {
                    u * w
                }
            }
        }
    }
}

fn rotate(u: Complex64, n: i64, m: usize) -> Complex64 {
    Rotation::new(n, m).apply(u, false)
}

/// DCE point with phase `2πk/M + π/M`.
fn dce_point(k: i64, m: usize) -> Complex64 {
    let (c, s) = half_sector(m);
    rotate(Complex64::new(c, s), k, m)
}

/// Principal argument in `(−π, π]`.
fn principal_arg(u: Complex64) -> f64 {
    let a = u.im.atan2(u.re);
    if a <= -PI {
        PI
    } else {
        a
    }
}

/// Euclidean projection onto the convex hull of the alphabet.
pub fn project_hull(u: Complex64, spec: AlphabetSpec) -> Complex64 {
    match spec {
        AlphabetSpec::OneBit => Complex64::new(
            u.re.clamp(-FRAC_1_SQRT_2, FRAC_1_SQRT_2),
            u.im.clamp(-FRAC_1_SQRT_2, FRAC_1_SQRT_2),
        ),
        AlphabetSpec::ContinuousCe => {
            let r = u.norm();
            if r <= 1.0 {
                u
            } else {
                u / r
            }
        }
        AlphabetSpec::DiscreteCe(m) => {
            let (c, s) = half_sector(m);
            let width = 2.0 * PI / m as f64;
            let n = ((principal_arg(u) + PI / m as f64) / width).floor() as i64;
            let rot = Rotation::new(n, m);
            let local = rot.apply(u, true);
            let clipped = Complex64::new(local.re.clamp(0.0, c), local.im.clamp(-s, s));
            rot.apply(clipped, false)
        }
    }
}

/// Nearest point of the alphabet itself.
///
/// At `u = 0` the CE/DCE answer is the point of smallest nonnegative phase;
/// one-bit takes `+` for a zero component.
pub fn project_alphabet(u: Complex64, spec: AlphabetSpec) -> Complex64 {
    match spec {
        AlphabetSpec::OneBit => {
            let sign = |x: f64| if x < 0.0 { -FRAC_1_SQRT_2 } else { FRAC_1_SQRT_2 };
            Complex64::new(sign(u.re), sign(u.im))
        }
        AlphabetSpec::ContinuousCe => {
            let r = u.norm();
            if r == 0.0 {
                Complex64::new(1.0, 0.0)
            } else {
                u / r
            }
        }
        AlphabetSpec::DiscreteCe(m) => {
            let width = 2.0 * PI / m as f64;
            let mut phase = principal_arg(u);
            if phase < 0.0 {
                phase += 2.0 * PI;
            }
            let k = ((phase / width).floor() as i64).rem_euclid(m as i64);
            dce_point(k, m)
        }
    }
}

/// Distance from `u` to the nearest alphabet point.
pub fn distance_to_alphabet(u: Complex64, spec: AlphabetSpec) -> f64 {
    (u - project_alphabet(u, spec)).norm()
}

/// Symbol detection `dec(Re y / dR) + j dec(Im y / dI)`.
pub fn detect_symbol(y: Complex64, d_re: f64, d_im: f64, qam: QamSpec) -> Result<Complex64> {
    if !(d_re > 0.0 && d_im > 0.0) {
        return Err(PrecodingError::InvalidArgument(format!(
            "decision spacings must be positive, got ({d_re}, {d_im})"
        )));
    }
    Ok(Complex64::new(
        qam.decide(y.re / d_re),
        qam.decide(y.im / d_im),
    ))
}

fn gray_encode(k: usize) -> usize {
    k ^ (k >> 1)
}

fn gray_decode(mut g: usize) -> usize {
    let mut k = g;
    while g > 1 {
        g >>= 1;
        k ^= g;
    }
    k
}

/// Maps bits to symbols, binary-reflected Gray per dimension, real bits first
/// (MSB first within each dimension).
pub fn bits_to_symbols(bits: &[bool], qam: QamSpec) -> Result<Vec<Complex64>> {
    let per_dim = qam.bits_per_dim()?;
    let per_symbol = 2 * per_dim;
    if !bits.len().is_multiple_of(per_symbol) {
        return Err(PrecodingError::InvalidArgument(format!(
            "bit count {} is not a multiple of {per_symbol}",
            bits.len()
        )));
    }
    let to_level = |chunk: &[bool]| {
        let g = chunk.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
        qam.level(gray_decode(g))
    };
    Ok(bits
        .chunks(per_symbol)
        .map(|c| Complex64::new(to_level(&c[..per_dim]), to_level(&c[per_dim..])))
        .collect())
}

/// Inverse of [`bits_to_symbols`].
pub fn symbols_to_bits(symbols: &[Complex64], qam: QamSpec) -> Result<Vec<bool>> {
    let per_dim = qam.bits_per_dim()?;
    let mut out = Vec::with_capacity(symbols.len() * 2 * per_dim);
    for s in symbols {
        for level in [s.re, s.im] {
            let g = gray_encode(qam.level_index(level));
            for bit in (0..per_dim).rev() {
                out.push((g >> bit) & 1 == 1);
            }
        }
    }
    Ok(out)
}

/// Gray-coded bits for a single level index, used for bit-error counting.
pub(crate) fn level_bits(qam: QamSpec, level: f64) -> usize {
    gray_encode(qam.level_index(level))
}

/// Number of bit positions in which the Gray labels of two symbols differ.
pub fn bit_errors(sent: Complex64, detected: Complex64, qam: QamSpec) -> u32 {
    (level_bits(qam, sent.re) ^ level_bits(qam, detected.re)).count_ones()
        + (level_bits(qam, sent.im) ^ level_bits(qam, detected.im)).count_ones()
}

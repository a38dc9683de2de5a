//! Symbol-error-optimal one-bit and constant-envelope multiuser precoding.
//!
//! A base station with `N` antennas serves `K` single-antenna users over a
//! block of `T` QAM symbols. Each antenna can only emit points of a small
//! alphabet: the four one-bit points `{±1 ± j}/√2`, any unit-modulus value
//! (constant envelope), or one of `M` phases (discrete constant envelope).
//! The transmit block and the users' decision spacings are chosen jointly to
//! maximize the worst decision margin.
//!
//! The crate is organized as
//!
//! * [`alphabet`]: QAM levels, detection, Gray mapping and the exact
//!   projections onto each alphabet and its convex hull,
//! * [`objective`]: margins, the log-sum-exp smoothed objective, its
//!   gradients and exact symbol error probabilities,
//! * [`solver`]: the negative-square-penalty relaxation, the GEMM iteration,
//!   exact MM, and a brute-force oracle for tiny instances,
//! * [`baselines`]: zero-forcing and quantized zero-forcing,
//! * [`harness`]: seeded Monte-Carlo bit-error-rate sweeps.
//!
//! ```
//! use nsp_precoding::alphabet::{project_hull, AlphabetSpec};
//! use num_complex::Complex64;
//!
//! let p = project_hull(Complex64::new(3.0, 4.0), AlphabetSpec::ContinuousCe);
//! assert!((p - Complex64::new(0.6, 0.8)).norm() < 1e-12);
//! ```

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod alphabet;
pub mod baselines;
pub mod error;
pub mod harness;
pub mod objective;
pub mod solver;

pub use error::{PrecodingError, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/alphabets.md")]
    mod alphabets {}
    #[doc = include_str!("../../../book/src/objective.md")]
    mod objective {}
    #[doc = include_str!("../../../book/src/penalty.md")]
    mod penalty {}
    #[doc = include_str!("../../../book/src/gemm.md")]
    mod gemm {}
    #[doc = include_str!("../../../book/src/baselines.md")]
    mod baselines {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
}

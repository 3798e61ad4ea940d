//! Expected zero density of Gaussian random cosine series on the unit square.
//!
//! The random field is `f(x, y) = Σ c_{k,l} cos(kπx) cos(lπy)` with i.i.d.
//! standard normal `c_{k,l}` over the lattice points of a Fourier-space domain.
//! [`kostlan`] computes the exact expected number of zeros along lines,
//! [`montecarlo`] counts them on sampled realizations, and [`ergodic`] checks
//! the averaging limits that drive the asymptotic density `1/(2πε)`.

pub mod domains;
pub mod error;
pub mod ergodic;
pub mod field;
pub mod kostlan;
pub mod montecarlo;
pub mod sum;

pub use error::{Error, Result};

/// Formats a float with 17 significant digits, enough to round-trip exactly.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

//! Realizations of the random cosine series and their evaluation.
//!
//! Coefficients come from a ChaCha8 stream keyed by `(seed, stream)`. Each
//! standard normal consumes two `u64` words through the cosine branch of the
//! Box–Muller transform:
//!
//! ```text
//! u1 = ((a >> 11) + 1) · 2⁻⁵³      ∈ (0, 1]
//! u2 = (b >> 11) · 2⁻⁵³            ∈ [0, 1)
//! z  = √(−2 ln u1) · cos(2π u2)
//! ```
//!
//! This mapping is part of the output format: changing it changes every
//! realization, and the golden test below pins it.

use std::f64::consts::PI;
use std::io::{self, Write};
use std::sync::Arc;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::domains::{DomainSpec, Lattice, WaveVector};
use crate::error::{Error, Result};
use crate::fmt_f64;

const TWO_POW_M53: f64 = 1.0 / (1u64 << 53) as f64;

/// `cos(nπx)`, evaluated the same way everywhere so that separable tables
/// and pointwise sums see bit-identical factors.
#[inline]
pub fn cospi(n: u32, x: f64) -> f64 {
    (n as f64 * PI * x).cos()
}

#[inline]
pub fn sinpi(n: u32, x: f64) -> f64 {
    (n as f64 * PI * x).sin()
}

/// ChaCha8 generator for `(seed, stream)`.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform on `[0, 1)` with 53 random bits.
#[inline]
pub fn uniform01(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * TWO_POW_M53
}

#[inline]
pub fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1 = ((rng.next_u64() >> 11) + 1) as f64 * TWO_POW_M53;
    let u2 = (rng.next_u64() >> 11) as f64 * TWO_POW_M53;
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

/// `n` standard normals from stream `stream` of `seed`.
pub fn normal_coefficients(n: usize, seed: u64, stream: u64) -> Vec<f64> {
    let mut rng = rng_for(seed, stream);
    (0..n).map(|_| standard_normal(&mut rng)).collect()
}

/// One draw of the random field.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldRealization {
    domain: DomainSpec,
    modes: Arc<[WaveVector]>,
    coeffs: Vec<f64>,
    seed: u64,
    stream: u64,
}

impl FieldRealization {
    /// Draws coefficients for an already enumerated mode list.
    pub fn sample(domain: &DomainSpec, modes: Arc<[WaveVector]>, seed: u64, stream: u64) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::EmptyModeSet);
        }
        let coeffs = normal_coefficients(modes.len(), seed, stream);
        Ok(Self {
            domain: domain.clone(),
            modes,
            coeffs,
            seed,
            stream,
        })
    }

    /// A realization with caller-chosen coefficients (no randomness).
    pub fn with_coefficients(domain: &DomainSpec, modes: Vec<WaveVector>, coeffs: Vec<f64>) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::EmptyModeSet);
        }
        if modes.len() != coeffs.len() {
            return Err(Error::invalid(format!(
                "{} modes but {} coefficients",
                modes.len(),
                coeffs.len()
            )));
        }
        Ok(Self {
            domain: domain.clone(),
            modes: modes.into(),
            coeffs,
            seed: 0,
            stream: 0,
        })
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn modes(&self) -> &[WaveVector] {
        &self.modes
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }
}

/// Realization `0` of `seed` over the lattice set of `domain`.
pub fn sample_field(domain: &DomainSpec, seed: u64) -> Result<FieldRealization> {
    sample_field_stream(domain, seed, 0)
}

pub fn sample_field_stream(domain: &DomainSpec, seed: u64, stream: u64) -> Result<FieldRealization> {
    let modes: Arc<[WaveVector]> = Lattice::new(domain).modes().collect();
    FieldRealization::sample(domain, modes, seed, stream)
}

/// `Σ c_{k,l} cos(kπx) cos(lπy)`.
pub fn evaluate(real: &FieldRealization, x: f64, y: f64) -> f64 {
    real.modes
        .iter()
        .zip(&real.coeffs)
        .map(|(m, c)| c * cospi(m.k, x) * cospi(m.l, y))
        .sum()
}

/// Field values on the `n × n` grid `(i/(n−1), j/(n−1))`.
///
/// `values[i * n + j] = f(x_i, y_j)`: the first index runs along x.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSample {
    n: usize,
    values: Vec<f64>,
}

impl GridSample {
    pub fn resolution(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    /// Share of grid points with `f ≥ 0`.
    pub fn positive_fraction(&self) -> f64 {
        let pos = self.values.iter().filter(|v| **v >= 0.0).count();
        pos as f64 / self.values.len() as f64
    }

    /// CSV with header `i,j,value`, one row per grid point.
    pub fn write_csv<W: Write>(&self, mut w: W, comments: &[String]) -> io::Result<()> {
        for c in comments {
            writeln!(w, "# {c}")?;
        }
        writeln!(w, "i,j,value")?;
        for i in 0..self.n {
            for j in 0..self.n {
                writeln!(w, "{i},{j},{}", fmt_f64(self.get(i, j)))?;
            }
        }
        Ok(())
    }

    /// Binary PGM of the affinely rescaled field (min → 0, max → 255).
    pub fn write_pgm<W: Write>(&self, w: W, comments: &[String]) -> io::Result<()> {
        let (lo, hi) = self
            .values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let scale = if hi > lo { 255.0 / (hi - lo) } else { 0.0 };
        self.write_pgm_with(w, comments, |v| ((v - lo) * scale).round() as u8)
    }

    /// Binary PGM of the sign grid: `f ≥ 0` → 255, `f < 0` → 0.
    pub fn write_sign_pgm<W: Write>(&self, w: W, comments: &[String]) -> io::Result<()> {
        self.write_pgm_with(w, comments, |v| if v >= 0.0 { 255 } else { 0 })
    }

    // Image row r shows y index n−1−r so that y points up.
    fn write_pgm_with<W: Write>(&self, mut w: W, comments: &[String], pixel: impl Fn(f64) -> u8) -> io::Result<()> {
        let n = self.n;
        write!(w, "P5\n")?;
        for c in comments {
            writeln!(w, "# {c}")?;
        }
        write!(w, "{n} {n}\n255\n")?;
        let mut row = vec![0u8; n];
        for r in 0..n {
            let j = n - 1 - r;
            for (i, px) in row.iter_mut().enumerate() {
                *px = pixel(self.get(i, j));
            }
            w.write_all(&row)?;
        }
        Ok(())
    }
}

/// Evaluates `real` on the `n × n` grid using separable cosine tables.
pub fn evaluate_grid(real: &FieldRealization, n: usize) -> Result<GridSample> {
    if n < 2 {
        return Err(Error::invalid(format!("grid resolution must be at least 2, got {n}")));
    }
    let total = n.checked_mul(n).ok_or(Error::Resource { n })?;
    let mut values: Vec<f64> = Vec::new();
    values.try_reserve_exact(total).map_err(|_| Error::Resource { n })?;

    let denom = (n - 1) as f64;
    let coords: Vec<f64> = (0..n).map(|i| i as f64 / denom).collect();

    // g[r][j] = Σ_l c_{k_r,l} cos(lπ y_j), one row per distinct k.
    let mut ks: Vec<u32> = Vec::new();
    let mut g: Vec<f64> = Vec::new();
    let mut start = 0;
    let modes = real.modes();
    while start < modes.len() {
        let k = modes[start].k;
        let mut end = start;
        while end < modes.len() && modes[end].k == k {
            end += 1;
        }
        let base = g.len();
        g.resize(base + n, 0.0);
        let row = &mut g[base..];
        for (m, c) in modes[start..end].iter().zip(&real.coeffs[start..end]) {
            for (gj, &y) in row.iter_mut().zip(&coords) {
                *gj += c * cospi(m.l, y);
            }
        }
        ks.push(k);
        start = end;
    }

    values.resize(total, 0.0);
    values.par_chunks_mut(n).enumerate().for_each(|(i, out)| {
        let x = coords[i];
        for (r, &k) in ks.iter().enumerate() {
            let ck = cospi(k, x);
            for (o, gj) in out.iter_mut().zip(&g[r * n..(r + 1) * n]) {
                *o += ck * gj;
            }
        }
    });
    Ok(GridSample { n, values })
}

/// `q(z) = ½ Σ cos(kπz) cos(lπz)` over the lattice set.
pub fn covariance_q(domain: &DomainSpec, z: f64) -> Result<f64> {
    covariance_q2(domain, [z, z])
}

/// `½ Σ cos(kπz₁) cos(lπz₂)`, the two-variable form of `q`.
pub fn covariance_q2(domain: &DomainSpec, z: [f64; 2]) -> Result<f64> {
    let lattice = Lattice::new(domain);
    if lattice.is_empty() {
        return Err(Error::EmptyModeSet);
    }
    Ok(0.5 * lattice.modes().map(|m| cospi(m.k, z[0]) * cospi(m.l, z[1])).sum::<f64>())
}

/// `q(p + p') + q(p − p')` with the two-variable `q`.
///
/// This is the exact covariance `E f(p) f(p')` whenever both points lie on
/// the edge `y = 0` (or `y = 1`); off those edges it omits the mixed terms
/// that [`covariance`] keeps.
pub fn covariance_kernel(domain: &DomainSpec, p: [f64; 2], pp: [f64; 2]) -> Result<f64> {
    let plus = covariance_q2(domain, [p[0] + pp[0], p[1] + pp[1]])?;
    let minus = covariance_q2(domain, [p[0] - pp[0], p[1] - pp[1]])?;
    Ok(plus + minus)
}

/// Exact two-point covariance `Σ cos(kπx₁)cos(kπy₁) cos(lπx₂)cos(lπy₂)`.
pub fn covariance(domain: &DomainSpec, p: [f64; 2], pp: [f64; 2]) -> Result<f64> {
    let lattice = Lattice::new(domain);
    if lattice.is_empty() {
        return Err(Error::EmptyModeSet);
    }
    Ok(lattice
        .modes()
        .map(|m| cospi(m.k, p[0]) * cospi(m.k, pp[0]) * cospi(m.l, p[1]) * cospi(m.l, pp[1]))
        .sum())
}

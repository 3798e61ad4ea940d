//! Birkhoff and weighted averages of `cos²` along circle rotations.
//!
//! These are the averaging limits behind the asymptotic zero density: along
//! the orbit `k ↦ kx` the average of `cos²(πkx)` tends to `1/2`, also with
//! polynomial weights and over scaled two-dimensional domains.

use std::f64::consts::PI;
use std::io::{self, Write};

use crate::domains::{DomainSpec, Lattice, Shape, WeightSpec};
use crate::error::{Error, Result};
use crate::field::{cospi, sinpi};
use crate::fmt_f64;
use crate::sum::NeumaierSum;

/// `(1/N) Σ_{k=1}^{N} cos²(kπx)`.
pub fn birkhoff_cos2_average(x: f64, n: u64) -> Result<f64> {
    weighted_cos2_average(x, n, 0)
}

/// Value of [`birkhoff_cos2_average`] at `x = 1/n` over full periods.
///
/// Over each period `Σ_{k=1}^{n} cos(2πk/n) = 0`, so the average is exactly
/// `1/2` for every `n ≥ 2` and every multiple `N` of `n`.
pub fn rational_exact(n: u64, total: u64) -> Result<f64> {
    if n < 2 {
        return Err(Error::invalid(format!("period must be at least 2, got {n}")));
    }
    if total == 0 || total % n != 0 {
        return Err(Error::NotFullPeriod { n, total });
    }
    Ok(0.5)
}

/// `Σ_{k≤N} k^p cos²(kπx) / Σ_{k≤N} k^p` for `p ∈ {0, 1, 2}`.
pub fn weighted_cos2_average(x: f64, n: u64, p: u8) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("N must be at least 1"));
    }
    if p > 2 {
        return Err(Error::UnsupportedWeight { p, q: 0 });
    }
    let mut num = NeumaierSum::new();
    let mut den = NeumaierSum::new();
    for k in 1..=n {
        let w = (k as f64).powi(p as i32);
        let c = (k as f64 * PI * x).cos();
        num.add(w * c * c);
        den.add(w);
    }
    Ok(num.value() / den.value())
}

/// Periodic integrands `g(kx₁, lx₂)` of the two-dimensional averaging condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrand {
    /// `cos²(πu) cos²(πv)`
    CosCos,
    /// `sin²(πu) cos²(πv)`
    SinCos,
    /// `cos(πu) sin(πu) cos²(πv)`
    CosSinCos,
}

impl Integrand {
    /// `∫_{[0,1]²} g`.
    pub fn target(self) -> f64 {
        match self {
            Integrand::CosCos | Integrand::SinCos => 0.25,
            Integrand::CosSinCos => 0.0,
        }
    }

    #[inline]
    fn eval(self, k: u32, l: u32, x0: [f64; 2]) -> f64 {
        let cl = cospi(l, x0[1]);
        let c2 = cl * cl;
        match self {
            Integrand::CosCos => cospi(k, x0[0]).powi(2) * c2,
            Integrand::SinCos => sinpi(k, x0[0]).powi(2) * c2,
            Integrand::CosSinCos => cospi(k, x0[0]) * sinpi(k, x0[0]) * c2,
        }
    }
}

/// What the first column of an [`AveragingReport`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parameter {
    /// Cutoffs `N`, strictly increasing.
    Cutoff,
    /// Scales `ε`, strictly decreasing.
    Epsilon,
}

/// Partial averages along a sequence of cutoffs or scales.
#[derive(Debug, Clone, PartialEq)]
pub struct AveragingReport {
    pub probe: [f64; 2],
    pub parameter: Parameter,
    pub params: Vec<f64>,
    pub values: Vec<f64>,
    pub target: f64,
    pub tolerance: f64,
    pub converged: bool,
}

impl AveragingReport {
    fn new(probe: [f64; 2], parameter: Parameter, params: Vec<f64>, values: Vec<f64>, target: f64, tolerance: f64) -> Self {
        let converged = values.last().is_some_and(|v| (v - target).abs() < tolerance);
        Self {
            probe,
            parameter,
            params,
            values,
            target,
            tolerance,
            converged,
        }
    }

    pub fn errors(&self) -> Vec<f64> {
        self.values.iter().map(|v| (v - self.target).abs()).collect()
    }

    /// CSV with header `N_or_eps,value,target,abs_error`.
    pub fn write_csv<W: Write>(&self, mut w: W, comments: &[String]) -> io::Result<()> {
        for c in comments {
            writeln!(w, "# {c}")?;
        }
        writeln!(w, "# converged = {}", self.converged)?;
        writeln!(w, "N_or_eps,value,target,abs_error")?;
        for (p, v) in self.params.iter().zip(&self.values) {
            writeln!(
                w,
                "{},{},{},{}",
                fmt_f64(*p),
                fmt_f64(*v),
                fmt_f64(self.target),
                fmt_f64((v - self.target).abs())
            )?;
        }
        Ok(())
    }
}

/// Weighted Birkhoff averages at cutoffs `ns` (strictly increasing), target `1/2`.
pub fn birkhoff_report(x: f64, ns: &[u64], p: u8, tolerance: f64) -> Result<AveragingReport> {
    if ns.is_empty() || ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("cutoffs must be non-empty and strictly increasing"));
    }
    let values = ns.iter().map(|&n| weighted_cos2_average(x, n, p)).collect::<Result<Vec<_>>>()?;
    let params = ns.iter().map(|&n| n as f64).collect();
    Ok(AveragingReport::new([x, 0.0], Parameter::Cutoff, params, values, 0.5, tolerance))
}

/// `Σ a_{k,l} g(kx₀₁, lx₀₂) / Σ a_{k,l}` over one lattice set.
pub fn weighted_lattice_average(lattice: &Lattice, weight: WeightSpec, x0: [f64; 2], integrand: Integrand) -> Result<f64> {
    if lattice.is_empty() {
        return Err(Error::EmptyModeSet);
    }
    let mut num = NeumaierSum::new();
    let mut den = NeumaierSum::new();
    for m in lattice.modes() {
        let a = weight.value(m) as f64;
        num.add(a * integrand.eval(m.k, m.l, x0));
        den.add(a);
    }
    Ok(num.value() / den.value())
}

/// The weighted averaging condition over `shape` scaled by each of `epsilons`.
pub fn weighted_condition_check(
    shape: &Shape,
    epsilons: &[f64],
    weight: WeightSpec,
    x0: [f64; 2],
    integrand: Integrand,
    tolerance: f64,
) -> Result<AveragingReport> {
    if epsilons.is_empty() || epsilons.windows(2).any(|w| w[0] <= w[1]) {
        return Err(Error::invalid("scales must be non-empty and strictly decreasing"));
    }
    let values = epsilons
        .iter()
        .map(|&eps| {
            let d = DomainSpec::new(shape.clone(), eps)?;
            weighted_lattice_average(&Lattice::new(&d), weight, x0, integrand)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AveragingReport::new(
        x0,
        Parameter::Epsilon,
        epsilons.to_vec(),
        values,
        integrand.target(),
        tolerance,
    ))
}

/// Inner cover of the quarter-ring by `columns` vertical strips.
///
/// Returns the union and its relative area defect `1 − λ(cover)/λ(ring)`.
pub fn ring_strip_cover(gamma: f64, columns: usize) -> Result<(Shape, f64)> {
    let ring = Shape::ring(gamma)?;
    let (ap, am) = crate::domains::ring_radii(gamma);
    let h = ap / columns as f64;
    let mut parts = Vec::new();
    for i in 0..columns {
        let (x0, x1) = (i as f64 * h, (i + 1) as f64 * h);
        let lo = if x0 < am { (am * am - x0 * x0).sqrt() } else { 0.0 };
        let top = ap * ap - x1 * x1;
        if top <= 0.0 {
            continue;
        }
        let hi = top.sqrt();
        if lo < hi {
            parts.push(Shape::Rect {
                xi_lo: x0,
                xi_hi: x1,
                eta_lo: lo,
                eta_hi: hi,
            });
        }
    }
    let cover = Shape::union(parts)?;
    let area = |s: &Shape| crate::domains::analytic_measure(s, WeightSpec::UNIT);
    let defect = 1.0 - area(&cover) / area(&ring);
    Ok((cover, defect))
}

//! Expected zero density along lines (Edelman–Kostlan).
//!
//! Along a line parameterised by `x`, the field is `Σ c_m a_m(x)` and its
//! expected zero density is `δ(x) = √W / π` with
//!
//! ```text
//! S1 = Σ a_m²,  S2 = Σ a_m a_m',  S3 = Σ a_m'²,  W = S3/S1 − (S2/S1)².
//! ```
//!
//! On a horizontal line `y = t`, `a_m = cos(kπx) cos(lπt)`. On a sloped line
//! `y = μx + τ` the derivative picks up `lπμ sin(lπy) cos(kπx)`. Vertical
//! lines are horizontal lines of the mirrored domain.

use std::f64::consts::PI;
use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use rayon::prelude::*;

use crate::domains::{DomainSpec, Lattice};
use crate::error::{Error, Result};
use crate::field::{cospi, sinpi};
use crate::fmt_f64;
use crate::sum::compensated_sum;

/// Default number of midpoint panels for zero counts.
pub const DEFAULT_PANELS: usize = 2000;

/// A line through the unit square.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LineSpec {
    /// `{(x, t) : x ∈ [0, 1]}`.
    Horizontal { t: f64 },
    /// `{(s, y) : y ∈ [0, 1]}`.
    Vertical { s: f64 },
    /// `{(x, μx + τ)}` clipped to the square.
    Sloped { mu: f64, tau: f64 },
}

impl LineSpec {
    pub fn horizontal(t: f64) -> Result<Self> {
        check_offset(t)?;
        Ok(LineSpec::Horizontal { t })
    }

    pub fn vertical(s: f64) -> Result<Self> {
        check_offset(s)?;
        Ok(LineSpec::Vertical { s })
    }

    pub fn sloped(mu: f64, tau: f64) -> Result<Self> {
        if !(mu > 0.0 && mu <= 1.0) {
            return Err(Error::invalid(format!("slope must lie in (0, 1], got {mu}")));
        }
        if !tau.is_finite() {
            return Err(Error::invalid("intercept must be finite"));
        }
        let line = LineSpec::Sloped { mu, tau };
        let (lo, hi) = line.parameter_interval();
        if !(lo < hi) {
            return Err(Error::invalid(format!("line y = {mu}x + {tau} misses the unit square")));
        }
        Ok(line)
    }

    /// Range of the line parameter inside `[0, 1]²`.
    pub fn parameter_interval(&self) -> (f64, f64) {
        match *self {
            LineSpec::Horizontal { .. } | LineSpec::Vertical { .. } => (0.0, 1.0),
            LineSpec::Sloped { mu, tau } => ((-tau / mu).max(0.0), ((1.0 - tau) / mu).min(1.0)),
        }
    }

    /// Euclidean length of the clipped segment.
    pub fn segment_length(&self) -> f64 {
        match *self {
            LineSpec::Horizontal { .. } | LineSpec::Vertical { .. } => 1.0,
            LineSpec::Sloped { mu, .. } => {
                let (lo, hi) = self.parameter_interval();
                (hi - lo) * (1.0 + mu * mu).sqrt()
            }
        }
    }

    /// Point of the square at line parameter `x`.
    pub fn point(&self, x: f64) -> (f64, f64) {
        match *self {
            LineSpec::Horizontal { t } => (x, t),
            LineSpec::Vertical { s } => (s, x),
            LineSpec::Sloped { mu, tau } => (x, mu * x + tau),
        }
    }
}

fn check_offset(v: f64) -> Result<()> {
    if !(v > 0.0 && v < 1.0) {
        return Err(Error::invalid(format!("line offset must lie in (0, 1), got {v}")));
    }
    Ok(())
}

impl fmt::Display for LineSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            LineSpec::Horizontal { t } => write!(f, "h:{t}"),
            LineSpec::Vertical { s } => write!(f, "v:{s}"),
            LineSpec::Sloped { mu, tau } => write!(f, "s:{mu},{tau}"),
        }
    }
}

/// Parses `h:T`, `v:S` or `s:MU,TAU`.
impl FromStr for LineSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, args) = s
            .split_once(':')
            .ok_or_else(|| Error::invalid(format!("line `{s}` must look like h:T, v:S or s:MU,TAU")))?;
        let nums = args
            .split(',')
            .map(|a| {
                a.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::invalid(format!("bad number `{a}` in line `{s}`")))
            })
            .collect::<Result<Vec<f64>>>()?;
        match (kind.trim(), nums.as_slice()) {
            ("h", &[t]) => LineSpec::horizontal(t),
            ("v", &[v]) => LineSpec::vertical(v),
            ("s", &[mu, tau]) => LineSpec::sloped(mu, tau),
            _ => Err(Error::invalid(format!("cannot parse line `{s}`"))),
        }
    }
}

/// The three Kostlan sums at one point.
///
/// For sloped lines `s2` and `s3` hold the generalised sums.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KostlanSums {
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
}

impl KostlanSums {
    /// `S3/S1 − (S2/S1)²` before clamping.
    pub fn w_raw(&self) -> f64 {
        let r = self.s2 / self.s1;
        self.s3 / self.s1 - r * r
    }

    /// `W` with negative rounding residue clamped to zero.
    pub fn w(&self) -> f64 {
        self.w_raw().max(0.0)
    }

    pub fn density(&self) -> f64 {
        self.w().sqrt() / PI
    }

    pub fn is_clamped(&self) -> bool {
        self.w_raw() < 0.0
    }
}

/// `Σ_{n=n_lo}^{n_hi} cos²(nθ)` in constant time.
///
/// Uses `Σ cos(2nθ) = cos((a+b)θ) sin(Nθ)/sin θ` after reducing θ modulo π,
/// with a series for `sin(Nδ)/sin δ` when `δ` is tiny.
pub fn accelerated_cos2_range_sum(n_lo: u64, n_hi: u64, theta: f64) -> f64 {
    debug_assert!(n_lo <= n_hi);
    let delta = theta - PI * (theta / PI).round();
    cos2_range_reduced(n_lo, n_hi, delta)
}

/// Same sum for `θ = πt`, reducing `t` modulo 1 before scaling by π.
fn cos2_range_sum_pi(n_lo: u32, n_hi: u32, t: f64) -> f64 {
    cos2_range_reduced(n_lo as u64, n_hi as u64, PI * (t - t.round()))
}

fn cos2_range_reduced(n_lo: u64, n_hi: u64, delta: f64) -> f64 {
    let n = (n_hi - n_lo + 1) as f64;
    let ratio = if delta == 0.0 {
        n
    } else if delta.sin().abs() < 1e-8 && (n * delta).abs() < 1e-4 {
        n * (1.0 - (n * n - 1.0) * delta * delta / 6.0)
    } else {
        (n * delta).sin() / delta.sin()
    };
    0.5 * n + 0.5 * ((n_lo + n_hi) as f64 * delta).cos() * ratio
}

/// Sums for one domain, reusable across many evaluation points.
#[derive(Debug, Clone)]
pub struct Kostlan {
    lattice: Lattice,
    transposed: Lattice,
}

impl Kostlan {
    pub fn new(domain: &DomainSpec) -> Result<Self> {
        let lattice = Lattice::new(domain);
        if lattice.is_empty() {
            return Err(Error::EmptyModeSet);
        }
        let transposed = lattice.transposed();
        Ok(Self { lattice, transposed })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn epsilon(&self) -> f64 {
        self.lattice.epsilon()
    }

    /// Horizontal-line sums mode by mode, in lattice order.
    pub fn sums_horizontal_naive(&self, x: f64, t: f64) -> KostlanSums {
        sloped_sums(&self.lattice, x, t, 0.0)
    }

    /// Horizontal-line sums with the `l`-range collapsed per row.
    pub fn sums_horizontal(&self, x: f64, t: f64) -> KostlanSums {
        horizontal_accelerated(&self.lattice, x, t)
    }

    /// Sums along the vertical line through `s`, at height `y`.
    pub fn sums_vertical(&self, s: f64, y: f64) -> KostlanSums {
        horizontal_accelerated(&self.transposed, y, s)
    }

    /// Sums along `y = μx + τ` at parameter `x`.
    pub fn sums_sloped(&self, x: f64, mu: f64, tau: f64) -> Result<KostlanSums> {
        let t = mu * x + tau;
        if !((0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&t)) {
            return Err(Error::OutsideSquare { x, y: t });
        }
        Ok(sloped_sums(&self.lattice, x, t, mu))
    }

    /// Sums along `line` at parameter `x`.
    pub fn sums_on_line(&self, line: &LineSpec, x: f64) -> Result<KostlanSums> {
        match *line {
            LineSpec::Horizontal { t } => Ok(self.sums_horizontal(x, t)),
            LineSpec::Vertical { s } => Ok(self.sums_vertical(s, x)),
            LineSpec::Sloped { mu, tau } => self.sums_sloped(x, mu, tau),
        }
    }

    fn checked_density(&self, sums: KostlanSums, x: f64) -> Result<f64> {
        if !(sums.s1 > 1e-20 * self.lattice.len() as f64) {
            return Err(Error::DegeneratePoint { x });
        }
        Ok(sums.density())
    }

    /// `δ(x)` along `line`; sloped lines report density per unit `x`.
    pub fn density(&self, line: &LineSpec, x: f64) -> Result<f64> {
        let sums = self.sums_on_line(line, x)?;
        self.checked_density(sums, x)
    }

    /// `∫ δ` over the clipped parameter interval by the composite midpoint rule.
    pub fn expected_zero_count(&self, line: &LineSpec, panels: usize) -> Result<f64> {
        if panels < 16 {
            return Err(Error::invalid(format!("need at least 16 panels, got {panels}")));
        }
        let (lo, hi) = line.parameter_interval();
        let h = (hi - lo) / panels as f64;
        let values = (0..panels)
            .into_par_iter()
            .map(|i| self.density(line, lo + (i as f64 + 0.5) * h))
            .collect::<Result<Vec<f64>>>()?;
        Ok(compensated_sum(values) * h)
    }

    /// Segment length over expected zero count.
    pub fn pattern_size(&self, line: &LineSpec, panels: usize) -> Result<f64> {
        let n = self.expected_zero_count(line, panels)?;
        if !(n > 0.0) {
            return Err(Error::NoZeros);
        }
        Ok(line.segment_length() / n)
    }

    /// Densities at `xs`; points where `S1` vanishes come back as errors in place.
    pub fn profile(&self, line: &LineSpec, xs: &[f64]) -> Vec<Result<KostlanSums>> {
        xs.par_iter()
            .map(|&x| {
                let sums = self.sums_on_line(line, x)?;
                self.checked_density(sums, x)?;
                Ok(sums)
            })
            .collect()
    }
}

fn horizontal_accelerated(lattice: &Lattice, x: f64, t: f64) -> KostlanSums {
    let (mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0);
    for row in lattice.rows() {
        let c: f64 = row.spans.iter().map(|&(lo, hi)| cos2_range_sum_pi(lo, hi, t)).sum();
        let kp = row.k as f64 * PI;
        let (ck, sk) = (cospi(row.k, x), sinpi(row.k, x));
        s1 += ck * ck * c;
        s2 += kp * ck * sk * c;
        s3 += kp * kp * sk * sk * c;
    }
    KostlanSums { s1, s2, s3 }
}

// Mode by mode, so μ = 0 gives the plain horizontal sums bit for bit.
fn sloped_sums(lattice: &Lattice, x: f64, t: f64, mu: f64) -> KostlanSums {
    let (mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0);
    for row in lattice.rows() {
        let kp = row.k as f64 * PI;
        let (ck, sk) = (cospi(row.k, x), sinpi(row.k, x));
        for &(lo, hi) in &row.spans {
            for l in lo..=hi {
                let (cl, sl) = (cospi(l, t), sinpi(l, t));
                let a = ck * cl;
                let b = kp * sk * cl + l as f64 * PI * mu * sl * ck;
                s1 += a * a;
                s2 += a * b;
                s3 += b * b;
            }
        }
    }
    KostlanSums { s1, s2, s3 }
}

pub fn sums_horizontal(domain: &DomainSpec, x: f64, t: f64) -> Result<KostlanSums> {
    Ok(Kostlan::new(domain)?.sums_horizontal(x, t))
}

pub fn sums_horizontal_naive(domain: &DomainSpec, x: f64, t: f64) -> Result<KostlanSums> {
    Ok(Kostlan::new(domain)?.sums_horizontal_naive(x, t))
}

pub fn sums_sloped(domain: &DomainSpec, x: f64, mu: f64, tau: f64) -> Result<KostlanSums> {
    Kostlan::new(domain)?.sums_sloped(x, mu, tau)
}

pub fn density_horizontal(domain: &DomainSpec, x: f64, t: f64) -> Result<f64> {
    Kostlan::new(domain)?.density(&LineSpec::Horizontal { t }, x)
}

pub fn density_vertical(domain: &DomainSpec, s: f64, y: f64) -> Result<f64> {
    Kostlan::new(domain)?.density(&LineSpec::Vertical { s }, y)
}

/// Density per unit `x` along `y = μx + τ`.
pub fn density_sloped(domain: &DomainSpec, x: f64, mu: f64, tau: f64) -> Result<f64> {
    Kostlan::new(domain)?.density(&LineSpec::Sloped { mu, tau }, x)
}

pub fn expected_zero_count(domain: &DomainSpec, line: &LineSpec, panels: usize) -> Result<f64> {
    Kostlan::new(domain)?.expected_zero_count(line, panels)
}

pub fn pattern_size(domain: &DomainSpec, line: &LineSpec, panels: usize) -> Result<f64> {
    Kostlan::new(domain)?.pattern_size(line, panels)
}

/// Midpoints `(i + ½)/n` of `n` equal cells of the line's parameter interval.
pub fn profile_points(line: &LineSpec, n: usize) -> Vec<f64> {
    let (lo, hi) = line.parameter_interval();
    let h = (hi - lo) / n as f64;
    (0..n).map(|i| lo + (i as f64 + 0.5) * h).collect()
}

/// Sampled `δ(x)` along one line.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityProfile {
    pub line: LineSpec,
    pub epsilon: f64,
    pub xs: Vec<f64>,
    pub deltas: Vec<f64>,
    /// Points where `S1` vanished; they are absent from `xs`.
    pub degenerate: Vec<f64>,
    /// Points where `W` came out negative from rounding and was set to zero.
    pub clamped: usize,
}

impl DensityProfile {
    pub fn compute(kostlan: &Kostlan, line: &LineSpec, points: &[f64]) -> Self {
        let mut xs = Vec::with_capacity(points.len());
        let mut deltas = Vec::with_capacity(points.len());
        let mut degenerate = Vec::new();
        let mut clamped = 0;
        for (&x, r) in points.iter().zip(kostlan.profile(line, points)) {
            match r {
                Ok(s) => {
                    clamped += s.is_clamped() as usize;
                    xs.push(x);
                    deltas.push(s.density());
                }
                Err(_) => degenerate.push(x),
            }
        }
        Self {
            line: *line,
            epsilon: kostlan.epsilon(),
            xs,
            deltas,
            degenerate,
            clamped,
        }
    }

    /// CSV with header `x,delta,eps_delta`.
    pub fn write_csv<W: Write>(&self, mut w: W, comments: &[String]) -> io::Result<()> {
        for c in comments {
            writeln!(w, "# {c}")?;
        }
        for x in &self.degenerate {
            writeln!(w, "# degenerate point x = {}", fmt_f64(*x))?;
        }
        writeln!(w, "x,delta,eps_delta")?;
        for (x, d) in self.xs.iter().zip(&self.deltas) {
            writeln!(w, "{},{},{}", fmt_f64(*x), fmt_f64(*d), fmt_f64(self.epsilon * d))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::{Shape, WaveVector};
    use proptest::prelude::*;

    fn ring(gamma: f64, eps: f64) -> DomainSpec {
        DomainSpec::ring(gamma, eps).unwrap()
    }

    fn oracle(d: &DomainSpec, x: f64, t: f64, mu: f64) -> KostlanSums {
        let modes: Vec<WaveVector> = Lattice::new(d).modes().collect();
        let term = |m: &WaveVector| {
            let (k, l) = (m.k as f64, m.l as f64);
            let a = (k * PI * x).cos() * (l * PI * t).cos();
            let b = k * PI * (k * PI * x).sin() * (l * PI * t).cos() + l * PI * mu * (l * PI * t).sin() * (k * PI * x).cos();
            (a, b)
        };
        KostlanSums {
            s1: compensated_sum(modes.iter().map(|m| term(m).0.powi(2))),
            s2: compensated_sum(modes.iter().map(|m| term(m).0 * term(m).1)),
            s3: compensated_sum(modes.iter().map(|m| term(m).1.powi(2))),
        }
    }

    fn close(a: f64, b: f64, rel: f64, scale: f64) -> bool {
        (a - b).abs() <= rel * scale.max(b.abs())
    }

    #[test]
    fn cos2_range_examples() {
        assert_eq!(accelerated_cos2_range_sum(3, 17, PI), 15.0);
        let naive: f64 = (1..=1000).map(|n| (n as f64 * PI / 5.0).cos().powi(2)).sum();
        let fast = accelerated_cos2_range_sum(1, 1000, PI / 5.0);
        assert!((fast - naive).abs() < 1e-9);
        assert!((fast - 500.0).abs() < 1e-9);
        assert_eq!(accelerated_cos2_range_sum(5, 5, 0.0), 1.0);
        let tiny = accelerated_cos2_range_sum(1, 100, 1e-12);
        assert!((tiny - 100.0).abs() < 1e-12);
    }

    #[test]
    fn cos2_range_matches_naive_long_ranges() {
        let mut rng = crate::field::rng_for(3, 0);
        for _ in 0..100 {
            let theta = crate::field::uniform01(&mut rng) * 7.0 - 3.5;
            let lo = (crate::field::uniform01(&mut rng) * 1000.0) as u64;
            let hi = lo + 10_000;
            let naive = compensated_sum((lo..=hi).map(|n| (n as f64 * theta).cos().powi(2)));
            let fast = accelerated_cos2_range_sum(lo, hi, theta);
            assert!((fast - naive).abs() <= 1e-10 * naive, "{theta} {lo}: {fast} vs {naive}");
        }
    }

    #[test]
    fn singleton_domain_has_zero_w() {
        let d = DomainSpec::new(Shape::rect(0.25, 0.35, 0.15, 0.25).unwrap(), 0.1).unwrap();
        let k = Kostlan::new(&d).unwrap();
        assert_eq!(k.lattice().len(), 1);
        for &(x, t) in &[(0.1, 0.2), (0.37, 0.81)] {
            let s = k.sums_horizontal(x, t);
            assert!(close(s.s3 / s.s1, (3.0 * PI).powi(2) * (3.0 * PI * x).tan().powi(2), 1e-12, 0.0));
            assert!(close(s.s2 / s.s1, 3.0 * PI * (3.0 * PI * x).tan(), 1e-12, 0.0));
            assert!(s.w_raw().abs() < 1e-9 * s.s3 / s.s1);
            let sl = k.sums_sloped(x, 0.7, 0.1).unwrap();
            assert!((sl.s3 * sl.s1 - sl.s2 * sl.s2).abs() < 1e-12 * sl.s3 * sl.s1);
        }
    }

    #[test]
    fn boundary_density_vanishes() {
        let k = Kostlan::new(&ring(0.7, 0.02)).unwrap();
        let s = k.sums_horizontal(0.0, 0.3);
        assert_eq!((s.s2, s.s3), (0.0, 0.0));
        assert_eq!(k.density(&LineSpec::Horizontal { t: 0.3 }, 0.0).unwrap(), 0.0);
        assert!(k.density(&LineSpec::Horizontal { t: 0.3 }, 1.0).unwrap() < 1e-6);
    }

    #[test]
    fn probe_matches_oracle() {
        let d = ring(0.8, 0.05);
        let (x, t) = (1.0 / 2f64.sqrt(), 1.0 / 3f64.sqrt());
        let want = oracle(&d, x, t, 0.0);
        for got in [sums_horizontal(&d, x, t).unwrap(), sums_horizontal_naive(&d, x, t).unwrap()] {
            assert!(close(got.s1, want.s1, 1e-10, 0.0));
            assert!(close(got.s2, want.s2, 1e-10, want.s3.sqrt() * want.s1.sqrt()));
            assert!(close(got.s3, want.s3, 1e-10, 0.0));
        }
        let d = ring(0.7, 0.05);
        let got = sums_sloped(&d, 0.3, 1.0, 0.0).unwrap();
        let want = oracle(&d, 0.3, 0.3, 1.0);
        assert!(close(got.s1, want.s1, 1e-10, 0.0));
        assert!(close(got.s2, want.s2, 1e-10, want.s3.sqrt() * want.s1.sqrt()));
        assert!(close(got.s3, want.s3, 1e-10, 0.0));
    }

    #[test]
    fn two_mode_hand_derivation() {
        let d = DomainSpec::new(Shape::rect(0.05, 0.25, 0.05, 0.15).unwrap(), 0.1).unwrap();
        let modes: Vec<_> = Lattice::new(&d).modes().collect();
        assert_eq!(modes, vec![WaveVector::new(1, 1), WaveVector::new(2, 1)]);
        let (x, t) = (0.3, 0.4);
        let c = (PI * t).cos().powi(2);
        let (c1, s1, c2, s2) = ((PI * x).cos(), (PI * x).sin(), (2.0 * PI * x).cos(), (2.0 * PI * x).sin());
        let a = (c1 * c1 + c2 * c2) * c;
        let b = (PI * c1 * s1 + 2.0 * PI * c2 * s2) * c;
        let e = (PI * PI * s1 * s1 + 4.0 * PI * PI * s2 * s2) * c;
        let w = e / a - (b / a).powi(2);
        let got = density_horizontal(&d, x, t).unwrap();
        assert!(close(got, w.sqrt() / PI, 1e-12, 0.0));
    }

    #[test]
    fn degenerate_point_is_an_error() {
        // only odd k: every cos(kπ/2) vanishes
        let d = DomainSpec::new(Shape::rect(0.05, 0.15, 0.05, 0.35).unwrap(), 0.1).unwrap();
        assert!(matches!(density_horizontal(&d, 0.5, 0.3), Err(Error::DegeneratePoint { .. })));
        assert_eq!(sums_horizontal(&ring(0.5, 0.5), 0.3, 0.3).unwrap_err(), Error::EmptyModeSet);
    }

    #[test]
    fn sloped_zero_slope_is_horizontal() {
        let d = ring(0.7, 0.02);
        let k = Kostlan::new(&d).unwrap();
        for &(x, t) in &[(0.1, 0.3), (0.77, 0.51), (0.5, 0.5)] {
            assert_eq!(k.sums_sloped(x, 0.0, t).unwrap(), k.sums_horizontal_naive(x, t));
            let a = k.density(&LineSpec::Horizontal { t }, x).unwrap();
            let b = k.sums_sloped(x, 0.0, t).unwrap().density();
            assert!(close(a, b, 1e-10, 0.0));
        }
        assert!(matches!(k.sums_sloped(0.9, 1.0, 0.5), Err(Error::OutsideSquare { .. })));
    }

    #[test]
    fn figure_point() {
        let eps = 10f64.powf(-2.5);
        let d = ring(0.8, eps);
        let v = eps * density_horizontal(&d, 0.5, 0.5).unwrap();
        assert!((v / (0.5 / PI) - 1.0).abs() < 0.02, "{v}");
    }

    #[test]
    fn sloped_density_carries_the_length_factor() {
        let eps = 10f64.powf(-2.5);
        let d = ring(0.8, eps);
        let v = eps * density_sloped(&d, 0.4, 1.0, 0.0).unwrap();
        assert!((v / (2f64.sqrt() / (2.0 * PI)) - 1.0).abs() < 0.02, "{v}");
    }

    #[test]
    fn q3_is_anisotropic() {
        let d = DomainSpec::new(Shape::q3(0.7).unwrap(), 0.01).unwrap();
        let k = Kostlan::new(&d).unwrap();
        let off = 1.0 / 2f64.sqrt();
        let h = k.expected_zero_count(&LineSpec::Horizontal { t: off }, DEFAULT_PANELS).unwrap();
        let v = k.expected_zero_count(&LineSpec::Vertical { s: off }, DEFAULT_PANELS).unwrap();
        let want = (5.374f64 / 1.891).sqrt();
        assert!((v / h / want - 1.0).abs() < 0.05, "{}", v / h);
    }

    #[test]
    fn ring_count_and_pattern_size() {
        let d = ring(0.7, 0.01);
        let line = LineSpec::horizontal(1.0 / 2f64.sqrt()).unwrap();
        let n = expected_zero_count(&d, &line, DEFAULT_PANELS).unwrap();
        assert!((n / 15.915 - 1.0).abs() < 0.03, "{n}");
        let p = pattern_size(&d, &line, DEFAULT_PANELS).unwrap();
        assert!((p / 0.062832 - 1.0).abs() < 0.03);
        let sl = LineSpec::sloped(1.0, 0.0).unwrap();
        let ps = pattern_size(&d, &sl, DEFAULT_PANELS).unwrap();
        assert!((ps / 0.062832 - 1.0).abs() < 0.03, "{ps}");
        assert!(expected_zero_count(&d, &line, 8).is_err());
    }

    #[test]
    fn table_counts_q2_q3() {
        let q2 = DomainSpec::new(Shape::q2(0.7).unwrap(), 0.01).unwrap();
        let line = LineSpec::horizontal(1.0 / 2f64.sqrt()).unwrap();
        let n = expected_zero_count(&q2, &line, DEFAULT_PANELS).unwrap();
        assert!((n / 21.887 - 1.0).abs() < 0.03, "{n}");
        assert!((pattern_size(&q2, &line, DEFAULT_PANELS).unwrap() / 0.045690 - 1.0).abs() < 0.03);
        let q3 = DomainSpec::new(Shape::q3(0.7).unwrap(), 0.01).unwrap();
        let n = expected_zero_count(&q3, &LineSpec::vertical(1.0 / 2f64.sqrt()).unwrap(), DEFAULT_PANELS).unwrap();
        assert!((n / 36.894 - 1.0).abs() < 0.03, "{n}");
    }

    #[test]
    fn line_parsing_and_clipping() {
        assert_eq!("h:0.5".parse::<LineSpec>().unwrap(), LineSpec::Horizontal { t: 0.5 });
        assert_eq!("v:0.25".parse::<LineSpec>().unwrap(), LineSpec::Vertical { s: 0.25 });
        let s: LineSpec = "s:0.5,0.75".parse().unwrap();
        assert_eq!(s.parameter_interval(), (0.0, 0.5));
        assert!((s.segment_length() - 0.5 * 1.25f64.sqrt()).abs() < 1e-15);
        let s = LineSpec::sloped(1.0, -0.25).unwrap();
        assert_eq!(s.parameter_interval(), (0.25, 1.0));
        assert!("s:0.5,2".parse::<LineSpec>().is_err());
        assert!("s:1.5,0".parse::<LineSpec>().is_err());
        assert!("h:1".parse::<LineSpec>().is_err());
        assert!("x:0.5".parse::<LineSpec>().is_err());
        for l in ["h:0.5", "v:0.125", "s:0.5,0.25"] {
            assert_eq!(l.parse::<LineSpec>().unwrap().to_string(), l);
        }
    }

    #[test]
    fn profile_reflection_symmetry() {
        let k = Kostlan::new(&ring(0.8, 0.01)).unwrap();
        let line = LineSpec::Horizontal { t: 0.5 };
        let xs = profile_points(&line, 64);
        let p = DensityProfile::compute(&k, &line, &xs);
        for i in 0..64 {
            assert!(close(p.deltas[i], p.deltas[63 - i], 1e-9, 0.0));
        }
    }

    #[test]
    fn profile_reports_degenerate_points() {
        let d = DomainSpec::new(Shape::rect(0.05, 0.15, 0.05, 0.35).unwrap(), 0.1).unwrap();
        let k = Kostlan::new(&d).unwrap();
        let line = LineSpec::Horizontal { t: 0.3 };
        let p = DensityProfile::compute(&k, &line, &[0.25, 0.5, 0.75]);
        assert_eq!(p.xs, vec![0.25, 0.75]);
        assert_eq!(p.degenerate, vec![0.5]);
        let mut buf = Vec::new();
        p.write_csv(&mut buf, &[]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("# degenerate point"));
        assert!(text.contains("x,delta,eps_delta"));
    }

    proptest! {
        #[test]
        fn accelerated_matches_naive(gamma in 0.05f64..0.95, eps in 0.004f64..0.05, x in 0.0f64..1.0, t in 0.0f64..1.0) {
            let k = Kostlan::new(&ring(gamma, eps)).unwrap();
            let a = k.sums_horizontal(x, t);
            let b = k.sums_horizontal_naive(x, t);
            let scale = (b.s1 * b.s3).sqrt();
            prop_assert!(close(a.s1, b.s1, 1e-10, 1e-12 * k.lattice().len() as f64));
            prop_assert!(close(a.s2, b.s2, 1e-10, scale));
            prop_assert!(close(a.s3, b.s3, 1e-10, 1e-12 * b.s3.max(1.0)));
        }

        #[test]
        fn cauchy_schwarz(gamma in 0.05f64..0.95, eps in 0.005f64..0.05, x in 0.0f64..1.0, t in 0.0f64..1.0, mu in 0.0f64..1.0) {
            let k = Kostlan::new(&ring(gamma, eps)).unwrap();
            for s in [k.sums_horizontal(x, t), k.sums_horizontal_naive(x, t), sloped_sums(k.lattice(), x, t, mu)] {
                prop_assert!(s.s1 >= 0.0 && s.s3 >= 0.0);
                prop_assert!(s.s3 * s.s1 - s.s2 * s.s2 >= -1e-9 * s.s3 * s.s1);
                prop_assert!(s.density().is_finite() && s.density() >= 0.0);
            }
        }

        #[test]
        fn orientation_symmetry(gamma in 0.05f64..0.95, eps in 0.005f64..0.05, x in 0.01f64..0.99, t in 0.01f64..0.99) {
            let k = Kostlan::new(&ring(gamma, eps)).unwrap();
            let h = k.sums_horizontal(x, t);
            let v = k.sums_vertical(t, x);
            prop_assert_eq!(h, v);
        }
    }
}

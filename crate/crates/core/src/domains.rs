//! Fourier-space domains and their lattice points.
//!
//! A [`Shape`] is an ε-independent open region of the positive quadrant in
//! (ξ, η) coordinates; ξ pairs with the x-wave-number `k` and η with `l`.
//! A [`DomainSpec`] attaches the scale ε, and its lattice set is
//! `{(k, l) ∈ ℕ² : (εk, εl) ∈ shape}` with strict inequalities throughout.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Outer and inner radius of the quarter-ring for threshold `gamma`.
///
/// Returns `(alpha_plus, alpha_minus)`.
pub fn ring_radii(gamma: f64) -> (f64, f64) {
    let root = (1.0 - gamma).sqrt();
    let denom = 2.0 * PI * PI;
    (((1.0 + root) / denom).sqrt(), ((1.0 - root) / denom).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct WaveVector {
    pub k: u32,
    pub l: u32,
}

impl WaveVector {
    pub fn new(k: u32, l: u32) -> Self {
        debug_assert!(k >= 1 && l >= 1);
        Self { k, l }
    }

    pub fn swapped(self) -> Self {
        Self { k: self.l, l: self.k }
    }
}

/// Monomial mode weight `a_{k,l} = k^p l^q` with `p, q ∈ {0, 1, 2}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct WeightSpec {
    p: u8,
    q: u8,
}

impl WeightSpec {
    pub const UNIT: WeightSpec = WeightSpec { p: 0, q: 0 };
    /// `k²`, the weight behind zero densities on horizontal lines.
    pub const K2: WeightSpec = WeightSpec { p: 2, q: 0 };
    /// `l²`, the weight behind zero densities on vertical lines.
    pub const L2: WeightSpec = WeightSpec { p: 0, q: 2 };

    pub fn new(p: u8, q: u8) -> Result<Self> {
        if p > 2 || q > 2 {
            return Err(Error::UnsupportedWeight { p, q });
        }
        Ok(Self { p, q })
    }

    pub fn p(self) -> u8 {
        self.p
    }

    pub fn q(self) -> u8 {
        self.q
    }

    pub fn all() -> impl Iterator<Item = WeightSpec> {
        (0..=2u8).flat_map(|p| (0..=2u8).map(move |q| WeightSpec { p, q }))
    }

    pub fn transposed(self) -> Self {
        Self { p: self.q, q: self.p }
    }

    #[inline]
    pub fn value(self, kv: WaveVector) -> u128 {
        (kv.k as u128).pow(self.p as u32) * (kv.l as u128).pow(self.q as u32)
    }
}

/// An open region in (ξ, η) space.
#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    /// `{α⊖ < |(ξ, η)| < α⊕}` in the open positive quadrant.
    QuarterRing { gamma: f64 },
    /// `(ξ_lo, ξ_hi) × (η_lo, η_hi)`.
    Rect {
        xi_lo: f64,
        xi_hi: f64,
        eta_lo: f64,
        eta_hi: f64,
    },
    /// Pairwise disjoint rings and rectangles.
    Union(Vec<Shape>),
}

impl Shape {
    pub fn ring(gamma: f64) -> Result<Self> {
        let s = Shape::QuarterRing { gamma };
        s.validate()?;
        Ok(s)
    }

    pub fn rect(xi_lo: f64, xi_hi: f64, eta_lo: f64, eta_hi: f64) -> Result<Self> {
        let s = Shape::Rect {
            xi_lo,
            xi_hi,
            eta_lo,
            eta_hi,
        };
        s.validate()?;
        Ok(s)
    }

    /// The square `(0, α⊕)²`.
    pub fn q1(gamma: f64) -> Result<Self> {
        Self::ring(gamma)?;
        let (ap, _) = ring_radii(gamma);
        Self::rect(0.0, ap, 0.0, ap)
    }

    /// The square `(α⊖, α⊕)²`.
    pub fn q2(gamma: f64) -> Result<Self> {
        Self::ring(gamma)?;
        let (ap, am) = ring_radii(gamma);
        Self::rect(am, ap, am, ap)
    }

    /// The rectangle `(α⊖, α⊕) × (2α⊖, α⊖ + α⊕)`.
    pub fn q3(gamma: f64) -> Result<Self> {
        Self::ring(gamma)?;
        let (ap, am) = ring_radii(gamma);
        Self::rect(am, ap, 2.0 * am, am + ap)
    }

    pub fn union(parts: Vec<Shape>) -> Result<Self> {
        let s = Shape::Union(parts);
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Shape::QuarterRing { gamma } => {
                if !(gamma > 0.0 && gamma < 1.0) {
                    return Err(Error::invalid(format!("ring threshold gamma must lie in (0, 1), got {gamma}")));
                }
                Ok(())
            }
            Shape::Rect {
                xi_lo,
                xi_hi,
                eta_lo,
                eta_hi,
            } => {
                let ok = xi_lo.is_finite()
                    && xi_hi.is_finite()
                    && eta_lo.is_finite()
                    && eta_hi.is_finite()
                    && 0.0 <= xi_lo
                    && xi_lo < xi_hi
                    && 0.0 <= eta_lo
                    && eta_lo < eta_hi;
                if !ok {
                    return Err(Error::invalid(format!(
                        "rectangle needs 0 <= lo < hi on both axes, got ({xi_lo}, {xi_hi}) x ({eta_lo}, {eta_hi})"
                    )));
                }
                Ok(())
            }
            Shape::Union(ref parts) => {
                if parts.is_empty() {
                    return Err(Error::invalid("union needs at least one part"));
                }
                for p in parts {
                    if matches!(p, Shape::Union(_)) {
                        return Err(Error::invalid("nested unions are not supported"));
                    }
                    p.validate()?;
                }
                for (i, a) in parts.iter().enumerate() {
                    for b in &parts[i + 1..] {
                        if overlaps(a, b) {
                            return Err(Error::invalid("union parts must be pairwise disjoint"));
                        }
                    }
                }
                Ok(())
            }
        }
    }

    /// Mirror image under `ξ ↔ η`.
    pub fn transposed(&self) -> Shape {
        match *self {
            Shape::QuarterRing { gamma } => Shape::QuarterRing { gamma },
            Shape::Rect {
                xi_lo,
                xi_hi,
                eta_lo,
                eta_hi,
            } => Shape::Rect {
                xi_lo: eta_lo,
                xi_hi: eta_hi,
                eta_lo: xi_lo,
                eta_hi: xi_hi,
            },
            Shape::Union(ref parts) => Shape::Union(parts.iter().map(Shape::transposed).collect()),
        }
    }

    /// Supremum of ξ over the shape.
    pub fn xi_max(&self) -> f64 {
        match *self {
            Shape::QuarterRing { gamma } => ring_radii(gamma).0,
            Shape::Rect { xi_hi, .. } => xi_hi,
            Shape::Union(ref parts) => parts.iter().map(Shape::xi_max).fold(0.0, f64::max),
        }
    }

    /// Strict membership of a continuum point.
    pub fn contains(&self, xi: f64, eta: f64) -> bool {
        if !(xi > 0.0 && eta > 0.0) {
            return false;
        }
        match *self {
            Shape::QuarterRing { gamma } => {
                let (ap, am) = ring_radii(gamma);
                let r = xi.hypot(eta);
                am < r && r < ap
            }
            Shape::Rect {
                xi_lo,
                xi_hi,
                eta_lo,
                eta_hi,
            } => xi_lo < xi && xi < xi_hi && eta_lo < eta && eta < eta_hi,
            Shape::Union(ref parts) => parts.iter().any(|p| p.contains(xi, eta)),
        }
    }

    /// Strict membership of the lattice point `(k, l)` at scale `eps`.
    ///
    /// This is the predicate every enumeration routine must agree with.
    pub fn contains_lattice_point(&self, k: u32, l: u32, eps: f64) -> bool {
        if k == 0 || l == 0 {
            return false;
        }
        match *self {
            Shape::QuarterRing { gamma } => {
                let (ap, am) = ring_radii(gamma);
                let r = ring_lattice_radius(k, l, eps);
                am < r && r < ap
            }
            Shape::Rect {
                xi_lo,
                xi_hi,
                eta_lo,
                eta_hi,
            } => {
                let (x, y) = (eps * k as f64, eps * l as f64);
                xi_lo < x && x < xi_hi && eta_lo < y && y < eta_hi
            }
            Shape::Union(ref parts) => parts.iter().any(|p| p.contains_lattice_point(k, l, eps)),
        }
    }

    /// Inclusive `l`-spans of lattice row `k`, ascending and disjoint.
    fn row_spans(&self, k: u32, eps: f64, out: &mut Vec<(u32, u32)>) {
        match *self {
            Shape::QuarterRing { gamma } => {
                let (ap, am) = ring_radii(gamma);
                let kk = (k as f64) * (k as f64);
                let hi = last_true(((ap / eps).powi(2) - kk).sqrt(), |l| {
                    ring_lattice_radius(k, l, eps) < ap
                });
                if hi == 0 {
                    return;
                }
                let lo = first_true(((am / eps).powi(2) - kk).sqrt(), |l| {
                    am < ring_lattice_radius(k, l, eps)
                });
                if lo <= hi {
                    out.push((lo, hi));
                }
            }
            Shape::Rect {
                xi_lo,
                xi_hi,
                eta_lo,
                eta_hi,
            } => {
                let x = eps * k as f64;
                if !(xi_lo < x && x < xi_hi) {
                    return;
                }
                let hi = last_true(eta_hi / eps, |l| eps * (l as f64) < eta_hi);
                if hi == 0 {
                    return;
                }
                let lo = first_true(eta_lo / eps, |l| eta_lo < eps * (l as f64));
                if lo <= hi {
                    out.push((lo, hi));
                }
            }
            Shape::Union(ref parts) => {
                let start = out.len();
                for p in parts {
                    p.row_spans(k, eps, out);
                }
                let tail = &mut out[start..];
                tail.sort_unstable();
                let mut merged: Vec<(u32, u32)> = Vec::with_capacity(tail.len());
                for &(lo, hi) in tail.iter() {
                    match merged.last_mut() {
                        Some(last) if lo <= last.1 + 1 => last.1 = last.1.max(hi),
                        _ => merged.push((lo, hi)),
                    }
                }
                out.truncate(start);
                out.extend(merged);
            }
        }
    }
}

#[inline]
fn ring_lattice_radius(k: u32, l: u32, eps: f64) -> f64 {
    let (k, l) = (k as u64, l as u64);
    eps * ((k * k + l * l) as f64).sqrt()
}

/// Smallest `n >= 1` with `pred(n)`, for `pred` monotone false→true.
fn first_true(guess: f64, pred: impl Fn(u32) -> bool) -> u32 {
    let mut n = if guess.is_finite() && guess > 1.0 { guess.floor() as u32 } else { 1 };
    while n > 1 && pred(n - 1) {
        n -= 1;
    }
    while !pred(n) {
        n += 1;
    }
    n
}

/// Largest `n >= 1` with `pred(n)`, for `pred` monotone true→false; 0 if none.
fn last_true(guess: f64, pred: impl Fn(u32) -> bool) -> u32 {
    let mut n = if guess.is_finite() && guess > 0.0 { guess.ceil() as u32 } else { 0 };
    while n >= 1 && !pred(n) {
        n -= 1;
    }
    while pred(n + 1) {
        n += 1;
    }
    n
}

fn overlaps(a: &Shape, b: &Shape) -> bool {
    use Shape::*;
    match (a, b) {
        (
            Rect {
                xi_lo: a0,
                xi_hi: a1,
                eta_lo: b0,
                eta_hi: b1,
            },
            Rect {
                xi_lo: c0,
                xi_hi: c1,
                eta_lo: d0,
                eta_hi: d1,
            },
        ) => a0 < c1 && c0 < a1 && b0 < d1 && d0 < b1,
        (QuarterRing { gamma: g1 }, QuarterRing { gamma: g2 }) => {
            let (p1, m1) = ring_radii(*g1);
            let (p2, m2) = ring_radii(*g2);
            m1 < p2 && m2 < p1
        }
        (QuarterRing { gamma }, Rect { xi_lo, xi_hi, eta_lo, eta_hi })
        | (Rect { xi_lo, xi_hi, eta_lo, eta_hi }, QuarterRing { gamma }) => {
            let (ap, am) = ring_radii(*gamma);
            xi_lo.hypot(*eta_lo) < ap && xi_hi.hypot(*eta_hi) > am
        }
        _ => true,
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Shape::QuarterRing { gamma } => write!(f, "ring:{gamma}"),
            Shape::Rect {
                xi_lo,
                xi_hi,
                eta_lo,
                eta_hi,
            } => write!(f, "rect:{xi_lo},{xi_hi},{eta_lo},{eta_hi}"),
            Shape::Union(ref parts) => {
                for (i, p) in parts.iter().enumerate() {
                    if i > 0 {
                        f.write_str("+")?;
                    }
                    write!(f, "{p}")?;
                }
                Ok(())
            }
        }
    }
}

/// Parses `ring:G`, `rect:XLO,XHI,YLO,YHI`, `q1:G`, `q2:G`, `q3:G`, and
/// `+`-joined combinations of those (a disjoint union).
impl FromStr for Shape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split('+').map(str::trim).collect();
        if parts.len() > 1 {
            let shapes = parts.into_iter().map(parse_atom).collect::<Result<Vec<_>>>()?;
            return Shape::union(shapes);
        }
        parse_atom(parts[0])
    }
}

fn parse_atom(s: &str) -> Result<Shape> {
    let (kind, args) = s
        .split_once(':')
        .ok_or_else(|| Error::invalid(format!("domain `{s}` must look like KIND:ARGS")))?;
    let nums = args
        .split(',')
        .map(|a| {
            a.trim()
                .parse::<f64>()
                .map_err(|_| Error::invalid(format!("bad number `{a}` in domain `{s}`")))
        })
        .collect::<Result<Vec<f64>>>()?;
    let want = |n: usize| -> Result<()> {
        if nums.len() != n {
            return Err(Error::invalid(format!("domain `{kind}` takes {n} argument(s), got {}", nums.len())));
        }
        Ok(())
    };
    match kind.trim() {
        "ring" => {
            want(1)?;
            Shape::ring(nums[0])
        }
        "q1" => {
            want(1)?;
            Shape::q1(nums[0])
        }
        "q2" => {
            want(1)?;
            Shape::q2(nums[0])
        }
        "q3" => {
            want(1)?;
            Shape::q3(nums[0])
        }
        "rect" => {
            want(4)?;
            Shape::rect(nums[0], nums[1], nums[2], nums[3])
        }
        other => Err(Error::invalid(format!("unknown domain kind `{other}`"))),
    }
}

/// A shape together with its scale ε.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec {
    pub shape: Shape,
    pub epsilon: f64,
}

impl DomainSpec {
    pub fn new(shape: Shape, epsilon: f64) -> Result<Self> {
        shape.validate()?;
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::invalid(format!("epsilon must be positive, got {epsilon}")));
        }
        Ok(Self { shape, epsilon })
    }

    pub fn ring(gamma: f64, epsilon: f64) -> Result<Self> {
        Self::new(Shape::ring(gamma)?, epsilon)
    }

    /// `(α⊕, α⊖)` for ring domains.
    pub fn alphas(&self) -> Option<(f64, f64)> {
        match self.shape {
            Shape::QuarterRing { gamma } => Some(ring_radii(gamma)),
            _ => None,
        }
    }

    pub fn transposed(&self) -> DomainSpec {
        DomainSpec {
            shape: self.shape.transposed(),
            epsilon: self.epsilon,
        }
    }
}

/// One lattice row: every `l` in the inclusive `spans` pairs with `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatticeRow {
    pub k: u32,
    pub spans: Vec<(u32, u32)>,
}

impl LatticeRow {
    pub fn len(&self) -> usize {
        self.spans.iter().map(|&(lo, hi)| (hi - lo + 1) as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.spans.is_empty()
    }
}

/// The lattice set of a domain, stored row by row.
///
/// Rows are sorted by `k` and each row's spans are sorted by `l`, so
/// [`Lattice::modes`] yields wave vectors in lexicographic order.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    domain: DomainSpec,
    rows: Vec<LatticeRow>,
    len: usize,
    l_max: u32,
}

impl Lattice {
    pub fn new(domain: &DomainSpec) -> Self {
        let eps = domain.epsilon;
        let k_bound = (domain.shape.xi_max() / eps).floor() as u32 + 1;
        let mut rows = Vec::new();
        let mut spans = Vec::new();
        for k in 1..=k_bound {
            spans.clear();
            domain.shape.row_spans(k, eps, &mut spans);
            if !spans.is_empty() {
                rows.push(LatticeRow {
                    k,
                    spans: spans.clone(),
                });
            }
        }
        let len = rows.iter().map(LatticeRow::len).sum();
        let l_max = rows
            .iter()
            .filter_map(|r| r.spans.last().map(|s| s.1))
            .max()
            .unwrap_or(0);
        Self {
            domain: domain.clone(),
            rows,
            len,
            l_max,
        }
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn epsilon(&self) -> f64 {
        self.domain.epsilon
    }

    pub fn rows(&self) -> &[LatticeRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn k_max(&self) -> u32 {
        self.rows.last().map_or(0, |r| r.k)
    }

    pub fn l_max(&self) -> u32 {
        self.l_max
    }

    pub fn modes(&self) -> impl Iterator<Item = WaveVector> + '_ {
        self.rows.iter().flat_map(|row| {
            row.spans
                .iter()
                .flat_map(move |&(lo, hi)| (lo..=hi).map(move |l| WaveVector { k: row.k, l }))
        })
    }

    /// Lattice of the mirrored domain; vertical lines reduce to horizontal ones on it.
    pub fn transposed(&self) -> Lattice {
        Lattice::new(&self.domain.transposed())
    }
}

/// Lattice points of `domain`, sorted lexicographically by `(k, l)`.
///
/// An empty vector is a valid answer.
pub fn enumerate_modes(domain: &DomainSpec) -> Vec<WaveVector> {
    Lattice::new(domain).modes().collect()
}

/// `Σ k^p l^q` over the lattice set.
pub fn weighted_cardinality(domain: &DomainSpec, weight: WeightSpec) -> f64 {
    lattice_weighted_cardinality(&Lattice::new(domain), weight)
}

pub fn lattice_weighted_cardinality(lattice: &Lattice, weight: WeightSpec) -> f64 {
    lattice.modes().map(|kv| weight.value(kv)).sum::<u128>() as f64
}

/// `∫_0^{π/2} cos^p φ sin^q φ dφ` for `p, q ≤ 2`.
fn angular_moment(p: u8, q: u8) -> f64 {
    match (p.min(q), p.max(q)) {
        (0, 0) => PI / 2.0,
        (0, 1) => 1.0,
        (0, 2) => PI / 4.0,
        (1, 1) => 0.5,
        (1, 2) => 1.0 / 3.0,
        (2, 2) => PI / 16.0,
        _ => unreachable!("weight exponents are validated to be <= 2"),
    }
}

fn monomial_integral(lo: f64, hi: f64, p: u8) -> f64 {
    let n = p as i32 + 1;
    (hi.powi(n) - lo.powi(n)) / n as f64
}

/// `λ_a(D) = ∫_D ξ^p η^q d(ξ, η)` in closed form.
pub fn analytic_measure(shape: &Shape, weight: WeightSpec) -> f64 {
    let (p, q) = (weight.p(), weight.q());
    match *shape {
        Shape::QuarterRing { gamma } => {
            let (ap, am) = ring_radii(gamma);
            let n = (p + q + 2) as i32;
            angular_moment(p, q) * (ap.powi(n) - am.powi(n)) / n as f64
        }
        Shape::Rect {
            xi_lo,
            xi_hi,
            eta_lo,
            eta_hi,
        } => monomial_integral(xi_lo, xi_hi, p) * monomial_integral(eta_lo, eta_hi, q),
        Shape::Union(ref parts) => parts.iter().map(|s| analytic_measure(s, weight)).sum(),
    }
}

/// `4π² λ_a(D) / λ(D)` for `a = k²` (horizontal lines) or `a = l²` (vertical lines).
///
/// Equals 1 on every quarter-ring.
pub fn correction_coefficient(shape: &Shape, weight: WeightSpec) -> Result<f64> {
    if weight != WeightSpec::K2 && weight != WeightSpec::L2 {
        return Err(Error::UnsupportedWeight {
            p: weight.p(),
            q: weight.q(),
        });
    }
    if let Shape::QuarterRing { .. } = shape {
        // 4π²·(π/16)(α⊕⁴ − α⊖⁴) / ((π/4)(α⊕² − α⊖²)) = π²(α⊕² + α⊖²) = 1
        return Ok(1.0);
    }
    let area = analytic_measure(shape, WeightSpec::UNIT);
    if !(area > 0.0) {
        return Err(Error::DegenerateDomain);
    }
    Ok(4.0 * PI * PI * analytic_measure(shape, weight) / area)
}

/// Parameters of the linearised operator spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumParams {
    pub epsilon: f64,
    pub fprime: f64,
    pub gamma: f64,
}

impl SpectrumParams {
    /// `f'(m) = 1`, the normalisation under which the strong set is the quarter-ring.
    pub fn new(epsilon: f64, gamma: f64) -> Result<Self> {
        Self::with_fprime(epsilon, gamma, 1.0)
    }

    pub fn with_fprime(epsilon: f64, gamma: f64, fprime: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::invalid(format!("epsilon must be positive, got {epsilon}")));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::invalid(format!("gamma must lie in (0, 1), got {gamma}")));
        }
        if !(fprime > 0.0 && fprime.is_finite()) {
            return Err(Error::invalid(format!("f'(m) must be positive, got {fprime}")));
        }
        Ok(Self {
            epsilon,
            fprime,
            gamma,
        })
    }

    /// Continuous maximum `f'(m)² / (4ε²)` of the growth rate.
    pub fn lambda_max(&self) -> f64 {
        self.fprime * self.fprime / (4.0 * self.epsilon * self.epsilon)
    }
}

/// `λ_{k,l} = −ε²(k² + l²)²π⁴ + (k² + l²)π² f'(m)`.
pub fn eigenvalue(kv: WaveVector, params: &SpectrumParams) -> f64 {
    let s = (kv.k as u64 * kv.k as u64 + kv.l as u64 * kv.l as u64) as f64;
    let pi2 = PI * PI;
    -params.epsilon * params.epsilon * s * s * pi2 * pi2 + s * pi2 * params.fprime
}

/// All `(k, l)` with `λ_{k,l} > γ λ_max`, sorted lexicographically.
///
/// Scans the box where `λ_{k,l} > 0` directly from the eigenvalue formula,
/// independently of the ring-radius enumeration.
pub fn strong_set_from_spectrum(params: &SpectrumParams) -> Vec<WaveVector> {
    let threshold = params.gamma * params.lambda_max();
    let bound = (params.fprime.sqrt() / (params.epsilon * PI)).ceil() as u32 + 1;
    let mut out = Vec::new();
    for k in 1..=bound {
        for l in 1..=bound {
            let kv = WaveVector { k, l };
            if eigenvalue(kv, params) > threshold {
                out.push(kv);
            }
        }
    }
    out
}

/// Variance `(1 − e^{−2λt}) / (2λ)` of a mode coefficient at time `t`.
///
/// At `λ = 0` the continuous extension `t` is returned.
pub fn mode_variance(lambda: f64, time: f64) -> Result<f64> {
    if !(time >= 0.0) {
        return Err(Error::invalid(format!("time must be non-negative, got {time}")));
    }
    if lambda == 0.0 {
        return Ok(time);
    }
    Ok(-(-2.0 * lambda * time).exp_m1() / (2.0 * lambda))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force(shape: &Shape, eps: f64) -> Vec<WaveVector> {
        let bound = (shape.xi_max().max(2.0) / eps).ceil() as u32 + 2;
        let mut out = Vec::new();
        for k in 1..=bound {
            for l in 1..=bound {
                if shape.contains_lattice_point(k, l, eps) {
                    out.push(WaveVector { k, l });
                }
            }
        }
        out
    }

    #[test]
    fn alpha_formulas() {
        let (ap, am) = ring_radii(0.5);
        let root = 0.5f64.sqrt();
        assert_eq!(ap, ((1.0 + root) / (2.0 * PI * PI)).sqrt());
        assert_eq!(am, ((1.0 - root) / (2.0 * PI * PI)).sqrt());
        assert!(am < ap);
        // α⊕² + α⊖² = 1/π²
        assert!((ap * ap + am * am - 1.0 / (PI * PI)).abs() < 1e-16);
    }

    #[test]
    fn ring_coarse_scale_is_empty() {
        let d = DomainSpec::ring(0.5, 0.5).unwrap();
        assert!(enumerate_modes(&d).is_empty());
        assert_eq!(weighted_cardinality(&d, WeightSpec::K2), 0.0);
    }

    #[test]
    fn ring_gamma_half_eps_005_has_19_modes() {
        let d = DomainSpec::ring(0.5, 0.05).unwrap();
        let modes = enumerate_modes(&d);
        assert_eq!(modes.len(), 19);
        assert_eq!(modes, brute_force(&d.shape, 0.05));
        let k2: u128 = modes.iter().map(|m| (m.k as u128).pow(2)).sum();
        assert_eq!(weighted_cardinality(&d, WeightSpec::K2), k2 as f64);
    }

    #[test]
    fn strict_rectangle_excludes_boundary() {
        let eps = 0.1;
        let d = DomainSpec::new(Shape::rect(0.0, 3.0 * eps, 0.0, 3.0 * eps).unwrap(), eps).unwrap();
        let modes = enumerate_modes(&d);
        let want: Vec<_> = [(1, 1), (1, 2), (2, 1), (2, 2)]
            .iter()
            .map(|&(k, l)| WaveVector { k, l })
            .collect();
        assert_eq!(modes, want);
        assert_eq!(weighted_cardinality(&d, WeightSpec::UNIT), 4.0);
        assert_eq!(weighted_cardinality(&d, WeightSpec::K2), 10.0);
    }

    #[test]
    fn enumeration_matches_brute_force_on_many_shapes() {
        for &gamma in &[0.1, 0.5, 0.7, 0.8, 0.95] {
            for &eps in &[0.05, 0.03, 0.0123, 0.01] {
                for shape in [
                    Shape::ring(gamma).unwrap(),
                    Shape::q1(gamma).unwrap(),
                    Shape::q2(gamma).unwrap(),
                    Shape::q3(gamma).unwrap(),
                ] {
                    let d = DomainSpec::new(shape.clone(), eps).unwrap();
                    assert_eq!(enumerate_modes(&d), brute_force(&shape, eps), "{shape} eps={eps}");
                }
            }
        }
    }

    #[test]
    fn union_rows_merge_and_stay_sorted() {
        let u: Shape = "rect:0.3,0.5,0.3,0.4+rect:0.3,0.5,0.4,0.6+ring:0.9".parse().unwrap();
        let d = DomainSpec::new(u.clone(), 0.01).unwrap();
        let modes = enumerate_modes(&d);
        assert_eq!(modes, brute_force(&u, 0.01));
        assert!(modes.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn overlapping_union_rejected() {
        assert!("rect:0,0.3,0,0.3+rect:0.2,0.4,0.2,0.4".parse::<Shape>().is_err());
        assert!("rect:0,0.3,0,0.3+ring:0.5".parse::<Shape>().is_err());
        assert!("rect:0,0.3,0,0.3+rect:0.3,0.4,0,0.3".parse::<Shape>().is_ok());
    }

    #[test]
    fn invalid_shapes_rejected() {
        assert!(Shape::ring(0.0).is_err());
        assert!(Shape::ring(1.0).is_err());
        assert!(Shape::rect(0.2, 0.1, 0.0, 1.0).is_err());
        assert!(Shape::rect(-0.1, 0.1, 0.0, 1.0).is_err());
        assert!(DomainSpec::ring(0.5, 0.0).is_err());
        assert!("disk:0.5".parse::<Shape>().is_err());
        assert!("rect:1,2,3".parse::<Shape>().is_err());
        assert!(WeightSpec::new(3, 0).is_err());
    }

    #[test]
    fn parse_display_round_trip() {
        for s in ["ring:0.8", "rect:0,0.25,0.125,0.5", "ring:0.9+rect:0,0.1,0,0.1"] {
            let shape: Shape = s.parse().unwrap();
            assert_eq!(shape.to_string(), s);
        }
    }

    #[test]
    fn ring_k2_measure_ratio() {
        for &g in &[0.1, 0.5, 0.7, 0.99] {
            let r = Shape::ring(g).unwrap();
            let ratio = analytic_measure(&r, WeightSpec::K2) / analytic_measure(&r, WeightSpec::UNIT);
            assert!((ratio - 1.0 / (4.0 * PI * PI)).abs() < 1e-15);
            let vertical = analytic_measure(&r, WeightSpec::L2) / analytic_measure(&r, WeightSpec::UNIT);
            assert!((4.0 * PI * PI * vertical - 1.0).abs() < 1e-13);
            assert_eq!(correction_coefficient(&r, WeightSpec::K2).unwrap(), 1.0);
            assert_eq!(correction_coefficient(&r, WeightSpec::L2).unwrap(), 1.0);
        }
    }

    #[test]
    fn q1_area() {
        let (ap, _) = ring_radii(0.7);
        let q1 = Shape::q1(0.7).unwrap();
        assert!((analytic_measure(&q1, WeightSpec::UNIT) - ap * ap).abs() < 1e-16);
    }

    #[test]
    fn correction_coefficients_closed_forms() {
        let g: f64 = 0.7;
        let q1 = correction_coefficient(&Shape::q1(g).unwrap(), WeightSpec::K2).unwrap();
        assert!((q1 - 2.0 / 3.0 * (1.0 + (1.0 - g).sqrt())).abs() < 1e-12);
        assert!((q1 - 1.032).abs() < 5e-4);
        let q2 = correction_coefficient(&Shape::q2(g).unwrap(), WeightSpec::K2).unwrap();
        assert!((q2 - 2.0 / 3.0 * (2.0 + g.sqrt())).abs() < 1e-12);
        let q3v = correction_coefficient(&Shape::q3(g).unwrap(), WeightSpec::L2).unwrap();
        assert!((q3v - 2.0 / 3.0 * (8.0 - 6.0 * (1.0 - g).sqrt() + 4.0 * g.sqrt())).abs() < 1e-12);
        assert!((q3v - 5.374).abs() < 5e-4);
        // symmetric squares agree in both orientations
        for s in [Shape::q1(g).unwrap(), Shape::q2(g).unwrap()] {
            let h = correction_coefficient(&s, WeightSpec::K2).unwrap();
            let v = correction_coefficient(&s, WeightSpec::L2).unwrap();
            assert!((h - v).abs() < 1e-14);
        }
        assert!(correction_coefficient(&Shape::q1(g).unwrap(), WeightSpec::UNIT).is_err());
    }

    #[test]
    fn eigenvalue_values() {
        let p = SpectrumParams::new(0.05, 0.5).unwrap();
        let lam = eigenvalue(WaveVector::new(4, 4), &p);
        let direct = -0.05f64.powi(2) * 1024.0 * PI.powi(4) + 32.0 * PI * PI;
        assert!((lam - direct).abs() < 1e-10);
        assert!((lam - 66.460).abs() < 1e-3);
        // eventually negative and decreasing along the diagonal
        let mut prev = f64::INFINITY;
        for k in 20..40 {
            let v = eigenvalue(WaveVector::new(k, k), &p);
            assert!(v < 0.0 && v < prev);
            prev = v;
        }
    }

    #[test]
    fn continuous_maximizer() {
        // s ↦ −ε²s²π⁴ + sπ²f' peaks at s* = f'/(2ε²π²) with value f'²/(4ε²)
        let p = SpectrumParams::with_fprime(0.03, 0.5, 1.7).unwrap();
        let s_star = p.fprime / (2.0 * p.epsilon * p.epsilon * PI * PI);
        let lam = |s: f64| -p.epsilon * p.epsilon * s * s * PI.powi(4) + s * PI * PI * p.fprime;
        assert!((lam(s_star) - p.lambda_max()).abs() < 1e-9 * p.lambda_max());
        assert!(lam(s_star * 1.01) < lam(s_star) && lam(s_star * 0.99) < lam(s_star));
    }

    #[test]
    fn strong_set_equals_ring() {
        let p = SpectrumParams::new(0.05, 0.5).unwrap();
        let strong = strong_set_from_spectrum(&p);
        assert_eq!(strong.len(), 19);
        assert_eq!(strong, enumerate_modes(&DomainSpec::ring(0.5, 0.05).unwrap()));
        assert!(strong_set_from_spectrum(&SpectrumParams::new(0.5, 0.5).unwrap()).is_empty());
    }

    #[test]
    fn strong_set_shrinks_toward_circle() {
        // as γ → 1 every surviving mode sits near |(k,l)|² = 1/(2π²ε²)
        let eps = 0.01;
        let p = SpectrumParams::new(eps, 0.999).unwrap();
        let r2 = 1.0 / (2.0 * PI * PI * eps * eps);
        let set = strong_set_from_spectrum(&p);
        assert!(!set.is_empty());
        for kv in set {
            let s = (kv.k * kv.k + kv.l * kv.l) as f64;
            assert!((s / r2 - 1.0).abs() < 0.04);
        }
    }

    #[test]
    fn mode_variance_cases() {
        assert_eq!(mode_variance(3.0, 0.0).unwrap(), 0.0);
        let eps: f64 = 0.05;
        let v = mode_variance(1.0 / (2.0 * eps * eps), eps * eps).unwrap();
        assert!((v - eps * eps * (1.0 - (-1.0f64).exp())).abs() < 1e-16);
        assert_eq!(mode_variance(0.0, 0.7).unwrap(), 0.7);
        assert!((mode_variance(1e-12, 0.7).unwrap() - 0.7).abs() < 1e-9);
        assert!((mode_variance(500.0, 10.0).unwrap() - 1.0 / 1000.0).abs() < 1e-15);
        assert!(mode_variance(1.0, -1.0).is_err());
    }

    fn midpoint(n1: usize, n2: usize, a: (f64, f64), b: (f64, f64), f: impl Fn(f64, f64) -> f64) -> f64 {
        let (h1, h2) = ((a.1 - a.0) / n1 as f64, (b.1 - b.0) / n2 as f64);
        let mut total = 0.0;
        for i in 0..n1 {
            let u = a.0 + (i as f64 + 0.5) * h1;
            total += crate::sum::compensated_sum((0..n2).map(|j| f(u, b.0 + (j as f64 + 0.5) * h2)));
        }
        total * h1 * h2
    }

    fn quadrature(shape: &Shape, w: WeightSpec, mesh: f64) -> f64 {
        let (p, q) = (w.p() as i32, w.q() as i32);
        match *shape {
            Shape::QuarterRing { gamma } => {
                let (ap, am) = ring_radii(gamma);
                let nr = ((ap - am) / mesh).ceil() as usize;
                let nphi = ((PI / 2.0) / (10.0 * mesh)).ceil() as usize;
                midpoint(nr, nphi, (am, ap), (0.0, PI / 2.0), |r, t| (r * t.cos()).powi(p) * (r * t.sin()).powi(q) * r)
            }
            Shape::Rect { xi_lo, xi_hi, eta_lo, eta_hi } => {
                let n1 = ((xi_hi - xi_lo) / mesh).ceil() as usize;
                let n2 = ((eta_hi - eta_lo) / mesh).ceil() as usize;
                midpoint(n1, n2, (xi_lo, xi_hi), (eta_lo, eta_hi), |x, y| x.powi(p) * y.powi(q))
            }
            Shape::Union(ref parts) => parts.iter().map(|s| quadrature(s, w, mesh)).sum(),
        }
    }

    #[test]
    fn measures_match_quadrature() {
        for g in [0.3, 0.7] {
            for s in [Shape::ring(g).unwrap(), Shape::q1(g).unwrap(), Shape::q2(g).unwrap(), Shape::q3(g).unwrap()] {
                for w in WeightSpec::all() {
                    let exact = analytic_measure(&s, w);
                    let quad = quadrature(&s, w, 2e-4);
                    assert!((exact / quad - 1.0).abs() < 1e-6, "{s} {w:?}: {exact} vs {quad}");
                }
            }
        }
    }

    #[test]
    fn scaling_law() {
        let epss = [0.05, 0.02, 0.01, 0.005];
        for g in [0.5, 0.8] {
            for s in [Shape::ring(g).unwrap(), Shape::q1(g).unwrap(), Shape::q2(g).unwrap(), Shape::q3(g).unwrap()] {
                for w in WeightSpec::all() {
                    let exact = analytic_measure(&s, w);
                    let errs: Vec<f64> = epss
                        .iter()
                        .map(|&e| {
                            let d = DomainSpec::new(s.clone(), e).unwrap();
                            let scaled = e.powi(2 + w.p() as i32 + w.q() as i32) * weighted_cardinality(&d, w);
                            (scaled / exact - 1.0).abs()
                        })
                        .collect();
                    for (e, err) in epss.iter().zip(&errs) {
                        assert!(*err <= 20.0 * e, "{s} {w:?}: {errs:?}");
                    }
                    assert!(errs[3] < 0.1, "{s} {w:?}: {errs:?}");
                    if matches!(s, Shape::QuarterRing { .. }) && w == WeightSpec::UNIT {
                        assert!(errs.windows(2).all(|p| p[1] < p[0]), "{s}: {errs:?}");
                    }
                }
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn enumeration_agrees_with_membership(gamma in 0.02f64..0.98, eps in 0.008f64..0.2, kind in 0u8..4) {
            let shape = match kind {
                0 => Shape::ring(gamma),
                1 => Shape::q1(gamma),
                2 => Shape::q2(gamma),
                _ => Shape::q3(gamma),
            }
            .unwrap();
            let d = DomainSpec::new(shape.clone(), eps).unwrap();
            let modes = enumerate_modes(&d);
            proptest::prop_assert_eq!(&modes, &brute_force(&shape, eps));
            proptest::prop_assert!(modes.windows(2).all(|w| w[0] < w[1]));
            proptest::prop_assert_eq!(&modes, &enumerate_modes(&d));
            let t: Vec<WaveVector> = enumerate_modes(&d.transposed()).into_iter().map(WaveVector::swapped).collect();
            let mut t_sorted = t.clone();
            t_sorted.sort();
            proptest::prop_assert_eq!(t_sorted, modes);
        }

        #[test]
        fn strong_set_is_the_ring(gamma in 0.02f64..0.98, eps in 0.008f64..0.2) {
            let p = SpectrumParams::new(eps, gamma).unwrap();
            proptest::prop_assert_eq!(strong_set_from_spectrum(&p), enumerate_modes(&DomainSpec::ring(gamma, eps).unwrap()));
        }

        #[test]
        fn square_coefficients_are_orientation_free(gamma in 0.02f64..0.98) {
            for s in [Shape::ring(gamma).unwrap(), Shape::q1(gamma).unwrap(), Shape::q2(gamma).unwrap()] {
                let h = correction_coefficient(&s, WeightSpec::K2).unwrap();
                let v = correction_coefficient(&s, WeightSpec::L2).unwrap();
                proptest::prop_assert!((h - v).abs() < 1e-14);
            }
        }
    }
}

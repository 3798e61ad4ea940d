//! Zero counts of sampled realizations along lines.
//!
//! Realization `r` of a report draws its coefficients from stream `r` of the
//! base seed and its line offsets from stream `r | 2⁶³`, so every work item is
//! reproducible on its own and the report does not depend on the thread count.

use std::io::{self, Write};
use std::sync::Arc;

use rayon::prelude::*;

use crate::domains::{DomainSpec, Lattice, WaveVector};
use crate::error::{Error, Result};
use crate::field::{cospi, evaluate, rng_for, uniform01, FieldRealization};
use crate::fmt_f64;
use crate::kostlan::{Kostlan, LineSpec, DEFAULT_PANELS};
use crate::sum::compensated_sum;

const OFFSET_STREAM: u64 = 1 << 63;

/// Default sampling step `ε/50`.
pub fn default_step(epsilon: f64) -> f64 {
    epsilon / 50.0
}

/// Coarsest admissible step `ε/20`.
pub fn max_step(epsilon: f64) -> f64 {
    epsilon / 20.0
}

fn check_step(step: f64, epsilon: f64) -> Result<()> {
    let bound = max_step(epsilon);
    if !(step > 0.0) {
        return Err(Error::invalid(format!("step must be positive, got {step}")));
    }
    if step > bound {
        return Err(Error::StepTooCoarse { step, bound });
    }
    Ok(())
}

/// Strict sign changes between consecutive samples.
///
/// An exact zero takes the sign of the previous sample (the first sample
/// counts as positive), so a touching zero adds 0 or 2, never 1.
pub fn count_sign_changes(values: &[f64]) -> u64 {
    let mut count = 0;
    let mut prev_neg = false;
    for (i, &v) in values.iter().enumerate() {
        let neg = if v == 0.0 { prev_neg } else { v < 0.0 };
        if i > 0 && neg != prev_neg {
            count += 1;
        }
        prev_neg = neg;
    }
    count
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    Horizontal,
    Vertical,
}

impl Orientation {
    pub fn line(self, offset: f64) -> LineSpec {
        match self {
            Orientation::Horizontal => LineSpec::Horizontal { t: offset },
            Orientation::Vertical => LineSpec::Vertical { s: offset },
        }
    }
}

/// `n_lines` axis-parallel lines per realization at uniform random offsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LineFamily {
    pub orientation: Orientation,
    pub n_lines: usize,
}

/// The field restricted to axis-parallel lines of one orientation.
///
/// Along such a line `f` is a cosine series in the free index only, so the
/// cosine table over the sample points is shared by all lines.
struct AxisEvaluator {
    free: Vec<u32>,
    fixed: Vec<u32>,
    // per mode: (position in `free`, position in `fixed`)
    slots: Vec<(u32, u32)>,
    samples: usize,
    table: Vec<f64>,
}

impl AxisEvaluator {
    fn new(modes: &[WaveVector], orientation: Orientation, intervals: usize) -> Self {
        let split = |m: &WaveVector| match orientation {
            Orientation::Horizontal => (m.k, m.l),
            Orientation::Vertical => (m.l, m.k),
        };
        let mut free: Vec<u32> = modes.iter().map(|m| split(m).0).collect();
        free.sort_unstable();
        free.dedup();
        let mut fixed: Vec<u32> = modes.iter().map(|m| split(m).1).collect();
        fixed.sort_unstable();
        fixed.dedup();
        let slots = modes
            .iter()
            .map(|m| {
                let (a, b) = split(m);
                (
                    free.binary_search(&a).unwrap() as u32,
                    fixed.binary_search(&b).unwrap() as u32,
                )
            })
            .collect();
        let samples = intervals + 1;
        let mut table = Vec::with_capacity(free.len() * samples);
        for &j in &free {
            table.extend((0..samples).map(|i| cospi(j, i as f64 / intervals as f64)));
        }
        Self {
            free,
            fixed,
            slots,
            samples,
            table,
        }
    }

    fn values(&self, coeffs: &[f64], offset: f64, scratch: &mut Scratch) {
        scratch.fixed.clear();
        scratch.fixed.extend(self.fixed.iter().map(|&j| cospi(j, offset)));
        scratch.b.clear();
        scratch.b.resize(self.free.len(), 0.0);
        for (&(a, f), c) in self.slots.iter().zip(coeffs) {
            scratch.b[a as usize] += c * scratch.fixed[f as usize];
        }
        scratch.values.clear();
        scratch.values.resize(self.samples, 0.0);
        for (bj, row) in scratch.b.iter().zip(self.table.chunks_exact(self.samples)) {
            for (v, t) in scratch.values.iter_mut().zip(row) {
                *v += bj * t;
            }
        }
    }

    fn count(&self, coeffs: &[f64], offset: f64, scratch: &mut Scratch) -> u64 {
        self.values(coeffs, offset, scratch);
        count_sign_changes(&scratch.values)
    }
}

#[derive(Default)]
struct Scratch {
    fixed: Vec<f64>,
    b: Vec<f64>,
    values: Vec<f64>,
}

fn intervals_for(length: f64, step: f64) -> usize {
    (length / step).ceil().max(1.0) as usize
}

/// Sign changes of `real` at uniformly spaced points of the clipped line.
///
/// Uses `⌈length/step⌉` equal intervals of the line parameter, endpoints included.
pub fn count_zeros_on_line(real: &FieldRealization, line: &LineSpec, step: f64) -> Result<u64> {
    check_step(step, real.domain().epsilon)?;
    match *line {
        LineSpec::Horizontal { t } => {
            let ev = AxisEvaluator::new(real.modes(), Orientation::Horizontal, intervals_for(1.0, step));
            Ok(ev.count(real.coeffs(), t, &mut Scratch::default()))
        }
        LineSpec::Vertical { s } => {
            let ev = AxisEvaluator::new(real.modes(), Orientation::Vertical, intervals_for(1.0, step));
            Ok(ev.count(real.coeffs(), s, &mut Scratch::default()))
        }
        LineSpec::Sloped { .. } => {
            let (lo, hi) = line.parameter_interval();
            let n = intervals_for(hi - lo, step);
            let h = (hi - lo) / n as f64;
            let values: Vec<f64> = (0..=n)
                .map(|i| {
                    let (x, y) = line.point(lo + i as f64 * h);
                    evaluate(real, x, y.clamp(0.0, 1.0))
                })
                .collect();
            Ok(count_sign_changes(&values))
        }
    }
}

/// Aggregate zero counts over many realizations and lines.
#[derive(Debug, Clone, PartialEq)]
pub struct ZeroCountReport {
    pub domain: DomainSpec,
    pub family: LineFamily,
    pub n_realizations: usize,
    pub base_seed: u64,
    pub step: f64,
    /// Line offsets, realization-major.
    pub offsets: Vec<f64>,
    pub counts: Vec<u64>,
    pub mean: f64,
    /// Sample standard deviation of all counts over `√len`.
    pub stderr: f64,
    /// Standard deviation of per-realization means over `√n_realizations`.
    ///
    /// Lines of one realization are correlated, so this is the honest error bar.
    pub realization_stderr: f64,
    /// Expected count on the family's middle line (offset 1/2).
    pub predicted: f64,
}

impl ZeroCountReport {
    /// CSV with header `realization,line_param,count` followed by summary comments.
    pub fn write_csv<W: Write>(&self, mut w: W, comments: &[String]) -> io::Result<()> {
        for c in comments {
            writeln!(w, "# {c}")?;
        }
        writeln!(w, "realization,line_param,count")?;
        let per = self.family.n_lines;
        for (i, (o, c)) in self.offsets.iter().zip(&self.counts).enumerate() {
            writeln!(w, "{},{},{c}", i / per, fmt_f64(*o))?;
        }
        writeln!(w, "# lines = {}", self.counts.len())?;
        writeln!(w, "# mean = {}", fmt_f64(self.mean))?;
        writeln!(w, "# stderr = {}", fmt_f64(self.stderr))?;
        writeln!(w, "# realization_stderr = {}", fmt_f64(self.realization_stderr))?;
        writeln!(w, "# predicted = {}", fmt_f64(self.predicted))?;
        Ok(())
    }
}

fn mean_and_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = compensated_sum(xs.iter().copied()) / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = compensated_sum(xs.iter().map(|x| (x - mean) * (x - mean))) / (n - 1.0);
    (mean, var.sqrt())
}

/// Samples `n_realizations` fields and counts zeros on `family.n_lines` random lines of each.
pub fn sample_report(
    domain: &DomainSpec,
    family: LineFamily,
    n_realizations: usize,
    base_seed: u64,
    step: f64,
) -> Result<ZeroCountReport> {
    if n_realizations == 0 || family.n_lines == 0 {
        return Err(Error::invalid("need at least one realization and one line"));
    }
    check_step(step, domain.epsilon)?;
    let lattice = Lattice::new(domain);
    if lattice.is_empty() {
        return Err(Error::EmptyModeSet);
    }
    let modes: Arc<[WaveVector]> = lattice.modes().collect();
    let ev = AxisEvaluator::new(&modes, family.orientation, intervals_for(1.0, step));

    let per_realization: Vec<Vec<(f64, u64)>> = (0..n_realizations as u64)
        .into_par_iter()
        .map_init(Scratch::default, |scratch, r| {
            let real = FieldRealization::sample(domain, modes.clone(), base_seed, r)
                .expect("mode list is non-empty");
            let mut rng = rng_for(base_seed, r | OFFSET_STREAM);
            (0..family.n_lines)
                .map(|_| {
                    let offset = 0.001 + 0.998 * uniform01(&mut rng);
                    (offset, ev.count(real.coeffs(), offset, scratch))
                })
                .collect()
        })
        .collect();

    let mut offsets = Vec::with_capacity(n_realizations * family.n_lines);
    let mut counts = Vec::with_capacity(offsets.capacity());
    let mut realization_means = Vec::with_capacity(n_realizations);
    for lines in &per_realization {
        realization_means.push(lines.iter().map(|l| l.1 as f64).sum::<f64>() / lines.len() as f64);
        for &(o, c) in lines {
            offsets.push(o);
            counts.push(c);
        }
    }
    let as_f64: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let (mean, sd) = mean_and_std(&as_f64);
    let (_, sd_real) = mean_and_std(&realization_means);

    let kostlan = Kostlan::new(domain)?;
    let predicted = kostlan.expected_zero_count(&family.orientation.line(0.5), DEFAULT_PANELS)?;

    Ok(ZeroCountReport {
        domain: domain.clone(),
        family,
        n_realizations,
        base_seed,
        step,
        offsets,
        counts,
        mean,
        stderr: sd / (as_f64.len() as f64).sqrt(),
        realization_stderr: sd_real / (n_realizations as f64).sqrt(),
        predicted,
    })
}

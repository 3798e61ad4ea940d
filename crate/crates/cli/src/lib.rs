//! Command-line front end for `nodal-core`.
//!
//! Every output file starts with `#` comment lines that record the tool
//! version and the normalised parameters of the run, so a file can be
//! regenerated from its own header. The worker-thread count is not recorded:
//! it never changes the output.

use std::f64::consts::PI;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use nodal_core::domains::{
    correction_coefficient, eigenvalue, lattice_weighted_cardinality, DomainSpec, Lattice, Shape, SpectrumParams,
    WeightSpec,
};
use nodal_core::ergodic::birkhoff_report;
use nodal_core::field::{evaluate_grid, sample_field};
use nodal_core::kostlan::{profile_points, DensityProfile, Kostlan, LineSpec};
use nodal_core::montecarlo::{sample_report, LineFamily, Orientation};
use nodal_core::{fmt_f64, Error as CoreError};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl CliError {
    /// 0 success, 1 runtime or I/O failure, 2 usage error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) | CliError::Io { .. } => 1,
        }
    }
}

fn usage(e: CoreError) -> CliError {
    CliError::Usage(e.to_string())
}

fn runtime(e: CoreError) -> CliError {
    CliError::Runtime(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "nodal-gauge", version, about = "Zero densities and pattern sizes of random cosine series")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List the lattice points of a domain
    Modes(ModesArgs),
    /// Density profiles ε·δ(x) per scale and fixed-point traces across scales
    Density(DensityArgs),
    /// Expected zero count and pattern size on one line
    Count(CountArgs),
    /// Sampled zero counts on random axis-parallel lines
    Montecarlo(MonteCarloArgs),
    /// Birkhoff averages of cos² along a rotation orbit
    Ergodic(ErgodicArgs),
    /// Sign image of one realization
    Render(RenderArgs),
    /// Correction coefficients, zero counts and pattern sizes of the standard domains
    Table(TableArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Worker threads (results do not depend on it)
    #[arg(long)]
    pub threads: Option<usize>,
    /// Print the normalised parameter set to stdout
    #[arg(long)]
    pub echo_config: bool,
    /// Output path
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ModesArgs {
    /// Domain: ring:G, rect:XLO,XHI,YLO,YHI, q1:G, q2:G, q3:G, or a '+'-joined union
    #[arg(long)]
    pub domain: String,
    #[arg(long)]
    pub eps: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct DensityArgs {
    #[arg(long)]
    pub domain: String,
    /// Comma-separated scales
    #[arg(long, value_delimiter = ',', required = true)]
    pub eps: Vec<f64>,
    /// h:T, v:S or s:MU,TAU
    #[arg(long, default_value = "h:0.5")]
    pub line: String,
    /// Profile points per scale
    #[arg(long, default_value_t = 1000)]
    pub grid: usize,
    /// Comma-separated line parameters for the trace across scales
    #[arg(long, value_delimiter = ',', default_value = "0.001,0.01,0.1,0.5")]
    pub x0: Vec<f64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct CountArgs {
    #[arg(long)]
    pub domain: String,
    #[arg(long)]
    pub eps: f64,
    #[arg(long, default_value = "h:0.7071067811865476")]
    pub line: String,
    #[arg(long, default_value_t = nodal_core::kostlan::DEFAULT_PANELS)]
    pub panels: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Family {
    H,
    V,
}

#[derive(Debug, Args)]
pub struct MonteCarloArgs {
    #[arg(long)]
    pub domain: String,
    #[arg(long)]
    pub eps: f64,
    /// Line orientation
    #[arg(long, value_enum, default_value = "v")]
    pub family: Family,
    /// Lines per realization
    #[arg(long, default_value_t = 200)]
    pub lines: usize,
    #[arg(long, default_value_t = 30)]
    pub realizations: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Sampling step is ε divided by this
    #[arg(long, default_value_t = 50.0)]
    pub step_frac: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct ErgodicArgs {
    /// Rotation number
    #[arg(long, default_value_t = std::f64::consts::SQRT_2 - 1.0)]
    pub x0: f64,
    /// Comma-separated, strictly increasing cutoffs
    #[arg(long, value_delimiter = ',', default_value = "10,100,1000,10000,100000,1000000")]
    pub cutoffs: Vec<u64>,
    /// Weight exponent p in k^p
    #[arg(long, default_value_t = 0)]
    pub p: u8,
    /// Convergence tolerance on the last average
    #[arg(long, default_value_t = 1e-3)]
    pub tol: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum RenderMode {
    /// f ≥ 0 white, f < 0 black
    Sign,
    /// Affine grey scale of the field
    Field,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub domain: String,
    #[arg(long)]
    pub eps: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Pixels per side
    #[arg(long, default_value_t = 512)]
    pub grid: usize,
    #[arg(long, value_enum, default_value = "sign")]
    pub mode: RenderMode,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct TableArgs {
    #[arg(long, default_value_t = 0.7)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0.01)]
    pub eps: f64,
    #[command(flatten)]
    pub common: Common,
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Modes(a) => &a.common,
            Command::Density(a) => &a.common,
            Command::Count(a) => &a.common,
            Command::Montecarlo(a) => &a.common,
            Command::Ergodic(a) => &a.common,
            Command::Render(a) => &a.common,
            Command::Table(a) => &a.common,
        }
    }
}

/// Runs one parsed invocation on a pool of the requested size.
pub fn run(cli: Cli) -> Result<(), CliError> {
    let common = cli.command.common();
    match common.threads {
        Some(0) => Err(CliError::Usage("--threads must be at least 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            pool.install(|| dispatch(&cli.command))
        }
        None => dispatch(&cli.command),
    }
}

fn dispatch(cmd: &Command) -> Result<(), CliError> {
    match cmd {
        Command::Modes(a) => cmd_modes(a),
        Command::Density(a) => cmd_density(a),
        Command::Count(a) => cmd_count(a),
        Command::Montecarlo(a) => cmd_montecarlo(a),
        Command::Ergodic(a) => cmd_ergodic(a),
        Command::Render(a) => cmd_render(a),
        Command::Table(a) => cmd_table(a),
    }
}

/// Provenance lines: version, subcommand, then `key = value` pairs.
fn provenance(command: &str, params: &[(&str, String)]) -> Vec<String> {
    let mut lines = vec![format!("nodal-gauge {VERSION}"), format!("command = {command}")];
    lines.extend(params.iter().map(|(k, v)| format!("{k} = {v}")));
    lines
}

fn echo(common: &Common, header: &[String]) {
    if common.echo_config {
        for line in header {
            println!("{line}");
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>) -> Result<(), CliError> {
    let mut w = create(path)?;
    f(&mut w).and_then(|_| w.flush()).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

fn domain(spec: &str, eps: f64) -> Result<DomainSpec, CliError> {
    let shape: Shape = spec.parse().map_err(usage)?;
    DomainSpec::new(shape, eps).map_err(usage)
}

fn cmd_modes(a: &ModesArgs) -> Result<(), CliError> {
    let d = domain(&a.domain, a.eps)?;
    let lattice = Lattice::new(&d);
    let spectrum = SpectrumParams::with_fprime(a.eps, 0.5, 1.0).map_err(usage)?;
    let mut header = provenance("modes", &[("domain", d.shape.to_string()), ("eps", a.eps.to_string())]);
    header.push(format!("modes = {}", lattice.len()));
    for w in [WeightSpec::K2, WeightSpec::L2] {
        header.push(format!(
            "weighted_cardinality({},{}) = {}",
            w.p(),
            w.q(),
            fmt_f64(lattice_weighted_cardinality(&lattice, w))
        ));
    }
    echo(&a.common, &header);
    write_file(&a.common.out, |w| {
        for c in &header {
            writeln!(w, "# {c}")?;
        }
        writeln!(w, "k,l,eigenvalue")?;
        for m in lattice.modes() {
            writeln!(w, "{},{},{}", m.k, m.l, fmt_f64(eigenvalue(m, &spectrum)))?;
        }
        Ok(())
    })
}

fn cmd_density(a: &DensityArgs) -> Result<(), CliError> {
    let shape: Shape = a.domain.parse().map_err(usage)?;
    let line: LineSpec = a.line.parse().map_err(usage)?;
    if a.grid == 0 {
        return Err(CliError::Usage("--grid must be positive".into()));
    }
    let domains = a
        .eps
        .iter()
        .map(|&e| DomainSpec::new(shape.clone(), e).map_err(usage))
        .collect::<Result<Vec<_>, _>>()?;
    let (lo, hi) = line.parameter_interval();
    if let Some(x) = a.x0.iter().find(|x| !(lo..=hi).contains(*x)) {
        return Err(CliError::Usage(format!("x0 = {x} lies outside the line's range [{lo}, {hi}]")));
    }
    let eps_list = a.eps.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
    let x0_list = a.x0.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
    let header = provenance(
        "density",
        &[
            ("domain", shape.to_string()),
            ("eps", eps_list),
            ("line", line.to_string()),
            ("grid", a.grid.to_string()),
            ("x0", x0_list),
        ],
    );
    echo(&a.common, &header);
    let dir = &a.common.out;
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.clone(),
        source,
    })?;

    let points = profile_points(&line, a.grid);
    let mut trace: Vec<(f64, f64, Option<f64>)> = Vec::new();
    for (i, d) in domains.iter().enumerate() {
        let kostlan = Kostlan::new(d).map_err(runtime)?;
        let profile = DensityProfile::compute(&kostlan, &line, &points);
        let mut h = header.clone();
        h.push(format!("profile eps = {}", d.epsilon));
        h.push(format!("clamped = {}", profile.clamped));
        write_file(&dir.join(format!("profile_{i}.csv")), |w| profile.write_csv(w, &h))?;
        for &x in &a.x0 {
            trace.push((x, d.epsilon, kostlan.density(&line, x).ok()));
        }
    }
    trace.sort_by(|p, q| p.0.total_cmp(&q.0));
    write_file(&dir.join("trace.csv"), |w| {
        for c in &header {
            writeln!(w, "# {c}")?;
        }
        writeln!(w, "x0,eps,delta,eps_delta")?;
        for &(x, e, d) in &trace {
            match d {
                Some(d) => writeln!(w, "{},{},{},{}", fmt_f64(x), fmt_f64(e), fmt_f64(d), fmt_f64(e * d))?,
                None => writeln!(w, "{},{},NaN,NaN", fmt_f64(x), fmt_f64(e))?,
            }
        }
        Ok(())
    })
}

fn cmd_count(a: &CountArgs) -> Result<(), CliError> {
    let d = domain(&a.domain, a.eps)?;
    let line: LineSpec = a.line.parse().map_err(usage)?;
    if a.panels < 16 {
        return Err(CliError::Usage("--panels must be at least 16".into()));
    }
    let header = provenance(
        "count",
        &[
            ("domain", d.shape.to_string()),
            ("eps", a.eps.to_string()),
            ("line", line.to_string()),
            ("panels", a.panels.to_string()),
        ],
    );
    echo(&a.common, &header);
    let kostlan = Kostlan::new(&d).map_err(runtime)?;
    let n = kostlan.expected_zero_count(&line, a.panels).map_err(runtime)?;
    let size = kostlan.pattern_size(&line, a.panels).map_err(runtime)?;
    write_file(&a.common.out, |w| {
        for c in &header {
            writeln!(w, "# {c}")?;
        }
        writeln!(w, "line,segment_length,expected_zeros,pattern_size")?;
        writeln!(w, "{line},{},{},{}", fmt_f64(line.segment_length()), fmt_f64(n), fmt_f64(size))
    })
}

fn cmd_montecarlo(a: &MonteCarloArgs) -> Result<(), CliError> {
    let d = domain(&a.domain, a.eps)?;
    if !(a.step_frac >= 20.0) {
        return Err(CliError::Usage("--step-frac must be at least 20".into()));
    }
    let orientation = match a.family {
        Family::H => Orientation::Horizontal,
        Family::V => Orientation::Vertical,
    };
    let family = LineFamily {
        orientation,
        n_lines: a.lines,
    };
    let header = provenance(
        "montecarlo",
        &[
            ("domain", d.shape.to_string()),
            ("eps", a.eps.to_string()),
            ("family", format!("{:?}", a.family).to_lowercase()),
            ("lines", a.lines.to_string()),
            ("realizations", a.realizations.to_string()),
            ("seed", a.seed.to_string()),
            ("step_frac", a.step_frac.to_string()),
        ],
    );
    echo(&a.common, &header);
    let report = sample_report(&d, family, a.realizations, a.seed, a.eps / a.step_frac).map_err(|e| match e {
        CoreError::InvalidParameter(_) | CoreError::StepTooCoarse { .. } => usage(e),
        e => runtime(e),
    })?;
    write_file(&a.common.out, |w| report.write_csv(w, &header))
}

fn cmd_ergodic(a: &ErgodicArgs) -> Result<(), CliError> {
    let cutoffs = a.cutoffs.iter().map(u64::to_string).collect::<Vec<_>>().join(",");
    let header = provenance(
        "ergodic",
        &[
            ("x0", a.x0.to_string()),
            ("cutoffs", cutoffs),
            ("p", a.p.to_string()),
            ("tol", a.tol.to_string()),
        ],
    );
    echo(&a.common, &header);
    let report = birkhoff_report(a.x0, &a.cutoffs, a.p, a.tol).map_err(usage)?;
    write_file(&a.common.out, |w| report.write_csv(w, &header))
}

fn cmd_render(a: &RenderArgs) -> Result<(), CliError> {
    let d = domain(&a.domain, a.eps)?;
    if a.grid < 64 {
        return Err(CliError::Usage("--grid must be at least 64 for render".into()));
    }
    let header = provenance(
        "render",
        &[
            ("domain", d.shape.to_string()),
            ("eps", a.eps.to_string()),
            ("seed", a.seed.to_string()),
            ("grid", a.grid.to_string()),
            ("mode", format!("{:?}", a.mode).to_lowercase()),
        ],
    );
    echo(&a.common, &header);
    let real = sample_field(&d, a.seed).map_err(runtime)?;
    let grid = evaluate_grid(&real, a.grid).map_err(runtime)?;
    write_file(&a.common.out, |w| match a.mode {
        RenderMode::Sign => grid.write_sign_pgm(w, &header),
        RenderMode::Field => grid.write_pgm(w, &header),
    })?;
    let mut h = header.clone();
    h.push(format!("positive_fraction = {}", fmt_f64(grid.positive_fraction())));
    write_file(&a.common.out.with_extension("csv"), |w| grid.write_csv(w, &h))
}

/// One line of the standard-domain table.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub domain: &'static str,
    pub correction_coeff: f64,
    pub avg_zeros: f64,
    pub pattern_size: f64,
}

/// Closed-form asymptotics: `N = √coeff / (2πε)` zeros per unit length.
pub fn table_rows(gamma: f64, eps: f64) -> Result<Vec<TableRow>, CliError> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(CliError::Usage(format!("eps must be positive, got {eps}")));
    }
    let entries = [
        ("ring", Shape::ring(gamma), WeightSpec::K2),
        ("q1", Shape::q1(gamma), WeightSpec::K2),
        ("q2", Shape::q2(gamma), WeightSpec::K2),
        ("q3_hor", Shape::q3(gamma), WeightSpec::K2),
        ("q3_ver", Shape::q3(gamma), WeightSpec::L2),
    ];
    entries
        .into_iter()
        .map(|(name, shape, w)| {
            let coeff = correction_coefficient(&shape.map_err(usage)?, w).map_err(runtime)?;
            let zeros = coeff.sqrt() / (2.0 * PI * eps);
            Ok(TableRow {
                domain: name,
                correction_coeff: coeff,
                avg_zeros: zeros,
                pattern_size: 1.0 / zeros,
            })
        })
        .collect()
}

fn cmd_table(a: &TableArgs) -> Result<(), CliError> {
    let rows = table_rows(a.gamma, a.eps)?;
    let header = provenance("table", &[("gamma", a.gamma.to_string()), ("eps", a.eps.to_string())]);
    echo(&a.common, &header);
    write_file(&a.common.out, |w| {
        for c in &header {
            writeln!(w, "# {c}")?;
        }
        writeln!(w, "domain,correction_coeff,avg_zeros,pattern_size")?;
        for r in &rows {
            writeln!(
                w,
                "{},{},{},{}",
                r.domain,
                fmt_f64(r.correction_coeff),
                fmt_f64(r.avg_zeros),
                fmt_f64(r.pattern_size)
            )?;
        }
        Ok(())
    })
}

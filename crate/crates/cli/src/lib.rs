//! Command-line front end: system loading, subcommands and report output.
//!
//! Every report line that records a verification has the form
//! `PASS <name> <max-deviation>` or `FAIL <name> <max-deviation>`. A run
//! exits with status 1 when any line is `FAIL` and 2 on input errors.

pub mod system_file;

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use jetgeom::expr::{EquivalenceError, EvalError, Interval};
use jetgeom::geometry::{yang_mills_energy, GeometryError, GeometryReport, POLYNOMIAL_TOLERANCE, RATIONAL_TOLERANCE};
use jetgeom::levelset::{
    cancer_zero_curve, cancer_zero_curve_check, classify_hiv_level_set, contours_to_csv, extract_contours, LevelSetError,
    LevelSetResult,
};
use jetgeom::models::{self, golden_compare, with_parameter_ranges, GoldenSet, ModelError};
use jetgeom::variational::{geodesic_check, integrate_flow, prolongation_cross_check, VariationalError};
use jetgeom::{Bindings, Check, DomainBox, Equivalence, OdeSystem, SystemError};
use thiserror::Error;

pub use system_file::{parse_system_file, SystemFileError};

/// State interval used for systems loaded from files.
pub const FILE_STATE_RANGE: (f64, f64) = (0.1, 5.0);
/// Parameter interval used when golden checks resample parameters.
pub const PARAMETER_RANGE: (f64, f64) = (0.1, 2.0);

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read `{path}`: {source}")]
    Read { path: PathBuf, source: io::Error },
    #[error("cannot write `{path}`: {source}")]
    Write { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Output(#[from] io::Error),
    #[error(transparent)]
    SystemFile(#[from] SystemFileError),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Variational(#[from] VariationalError),
    #[error(transparent)]
    LevelSet(#[from] LevelSetError),
    #[error(transparent)]
    Sampling(#[from] EquivalenceError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{0}")]
    Usage(String),
}

#[derive(Debug, Parser)]
#[command(name = "jetgeom", version, about = "Jet geometry of autonomous ODE systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the geometric objects of a system and their identity checks.
    Analyze(AnalyzeArgs),
    /// Compare against closed forms and run the invariant suite.
    Verify(VerifyArgs),
    /// Integrate the flow and optionally check the Euler-Lagrange residual.
    Trace(TraceArgs),
    /// Classify or extract level sets of the Yang-Mills energy.
    Levelset(LevelsetArgs),
}

#[derive(Debug, Args)]
pub struct SourceArgs {
    /// Built-in model.
    #[arg(long, value_parser = ["cancer", "hiv1"], required_unless_present = "file", conflicts_with = "file")]
    pub model: Option<String>,
    /// System description file.
    #[arg(long)]
    pub file: Option<PathBuf>,
    /// Parameter override, repeatable.
    #[arg(long = "param", value_name = "NAME=VALUE", value_parser = parse_assignment)]
    pub params: Vec<(String, f64)>,
    /// Seed for randomized checks.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Sample points for the identity checks.
    #[arg(long, default_value_t = 32)]
    pub samples: usize,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Sample points per golden comparison.
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Initial state, comma separated.
    #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
    pub x0: Vec<f64>,
    /// End time.
    #[arg(long = "t")]
    pub t_end: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    #[arg(long)]
    pub check_geodesic: bool,
    /// Trajectory CSV destination; without it the CSV goes to stdout and
    /// the report to stderr.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LevelsetArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Energy level C.
    #[arg(long = "C", value_name = "C")]
    pub level_c: Option<f64>,
    #[arg(long)]
    pub k: Option<f64>,
    #[arg(long)]
    pub n: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Contour level (same as --C for contour extraction).
    #[arg(long)]
    pub level: Option<f64>,
    /// Two state names spanning the contour slice.
    #[arg(long, value_delimiter = ',', num_args = 1)]
    pub axes: Vec<String>,
    /// Slice bounds lo1,hi1,lo2,hi2.
    #[arg(long = "box", value_delimiter = ',', allow_hyphen_values = true)]
    pub region: Vec<f64>,
    /// Cells per axis.
    #[arg(long, default_value_t = 128)]
    pub grid: usize,
    /// Value for a state outside the slice, repeatable.
    #[arg(long = "fix", value_name = "NAME=VALUE", value_parser = parse_assignment)]
    pub fixed: Vec<(String, f64)>,
    /// P samples on the cancer zero curve.
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    /// CSV destination; defaults to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn parse_assignment(text: &str) -> Result<(String, f64), String> {
    let (name, value) = text.split_once('=').ok_or_else(|| format!("expected NAME=VALUE, got `{}`", text))?;
    let value: f64 = value.trim().parse().map_err(|_| format!("`{}` is not a number", value))?;
    if name.trim().is_empty() {
        return Err(format!("missing name in `{}`", text));
    }
    Ok((name.trim().to_string(), value))
}

/// A loaded system, with closed forms when it is a built-in model.
pub struct Loaded {
    pub system: OdeSystem,
    pub model: Option<String>,
    pub golden: Option<GoldenSet>,
}

impl Loaded {
    fn state_domain(&self) -> DomainBox {
        match &self.model {
            Some(name) => models::default_domain(name).expect("built-in name"),
            None => self
                .system
                .states()
                .iter()
                .fold(DomainBox::new(), |d, x| d.with(x, FILE_STATE_RANGE.0, FILE_STATE_RANGE.1)),
        }
    }
}

pub fn load(source: &SourceArgs) -> Result<Loaded, CliError> {
    match (&source.model, &source.file) {
        (Some(name), _) => {
            let (mut system, _) = models::builtin(name)?;
            for (n, v) in &source.params {
                system.set_param(n, *v)?;
            }
            // Rebuild through the constructor so overrides are validated.
            let values: Vec<f64> = system.params().iter().map(|(_, v)| *v).collect();
            let (system, golden) = match name.as_str() {
                "cancer" => models::cancer_model(values[0], values[1], values[2], values[3])?,
                _ => models::hiv_model(values[0], values[1], values[2], values[3], values[4], values[5], values[6], values[7])?,
            };
            Ok(Loaded {
                system,
                model: Some(name.clone()),
                golden: Some(golden),
            })
        }
        (None, Some(path)) => {
            let text = fs::read_to_string(path).map_err(|source| CliError::Read {
                path: path.clone(),
                source,
            })?;
            let mut system = parse_system_file(&text)?;
            for (n, v) in &source.params {
                system.set_param(n, *v)?;
            }
            Ok(Loaded {
                system,
                model: None,
                golden: None,
            })
        }
        (None, None) => Err(CliError::Usage("one of --model or --file is required".into())),
    }
}

/// Collects report lines and counts failures.
#[derive(Default)]
struct Report {
    lines: Vec<String>,
    failures: usize,
}

impl Report {
    fn text(&mut self, line: impl Into<String>) {
        self.lines.push(line.into());
    }

    fn check(&mut self, c: &Check) {
        if !c.passed {
            self.failures += 1;
        }
        self.lines.push(c.to_string());
    }

    fn write(&self, w: &mut dyn Write) -> io::Result<()> {
        for l in &self.lines {
            writeln!(w, "{}", l)?;
        }
        Ok(())
    }
}

/// Runs a parsed command. Returns the number of failed checks.
pub fn run(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<usize, CliError> {
    match &cli.command {
        Command::Analyze(a) => analyze(a, out),
        Command::Verify(a) => verify(a, out),
        Command::Trace(a) => trace(a, out, err),
        Command::Levelset(a) => levelset(a, out, err),
    }
}

/// Parses `argv` (program name first), runs it and maps the outcome to an
/// exit status.
pub fn main_with(argv: &[String], out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli, out, err) {
        Ok(0) => 0,
        Ok(_) => 1,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e);
            2
        }
    }
}

fn write_matrix(report: &mut Report, title: &str, m: &jetgeom::ExprMatrix) {
    report.text(format!("{}:", title));
    for line in m.to_string().lines() {
        report.text(format!("  {}", line));
    }
}

fn analyze(args: &AnalyzeArgs, out: &mut dyn Write) -> Result<usize, CliError> {
    let loaded = load(&args.source)?;
    let s = &loaded.system;
    let cfg = Equivalence::default().with_samples(args.samples).with_seed(args.source.seed);
    let g = GeometryReport::compute(s, &loaded.state_domain(), &cfg)?;
    let mut r = Report::default();
    r.text("system:");
    for line in s.to_string().lines() {
        r.text(format!("  {}", line));
    }
    write_matrix(&mut r, "jacobian", &g.jacobian);
    write_matrix(&mut r, "nonlinear connection", &g.connection);
    for (k, slice) in g.torsion.iter().enumerate() {
        write_matrix(&mut r, &format!("torsion slice {} (d/d{})", k + 1, s.states()[k]), slice);
    }
    write_matrix(&mut r, "electromagnetic form", &g.electromagnetic);
    r.text(format!("EYM = {}", g.yang_mills_energy));
    r.text(format!("cartan connection: {}", g.cartan.note()));
    r.text(format!("curvature: {}", g.curvature.note()));
    for c in g.checks() {
        r.check(c);
    }
    r.write(out)?;
    Ok(r.failures)
}

fn verify(args: &VerifyArgs, out: &mut dyn Write) -> Result<usize, CliError> {
    let loaded = load(&args.source)?;
    let s = &loaded.system;
    let seed = args.source.seed;
    let states = loaded.state_domain();
    let mut r = Report::default();
    let sampled = match &loaded.model {
        Some(_) => with_parameter_ranges(s, &states, Interval::new(PARAMETER_RANGE.0, PARAMETER_RANGE.1)),
        None => states.clone(),
    };
    if let (Some(name), Some(golden)) = (&loaded.model, &loaded.golden) {
        let tolerance = if name == "hiv1" { POLYNOMIAL_TOLERANCE } else { RATIONAL_TOLERANCE };
        let cfg = Equivalence::default().with_samples(args.samples).with_seed(seed).with_tolerance(tolerance);
        let g = golden_compare(s, golden, &sampled, &cfg)?;
        for c in &g.checks {
            r.check(c);
        }
    }
    let cfg = Equivalence::default().with_seed(seed);
    let g = GeometryReport::compute(s, &sampled, &cfg)?;
    for c in g.checks() {
        r.check(c);
    }
    r.check(&prolongation_cross_check(s, &sampled, Interval::new(-5.0, 5.0), 32, seed)?);
    r.write(out)?;
    Ok(r.failures)
}

fn emit(out: &mut dyn Write, path: &Option<PathBuf>, csv: &str) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, csv).map_err(|source| CliError::Write { path: p.clone(), source }),
        None => Ok(out.write_all(csv.as_bytes())?),
    }
}

fn trace(args: &TraceArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<usize, CliError> {
    let loaded = load(&args.source)?;
    let s = &loaded.system;
    let traj = integrate_flow(s, &args.x0, args.t_end, args.dt)?;
    emit(out, &args.out, &traj.to_csv(s.states()))?;
    let mut r = Report::default();
    r.text(format!("samples: {}", traj.samples.len()));
    if args.check_geodesic {
        let g = geodesic_check(s, &traj)?;
        r.check(&g.check);
    }
    match args.out {
        Some(_) => r.write(out)?,
        None => r.write(err)?,
    }
    Ok(r.failures)
}

fn levelset(args: &LevelsetArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<usize, CliError> {
    let mut loaded = load(&args.source)?;
    if let Some(c) = args.level_c {
        match loaded.model.as_deref() {
            Some("hiv1") => return hiv_levelset(args, &mut loaded, c, out),
            Some("cancer") if c == 0.0 => return cancer_zero(args, &loaded, out, err),
            _ => {}
        }
    }
    for (flag, v) in [("--k", args.k), ("--n", args.n), ("--delta", args.delta)] {
        if v.is_some() {
            return Err(CliError::Usage(format!("{} applies to the hiv1 classification only", flag)));
        }
    }
    contours(args, &loaded, out, err)
}

fn hiv_levelset(args: &LevelsetArgs, loaded: &mut Loaded, c: f64, out: &mut dyn Write) -> Result<usize, CliError> {
    for (name, v) in [("k", args.k), ("n", args.n), ("delta", args.delta)] {
        if let Some(v) = v {
            loaded.system.set_param(name, v)?;
        }
    }
    let s = &loaded.system;
    let param = |name: &str| s.params().iter().find(|(n, _)| n == name).map(|(_, v)| *v).expect("hiv1 parameter");
    let cls = classify_hiv_level_set(param("k"), param("n"), param("delta"), c)?;
    let mut r = Report::default();
    for line in cls.report().lines() {
        r.text(line);
    }
    // Points on the reported set must carry energy C.
    let points: Vec<[f64; 3]> = match &cls.result {
        LevelSetResult::Line { point, direction } => (0..8)
            .map(|i| {
                let t = i as f64 - 4.0;
                [point[0] + t * direction[0], point[1] + t * direction[1], point[2] + t * direction[2]]
            })
            .collect(),
        LevelSetResult::EllipticCylinder { .. } => (0..64)
            .map(|i| cls.cylinder_point(std::f64::consts::TAU * i as f64 / 64.0).expect("cylinder"))
            .collect(),
        _ => Vec::new(),
    };
    if !points.is_empty() {
        let energy = yang_mills_energy(s);
        let mut worst = 0.0_f64;
        for p in &points {
            let b = s.param_bindings().with("T", p[0]).with("T_star", p[1]).with("V", p[2]);
            worst = worst.max((energy.eval(&b)? - c).abs() / (1.0 + c));
        }
        r.check(&Check::from_deviation("level-set-points", worst, 1e-9));
    }
    r.write(out)?;
    Ok(r.failures)
}

fn cancer_zero(args: &LevelsetArgs, loaded: &Loaded, out: &mut dyn Write, err: &mut dyn Write) -> Result<usize, CliError> {
    let s = &loaded.system;
    let param = |name: &str| s.params().iter().find(|(n, _)| n == name).map(|(_, v)| *v).expect("cancer parameter");
    if args.samples == 0 {
        return Err(CliError::Usage("--samples must be positive".into()));
    }
    let ps: Vec<f64> = (1..=args.samples).map(|i| 5.0 * i as f64 / args.samples as f64).collect();
    let LevelSetResult::RationalCurve { points, poles } = cancer_zero_curve(param("a"), param("h"), param("k"), &ps)? else {
        unreachable!("zero curve is a rational curve");
    };
    let mut csv = String::from("P,Q\n");
    for (p, q) in &points {
        csv.push_str(&format!("{:.16e},{:.16e}\n", p, q));
    }
    emit(out, &args.out, &csv)?;
    let mut r = Report::default();
    r.text(format!("zero curve: {} points, {} poles", points.len(), poles.len()));
    r.check(&cancer_zero_curve_check(s, &points)?);
    match args.out {
        Some(_) => r.write(out)?,
        None => r.write(err)?,
    }
    Ok(r.failures)
}

fn contours(args: &LevelsetArgs, loaded: &Loaded, out: &mut dyn Write, err: &mut dyn Write) -> Result<usize, CliError> {
    let s = &loaded.system;
    let level = args
        .level
        .or(args.level_c)
        .ok_or_else(|| CliError::Usage("contour extraction needs --level or --C".into()))?;
    let axes: (String, String) = match args.axes.as_slice() {
        [] => (s.states()[0].clone(), s.states()[1].clone()),
        [a, b] => (a.clone(), b.clone()),
        _ => return Err(CliError::Usage("--axes takes exactly two state names".into())),
    };
    let region = match args.region.as_slice() {
        [] => {
            let d = loaded.state_domain();
            [d.get(&axes.0), d.get(&axes.1)]
                .map(|iv| iv.unwrap_or(Interval::new(FILE_STATE_RANGE.0, FILE_STATE_RANGE.1)))
        }
        [a, b, c, d] => [Interval::new(*a, *b), Interval::new(*c, *d)],
        _ => return Err(CliError::Usage("--box takes lo1,hi1,lo2,hi2".into())),
    };
    let fixed: Bindings = args.fixed.iter().map(|(n, v)| (n.as_str(), *v)).collect();
    let result = extract_contours(s, (&axes.0, &axes.1), &fixed, region, level, args.grid)?;
    let LevelSetResult::Contours { polylines, .. } = result else {
        unreachable!("contour extraction returns contours");
    };
    emit(out, &args.out, &contours_to_csv((&axes.0, &axes.1), &polylines))?;
    let mut r = Report::default();
    let vertices: usize = polylines.iter().map(Vec::len).sum();
    r.text(format!("contours at level {}: {} polylines, {} vertices", level, polylines.len(), vertices));
    let outside = polylines
        .iter()
        .flatten()
        .map(|(x, y)| {
            let dx = (region[0].lo - x).max(x - region[0].hi).max(0.0);
            let dy = (region[1].lo - y).max(y - region[1].hi).max(0.0);
            dx.max(dy)
        })
        .fold(0.0_f64, f64::max);
    r.check(&Check::from_deviation("contour-vertices-in-box", outside, 0.0));
    match args.out {
        Some(_) => r.write(out)?,
        None => r.write(err)?,
    }
    Ok(r.failures)
}

//! `calabi` command-line front end.
//!
//! Exit codes: 0 success or PASS, 1 a FAIL verdict (or failed audit check),
//! 2 INCONCLUSIVE, non-convergence or a degenerate gap, 3 usage or
//! configuration error.

pub mod audit;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use calabi_core::action::{
    action_function, action_increment_along, calabi, measure_action, straight_path_from_base, ActionValue,
    MeasureSpec,
};
use calabi_core::harness::{candidate_windings, example_local_perturbation, verify_theorem, Verdict};
use calabi_core::maps::{Boundary, MapExpr};
use calabi_core::orbits::find_periodic_orbits;
use calabi_core::phase_space::AnnulusPoint;
use calabi_core::rotation::{boundary_identity, boundary_rotation_number, measure_rotation, RotationValue};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::config::{parse_map, parse_point, ExperimentConfig};
use crate::output::{Document, Format};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_INCONCLUSIVE: i32 = 2;
pub const EXIT_USAGE: i32 = 3;

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "CALABI_WORKERS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] calabi_core::Error),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(calabi_core::Error::NonConvergent { .. } | calabi_core::Error::DegenerateGap { .. }) => {
                EXIT_INCONCLUSIVE
            }
            _ => EXIT_USAGE,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "calabi", version, about = "Actions, Calabi invariants and periodic orbits of annulus maps")]
struct Cli {
    /// Worker threads for parallel search and quadrature.
    #[arg(long, global = true, env = WORKERS_ENV)]
    workers: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Source {
    /// Experiment configuration (JSON, schema version 1).
    #[arg(long, conflicts_with = "map")]
    config: Option<PathBuf>,
    /// Map in short syntax, e.g. `rigid:a=0.5 * disk:cx=0.5,cy=0.5,r=0.3,c=2`.
    #[arg(long)]
    map: Option<String>,
}

impl Source {
    fn load(&self) -> Result<ExperimentConfig, CliError> {
        match (&self.config, &self.map) {
            (Some(path), _) => ExperimentConfig::load(path),
            (None, Some(text)) => Ok(ExperimentConfig::for_map(parse_map(text)?)),
            (None, None) => Err(CliError::Usage("one of --config or --map is required".into())),
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Action function at points, Calabi invariant and measure actions.
    Action {
        #[command(flatten)]
        source: Source,
        /// Evaluation point `x,y` (repeatable).
        #[arg(long = "point", value_parser = parse_point)]
        points: Vec<[f64; 2]>,
        /// Shift `c` of the primitive `y dx + c dx`.
        #[arg(long)]
        shift: Option<f64>,
    },
    /// Boundary and measure rotation numbers and the boundary identity.
    Rotation {
        #[command(flatten)]
        source: Source,
    },
    /// Periodic orbit census for one `(q, p)` or all candidate windings.
    Orbits {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        q: Option<u32>,
        #[arg(long, allow_hyphen_values = true)]
        p: Option<i64>,
        /// Seeds per side of the search lattice.
        #[arg(long)]
        grid: Option<usize>,
        /// Orbit points as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Orbit census for every period from the action-gap threshold to `q_max`.
    Verify {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        q_max: Option<u32>,
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Orbit points and sample orbits for plotting, as CSV.
        #[arg(long)]
        plot_csv: Option<PathBuf>,
    },
    /// Rigid rotation composed with a local disk twist, verified against the
    /// area and lower boundary measures.
    Example41 {
        #[arg(long, default_value_t = 0.6180339887)]
        a: f64,
        #[arg(long, default_value_t = 0.5)]
        cx: f64,
        #[arg(long, default_value_t = 0.5)]
        cy: f64,
        #[arg(long, default_value_t = 0.35)]
        radius: f64,
        #[arg(long, default_value_t = 50.0, allow_hyphen_values = true)]
        c: f64,
        /// Periods checked beyond the threshold.
        #[arg(long, default_value_t = 2)]
        extra_periods: u32,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        plot_csv: Option<PathBuf>,
    },
    /// Randomised property checks.
    Audit {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Parses `argv` (including the program name), runs the command and returns
/// the exit code. Reports go to `stdout`, diagnostics to `stderr`.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(stderr, "{}", e.render())
            } else {
                write!(stdout, "{}", e.render())
            };
            return code;
        }
    };
    match execute(cli, stdout, stderr) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn configure_workers(workers: Option<usize>) -> Result<(), CliError> {
    if let Some(n) = workers {
        if n == 0 {
            return Err(CliError::Usage("--workers must be at least 1".into()));
        }
        // A pool built earlier in the same process is kept; results do not
        // depend on the worker count.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn emit(doc: &Document, format: Format, out: Option<&Path>, stdout: &mut dyn Write) -> Result<(), CliError> {
    let text = doc.render(format)?;
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => stdout.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn execute(cli: Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32, CliError> {
    configure_workers(cli.workers)?;
    let out = cli.out.as_deref();
    match cli.command {
        Command::Action { source, points, shift } => {
            let mut cfg = source.load()?;
            if let Some(c) = shift {
                cfg.context.shift = c;
            }
            if !points.is_empty() {
                cfg.task.points = points;
            }
            let doc = action_report(&cfg)?;
            emit(&doc, cli.format, out.or(cfg.output.report.as_deref()), stdout)?;
            Ok(EXIT_OK)
        }
        Command::Rotation { source } => {
            let cfg = source.load()?;
            let doc = rotation_report(&cfg)?;
            emit(&doc, cli.format, out.or(cfg.output.report.as_deref()), stdout)?;
            Ok(EXIT_OK)
        }
        Command::Orbits { source, q, p, grid, csv } => {
            let mut cfg = source.load()?;
            if let Some(n) = grid {
                cfg.search.grid = n;
                cfg.search.max_grid = cfg.search.max_grid.max(n);
            }
            let q = q
                .or(cfg.task.q)
                .ok_or_else(|| CliError::Usage("--q is required".into()))?;
            let p = p.or(cfg.task.p);
            let m = cfg.map.build()?;
            let windings = match p {
                Some(p) => vec![p],
                None => candidate_windings(&m, q, &cfg.numerics)?,
            };
            let mut orbits = Vec::new();
            for &w in &windings {
                orbits.extend(find_periodic_orbits(&m, q, w, &cfg.search)?);
            }
            if let Some(path) = csv.as_deref().or(cfg.output.csv.as_deref()) {
                output::write_orbit_csv(path, &orbits)?;
            }
            let doc = Document::Orbits(output::OrbitsReport {
                map: m.to_string(),
                q,
                windings,
                lattice: cfg.search.grid,
                orbits,
            });
            emit(&doc, cli.format, out.or(cfg.output.report.as_deref()), stdout)?;
            Ok(EXIT_OK)
        }
        Command::Verify { source, q_max, csv, plot_csv } => {
            let cfg = source.load()?;
            let m = cfg.map.build()?;
            let (mu1, mu2) = match &cfg.task.pair {
                Some([a, b]) => (cfg.measure(a, &m)?, cfg.measure(b, &m)?),
                None => (MeasureSpec::AreaMeasure, MeasureSpec::BoundaryLower),
            };
            let q_max = q_max
                .or(cfg.task.q_max)
                .ok_or_else(|| CliError::Usage("--q-max is required".into()))?;
            let report = verify_theorem(&m, &mu1, &mu2, q_max, &cfg.search, &cfg.numerics)?;
            let orbits: Vec<_> = report.census.iter().flat_map(|c| c.orbits.iter().cloned()).collect();
            if let Some(path) = csv.as_deref().or(cfg.output.csv.as_deref()) {
                output::write_orbit_csv(path, &orbits)?;
            }
            if let Some(path) = plot_csv.as_deref().or(cfg.output.plot_csv.as_deref()) {
                output::write_plot_csv(path, &m, &orbits)?;
            }
            let code = verdict_exit_code(report.census.iter().map(|c| c.verdict));
            emit(&Document::Verify(report), cli.format, out.or(cfg.output.report.as_deref()), stdout)?;
            Ok(code)
        }
        Command::Example41 {
            a,
            cx,
            cy,
            radius,
            c,
            extra_periods,
            csv,
            plot_csv,
        } => {
            let cfg = ExperimentConfig::for_map(config::MapConfig::RigidRotation { a });
            let center = AnnulusPoint::new(cx, cy)?;
            let report = example_local_perturbation(a, center, radius, c, extra_periods, &cfg.search, &cfg.numerics)?;
            let orbits: Vec<_> = report
                .verification
                .census
                .iter()
                .flat_map(|c| c.orbits.iter().cloned())
                .collect();
            if let Some(path) = csv {
                output::write_orbit_csv(&path, &orbits)?;
            }
            if let Some(path) = plot_csv {
                let m = parse_map(&format!("rigid:a={a} * disk:cx={cx},cy={cy},r={radius},c={c}"))?.build()?;
                output::write_plot_csv(&path, &m, &orbits)?;
            }
            let code = verdict_exit_code(report.verification.census.iter().map(|c| c.verdict));
            emit(&Document::Perturbation(report), cli.format, out, stdout)?;
            Ok(code)
        }
        Command::Audit { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let settings = calabi_core::NumericalSettings::default();
            let checks = audit::run_audit(&mut rng, &settings)?;
            let failed = checks.iter().filter(|c| !c.passed).count();
            emit(&Document::Audit { seed, checks }, cli.format, out, stdout)?;
            if failed > 0 {
                writeln!(stderr, "{failed} audit check(s) failed")?;
                Ok(EXIT_FAIL)
            } else {
                Ok(EXIT_OK)
            }
        }
    }
}

fn verdict_exit_code(verdicts: impl Iterator<Item = Verdict>) -> i32 {
    let mut code = EXIT_OK;
    for v in verdicts {
        match v {
            Verdict::Fail => return EXIT_FAIL,
            Verdict::Inconclusive => code = EXIT_INCONCLUSIVE,
            Verdict::Pass => {}
        }
    }
    code
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointAction {
    pub x: f64,
    pub y: f64,
    pub action: ActionValue,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NamedAction {
    pub name: String,
    pub action: ActionValue,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NamedRotation {
    pub name: String,
    pub rotation: RotationValue,
}

fn default_measures() -> Vec<(String, MeasureSpec)> {
    vec![
        ("boundary_lower".into(), MeasureSpec::BoundaryLower),
        ("boundary_upper".into(), MeasureSpec::BoundaryUpper),
        ("area".into(), MeasureSpec::AreaMeasure),
    ]
}

fn configured_measures(cfg: &ExperimentConfig, m: &MapExpr) -> Result<Vec<(String, MeasureSpec)>, CliError> {
    if cfg.measures.is_empty() {
        return Ok(default_measures());
    }
    cfg.measures
        .keys()
        .map(|name| Ok((name.clone(), cfg.measure(name, m)?)))
        .collect()
}

fn action_report(cfg: &ExperimentConfig) -> Result<Document, CliError> {
    let m = cfg.map.build()?;
    let ctx = cfg.context.build()?;
    let g_base = action_function(&m, &ctx, ctx.base_point());
    let mut points = Vec::new();
    for &[x, y] in &cfg.task.points {
        let p = AnnulusPoint::new(x, y)?;
        let value = action_function(&m, &ctx, p);
        // Independent estimate by integrating f*β − β from the base point.
        let error_estimate = match straight_path_from_base(&ctx, p, cfg.numerics.line.refinement) {
            Some(path) => (g_base + action_increment_along(&m, &ctx, &path, &cfg.numerics.line)? - value).abs(),
            None => 0.0,
        };
        points.push(PointAction {
            x,
            y,
            action: ActionValue { value, error_estimate },
        });
    }
    let mean = calabi(&m, &ctx, &cfg.numerics.cubature)?;
    let mut measures = Vec::new();
    for (name, mu) in configured_measures(cfg, &m)? {
        measures.push(NamedAction {
            name,
            action: measure_action(&m, &ctx, &mu, &cfg.numerics)?,
        });
    }
    Ok(Document::Action(output::ActionReport {
        map: m.to_string(),
        shift: ctx.shift(),
        base_point: [ctx.base_point().x(), ctx.base_point().y()],
        points,
        calabi: mean,
        measures,
    }))
}

fn rotation_report(cfg: &ExperimentConfig) -> Result<Document, CliError> {
    let m = cfg.map.build()?;
    let n = cfg.numerics.birkhoff.n_iter;
    let lower = boundary_rotation_number(&m, Boundary::Lower, n);
    let upper = boundary_rotation_number(&m, Boundary::Upper, n);
    let named = if cfg.measures.is_empty() {
        vec![("area".to_string(), MeasureSpec::AreaMeasure)]
    } else {
        configured_measures(cfg, &m)?
    };
    let mut measures = Vec::new();
    for (name, mu) in named {
        measures.push(NamedRotation {
            name,
            rotation: measure_rotation(&m, &mu, &cfg.numerics)?,
        });
    }
    let identity = boundary_identity(&m, &cfg.numerics)?;
    Ok(Document::Rotation(output::RotationReport {
        map: m.to_string(),
        boundary_lower: lower,
        boundary_upper: upper,
        measures,
        identity_lhs: identity.mean_rotation,
        identity_rhs: identity.right_hand_side(),
        identity_defect: identity.defect(),
        identity_error: identity.error_estimate(),
    }))
}

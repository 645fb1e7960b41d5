//! Command-line frontend.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::cauchy::{PotentialField, Provenance};
use crate::error::Error;
use crate::glcore::{synthesize, EigenIndex, PerturbationPlan, PerturbedOperator};
use crate::model::{half_axis_eigenvalue, model_eigenfunction, model_spectrum, BoundaryCondition, VectorTrajectory};
use crate::quadrature::Grid;
use crate::verify::{spectrum_scan, verify_with_potential, VerifyOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_BAD_ARGS: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;
pub const EXIT_SYNTHESIS: i32 = 4;

pub const DEFAULT_GRID_MAX: f64 = 12.0;
pub const DEFAULT_GRID_STEP: f64 = 1.0 / 256.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
pub enum BoundaryName {
    #[serde(rename = "alpha0")]
    #[value(name = "alpha0")]
    Alpha0,
    #[serde(rename = "alphaPiOver2")]
    #[value(name = "alphaPiOver2")]
    AlphaPiOver2,
}

impl From<BoundaryName> for BoundaryCondition {
    fn from(b: BoundaryName) -> Self {
        match b {
            BoundaryName::Alpha0 => BoundaryCondition::Alpha0,
            BoundaryName::AlphaPiOver2 => BoundaryCondition::AlphaHalfPi,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RescaleEntry {
    pub k: i64,
    pub b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AddEntry {
    pub mu: f64,
    pub c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub x_max: f64,
    pub step: f64,
}

/// Plan file contents. Absent lists are empty and the boundary defaults to `alpha0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanDocument {
    #[serde(default = "default_boundary")]
    pub boundary: BoundaryName,
    #[serde(default)]
    pub remove: Vec<i64>,
    #[serde(default)]
    pub rescale: Vec<RescaleEntry>,
    #[serde(default)]
    pub add: Vec<AddEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
}

fn default_boundary() -> BoundaryName {
    BoundaryName::Alpha0
}

impl PlanDocument {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::new(EXIT_VALIDATION, format!("plan: {e}")))
    }

    pub fn to_plan(&self) -> Result<PerturbationPlan, CliError> {
        let mut plan = PerturbationPlan::new(self.boundary.into());
        for &k in &self.remove {
            if !plan.removals.insert(k) {
                return Err(CliError::new(EXIT_VALIDATION, format!("plan: index {k} removed twice")));
            }
        }
        for r in &self.rescale {
            if plan.rescalings.insert(r.k, r.b).is_some() {
                return Err(CliError::new(EXIT_VALIDATION, format!("plan: index {} rescaled twice", r.k)));
            }
        }
        for a in &self.add {
            plan = plan.add(a.mu, a.c);
        }
        plan.validate().map_err(CliError::from)?;
        Ok(plan)
    }
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn new(code: i32, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::InvalidPlan(_)
            | Error::MuCollidesWithSpectrum { .. }
            | Error::InvalidNorming(_)
            | Error::UnsupportedBoundary(_)
            | Error::OrderTooLarge { .. }
            | Error::Composition(_) => EXIT_VALIDATION,
            Error::InvalidGrid(_)
            | Error::InvalidScan { .. }
            | Error::InvalidBounds { .. }
            | Error::OutOfRange { .. }
            | Error::IndexWasRemoved(_)
            | Error::UnknownIndex(_)
            | Error::Unsorted
            | Error::NonUniformGrid { .. }
            | Error::GridMismatch => EXIT_BAD_ARGS,
            _ => EXIT_SYNTHESIS,
        };
        Self::new(code, e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Text,
}

#[derive(Debug, Parser)]
#[command(name = "diracgl", version, about = "Finite spectral perturbations of a half-axis Dirac operator")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Right end of the grid (overrides the plan file)
    #[arg(long, global = true)]
    pub grid_max: Option<f64>,
    /// Grid step (overrides the plan file)
    #[arg(long, global = true)]
    pub grid_step: Option<f64>,
    #[arg(long, global = true, value_enum, default_value = "csv")]
    pub format: Format,
    /// Write the primary output here instead of standard output
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Residual, norming and orthogonality tolerance for `verify`
    #[arg(long, global = true)]
    pub tol: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Model eigenvalues and norming constants
    Spectrum {
        #[arg(long, value_enum, default_value = "alpha0")]
        boundary: BoundaryName,
        #[arg(long, allow_negative_numbers = true)]
        k_min: i64,
        #[arg(long, allow_negative_numbers = true)]
        k_max: i64,
    },
    /// One eigenfunction, of the model or of a perturbed operator
    Eigenfunction {
        /// Model index, or the eigenvalue of an addition
        #[arg(allow_negative_numbers = true)]
        index: String,
        #[arg(long)]
        plan: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "alpha0")]
        boundary: BoundaryName,
    },
    /// Synthesize a potential from a plan file
    Perturb {
        plan: PathBuf,
        /// Also export this eigenfunction (repeatable); needs --out
        #[arg(long = "eigenfunction", allow_negative_numbers = true)]
        eigenfunctions: Vec<String>,
        /// Write the plan with its resolved spectral data as JSON
        #[arg(long)]
        echo: Option<PathBuf>,
    },
    /// Check a plan end to end
    Verify {
        plan: PathBuf,
        /// Replay a potential file (x,p,q) instead of the synthesized one
        #[arg(long)]
        potential: Option<PathBuf>,
        /// Highest model index checked individually
        #[arg(long, default_value_t = 4)]
        max_index: i64,
    },
    /// Miss-distance scan over an eigenvalue range
    Scan {
        /// Plan file, or `model`
        source: String,
        #[arg(long, allow_negative_numbers = true)]
        lo: f64,
        #[arg(long, allow_negative_numbers = true)]
        hi: f64,
        #[arg(long, default_value_t = 256)]
        samples: usize,
        /// Boundary condition for `model`
        #[arg(long, value_enum, default_value = "alpha0")]
        boundary: BoundaryName,
    },
}

/// A table with named columns, written as CSV or aligned text.
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self { columns: columns.to_vec(), rows: Vec::new() }
    }

    fn cell(&self, column: usize, v: f64) -> String {
        if self.columns[column] == "k" {
            format!("{}", v as i64)
        } else {
            format!("{v:.16e}")
        }
    }

    pub fn render(&self, format: Format) -> String {
        let mut s = String::new();
        match format {
            Format::Csv => {
                s.push_str(&self.columns.join(","));
                s.push('\n');
                for row in &self.rows {
                    let cells: Vec<String> = row.iter().enumerate().map(|(j, v)| self.cell(j, *v)).collect();
                    s.push_str(&cells.join(","));
                    s.push('\n');
                }
            }
            Format::Text => {
                for c in &self.columns {
                    let _ = write!(s, "{c:>24}");
                }
                s.push('\n');
                for row in &self.rows {
                    for (j, v) in row.iter().enumerate() {
                        let _ = write!(s, "{:>24}", self.cell(j, *v));
                    }
                    s.push('\n');
                }
            }
        }
        s
    }
}

pub fn parse_index(s: &str) -> CliResult<EigenIndex> {
    if let Ok(k) = s.parse::<i64>() {
        return Ok(EigenIndex::Model(k));
    }
    match s.parse::<f64>() {
        Ok(mu) if mu.is_finite() => Ok(EigenIndex::Added(mu)),
        _ => Err(CliError::new(EXIT_BAD_ARGS, format!("index {s:?} is neither an integer nor a number"))),
    }
}

fn read_file(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::new(EXIT_BAD_ARGS, format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    std::fs::write(path, contents).map_err(|e| CliError::new(EXIT_BAD_ARGS, format!("{}: {e}", path.display())))
}

fn load_plan(path: &Path) -> CliResult<(PlanDocument, PerturbationPlan)> {
    let doc = PlanDocument::parse(&read_file(path)?)?;
    let plan = doc.to_plan()?;
    Ok((doc, plan))
}

fn make_grid(global: &GlobalArgs, doc: Option<&PlanDocument>) -> CliResult<Arc<Grid>> {
    let spec = doc.and_then(|d| d.grid);
    let x_max = global.grid_max.or(spec.map(|g| g.x_max)).unwrap_or(DEFAULT_GRID_MAX);
    let step = global.grid_step.or(spec.map(|g| g.step)).unwrap_or(DEFAULT_GRID_STEP);
    Grid::uniform(x_max, step).map(Arc::new).map_err(CliError::from)
}

pub fn potential_table(grid: &Grid, p: &[f64], q: &[f64]) -> Table {
    let mut t = Table::new(&["x", "p", "q"]);
    t.rows = grid.nodes().iter().zip(p).zip(q).map(|((&x, &p), &q)| vec![x, p, q]).collect();
    t
}

pub fn trajectory_table(y: &VectorTrajectory) -> Table {
    let mut t = Table::new(&["x", "y1", "y2"]);
    t.rows = (0..y.len()).map(|k| vec![y.grid.nodes()[k], y.component1[k], y.component2[k]]).collect();
    t
}

/// Reads an `x,p,q` CSV written by `perturb`.
pub fn read_potential_csv(text: &str) -> CliResult<PotentialField> {
    let bad = |m: String| CliError::new(EXIT_BAD_ARGS, format!("potential file: {m}"));
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == "x,p,q" => {}
        other => return Err(bad(format!("expected header x,p,q, found {other:?}"))),
    }
    let (mut xs, mut ps, mut qs) = (Vec::new(), Vec::new(), Vec::new());
    for (n, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 3 {
            return Err(bad(format!("line {} has {} fields", n + 2, cells.len())));
        }
        let v = cells
            .iter()
            .map(|c| c.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| bad(format!("line {}: {e}", n + 2)))?;
        xs.push(v[0]);
        ps.push(v[1]);
        qs.push(v[2]);
    }
    let grid = Arc::new(Grid::from_nodes(xs).map_err(CliError::from)?);
    PotentialField::tabulated(grid, ps, qs, Provenance::Imported).map_err(CliError::from)
}

#[derive(Debug, Serialize)]
struct SpectrumEntry {
    index: String,
    lambda: f64,
    norming: f64,
}

#[derive(Debug, Serialize)]
struct RemovedEntry {
    k: i64,
    lambda: f64,
}

#[derive(Debug, Serialize)]
struct PlanEcho<'a> {
    plan: &'a PlanDocument,
    grid: GridSpec,
    spectrum: Vec<SpectrumEntry>,
    removed: Vec<RemovedEntry>,
}

const ECHO_MAX_INDEX: i64 = 4;

fn plan_echo(doc: &PlanDocument, op: &PerturbedOperator) -> CliResult<String> {
    let plan = op.plan();
    let grid = op.grid();
    let mut spectrum = Vec::new();
    let mut model_indices: Vec<i64> = (-ECHO_MAX_INDEX..=ECHO_MAX_INDEX).collect();
    model_indices.extend(plan.rescalings.keys().filter(|k| k.abs() > ECHO_MAX_INDEX));
    model_indices.sort_unstable();
    for k in model_indices.into_iter().filter(|k| !plan.removals.contains(k)) {
        let p = op.spectral_point(EigenIndex::Model(k))?;
        spectrum.push(SpectrumEntry { index: k.to_string(), lambda: p.lambda, norming: p.norming });
    }
    for a in &plan.additions {
        spectrum.push(SpectrumEntry { index: EigenIndex::Added(a.mu).to_string(), lambda: a.mu, norming: a.norming });
    }
    spectrum.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    let removed = plan
        .removals
        .iter()
        .map(|&k| Ok(RemovedEntry { k, lambda: half_axis_eigenvalue(k, plan.boundary)? }))
        .collect::<Result<Vec<_>, Error>>()?;
    let echo = PlanEcho {
        plan: doc,
        grid: GridSpec { x_max: grid.x_max(), step: grid.uniform_step().unwrap_or(f64::NAN) },
        spectrum,
        removed,
    };
    let mut s = serde_json::to_string_pretty(&echo).map_err(|e| CliError::new(EXIT_SYNTHESIS, e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn eigenfunction_path(out: &Path, index: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = out.extension().map(|e| format!(".{}", e.to_string_lossy())).unwrap_or_default();
    out.with_file_name(format!("{stem}_eig_{index}{ext}"))
}

struct Io<'a> {
    stdout: &'a mut dyn Write,
    stderr: &'a mut dyn Write,
}

impl Io<'_> {
    fn primary(&mut self, out: Option<&Path>, text: &str) -> CliResult<()> {
        match out {
            Some(path) => write_file(path, text),
            None => self.stdout.write_all(text.as_bytes()).map_err(|e| CliError::new(EXIT_BAD_ARGS, e.to_string())),
        }
    }
}

fn run_command(cli: &Cli, io: &mut Io<'_>) -> CliResult<i32> {
    let g = &cli.global;
    match &cli.command {
        Command::Spectrum { boundary, k_min, k_max } => {
            if k_min > k_max {
                return Err(CliError::new(EXIT_BAD_ARGS, format!("k-min {k_min} exceeds k-max {k_max}")));
            }
            let points = model_spectrum((*boundary).into(), *k_min, *k_max)?;
            let mut t = Table::new(&["k", "lambda", "norming"]);
            t.rows = (*k_min..=*k_max).zip(&points).map(|(k, p)| vec![k as f64, p.lambda, p.norming]).collect();
            io.primary(g.out.as_deref(), &t.render(g.format))?;
        }
        Command::Eigenfunction { index, plan, boundary } => {
            let index = parse_index(index)?;
            let y = match plan {
                Some(path) => {
                    let (doc, plan) = load_plan(path)?;
                    let op = synthesize(&plan, &make_grid(g, Some(&doc))?)?;
                    op.eigenfunction(index)?
                }
                None => match index {
                    EigenIndex::Model(k) => model_eigenfunction(k, (*boundary).into(), &make_grid(g, None)?)?,
                    EigenIndex::Added(_) => {
                        return Err(CliError::new(EXIT_BAD_ARGS, "added eigenvalues need --plan"));
                    }
                },
            };
            io.primary(g.out.as_deref(), &trajectory_table(&y).render(g.format))?;
        }
        Command::Perturb { plan, eigenfunctions, echo } => {
            let (doc, plan) = load_plan(plan)?;
            let indices = eigenfunctions.iter().map(|s| parse_index(s).map(|i| (s, i))).collect::<CliResult<Vec<_>>>()?;
            if !indices.is_empty() && g.out.is_none() {
                return Err(CliError::new(EXIT_BAD_ARGS, "eigenfunction export needs --out"));
            }
            let op = synthesize(&plan, &make_grid(g, Some(&doc))?)?;
            let (p, q) = op.potential_samples()?;
            io.primary(g.out.as_deref(), &potential_table(op.grid(), &p, &q).render(g.format))?;
            if let Some(out) = &g.out {
                for (name, index) in indices {
                    let y = op.eigenfunction(index)?;
                    write_file(&eigenfunction_path(out, name), &trajectory_table(&y).render(g.format))?;
                }
            }
            if let Some(path) = echo {
                write_file(path, &plan_echo(&doc, &op)?)?;
            }
        }
        Command::Verify { plan, potential, max_index } => {
            let (doc, plan) = load_plan(plan)?;
            let op = synthesize(&plan, &make_grid(g, Some(&doc))?)?;
            let field = match potential {
                Some(path) => read_potential_csv(&read_file(path)?)?,
                None => op.potential_field()?,
            };
            let mut options = VerifyOptions { max_index: *max_index, ..VerifyOptions::default() };
            if let Some(tol) = g.tol {
                if !(tol > 0.0) {
                    return Err(CliError::new(EXIT_BAD_ARGS, format!("tolerance {tol} must be positive")));
                }
                options.residual = tol;
                options.norming = tol;
                options.orthogonality = tol;
            }
            let report = verify_with_potential(&op, &field, &options)?;
            let mut text = String::new();
            for c in &report.checks {
                let status = if c.pass { "PASS" } else { "FAIL" };
                let _ = writeln!(text, "{status} {} value={:.6e} tol={:.1e}", c.name, c.value, c.tolerance);
            }
            let failed = report.failures().count();
            let _ = writeln!(text, "{} of {} checks passed", report.checks.len() - failed, report.checks.len());
            io.stdout.write_all(text.as_bytes()).map_err(|e| CliError::new(EXIT_BAD_ARGS, e.to_string()))?;
            if let Some(out) = &g.out {
                let mut json = serde_json::to_string_pretty(&report).map_err(|e| CliError::new(EXIT_SYNTHESIS, e.to_string()))?;
                json.push('\n');
                write_file(out, &json)?;
            }
            if failed > 0 {
                for c in report.failures() {
                    let _ = writeln!(io.stderr, "failed check: {}", c.name);
                }
                return Ok(EXIT_CHECK_FAILED);
            }
        }
        Command::Scan { source, lo, hi, samples, boundary } => {
            if !(lo < hi) {
                return Err(CliError::new(EXIT_BAD_ARGS, format!("empty range [{lo}, {hi}]")));
            }
            let (field, bc) = if source == "model" {
                (PotentialField::model(), (*boundary).into())
            } else {
                let (doc, plan) = load_plan(Path::new(source))?;
                let op = synthesize(&plan, &make_grid(g, Some(&doc))?)?;
                (op.potential_field()?, plan.boundary)
            };
            let scan = spectrum_scan(&field, bc, *lo, *hi, *samples)?;
            let mut curve = Table::new(&["lambda", "miss"]);
            curve.rows = scan.lambdas.iter().zip(&scan.miss).map(|(&l, &m)| vec![l, m]).collect();
            let mut detected = Table::new(&["lambda", "miss"]);
            detected.rows = scan.detected.iter().zip(&scan.detected_miss).map(|(&l, &m)| vec![l, m]).collect();
            match &g.out {
                Some(path) => {
                    write_file(path, &curve.render(g.format))?;
                    io.primary(None, &detected.render(g.format))?;
                }
                None => {
                    io.primary(None, &curve.render(g.format))?;
                    let list: Vec<String> = scan.detected.iter().map(|l| format!("{l:.10}")).collect();
                    let _ = writeln!(io.stderr, "detected: [{}]", list.join(", "));
                }
            }
        }
    }
    Ok(EXIT_OK)
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_BAD_ARGS } else { EXIT_OK };
            let rendered = e.render().to_string();
            if e.use_stderr() {
                let _ = stderr.write_all(rendered.as_bytes());
            } else {
                let _ = stdout.write_all(rendered.as_bytes());
            }
            return code;
        }
    };
    let mut io = Io { stdout, stderr };
    match run_command(&cli, &mut io) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(io.stderr, "error: {}", e.message);
            e.code
        }
    }
}

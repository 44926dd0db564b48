//! `scalcurv`: command-line front end for the verification engine.
//!
//! Exit codes: 0 success, 1 verification failure, 2 invalid input or usage,
//! 3 non-convergence.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use scalcurv_core::constants::verify_identities;
use scalcurv_core::decomposition::{decomposition_grid, project_to_bubbles, AnalyticEnsemble, ProjectOptions};
use scalcurv_core::expansion::{error_budget, reduced_energy, reduced_gradient, ReducedEnergy, ReducedGradient};
use scalcurv_core::geometry::find_critical_points;
use scalcurv_core::oracle::{direct_energy, direct_energy_estimate, oracle_grid};
use scalcurv_core::scan::{scan, ScanOptions, Scenario};
use scalcurv_core::solver::{
    newton_refine, predict, sigma_solve, PredictionSet, RefineOptions, RefineStatus, Refinement, SigmaSolution,
};
use scalcurv_core::{
    AuditStatus, Bubble, Configuration, ConstantTable, Constants, CurvatureField, Error, GridSpec, SpherePoint,
};

#[derive(Parser)]
#[command(name = "scalcurv", version, about = "Numerical checks for concentrating bubbles of the prescribed scalar curvature problem on S^n")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Text,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Dump the table of named constants.
    Constants {
        #[arg(long)]
        dim: usize,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Audit identities between the constants; exits 1 on any FAIL line.
    VerifyConstants {
        #[arg(long)]
        dim: usize,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long, value_enum, default_value = "text")]
        format: ReportFormat,
    },
    /// Reduced energy, gradient and error budget of a configuration.
    Expand {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        gradient: bool,
    },
    /// Direct quadrature of the energy.
    Oracle {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 4)]
        level: usize,
    },
    /// Direct against reduced energy along a schedule of concentration scales.
    Compare {
        #[arg(long)]
        config: PathBuf,
        /// Values for the first bubble; the others keep their ratio to it.
        #[arg(long, value_delimiter = ',', required = true)]
        lambda_schedule: Vec<f64>,
        #[arg(long, default_value_t = 4)]
        level: usize,
    },
    /// Predict and refine concentrating configurations at critical points of K.
    Solve {
        /// Field file: either a bare field or an object with a `field` member.
        #[arg(long)]
        config: PathBuf,
        /// `auto` for every blow-up candidate, or points as `x1,...,xm;y1,...,ym`.
        #[arg(long, default_value = "auto")]
        points: String,
        #[arg(long)]
        tau: f64,
        #[arg(long)]
        dim: usize,
    },
    /// Sweep degenerate configurations and report the gradient ratio.
    Scan {
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        tau: f64,
        /// Field file, as for `solve`.
        #[arg(long)]
        k: PathBuf,
        /// Grid points per axis.
        #[arg(long, default_value_t = 12)]
        points: usize,
        /// Write the rows here and the summary to stdout instead of stderr.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Best approximation of an ensemble by q bubbles.
    Decompose {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        q: usize,
        #[arg(long, default_value_t = 3)]
        level: usize,
    },
}

/// Failure of a subcommand, carrying its exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NonConvergence(_) | Error::NonConvergent(_) | Error::LeftRegime(_) => 3,
            _ => 2,
        };
        Self { code, message: e.to_string() }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Self::input(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Self::input(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Self::input(e.to_string())
    }
}

type Outcome = std::result::Result<u8, Failure>;

/// Configuration file: a field plus an optional bubble configuration.
#[derive(Deserialize)]
struct Problem {
    n: usize,
    #[serde(default)]
    tau: f64,
    field: CurvatureField,
    #[serde(default)]
    bubbles: Vec<Bubble>,
}

impl Problem {
    fn configuration(&self) -> Result<Configuration, Failure> {
        if self.field.dim() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: self.field.dim() }.into());
        }
        if self.bubbles.is_empty() {
            return Err(Failure::input("configuration has no bubbles"));
        }
        Ok(Configuration::new(self.n, self.tau, self.bubbles.clone())?)
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum FieldFile {
    Wrapped { field: CurvatureField },
    Bare(CurvatureField),
}

#[derive(Deserialize)]
struct DecomposeInput {
    #[serde(flatten)]
    ensemble: AnalyticEnsemble,
    /// Starting configuration; defaults to the ensemble's own bubbles.
    #[serde(default)]
    init: Option<Vec<Bubble>>,
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, Failure> {
    serde_json::from_str(&read(path)?).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn read_field(path: &Path, dim: usize) -> Result<CurvatureField, Failure> {
    let field = match read_json::<FieldFile>(path)? {
        FieldFile::Wrapped { field } | FieldFile::Bare(field) => field,
    };
    if field.dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: field.dim() }.into());
    }
    Ok(field)
}

fn print_json<T: Serialize>(value: &T) -> Result<(), Failure> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn constants_cmd(dim: usize, format: Format) -> Outcome {
    let table = ConstantTable::new(dim)?;
    match format {
        Format::Json => print_json(&table)?,
        Format::Csv => {
            let mut w = csv::Writer::from_writer(io::stdout().lock());
            w.write_record(["name", "value", "closed_form", "chain"])?;
            for (name, e) in &table.entries {
                w.write_record([name.as_str(), &e.value.to_string(), &e.closed_form.to_string(), &e.chain])?;
            }
            w.flush()?;
        }
    }
    Ok(0)
}

fn verify_cmd(dim: usize, tol: f64, format: ReportFormat) -> Outcome {
    let report = verify_identities(dim, tol)?;
    match format {
        ReportFormat::Json => print_json(&report)?,
        ReportFormat::Text => {
            let mut out = io::stdout().lock();
            for line in &report.lines {
                let status = match line.status {
                    AuditStatus::Pass => "PASS",
                    AuditStatus::Fail => "FAIL",
                    AuditStatus::Flag => "FLAG",
                };
                let values: Vec<String> = line.values.iter().map(|(k, v)| format!("{k}={v:.12e}")).collect();
                writeln!(out, "{status} {}: rel {:.3e} [{}]", line.label, line.relative_discrepancy, values.join(", "))?;
            }
        }
    }
    Ok(if report.ok() { 0 } else { 1 })
}

#[derive(Serialize)]
struct Expansion {
    energy: ReducedEnergy,
    #[serde(skip_serializing_if = "Option::is_none")]
    gradient: Option<ReducedGradient>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gradient_norm: Option<f64>,
    error_budget: f64,
}

fn expand_cmd(path: &Path, with_gradient: bool) -> Outcome {
    let problem: Problem = read_json(path)?;
    let cfg = problem.configuration()?;
    let c = Constants::new(cfg.n)?;
    let gradient = if with_gradient { Some(reduced_gradient(&cfg, &problem.field, &c)?) } else { None };
    print_json(&Expansion {
        energy: reduced_energy(&cfg, &problem.field, &c)?,
        gradient_norm: gradient.as_ref().map(ReducedGradient::norm),
        gradient,
        error_budget: error_budget(&cfg, &problem.field)?,
    })?;
    Ok(0)
}

fn oracle_cmd(path: &Path, level: usize) -> Outcome {
    let problem: Problem = read_json(path)?;
    let cfg = problem.configuration()?;
    print_json(&direct_energy_estimate(&cfg, &problem.field, level)?)?;
    Ok(0)
}

fn compare_cmd(path: &Path, schedule: &[f64], level: usize) -> Outcome {
    let problem: Problem = read_json(path)?;
    let base = problem.configuration()?;
    let c = Constants::new(base.n)?;
    let mut w = csv::Writer::from_writer(io::stdout().lock());
    w.write_record(["lambda", "J_direct", "J_reduced", "gap", "budget", "ratio"])?;
    for &lambda in schedule {
        if lambda.is_nan() || lambda <= 0.0 {
            return Err(Error::NonpositiveLambda(lambda).into());
        }
        let mut cfg = base.clone();
        let factor = lambda / base.bubbles[0].lambda;
        for b in &mut cfg.bubbles {
            b.lambda *= factor;
        }
        let grid = oracle_grid(&cfg, &problem.field, GridSpec::new(level))?;
        let jd = direct_energy(&cfg, &problem.field, &grid)?.j;
        let jr = reduced_energy(&cfg, &problem.field, &c)?.value;
        let gap = (jd - jr).abs();
        // The budget is relative to J.
        let budget = jr * error_budget(&cfg, &problem.field)?;
        w.serialize((lambda, jd, jr, gap, budget, gap / budget))?;
    }
    w.flush()?;
    Ok(0)
}

fn parse_points(spec: &str, field: &CurvatureField) -> Result<Vec<SpherePoint>, Failure> {
    if spec.trim() == "auto" {
        let inv = find_critical_points(field)?;
        let pts: Vec<SpherePoint> = inv.candidates().into_iter().map(|p| p.location.clone()).collect();
        if pts.is_empty() {
            return Err(Error::NotBlowupCandidate("K has no critical point with negative Laplacian".into()).into());
        }
        return Ok(pts);
    }
    spec.split(';')
        .map(|chunk| {
            let coords = chunk
                .split(',')
                .map(|s| s.trim().parse::<f64>().map_err(|e| Failure::input(format!("point `{chunk}`: {e}"))))
                .collect::<Result<Vec<f64>, Failure>>()?;
            if coords.len() != field.dim() + 1 {
                return Err(Error::DimensionMismatch { expected: field.dim() + 1, found: coords.len() }.into());
            }
            Ok(SpherePoint::normalized(coords)?)
        })
        .collect()
}

#[derive(Serialize)]
struct SolveReport {
    prediction: PredictionSet,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma: Option<SigmaSolution>,
    refinement: Refinement,
}

fn solve_cmd(path: &Path, points: &str, tau: f64, dim: usize) -> Outcome {
    let field = read_field(path, dim)?;
    let pts = parse_points(points, &field)?;
    let prediction = predict(&field, &pts, tau)?;
    let sigma = if dim == 4 { Some(sigma_solve(&field, &pts)?) } else { None };
    let refinement = newton_refine(&prediction.config, &field, RefineOptions::default())?;
    let code = if refinement.status == RefineStatus::Converged { 0 } else { 3 };
    if code != 0 {
        eprintln!("refinement {:?}: {}", refinement.status, refinement.message);
    }
    print_json(&SolveReport { prediction, sigma, refinement })?;
    Ok(code)
}

fn scan_cmd(scenario: &str, dim: usize, tau: f64, k: &Path, points: usize, csv_path: Option<&Path>) -> Outcome {
    let scenario: Scenario = scenario.parse()?;
    let field = read_field(k, dim)?;
    if points == 0 {
        return Err(Failure::input("--points must be positive"));
    }
    let mut opts = ScanOptions::new(tau);
    opts.points = points;
    let report = scan(scenario, &field, &opts)?;
    let write_rows = |w: &mut dyn Write| -> Result<(), Failure> {
        let mut w = csv::Writer::from_writer(w);
        let mut header: Vec<&str> = scenario.params().to_vec();
        header.extend(["gradient_norm", "lower_bound", "ratio"]);
        w.write_record(&header)?;
        for row in &report.rows {
            let mut rec: Vec<String> = row.params.iter().map(f64::to_string).collect();
            rec.extend([row.gradient_norm, row.lower_bound, row.ratio].iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    };
    let summary = serde_json::to_string_pretty(&report.summary())?;
    match csv_path {
        Some(p) => {
            let mut f = fs::File::create(p).map_err(|e| Failure::input(format!("{}: {e}", p.display())))?;
            write_rows(&mut f)?;
            print_json(&report.summary())?;
        }
        None => {
            write_rows(&mut io::stdout().lock())?;
            eprintln!("{summary}");
        }
    }
    Ok(0)
}

fn decompose_cmd(path: &Path, q: usize, level: usize) -> Outcome {
    let input: DecomposeInput = read_json(path)?;
    let u = input.ensemble;
    u.validate()?;
    let init = input.init.unwrap_or_else(|| u.bubbles.clone());
    if init.len() != q {
        return Err(Failure::input(format!("q = {q} but {} initial bubbles were given", init.len())));
    }
    let init = Configuration::new(u.n, 0.0, init)?;
    let grid = decomposition_grid(&u, &init, GridSpec::new(level))?;
    let r = project_to_bubbles(&u, q, &init, &grid, ProjectOptions::default())?;
    if let Some(w) = &r.local_min_warning {
        eprintln!("warning: {w}");
    }
    print_json(&r)?;
    Ok(0)
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Constants { dim, format } => constants_cmd(dim, format),
        Command::VerifyConstants { dim, tol, format } => verify_cmd(dim, tol, format),
        Command::Expand { config, gradient } => expand_cmd(&config, gradient),
        Command::Oracle { config, level } => oracle_cmd(&config, level),
        Command::Compare { config, lambda_schedule, level } => compare_cmd(&config, &lambda_schedule, level),
        Command::Solve { config, points, tau, dim } => solve_cmd(&config, &points, tau, dim),
        Command::Scan { scenario, dim, tau, k, points, csv } => scan_cmd(&scenario, dim, tau, &k, points, csv.as_deref()),
        Command::Decompose { input, q, level } => decompose_cmd(&input, q, level),
    }
}

fn main() -> ExitCode {
    // clap exits with 2 on usage errors.
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

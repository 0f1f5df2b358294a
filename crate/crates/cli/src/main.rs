//! `weakot`: solve and certify weak optimal transport instances from
//! the command line.
//!
//! Subcommands map one-to-one onto the library entry points: `solve`
//! (primal solver), `dual` (duality gap), `monotone` (subset
//! redistribution check), `cvxorder` (convex-order dominance),
//! `project` (quadratic projection onto the convex-order cone), and
//! `lift-check` (lifted-plan identities). Inputs are JSON files, and
//! reports go to stdout in JSON (default) or as a flat CSV table.
//!
//! Exit codes: 0 success, 1 negative verdict from a check, 2 input
//! error, 3 solver failed to certify its tolerance. Identical argv and
//! input files produce byte-identical reports.

mod io;
mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use weakot_core::costs::CostFunction;
use weakot_core::measures::DiscreteMeasure;
use weakot_core::{duality, monotonicity, order, weak_solver};
use weakot_core::Error as CoreError;

use crate::io::{CouplingFile, MeasureFile, PotentialFile};
use crate::report::Config;

const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_CONVERGENCE: u8 = 3;

/// Restart count behind `solve`; the spread of the restarts' barycentric
/// maps is reported as `map_deviation`.
const SOLVE_RESTARTS: usize = 5;

/// Default target for the duality gap and the checker thresholds.
const DEFAULT_CHECK_TOL: f64 = 1e-6;

/// Ascent budget for `dual`.
const DEFAULT_DUAL_ITER: usize = 20_000;

/// Slack for the Jensen contraction verdict in `lift-check`.
const JENSEN_SLACK: f64 = 1e-9;

/// A run that cannot produce a report: an exit code plus a message for
/// stderr. Negative verdicts are not failures; they still report.
#[derive(Debug)]
pub struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }

    fn internal(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_CONVERGENCE,
            message: message.into(),
        }
    }

    fn from_core(err: CoreError) -> Self {
        let code = match &err {
            CoreError::InvalidInput(_)
            | CoreError::DimensionMismatch { .. }
            | CoreError::SupportMismatch(_)
            | CoreError::InstanceTooLarge { .. }
            | CoreError::MissingLipschitzBound => EXIT_INPUT,
            CoreError::NumericalFailure(_)
            | CoreError::ConvergenceFailure { .. }
            | CoreError::DualConvergenceFailure { .. }
            | CoreError::PostconditionFailure(_) => EXIT_CONVERGENCE,
        };
        Failure {
            code,
            message: err.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

impl Format {
    fn name(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

#[derive(Parser)]
#[command(
    name = "weakot",
    version,
    about = "Solve and certify weak optimal transport between finitely supported measures"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the weak transport problem between two measures.
    Solve(SolveArgs),
    /// Solve, run dual ascent, and report the duality gap.
    Dual(DualArgs),
    /// Check a coupling for subset-redistribution optimality.
    Monotone(MonotoneArgs),
    /// Decide whether the first measure is dominated in convex order.
    Cvxorder(CvxorderArgs),
    /// Project the first measure onto the convex-order cone under the second.
    Project(ProjectArgs),
    /// Verify lifted-plan identities: intensity, admissibility, Jensen.
    LiftCheck(LiftCheckArgs),
}

#[derive(Args)]
struct SolveArgs {
    /// Source measure JSON.
    #[arg(long, value_name = "PATH")]
    mu: PathBuf,
    /// Target measure JSON.
    #[arg(long, value_name = "PATH")]
    nu: PathBuf,
    /// Cost spec: barycentric:quadratic, barycentric:euclidean,
    /// barycentric:power:<t>, or barycentric:power together with --t.
    #[arg(long, value_name = "SPEC")]
    cost: String,
    /// Exponent for a bare barycentric:power cost.
    #[arg(long, value_name = "REAL")]
    t: Option<f64>,
    /// Certified optimality gap to reach; defaults depend on the cost.
    #[arg(long, value_name = "REAL")]
    tol: Option<f64>,
    /// Iteration budget per restart.
    #[arg(long, value_name = "INT")]
    max_iter: Option<usize>,
    /// Seed for the restart sampler.
    #[arg(long, value_name = "INT", default_value_t = 0)]
    seed: u64,
    /// Report format.
    #[arg(long, value_name = "json|csv", default_value = "json")]
    format: Format,
}

#[derive(Args)]
struct DualArgs {
    /// Source measure JSON.
    #[arg(long, value_name = "PATH")]
    mu: PathBuf,
    /// Target measure JSON.
    #[arg(long, value_name = "PATH")]
    nu: PathBuf,
    /// Cost spec; see `solve --help`.
    #[arg(long, value_name = "SPEC")]
    cost: String,
    /// Exponent for a bare barycentric:power cost.
    #[arg(long, value_name = "REAL")]
    t: Option<f64>,
    /// Evaluate this potential instead of running dual ascent.
    #[arg(long, value_name = "PATH")]
    psi: Option<PathBuf>,
    /// Lipschitz bound imposed on the potential; with a bound tighter
    /// than the instance requires, the reported gap stays positive.
    #[arg(long = "L", value_name = "REAL")]
    l: Option<f64>,
    /// Duality gap to certify.
    #[arg(long, value_name = "REAL")]
    tol: Option<f64>,
    /// Ascent iteration budget.
    #[arg(long, value_name = "INT")]
    max_iter: Option<usize>,
    /// Report format.
    #[arg(long, value_name = "json|csv", default_value = "json")]
    format: Format,
}

#[derive(Args)]
struct MonotoneArgs {
    /// Coupling JSON to check.
    #[arg(long, value_name = "PATH")]
    pi: PathBuf,
    /// Cost spec; see `solve --help`.
    #[arg(long, value_name = "SPEC")]
    cost: String,
    /// Exponent for a bare barycentric:power cost.
    #[arg(long, value_name = "REAL")]
    t: Option<f64>,
    /// Largest subset size to enumerate (2 to 4).
    #[arg(long = "N", value_name = "INT", default_value_t = 3)]
    n: usize,
    /// Improvement threshold below which a subset is not flagged.
    #[arg(long, value_name = "REAL")]
    tol: Option<f64>,
    /// Report format.
    #[arg(long, value_name = "json|csv", default_value = "json")]
    format: Format,
}

#[derive(Args)]
struct CvxorderArgs {
    /// Candidate dominated measure JSON.
    #[arg(long, value_name = "PATH")]
    mu: PathBuf,
    /// Candidate dominating measure JSON.
    #[arg(long, value_name = "PATH")]
    nu: PathBuf,
    /// Report format.
    #[arg(long, value_name = "json|csv", default_value = "json")]
    format: Format,
}

#[derive(Args)]
struct ProjectArgs {
    /// Measure to project, JSON.
    #[arg(long, value_name = "PATH")]
    mu: PathBuf,
    /// Measure whose convex-order cone is the constraint, JSON.
    #[arg(long, value_name = "PATH")]
    nu: PathBuf,
    /// Tolerance for the postcondition checks.
    #[arg(long, value_name = "REAL")]
    tol: Option<f64>,
    /// Report format.
    #[arg(long, value_name = "json|csv", default_value = "json")]
    format: Format,
}

#[derive(Args)]
struct LiftCheckArgs {
    /// Lifted plan JSON.
    #[arg(long, value_name = "PATH")]
    pi: PathBuf,
    /// Check admissibility against this source measure (needs --nu).
    #[arg(long, value_name = "PATH")]
    mu: Option<PathBuf>,
    /// Check admissibility against this target measure (needs --mu).
    #[arg(long, value_name = "PATH")]
    nu: Option<PathBuf>,
    /// Also compare lifted cost against the intensity's cost.
    #[arg(long, value_name = "SPEC")]
    cost: Option<String>,
    /// Exponent for a bare barycentric:power cost.
    #[arg(long, value_name = "REAL")]
    t: Option<f64>,
    /// Report format.
    #[arg(long, value_name = "json|csv", default_value = "json")]
    format: Format,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok((output, code)) => {
            print!("{output}");
            ExitCode::from(code)
        }
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}

fn run(command: Command) -> Result<(String, u8), Failure> {
    match command {
        Command::Solve(args) => run_solve(args),
        Command::Dual(args) => run_dual(args),
        Command::Monotone(args) => run_monotone(args),
        Command::Cvxorder(args) => run_cvxorder(args),
        Command::Project(args) => run_project(args),
        Command::LiftCheck(args) => run_lift_check(args),
    }
}

/// Resolve a cost spec string plus the optional --t exponent. A bare
/// `barycentric:power` requires --t; every other spec rejects it.
fn resolve_cost(spec: &str, t: Option<f64>) -> Result<CostFunction, Failure> {
    if spec == "barycentric:power" {
        let t = t.ok_or_else(|| {
            Failure::input("--cost barycentric:power needs --t <exponent>")
        })?;
        return CostFunction::barycentric_power(t).map_err(Failure::from_core);
    }
    if t.is_some() {
        return Err(Failure::input(
            "--t is only meaningful with --cost barycentric:power",
        ));
    }
    spec.parse::<CostFunction>().map_err(Failure::from_core)
}

fn shown(path: &Path) -> String {
    path.display().to_string()
}

#[derive(Serialize)]
struct SolveReport {
    value: f64,
    fw_gap: f64,
    certified_lower_bound: f64,
    iterations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    map_deviation: Option<f64>,
    coupling: CouplingFile,
}

fn run_solve(args: SolveArgs) -> Result<(String, u8), Failure> {
    let mu = io::load_measure(&args.mu)?;
    let nu = io::load_measure(&args.nu)?;
    let cost = resolve_cost(&args.cost, args.t)?;
    let tol = args.tol.unwrap_or_else(|| weak_solver::default_tol(&cost));
    let max_iter = args.max_iter.unwrap_or(weak_solver::DEFAULT_MAX_ITER);
    let solution =
        weak_solver::solve_with_restarts(&mu, &nu, &cost, tol, max_iter, SOLVE_RESTARTS, args.seed)
            .map_err(Failure::from_core)?;
    let config = Config {
        subcommand: "solve",
        mu: Some(shown(&args.mu)),
        nu: Some(shown(&args.nu)),
        cost: Some(args.cost),
        t: args.t,
        tol: Some(tol),
        max_iter: Some(max_iter),
        seed: Some(args.seed),
        format: args.format.name(),
        ..Config::default()
    };
    let body = SolveReport {
        value: solution.value(),
        fw_gap: solution.fw_gap(),
        certified_lower_bound: solution.certified_lower_bound(),
        iterations: solution.iterations(),
        map_deviation: solution.map_deviation(),
        coupling: CouplingFile::from_coupling(solution.coupling()),
    };
    Ok((report::render(&config, &body, args.format)?, 0))
}

#[derive(Serialize)]
struct DualReport {
    primal: f64,
    dual: f64,
    gap: f64,
    potential: PotentialFile,
}

fn run_dual(args: DualArgs) -> Result<(String, u8), Failure> {
    let mu = io::load_measure(&args.mu)?;
    let nu = io::load_measure(&args.nu)?;
    let cost = resolve_cost(&args.cost, args.t)?;
    let tol = args.tol.unwrap_or(DEFAULT_CHECK_TOL);
    let mut config = Config {
        subcommand: "dual",
        mu: Some(shown(&args.mu)),
        nu: Some(shown(&args.nu)),
        cost: Some(args.cost.clone()),
        t: args.t,
        l: args.l,
        tol: Some(tol),
        format: args.format.name(),
        ..Config::default()
    };

    let body = if let Some(psi_path) = &args.psi {
        config.psi = Some(shown(psi_path));
        let psi = io::load_potential(psi_path, args.l)?;
        let primal = best_primal(&mu, &nu, &cost, tol)?;
        let dual = duality::dual_value(&mu, &nu, &cost, &psi).map_err(Failure::from_core)?;
        DualReport {
            primal,
            dual,
            gap: primal - dual,
            potential: PotentialFile::from_potential(&psi),
        }
    } else {
        let max_iter = args.max_iter.unwrap_or(DEFAULT_DUAL_ITER);
        config.max_iter = Some(max_iter);
        if let Some(l) = args.l {
            let primal = best_primal(&mu, &nu, &cost, tol)?;
            let (potential, dual) =
                duality::maximize_dual(&mu, &nu, &cost, tol, max_iter, Some(l), None)
                    .map_err(Failure::from_core)?;
            DualReport {
                primal,
                dual,
                gap: primal - dual,
                potential: PotentialFile::from_potential(&potential),
            }
        } else {
            let report = duality::duality_gap(&mu, &nu, &cost, tol).map_err(Failure::from_core)?;
            DualReport {
                primal: report.primal(),
                dual: report.dual(),
                gap: report.gap(),
                potential: PotentialFile::from_potential(report.potential()),
            }
        }
    };
    Ok((report::render(&config, &body, args.format)?, 0))
}

/// Primal reference value at the same tightened tolerance the dual
/// routines use internally; the solver is deterministic, so this equals
/// the reference value a fresh `maximize_dual` computes for itself. A
/// stalled solve still yields its best value, which stays an upper
/// bound on the primal.
fn best_primal(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &CostFunction,
    tol: f64,
) -> Result<f64, Failure> {
    let solver_tol = if cost.is_quadratic() {
        (tol / 10.0).min(1e-10)
    } else {
        tol / 10.0
    };
    match weak_solver::solve(mu, nu, cost, solver_tol, weak_solver::DEFAULT_MAX_ITER) {
        Ok(solution) => Ok(solution.value()),
        Err(CoreError::ConvergenceFailure { solution, .. }) => Ok(solution.value()),
        Err(e) => Err(Failure::from_core(e)),
    }
}

#[derive(Serialize)]
struct ViolationReport {
    subset: Vec<usize>,
    redistribution: Vec<Vec<f64>>,
    old_cost: f64,
    new_cost: f64,
    improvement: f64,
}

#[derive(Serialize)]
struct MonotoneReport {
    passed: bool,
    checked_subsets: usize,
    max_inner_gap: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    violation: Option<ViolationReport>,
}

fn run_monotone(args: MonotoneArgs) -> Result<(String, u8), Failure> {
    let pi = io::load_coupling(&args.pi)?;
    let cost = resolve_cost(&args.cost, args.t)?;
    let tol = args.tol.unwrap_or(DEFAULT_CHECK_TOL);
    let report = monotonicity::check(&pi, &cost, args.n, tol).map_err(Failure::from_core)?;
    let config = Config {
        subcommand: "monotone",
        pi: Some(shown(&args.pi)),
        cost: Some(args.cost),
        t: args.t,
        n: Some(args.n),
        tol: Some(tol),
        format: args.format.name(),
        ..Config::default()
    };
    let body = MonotoneReport {
        passed: report.passed(),
        checked_subsets: report.checked_subsets(),
        max_inner_gap: report.max_inner_gap(),
        violation: report.worst_violation().map(|v| ViolationReport {
            subset: v.subset().to_vec(),
            redistribution: v.redistribution().to_vec(),
            old_cost: v.old_cost(),
            new_cost: v.new_cost(),
            improvement: v.improvement(),
        }),
    };
    let code = if body.passed { 0 } else { EXIT_CHECK_FAILED };
    Ok((report::render(&config, &body, args.format)?, code))
}

#[derive(Serialize)]
struct CvxorderReport {
    dominated: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    martingale_coupling: Option<CouplingFile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    separating_function: Option<Vec<f64>>,
}

fn run_cvxorder(args: CvxorderArgs) -> Result<(String, u8), Failure> {
    let mu = io::load_measure(&args.mu)?;
    let nu = io::load_measure(&args.nu)?;
    let certificate = order::check_convex_order(&mu, &nu).map_err(Failure::from_core)?;
    let config = Config {
        subcommand: "cvxorder",
        mu: Some(shown(&args.mu)),
        nu: Some(shown(&args.nu)),
        format: args.format.name(),
        ..Config::default()
    };
    let body = CvxorderReport {
        dominated: certificate.dominated(),
        martingale_coupling: certificate
            .martingale_coupling()
            .map(CouplingFile::from_coupling),
        separating_function: certificate.separating_function().map(<[f64]>::to_vec),
    };
    let code = if body.dominated { 0 } else { EXIT_CHECK_FAILED };
    Ok((report::render(&config, &body, args.format)?, code))
}

#[derive(Serialize)]
struct ChecksReport {
    convex_order: bool,
    value_mismatch: f64,
    value_tol: f64,
    lipschitz_slack: f64,
    lipschitz_tol: f64,
    passed: bool,
}

#[derive(Serialize)]
struct ProjectReport {
    mu_star: MeasureFile,
    #[serde(rename = "T")]
    map: [Vec<Vec<f64>>; 2],
    value: f64,
    checks: ChecksReport,
}

fn run_project(args: ProjectArgs) -> Result<(String, u8), Failure> {
    let mu = io::load_measure(&args.mu)?;
    let nu = io::load_measure(&args.nu)?;
    let tol = args.tol.unwrap_or(DEFAULT_CHECK_TOL);
    let projection = order::project_to_convex_order(&mu, &nu, tol).map_err(Failure::from_core)?;
    let config = Config {
        subcommand: "project",
        mu: Some(shown(&args.mu)),
        nu: Some(shown(&args.nu)),
        tol: Some(tol),
        format: args.format.name(),
        ..Config::default()
    };
    let sources = projection
        .map()
        .iter()
        .map(|(i, _)| mu.point(*i).to_vec())
        .collect();
    let images = projection.map().iter().map(|(_, t)| t.clone()).collect();
    let checks = projection.checks();
    let body = ProjectReport {
        mu_star: MeasureFile::from_measure(projection.mu_star()),
        map: [sources, images],
        value: projection.value(),
        checks: ChecksReport {
            convex_order: checks.convex_order(),
            value_mismatch: checks.value_mismatch(),
            value_tol: checks.value_tol(),
            lipschitz_slack: checks.lipschitz_slack(),
            lipschitz_tol: checks.lipschitz_tol(),
            passed: checks.passed(),
        },
    };
    Ok((report::render(&config, &body, args.format)?, 0))
}

#[derive(Serialize)]
struct LiftCheckReport {
    atoms: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    admissible: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lifted_cost: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    intensity_cost: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    jensen_gap: Option<f64>,
    intensity: CouplingFile,
}

fn run_lift_check(args: LiftCheckArgs) -> Result<(String, u8), Failure> {
    let plan = io::load_plan(&args.pi)?;
    let intensity = plan.intensity();
    let mut config = Config {
        subcommand: "lift-check",
        pi: Some(shown(&args.pi)),
        cost: args.cost.clone(),
        t: args.t,
        format: args.format.name(),
        ..Config::default()
    };

    let mut holds = true;
    let admissible = match (&args.mu, &args.nu) {
        (Some(mu_path), Some(nu_path)) => {
            config.mu = Some(shown(mu_path));
            config.nu = Some(shown(nu_path));
            let mu = io::load_measure(mu_path)?;
            let nu = io::load_measure(nu_path)?;
            let ok = plan.is_admissible(&mu, &nu);
            holds &= ok;
            Some(ok)
        }
        (None, None) => None,
        _ => {
            return Err(Failure::input(
                "--mu and --nu must be given together for the admissibility check",
            ))
        }
    };

    let (lifted_cost, intensity_cost, jensen_gap) = match &args.cost {
        Some(spec) => {
            let cost = resolve_cost(spec, args.t)?;
            let lifted = plan.cost(&cost).map_err(Failure::from_core)?;
            let through = weak_solver::evaluate(&intensity, &cost).map_err(Failure::from_core)?;
            let gap = lifted - through;
            holds &= gap >= -JENSEN_SLACK;
            (Some(lifted), Some(through), Some(gap))
        }
        None => {
            if args.t.is_some() {
                return Err(Failure::input("--t requires --cost"));
            }
            (None, None, None)
        }
    };

    let body = LiftCheckReport {
        atoms: plan.atoms().len(),
        admissible,
        lifted_cost,
        intensity_cost,
        jensen_gap,
        intensity: CouplingFile::from_coupling(&intensity),
    };
    let code = if holds { 0 } else { EXIT_CHECK_FAILED };
    Ok((report::render(&config, &body, args.format)?, code))
}

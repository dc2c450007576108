//! Command-line front end: solve scenario files and run the
//! acceptance suite. Output files are deterministic for a fixed seed;
//! exit codes classify failures (2 schema, 3 hypothesis, 4
//! convergence, 1 everything else).

use clap::{Args, Parser, Subcommand, ValueEnum};
use evolin::error::{Error, Result};
use evolin::harness::{
    causality_test, regularity_test, rho_independence_test, tail_bump, AgreementMetric,
    CheckReport, Scheme,
};
use evolin::material::Part;
use evolin::maxwell::{self, MaxwellProblem, MaxwellRun, StepMethod};
use evolin::monotone::monotonicity_probe;
use evolin::scenario::{load_scenario, LoadedScenario};
use evolin::solver::{qualify, solve, Problem, Route, SolveOptions, SolveReport};
use evolin::suite::{run_suite, SuiteOptions, BUDGET_SECONDS};
use evolin::Signal;
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "evolin",
    version,
    about = "Causal solvers for evolutionary inclusions on weighted time grids"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve a scenario file; writes solution.csv, report.json and
    /// convergence.csv into the output directory
    Run(RunArgs),
    /// Run the acceptance checks; writes report.json into the output
    /// directory
    Suite(SuiteArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file (JSON)
    file: PathBuf,
    /// Output directory; overrides EVOLIN_OUT (default: evolin_out)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Solver routes to run
    #[arg(long, value_enum, default_value_t = RoutesArg::Both)]
    routes: RoutesArg,
    /// Extra checks, comma separated:
    /// causality,rates,regularity,positivity,monotonicity,identities,all
    #[arg(long, value_delimiter = ',')]
    check: Vec<String>,
    /// Relative solver tolerance
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Seed for all sampled estimates
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SuiteArgs {
    /// Output directory; overrides EVOLIN_OUT (default: evolin_out)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Grid levels for the convergence check
    #[arg(long, default_value_t = 2)]
    grid_refine: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
}

/// `a` is the regularization-schedule route (resolvent splitting for
/// the field model), `b` the per-step stepper (Newton for the field
/// model).
#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RoutesArg {
    A,
    B,
    Both,
}

impl RoutesArg {
    fn labels(self) -> Vec<&'static str> {
        match self {
            RoutesArg::A => vec!["a"],
            RoutesArg::B => vec!["b"],
            RoutesArg::Both => vec!["a", "b"],
        }
    }
}

fn main() {
    let cli = Cli::parse();
    let code = match cli.cmd {
        Cmd::Run(args) => run_cmd(&args),
        Cmd::Suite(args) => suite_cmd(&args),
    };
    std::process::exit(code);
}

fn out_dir(flag: &Option<PathBuf>) -> PathBuf {
    flag.clone()
        .or_else(|| std::env::var_os("EVOLIN_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("evolin_out"))
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".to_string())
}

// --- report structures ----------------------------------------------

#[derive(Serialize)]
struct ErrorInfo {
    class: &'static str,
    exit_code: i32,
    message: String,
}

impl ErrorInfo {
    fn from(e: &Error) -> Self {
        let code = e.exit_code();
        ErrorInfo {
            class: match code {
                2 => "schema",
                3 => "hypothesis",
                4 => "convergence",
                _ => "error",
            },
            exit_code: code,
            message: e.to_string(),
        }
    }
}

#[derive(Serialize)]
struct Agreement {
    gap: f64,
    threshold: f64,
    passed: bool,
}

#[derive(Serialize)]
#[serde(untagged)]
enum RouteResult {
    Generic {
        c_est: f64,
        delta: f64,
        schedule_len: usize,
        outer_iters: usize,
        theta_final: f64,
        residual_final: f64,
        max_step_residual: f64,
        solution_norm: f64,
    },
    Field {
        max_inner_iters: usize,
        flux_mean_drift: f64,
        harmonic_flux_max: f64,
        power_balance_defect: f64,
        constitutive_defect: f64,
        removed_initial_flux_norm: f64,
        peak_edge_field: f64,
        peak_cell_field: f64,
        peak_flux: f64,
    },
}

#[derive(Serialize)]
struct RunReportJson {
    scenario: String,
    kind: &'static str,
    tol: f64,
    seed: u64,
    routes: Vec<&'static str>,
    /// Which route's trajectory solution.csv holds.
    solution_route: &'static str,
    results: BTreeMap<&'static str, RouteResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    agreement: Option<Agreement>,
    checks: Vec<CheckReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<ErrorInfo>,
}

// --- run subcommand -------------------------------------------------

fn run_cmd(args: &RunArgs) -> i32 {
    let dir = out_dir(&args.out);
    match execute_run(args, &dir) {
        Ok(report) => {
            let passed = report.checks.iter().all(|c| c.passed)
                && report.agreement.as_ref().is_none_or(|a| a.passed);
            println!(
                "{}: solved `{}` (routes {:?}), outputs in {}",
                if passed { "ok" } else { "check failure" },
                report.scenario,
                report.routes,
                dir.display()
            );
            i32::from(!passed)
        }
        Err(e) => {
            let code = e.exit_code();
            // A convergence failure still documents itself.
            if code == 4 {
                let report = RunReportJson {
                    scenario: file_stem(&args.file),
                    kind: "unknown",
                    tol: args.tol,
                    seed: args.seed,
                    routes: args.routes.labels(),
                    solution_route: "none",
                    results: BTreeMap::new(),
                    agreement: None,
                    checks: Vec::new(),
                    error: Some(ErrorInfo::from(&e)),
                };
                let _ = write_report(&dir, &report);
            }
            eprintln!("error: {e}");
            code
        }
    }
}

fn execute_run(args: &RunArgs, dir: &Path) -> Result<RunReportJson> {
    if !args.tol.is_finite() || args.tol <= 0.0 {
        return Err(Error::contract(format!("tolerance must be positive, got {}", args.tol)));
    }
    let text = std::fs::read_to_string(&args.file)?;
    let loaded = load_scenario(&text)?;
    std::fs::create_dir_all(dir)?;
    let report = match loaded.body {
        LoadedScenario::Generic(problem) => run_generic(args, dir, &loaded.name, &problem)?,
        LoadedScenario::Maxwell(problem) => run_field(args, dir, &loaded.name, &problem)?,
    };
    write_report(dir, &report)?;
    Ok(report)
}

fn write_report(dir: &Path, report: &RunReportJson) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    std::fs::write(dir.join("report.json"), text)?;
    Ok(())
}

fn route_of(label: &str) -> Route {
    if label == "a" {
        Route::YosidaGlobal
    } else {
        Route::Timestep
    }
}

fn run_generic(
    args: &RunArgs,
    dir: &Path,
    name: &str,
    problem: &Problem,
) -> Result<RunReportJson> {
    let sopts = SolveOptions { tol: args.tol, seed: args.seed, ..SolveOptions::default() };
    let labels = args.routes.labels();
    let mut results = BTreeMap::new();
    let mut reports: BTreeMap<&'static str, SolveReport> = BTreeMap::new();
    for label in &labels {
        let rep = solve(problem, route_of(label), &sopts)?;
        results.insert(
            *label,
            RouteResult::Generic {
                c_est: rep.c_est,
                delta: rep.delta,
                schedule_len: rep.lambda_schedule.len(),
                outer_iters: rep.outer_iters,
                theta_final: rep.theta_final,
                residual_final: rep.residual_final,
                max_step_residual: rep.max_step_residual,
                solution_norm: rep.u.weighted_norm(problem.weight()),
            },
        );
        reports.insert(*label, rep);
    }

    let agreement = if labels.len() == 2 {
        let ua = &reports["a"].u;
        let ub = &reports["b"].u;
        let weight = problem.weight();
        let gap =
            ua.sub(ub)?.weighted_norm(weight) / (1.0 + problem.f().weighted_norm(weight));
        let threshold = 5.0 * args.tol;
        Some(Agreement { gap, threshold, passed: gap <= threshold })
    } else {
        None
    };

    let solution_route = if labels.contains(&"b") { "b" } else { "a" };
    let solution = &reports[solution_route].u;
    write_signal_csv(&dir.join("solution.csv"), &[("u", solution)])?;
    write_schedule_csv(&dir.join("convergence.csv"), &reports)?;

    let checks = generic_checks(args, problem, &labels, &sopts)?;
    Ok(RunReportJson {
        scenario: name.to_string(),
        kind: "generic",
        tol: args.tol,
        seed: args.seed,
        routes: labels,
        solution_route,
        results,
        agreement,
        checks,
        error: None,
    })
}

fn generic_checks(
    args: &RunArgs,
    problem: &Problem,
    labels: &[&'static str],
    sopts: &SolveOptions,
) -> Result<Vec<CheckReport>> {
    let mut out = Vec::new();
    let grid = problem.grid();
    let kernel_law = problem.law().part(Part::M).as_convolution().is_some();
    let applicable = ["causality", "rates", "regularity", "positivity", "monotonicity"];
    for token in expand_checks(&args.check, &applicable)? {
        match token.as_str() {
            "causality" => {
                let cutoff = grid.start() + 0.75 * (grid.end() - grid.start());
                let bump = tail_bump(grid, cutoff, 0.3);
                for label in labels {
                    if *label == "b" && kernel_law {
                        continue;
                    }
                    let threshold = if *label == "b" { 1e-12 } else { 10.0 * args.tol };
                    let mut rep = causality_test(
                        problem,
                        Scheme::Route(route_of(label)),
                        cutoff,
                        &bump,
                        threshold,
                        sopts,
                    )?;
                    rep.name = format!("causality_{label}");
                    out.push(rep);
                }
            }
            "rates" => {
                let rho = problem.weight().rho();
                for label in labels {
                    if *label == "b" && kernel_law {
                        continue;
                    }
                    let (metric, threshold) = if *label == "b" {
                        (AgreementMetric::PointwiseMax, 1e-12)
                    } else {
                        (AgreementMetric::WeightedRelative, 10.0 * args.tol)
                    };
                    let mut rep = rho_independence_test(
                        problem,
                        Scheme::Route(route_of(label)),
                        (rho, 3.0 * rho),
                        metric,
                        threshold,
                        sopts,
                    )?;
                    rep.name = format!("rate_independence_{label}");
                    out.push(rep);
                }
            }
            "regularity" => {
                for label in labels {
                    if *label == "b" && kernel_law {
                        continue;
                    }
                    let mut rep = regularity_test(problem, route_of(label), sopts)?;
                    rep.name = format!("regularity_{label}");
                    out.push(rep);
                }
            }
            "positivity" => {
                let constants = qualify(problem, sopts)?;
                out.push(CheckReport {
                    name: "positivity".to_string(),
                    passed: !constants.positivity.is_violated(),
                    achieved: -constants.c_est,
                    threshold: 0.0,
                    detail: format!(
                        "coercivity constant c_est = {:.6e} (sampled minimum {:.6e})",
                        constants.c_est, constants.positivity.sampled
                    ),
                });
            }
            "monotonicity" => {
                let probe = monotonicity_probe(problem.relation(), 500, args.seed);
                out.push(CheckReport {
                    name: "monotonicity".to_string(),
                    passed: probe.passed,
                    achieved: -probe.min_pairing,
                    threshold: 1e-10,
                    detail: format!(
                        "smallest sampled resolvent pairing {:.3e} (must not be firmly negative)",
                        probe.min_pairing
                    ),
                });
            }
            other => {
                return Err(Error::contract(format!(
                    "check `{other}` does not apply to a generic scenario"
                )));
            }
        }
    }
    Ok(out)
}

/// Expands the requested check tokens. `all` stands for every check
/// that applies to the scenario kind at hand; naming an inapplicable
/// check explicitly is still an error, reported by the caller.
fn expand_checks(tokens: &[String], applicable: &[&str]) -> Result<Vec<String>> {
    const KNOWN: &[&str] = &[
        "causality",
        "rates",
        "regularity",
        "positivity",
        "monotonicity",
        "identities",
    ];
    let mut out = Vec::new();
    let push = |t: &str, out: &mut Vec<String>| {
        if !out.iter().any(|have| have == t) {
            out.push(t.to_string());
        }
    };
    for token in tokens {
        let token = token.trim();
        if token.is_empty() {
            continue;
        }
        if token == "all" {
            for k in applicable {
                push(k, &mut out);
            }
        } else if KNOWN.contains(&token) {
            push(token, &mut out);
        } else {
            return Err(Error::contract(format!(
                "unknown check `{token}`; known: {}, all",
                KNOWN.join(", ")
            )));
        }
    }
    Ok(out)
}

fn run_field(
    args: &RunArgs,
    dir: &Path,
    name: &str,
    problem: &MaxwellProblem,
) -> Result<RunReportJson> {
    let labels = args.routes.labels();
    // With both methods requested the inner tolerance tightens so the
    // cross-method agreement bound is attainable.
    let inner = if labels.len() == 2 { args.tol / 10.0 } else { args.tol };
    let mut results = BTreeMap::new();
    let mut runs: BTreeMap<&'static str, MaxwellRun> = BTreeMap::new();
    for label in &labels {
        let method = if *label == "a" {
            StepMethod::ResolventSplitting
        } else {
            StepMethod::Newton
        };
        let run = maxwell::run(problem, method, inner)?;
        let d = run.diagnostics;
        results.insert(
            *label,
            RouteResult::Field {
                max_inner_iters: d.max_inner_iters,
                flux_mean_drift: d.div_drift,
                harmonic_flux_max: d.harmonic_b_max,
                power_balance_defect: d.energy_imbalance,
                constitutive_defect: d.constitutive_defect,
                removed_initial_flux_norm: d.removed_b0_norm,
                peak_edge_field: run.e.max_abs(),
                peak_cell_field: run.h.max_abs(),
                peak_flux: run.b.max_abs(),
            },
        );
        runs.insert(*label, run);
    }

    let agreement = if labels.len() == 2 {
        let a = &runs["a"];
        let b = &runs["b"];
        let scale = 1.0 + b.h.max_abs().max(b.e.max_abs());
        let gap = a.h.max_abs_diff(&b.h)?.max(a.e.max_abs_diff(&b.e)?) / scale;
        let threshold = 5.0 * args.tol;
        Some(Agreement { gap, threshold, passed: gap <= threshold })
    } else {
        None
    };

    let solution_route = if labels.contains(&"b") { "b" } else { "a" };
    let solution = &runs[solution_route];
    write_signal_csv(
        &dir.join("solution.csv"),
        &[("e", &solution.e), ("h", &solution.h), ("b", &solution.b)],
    )?;
    write_field_convergence_csv(&dir.join("convergence.csv"), &labels, &runs)?;

    let mut checks = Vec::new();
    for token in expand_checks(&args.check, &["identities"])? {
        if token == "identities" {
            let idr = problem.operators().identity_report();
            let worst = idr
                .div_curl_defect
                .max(idr.mean_curl_defect)
                .max(idr.skew_defect);
            let dims_ok = idr.edge_harmonic_dim == 0 && idr.cell_harmonic_dim == 1;
            checks.push(CheckReport {
                name: "identities".to_string(),
                passed: worst <= 1e-13 && dims_ok,
                achieved: worst,
                threshold: 1e-13,
                detail: format!(
                    "div-curl {:.3e}, mean-curl {:.3e}, skew {:.3e}; harmonic dims edge {} \
                     (expect 0), cell {} (expect 1)",
                    idr.div_curl_defect,
                    idr.mean_curl_defect,
                    idr.skew_defect,
                    idr.edge_harmonic_dim,
                    idr.cell_harmonic_dim
                ),
            });
        } else {
            return Err(Error::contract(format!(
                "check `{token}` does not apply to a field scenario"
            )));
        }
    }

    Ok(RunReportJson {
        scenario: name.to_string(),
        kind: "maxwell",
        tol: args.tol,
        seed: args.seed,
        routes: labels,
        solution_route,
        results,
        agreement,
        checks,
        error: None,
    })
}

// --- file writers ---------------------------------------------------

fn write_signal_csv(path: &Path, blocks: &[(&str, &Signal)]) -> Result<()> {
    let grid = *blocks[0].1.grid();
    let mut text = String::from("t");
    for (prefix, sig) in blocks {
        for i in 0..sig.dim() {
            write!(text, ",{prefix}{i}").expect("string write");
        }
    }
    text.push('\n');
    for k in 0..grid.len() {
        write!(text, "{}", grid.time(k)).expect("string write");
        for (_, sig) in blocks {
            for v in sig.sample(k) {
                write!(text, ",{v}").expect("string write");
            }
        }
        text.push('\n');
    }
    std::fs::write(path, text)?;
    Ok(())
}

fn write_schedule_csv(path: &Path, reports: &BTreeMap<&'static str, SolveReport>) -> Result<()> {
    let mut text = String::from("route,lambda,inner_iters,residual,yosida_norm,h1_norm,gap\n");
    for (label, rep) in reports {
        for d in &rep.per_lambda {
            writeln!(
                text,
                "{label},{},{},{},{},{},{}",
                d.lambda,
                d.picard_iters,
                d.residual,
                d.yosida_norm,
                d.h1_norm,
                if d.gap.is_finite() { d.gap.to_string() } else { "inf".to_string() }
            )
            .expect("string write");
        }
    }
    std::fs::write(path, text)?;
    Ok(())
}

fn write_field_convergence_csv(
    path: &Path,
    labels: &[&'static str],
    runs: &BTreeMap<&'static str, MaxwellRun>,
) -> Result<()> {
    let mut text = String::from(
        "route,max_inner_iters,flux_mean_drift,power_balance_defect,constitutive_defect\n",
    );
    for label in labels {
        let d = runs[label].diagnostics;
        writeln!(
            text,
            "{label},{},{},{},{}",
            d.max_inner_iters, d.div_drift, d.energy_imbalance, d.constitutive_defect
        )
        .expect("string write");
    }
    std::fs::write(path, text)?;
    Ok(())
}

// --- suite subcommand -----------------------------------------------

fn suite_cmd(args: &SuiteArgs) -> i32 {
    let opts = SuiteOptions { tol: args.tol, seed: args.seed, grid_refine: args.grid_refine };
    match run_suite(&opts) {
        Ok(outcome) => {
            for (i, check) in outcome.checks.iter().enumerate() {
                println!(
                    "{} {}: achieved {:.3e} (threshold {:.3e}) [{:.2}s of {:.0}s]",
                    if check.passed { "PASS" } else { "FAIL" },
                    check.name,
                    check.achieved,
                    check.threshold,
                    outcome.seconds[i],
                    BUDGET_SECONDS[i].1,
                );
            }
            let dir = out_dir(&args.out);
            if let Err(e) = std::fs::create_dir_all(&dir)
                .map_err(Error::from)
                .and_then(|()| std::fs::write(dir.join("report.json"), outcome.to_json()).map_err(Error::from))
            {
                eprintln!("error: cannot write the suite report: {e}");
                return 1;
            }
            let passed = outcome.passed();
            println!(
                "{}: {} of {} checks passed, report in {}",
                if passed { "ok" } else { "failure" },
                outcome.checks.iter().filter(|c| c.passed).count(),
                outcome.checks.len(),
                dir.display()
            );
            i32::from(!passed)
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

//! Executable structure checks: causality, rate independence and
//! first-order regularity of the solution map, each phrased as a
//! machine-checkable report with an achieved quantity and a pinned
//! threshold. A deliberately acausal comparator scheme is included so
//! the checks can demonstrate that they reject what they must reject.

use crate::error::{Error, Result};
use crate::material::Part;
use crate::solver::{qualify, solve_with_constants, Problem, Route, SolveOptions};
use crate::weighted_time::{Signal, TimeGrid, Weight};

/// Outcome of one structural check.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CheckReport {
    pub name: String,
    pub passed: bool,
    /// Worst observed quantity (a difference or a ratio).
    pub achieved: f64,
    /// The pinned bound the quantity must stay under.
    pub threshold: f64,
    pub detail: String,
}

impl CheckReport {
    pub fn new(name: &str, achieved: f64, threshold: f64, detail: String) -> Self {
        CheckReport {
            name: name.to_string(),
            passed: achieved <= threshold,
            achieved,
            threshold,
            detail,
        }
    }
}

/// A scheme under test: the two real routes plus a deliberately wrong
/// one that peeks a step ahead. The shim exists so negative controls
/// exercise the same code path as the real checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Route(Route),
    AcausalShim,
}

/// Solves on the chosen scheme and returns the trajectory.
pub fn scheme_solution(problem: &Problem, scheme: Scheme, opts: &SolveOptions) -> Result<Signal> {
    match scheme {
        Scheme::Route(route) => {
            let constants = qualify(problem, opts)?;
            Ok(solve_with_constants(problem, route, &constants, opts)?.u)
        }
        Scheme::AcausalShim => acausal_shim_solve(problem),
    }
}

/// The acausal comparator: the per-step recursion of the time stepper,
/// fed with the forward average `(f_k + f_{k+1}) / 2` instead of `f_k`.
/// Each step therefore sees data one stencil width into the future,
/// which is exactly the leak the causality check must flag.
pub fn acausal_shim_solve(problem: &Problem) -> Result<Signal> {
    let grid = *problem.grid();
    let h = grid.step();
    let dim = problem.f().dim();
    let law = problem.law();
    if law.part(Part::M).as_convolution().is_some() {
        return Err(Error::contract("the acausal comparator handles multiplier laws only"));
    }
    let mut u = Signal::zeros(grid, dim);
    let mut prev = vec![0.0; dim];
    for k in 0..grid.len() {
        let m_k = law
            .part(Part::M)
            .as_multiplier()
            .and_then(|m| m.diag_at(k))
            .ok_or_else(|| Error::contract("the acausal comparator needs diagonal coefficients"))?;
        let m_prev = if k == 0 {
            None
        } else {
            law.part(Part::M).as_multiplier().and_then(|m| m.diag_at(k - 1))
        };
        let n_k = law
            .part(Part::N)
            .as_multiplier()
            .and_then(|m| m.diag_at(k))
            .ok_or_else(|| Error::contract("the acausal comparator needs diagonal coefficients"))?;
        let mut u_k = vec![0.0; dim];
        for i in 0..dim {
            let d = m_k[i] / h + n_k[i];
            if !d.is_finite() || d <= 0.0 {
                return Err(Error::linear(format!(
                    "nonpositive per-step coefficient {d} at step {k}, component {i}"
                )));
            }
            let ahead = if k + 1 < grid.len() {
                0.5 * (problem.f().sample(k)[i] + problem.f().sample(k + 1)[i])
            } else {
                problem.f().sample(k)[i]
            };
            let r = ahead + m_prev.as_ref().map_or(0.0, |m| m[i]) * prev[i] / h;
            u_k[i] = problem.relation().resolve_value(1.0 / d, r / d);
        }
        u.sample_mut(k).copy_from_slice(&u_k);
        prev = u_k;
    }
    Ok(u)
}

/// A bump supported strictly after the cutoff `a`, used as the
/// standard perturbation of the causality check: zero through the
/// cutoff, then a fast `sin^2` ramp to the amplitude. The support
/// starts at the first grid point past `a`, so even a one-step
/// lookahead leaks it into the pre-cutoff window.
pub fn tail_bump(grid: &TimeGrid, a: f64, amplitude: f64) -> Signal {
    let ramp = (10.0 * grid.step()).min((grid.end() - a).max(grid.step()));
    Signal::from_scalar_fn(*grid, |t| {
        if t <= a {
            0.0
        } else {
            let phase = ((t - a) / ramp).min(1.0) * std::f64::consts::FRAC_PI_2;
            amplitude * phase.sin().powi(2)
        }
    })
}

/// Checks that data changes after the cutoff cannot move the solution
/// at or before it: solves with `f` and with `f + g`, then measures
/// the largest difference over `t_k <= a`. The perturbation must
/// vanish at and before the cutoff.
pub fn causality_test(
    problem: &Problem,
    scheme: Scheme,
    cutoff: f64,
    perturbation: &Signal,
    threshold: f64,
    opts: &SolveOptions,
) -> Result<CheckReport> {
    let grid = problem.grid();
    let cut = grid
        .cutoff_index(cutoff)
        .ok_or_else(|| Error::contract("cutoff lies before the grid window"))?;
    for k in 0..=cut {
        if perturbation.sample(k).iter().any(|v| *v != 0.0) {
            return Err(Error::contract(
                "causality perturbation must vanish at and before the cutoff",
            ));
        }
    }
    let base = scheme_solution(problem, scheme, opts)?;
    let perturbed_problem = problem.with_rhs(problem.f().add(perturbation)?)?;
    let perturbed = scheme_solution(&perturbed_problem, scheme, opts)?;
    let mut worst = 0.0f64;
    let mut worst_k = 0usize;
    for k in 0..=cut {
        for i in 0..base.dim() {
            let d = (base.sample(k)[i] - perturbed.sample(k)[i]).abs();
            if d > worst {
                worst = d;
                worst_k = k;
            }
        }
    }
    Ok(CheckReport::new(
        "causality",
        worst,
        threshold,
        format!(
            "scheme {scheme:?}: largest pre-cutoff movement {worst:.3e} at t = {:.4} (cutoff {cutoff})",
            grid.time(worst_k)
        ),
    ))
}

/// How two trajectories are compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgreementMetric {
    /// Largest pointwise gap anywhere on the window. Right for exact
    /// per-step schemes, whose output must not depend on the rate at
    /// all.
    PointwiseMax,
    /// Weighted-norm gap at the larger of the two rates, relative to
    /// the data scale. Right for iterative schemes: a tolerance-level
    /// stop controls the weighted norm, not pointwise values at times
    /// where the weight has decayed beneath the tolerance.
    WeightedRelative,
}

/// Checks that the chosen rate is scaffolding, not physics: solves the
/// same data under two admissible rates and compares the trajectories.
/// The stepper never reads the rate, so it must agree exactly; the
/// schedule route uses the rate only in stopping rules and must agree
/// to tolerance in the weighted sense.
pub fn rho_independence_test(
    problem: &Problem,
    scheme: Scheme,
    rho_pair: (f64, f64),
    metric: AgreementMetric,
    threshold: f64,
    opts: &SolveOptions,
) -> Result<CheckReport> {
    let (ra, rb) = rho_pair;
    let pa = Problem::new(
        problem.law().clone(),
        problem.relation().clone(),
        Weight::new(ra)?,
        *problem.grid(),
        problem.f().clone(),
    )?;
    let pb = Problem::new(
        problem.law().clone(),
        problem.relation().clone(),
        Weight::new(rb)?,
        *problem.grid(),
        problem.f().clone(),
    )?;
    let ua = scheme_solution(&pa, scheme, opts)?;
    let ub = scheme_solution(&pb, scheme, opts)?;
    let pointwise = ua.max_abs_diff(&ub)?;
    let strong = Weight::new(ra.max(rb))?;
    let weighted =
        ua.sub(&ub)?.weighted_norm(&strong) / (1.0 + problem.f().weighted_norm(&strong));
    let achieved = match metric {
        AgreementMetric::PointwiseMax => pointwise,
        AgreementMetric::WeightedRelative => weighted,
    };
    Ok(CheckReport::new(
        "rho_independence",
        achieved,
        threshold,
        format!(
            "scheme {scheme:?}: rates {ra} vs {rb}, pointwise gap {pointwise:.3e}, weighted gap {weighted:.3e}"
        ),
    ))
}

/// Checks the first-order bound of the solution map: the weighted
/// first-order norm of the solution stays within `1 / c_est` of the
/// data's, up to the pinned grid allowance `5 h (1 + delta)`.
pub fn regularity_test(
    problem: &Problem,
    route: Route,
    opts: &SolveOptions,
) -> Result<CheckReport> {
    let constants = qualify(problem, opts)?;
    let report = solve_with_constants(problem, route, &constants, opts)?;
    let weight = problem.weight();
    let f_h1 = problem.f().sobolev_norm(weight, 1)?;
    let u_h1 = report.u.sobolev_norm(weight, 1)?;
    let eps_h = 5.0 * problem.grid().step() * (1.0 + constants.delta);
    let threshold = (1.0 / constants.c_est) * (1.0 + eps_h);
    let ratio = if f_h1 == 0.0 { 0.0 } else { u_h1 / f_h1 };
    Ok(CheckReport::new(
        "regularity",
        ratio,
        threshold,
        format!(
            "route {route:?}: |u|_1 = {u_h1:.6e}, |f|_1 = {f_h1:.6e}, allowance {eps_h:.3e}"
        ),
    ))
}

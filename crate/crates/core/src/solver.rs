//! Two cross-validating solvers for the causal inclusion
//! `derivative(M u) + N u + A u ∋ f` on a weighted time grid.
//!
//! **Route A** follows the regularization construction: an auxiliary
//! operator `derivative(M ·) - Mprime + delta + A_lambda` is solved
//! along a vanishing schedule of Yosida parameters (each solve is
//! per-step exact, see below), which yields the solvability
//! certificate and the regularization diagnostics; the final answer
//! comes from the damped fixed point
//! `u = S_aux(f + (delta - (Mprime + N)) u)` with the unregularized
//! relation, whose fixed point satisfies the original inclusion.
//!
//! **Route B** is an independent per-step resolvent time stepper: at
//! each step the inclusion
//! `m_k u_k / h + n_k u_k + A(u_k) ∋ f_k + m_{k-1} u_{k-1} / h`
//! is solved exactly by one scalar resolvent per component.
//!
//! Both routes discretize `derivative(M u)` as the backward difference
//! of the product, so on multiplier laws they target the identical
//! discrete system and must agree to solver tolerance; that agreement
//! is an acceptance gate, not a convenience.
//!
//! The per-step solves exploit one reduction: for `d > 0` the shifted
//! inclusion `d u + A_lambda(u) = r` is equivalent to
//! `w = resolve(A, (1 + lambda d) / d, r / d)`,
//! `a = (r - d w) / (1 + lambda d)`, `u = w + lambda a`, exact at
//! every `lambda`; with `lambda = 0` it degenerates to
//! `u = resolve(A, 1/d, r/d)`. No inner iteration is needed, which is
//! what keeps the schedule tail (`lambda` far below the contraction
//! threshold of the textbook Picard loop) computable.

use crate::error::{Error, Result};
use crate::material::{
    delta_policy, operator_norm, positivity_constant, MaterialLaw, Part, PositivityReport,
};
use crate::monotone::ScalarGraph;
use crate::weighted_time::{Signal, TimeGrid, Weight};

/// A fully specified discrete inclusion problem.
#[derive(Debug, Clone)]
pub struct Problem {
    law: MaterialLaw,
    relation: ScalarGraph,
    weight: Weight,
    grid: TimeGrid,
    f: Signal,
}

impl Problem {
    pub fn new(
        law: MaterialLaw,
        relation: ScalarGraph,
        weight: Weight,
        grid: TimeGrid,
        f: Signal,
    ) -> Result<Self> {
        if *f.grid() != grid {
            return Err(Error::mismatch("right-hand side lives on a different grid"));
        }
        if f.dim() != law.dim() {
            return Err(Error::mismatch(format!(
                "law dimension {} does not match data dimension {}",
                law.dim(),
                f.dim()
            )));
        }
        if weight.rho() < law.rho0() {
            return Err(Error::contract(format!(
                "weight rate {} is below the law's minimal admissible rate {}",
                weight.rho(),
                law.rho0()
            )));
        }
        let zero_image = relation.resolve_value(1.0, 0.0);
        if zero_image.abs() > 1e-12 {
            return Err(Error::contract(
                "relation must contain the origin: resolve(1, 0) != 0",
            ));
        }
        Ok(Problem { law, relation, weight, grid, f })
    }

    pub fn law(&self) -> &MaterialLaw {
        &self.law
    }

    pub fn relation(&self) -> &ScalarGraph {
        &self.relation
    }

    pub fn weight(&self) -> &Weight {
        &self.weight
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn f(&self) -> &Signal {
        &self.f
    }

    /// Same problem, different right-hand side.
    pub fn with_rhs(&self, f: Signal) -> Result<Problem> {
        Problem::new(self.law.clone(), self.relation.clone(), self.weight, self.grid, f)
    }
}

/// Solver knobs; the defaults match the shipped tolerances.
#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Relative tolerance on weighted norms.
    pub tol: f64,
    /// Decreasing Yosida schedule for Route A.
    pub schedule: Vec<f64>,
    /// Seed for every sampled estimate (positivity, norms).
    pub seed: u64,
    /// Trials for the sampled positivity probe.
    pub trials: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-8,
            schedule: default_lambda_schedule(),
            seed: 0,
            trials: 40,
        }
    }
}

/// The default geometric schedule `2^0 .. 2^-14`.
pub fn default_lambda_schedule() -> Vec<f64> {
    (0..=14).map(|k| 0.5f64.powi(k)).collect()
}

/// Estimated constants a solve runs on.
#[derive(Debug, Clone)]
pub struct Constants {
    pub positivity: PositivityReport,
    pub c_est: f64,
    pub delta: f64,
    pub m_norm: f64,
    pub mprime_norm: f64,
    pub n_norm: f64,
}

/// Estimates positivity, operator norms and the shift `delta` for a
/// problem. Norms are maximized over a small fan of weights at and
/// above the problem's rate, the finite surrogate of a uniform-in-rate
/// bound.
pub fn qualify(problem: &Problem, opts: &SolveOptions) -> Result<Constants> {
    let rho = problem.weight.rho();
    let weights: Vec<Weight> = [1.0, 2.0, 4.0]
        .iter()
        .map(|s| Weight::new(s * rho))
        .collect::<Result<_>>()?;
    let positivity = positivity_constant(
        &problem.law,
        &problem.weight,
        &problem.grid,
        opts.trials,
        opts.seed,
    )?;
    let delta_report = delta_policy(&problem.law, &weights, &problem.grid, opts.seed)?;
    let m_norm = operator_norm(&problem.law, Part::M, &weights, &problem.grid, opts.seed)?.value;
    Ok(Constants {
        c_est: positivity.c_est,
        positivity,
        delta: delta_report.delta,
        m_norm,
        mprime_norm: delta_report.mprime_norm,
        n_norm: delta_report.n_norm,
    })
}

/// Which linear operator the causal forward solve inverts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinearVariant {
    /// `derivative(M u) + delta u = g`.
    Delta,
    /// `derivative(M u) - Mprime u + delta u = g`.
    DeltaMinusMprime,
}

fn diag_of(law: &MaterialLaw, part: Part, k: usize) -> Result<Vec<f64>> {
    let mult = law.part(part).as_multiplier().ok_or_else(|| {
        Error::contract("per-step solve needs multiplier coefficients for this part")
    })?;
    let d = mult.diag_at(k).ok_or_else(|| {
        Error::contract(
            "per-step solve needs pointwise-decoupled (diagonal) coefficients",
        )
    })?;
    Ok(d.iter().copied().collect())
}

/// Per-step implicit data of the differentiated part at step `k`,
/// already in equation form: `implicit` multiplies `u_k` on the left,
/// `carry * u_{k-1}` and `history` land on the right-hand side.
/// Multiplier laws contribute `m_k / h` and `m_{k-1} / h`; kernel laws
/// contribute the head `K_0` at both ends plus the lagged differences.
struct MassStep {
    implicit: Vec<f64>,
    carry: Vec<f64>,
    history: Vec<f64>,
}

/// Shared forward-substitution state for the differentiated part.
enum MassDriver<'a> {
    Multiplier,
    Kernel {
        head_diag: Vec<f64>,
        lags: &'a [nalgebra::DMatrix<f64>],
        /// Backward differences of the solution, filled as steps complete.
        diffs: Vec<Vec<f64>>,
    },
}

impl<'a> MassDriver<'a> {
    fn new(law: &'a MaterialLaw, dim: usize) -> Result<Self> {
        match law.part(Part::M).as_convolution() {
            None => Ok(MassDriver::Multiplier),
            Some(kernel) => {
                let head = &kernel.lags()[0];
                let mut head_diag = vec![0.0; dim];
                for i in 0..dim {
                    head_diag[i] = head[(i, i)];
                    for j in 0..dim {
                        if i != j && head[(i, j)] != 0.0 {
                            return Err(Error::contract(
                                "per-step solve needs a diagonal kernel head",
                            ));
                        }
                    }
                }
                Ok(MassDriver::Kernel { head_diag, lags: kernel.lags(), diffs: Vec::new() })
            }
        }
    }

    fn step(&self, law: &MaterialLaw, k: usize, h: f64, dim: usize) -> Result<MassStep> {
        match self {
            MassDriver::Multiplier => {
                let implicit = diag_of(law, Part::M, k)?.iter().map(|m| m / h).collect();
                let carry = if k == 0 {
                    vec![0.0; dim]
                } else {
                    diag_of(law, Part::M, k - 1)?.iter().map(|m| m / h).collect()
                };
                Ok(MassStep { implicit, carry, history: vec![0.0; dim] })
            }
            MassDriver::Kernel { head_diag, lags, diffs } => {
                // h * K_0 * (u_k - u_{k-1}) / h contributes K_0 at both
                // ends; older lags act on stored differences.
                let mut history = vec![0.0; dim];
                for l in 1..lags.len().min(k + 1) {
                    let lag = &lags[l];
                    let v = &diffs[k - l];
                    for i in 0..dim {
                        let mut acc = 0.0;
                        for j in 0..dim {
                            acc += lag[(i, j)] * v[j];
                        }
                        history[i] -= h * acc;
                    }
                }
                Ok(MassStep { implicit: head_diag.clone(), carry: head_diag.clone(), history })
            }
        }
    }

    fn record(&mut self, u_k: &[f64], u_prev: &[f64], h: f64) {
        if let MassDriver::Kernel { diffs, .. } = self {
            diffs.push(
                u_k.iter()
                    .zip(u_prev)
                    .map(|(a, b)| (a - b) / h)
                    .collect(),
            );
        }
    }
}

/// Solves the shifted causal linear system by forward substitution:
/// `derivative(M u) [- Mprime u] + delta u = g`, with the derivative
/// taken of the product. One diagonal solve per step; kernel laws keep
/// a running history of solution differences.
pub fn solve_linear_shifted(
    law: &MaterialLaw,
    delta: f64,
    variant: LinearVariant,
    g: &Signal,
) -> Result<Signal> {
    if !delta.is_finite() || delta <= 0.0 {
        return Err(Error::contract(format!("shift must be positive, got {delta}")));
    }
    let grid = *g.grid();
    let h = grid.step();
    let dim = g.dim();
    let mut driver = MassDriver::new(law, dim)?;
    let mut u = Signal::zeros(grid, dim);
    let mut prev = vec![0.0; dim];
    for k in 0..grid.len() {
        let mass = driver.step(law, k, h, dim)?;
        let mp = match variant {
            LinearVariant::Delta => vec![0.0; dim],
            LinearVariant::DeltaMinusMprime => diag_of(law, Part::Mprime, k)?,
        };
        let mut u_k = vec![0.0; dim];
        for i in 0..dim {
            let d = mass.implicit[i] + delta - mp[i];
            if !d.is_finite() || d <= 0.0 {
                return Err(Error::linear(format!(
                    "nonpositive per-step coefficient {d} at step {k}, component {i}"
                )));
            }
            let r = g.sample(k)[i] + mass.carry[i] * prev[i] + mass.history[i];
            u_k[i] = r / d;
        }
        driver.record(&u_k, &prev, h);
        u.sample_mut(k).copy_from_slice(&u_k);
        prev = u_k;
    }
    Ok(u)
}

/// Exact shifted scalar resolvent: the unique `u` with
/// `d u + A_reg(u) ∋ r`, where `A_reg` is the Yosida regularization at
/// `reg` (or the relation itself for `reg = None`).
fn scalar_shifted_resolve(rel: &ScalarGraph, d: f64, reg: Option<f64>, r: f64) -> f64 {
    match reg {
        None => rel.resolve_value(1.0 / d, r / d),
        Some(lambda) => {
            let w = rel.resolve_value((1.0 + lambda * d) / d, r / d);
            let a = (r - d * w) / (1.0 + lambda * d);
            w + lambda * a
        }
    }
}

/// Per-step exact solve of the auxiliary inclusion
/// `derivative(M u) - Mprime u + delta u + A_reg(u) ∋ rhs` with the
/// relation regularized at `reg` (`None` = unregularized). Exact at
/// every regularization, including far below the contraction threshold
/// of the fixed-point alternative.
pub fn solve_aux_stepwise(
    law: &MaterialLaw,
    relation: &ScalarGraph,
    delta: f64,
    reg: Option<f64>,
    rhs: &Signal,
) -> Result<Signal> {
    if !delta.is_finite() || delta <= 0.0 {
        return Err(Error::contract(format!("shift must be positive, got {delta}")));
    }
    if let Some(lambda) = reg {
        if !lambda.is_finite() || lambda <= 0.0 {
            return Err(Error::contract(format!(
                "regularization must be positive, got {lambda}"
            )));
        }
    }
    let grid = *rhs.grid();
    let h = grid.step();
    let dim = rhs.dim();
    let mut driver = MassDriver::new(law, dim)?;
    let mut u = Signal::zeros(grid, dim);
    let mut prev = vec![0.0; dim];
    for k in 0..grid.len() {
        let mass = driver.step(law, k, h, dim)?;
        let mp = diag_of(law, Part::Mprime, k)?;
        let mut u_k = vec![0.0; dim];
        for i in 0..dim {
            let d = mass.implicit[i] + delta - mp[i];
            if !d.is_finite() || d <= 0.0 {
                return Err(Error::linear(format!(
                    "nonpositive per-step coefficient {d} at step {k}, component {i}"
                )));
            }
            let r = rhs.sample(k)[i] + mass.carry[i] * prev[i] + mass.history[i];
            u_k[i] = scalar_shifted_resolve(relation, d, reg, r);
        }
        driver.record(&u_k, &prev, h);
        u.sample_mut(k).copy_from_slice(&u_k);
        prev = u_k;
    }
    Ok(u)
}

/// The textbook fixed-point construction of the auxiliary solution:
/// `u <- solve_linear_shifted(delta, rhs - yosida(A, lambda, u))`,
/// contracting at rate `(1 / lambda) / (c + delta - |Mprime + N|)`.
/// Kept as the reference implementation; the schedule tail uses
/// [`solve_aux_stepwise`], which is exact at any `lambda`.
pub fn solve_aux_picard(
    law: &MaterialLaw,
    relation: &ScalarGraph,
    delta: f64,
    lambda: f64,
    rhs: &Signal,
    tol: f64,
) -> Result<(Signal, usize)> {
    let scale = 1.0 + rhs.max_abs();
    let mut u = Signal::zeros(*rhs.grid(), rhs.dim());
    let mut prev_gap = f64::INFINITY;
    let mut rising = 0usize;
    for it in 1..=10_000 {
        let shifted = rhs.sub(&relation.yosida(lambda, &u)?)?;
        let next = solve_linear_shifted(law, delta, LinearVariant::DeltaMinusMprime, &shifted)?;
        let gap = next.max_abs_diff(&u)?;
        u = next;
        if gap <= tol * scale {
            return Ok((u, it));
        }
        if gap > prev_gap {
            rising += 1;
            if rising >= 3 {
                return Err(Error::convergence(format!(
                    "fixed-point auxiliary solve diverges at lambda {lambda} (gap {gap:.3e}); \
                     a larger shift (above 1/lambda + |Mprime| + |N|) restores contraction"
                )));
            }
        } else {
            rising = 0;
        }
        prev_gap = gap;
    }
    Err(Error::convergence(
        "fixed-point auxiliary solve exceeded 10000 iterations",
    ))
}

/// Which solver produced a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    /// Regularization schedule plus outer shift iteration.
    YosidaGlobal,
    /// Per-step resolvent time stepper.
    Timestep,
}

/// Diagnostics of one schedule entry.
#[derive(Debug, Clone, Copy)]
pub struct LambdaDiagnostic {
    pub lambda: f64,
    /// Inner iterations spent (1 for the per-step exact solver).
    pub picard_iters: usize,
    /// Plug-back residual of the auxiliary equation, relative.
    pub residual: f64,
    /// Weighted norm of the regularized section `A_lambda(u_lambda)`.
    pub yosida_norm: f64,
    /// Weighted first-order Sobolev norm of `u_lambda`.
    pub h1_norm: f64,
    /// Weighted gap to the previous schedule entry's solution.
    pub gap: f64,
}

/// Everything a solve learned.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub u: Signal,
    pub route: Route,
    pub delta: f64,
    pub c_est: f64,
    pub lambda_schedule: Vec<f64>,
    pub per_lambda: Vec<LambdaDiagnostic>,
    /// Weighted-norm inclusion residual of the returned solution,
    /// relative to the data scale (graph distance for graph-backed
    /// relations, final fixed-point gap otherwise).
    pub residual_final: f64,
    /// Largest pointwise graph distance of the plug-back pair.
    pub max_step_residual: f64,
    pub outer_iters: usize,
    pub theta_final: f64,
}

/// Plug-back residual of `derivative(M u) + N u + A u ∋ f`: the
/// pointwise graph distance of `(u_k, f_k - derivative(M u)_k - (N u)_k)`,
/// reported in the weighted norm (relative) and as a pointwise max.
pub fn inclusion_residual(problem: &Problem, u: &Signal) -> Result<(f64, f64)> {
    let graph = problem
        .relation
        .to_graph()
        .ok_or_else(|| Error::contract("inclusion residual needs a graph-backed relation"))?;
    let image = problem
        .law
        .apply(Part::M, u)?
        .derivative()
        .add(&problem.law.apply(Part::N, u)?)?;
    let slack = problem.f.sub(&image)?;
    let mut dist = Signal::zeros(*u.grid(), u.dim());
    let mut max_pointwise = 0.0f64;
    for k in 0..u.grid().len() {
        for i in 0..u.dim() {
            let d = graph.vertical_distance(u.sample(k)[i], slack.sample(k)[i]);
            dist.sample_mut(k)[i] = d;
            max_pointwise = max_pointwise.max(d);
        }
    }
    let scale = 1.0 + problem.f.weighted_norm(&problem.weight);
    Ok((dist.weighted_norm(&problem.weight) / scale, max_pointwise))
}

fn zero_report(problem: &Problem, route: Route, constants: &Constants) -> SolveReport {
    SolveReport {
        u: Signal::zeros(problem.grid, problem.f.dim()),
        route,
        delta: constants.delta,
        c_est: constants.c_est,
        lambda_schedule: Vec::new(),
        per_lambda: Vec::new(),
        residual_final: 0.0,
        max_step_residual: 0.0,
        outer_iters: 0,
        theta_final: 1.0,
    }
}

fn check_hypotheses(constants: &Constants) -> Result<()> {
    if constants.positivity.is_violated() {
        return Err(Error::hypothesis(format!(
            "positivity constant is not positive: c_est = {:.6e} (sampled {:.6e}, certified {})",
            constants.c_est,
            constants.positivity.sampled,
            constants
                .positivity
                .certified
                .map_or("n/a".to_string(), |c| format!("{c:.6e}")),
        )));
    }
    Ok(())
}

/// Route A: regularization sweep for diagnostics and the solvability
/// certificate, then the damped outer iteration
/// `u <- S_aux(f + (delta - (Mprime + N)) u)` down to `tol`.
fn solve_route_a(problem: &Problem, constants: &Constants, opts: &SolveOptions) -> Result<SolveReport> {
    let weight = &problem.weight;
    let f_norm = problem.f.weighted_norm(weight);
    if f_norm == 0.0 {
        return Ok(zero_report(problem, Route::YosidaGlobal, constants));
    }
    let scale = 1.0 + f_norm;
    let delta = constants.delta;

    let mut per_lambda: Vec<LambdaDiagnostic> = Vec::with_capacity(opts.schedule.len());
    let mut prev_u: Option<Signal> = None;
    for &lambda in &opts.schedule {
        let u_l = solve_aux_stepwise(&problem.law, &problem.relation, delta, Some(lambda), &problem.f)?;
        let reg_section = problem.relation.yosida(lambda, &u_l)?;
        let image = problem
            .law
            .apply(Part::M, &u_l)?
            .derivative()
            .sub(&problem.law.apply(Part::Mprime, &u_l)?)?
            .add(&u_l.scale(delta))?
            .add(&reg_section)?;
        let residual = image.sub(&problem.f)?.weighted_norm(weight) / scale;
        let gap = match &prev_u {
            Some(p) => u_l.sub(p)?.weighted_norm(weight),
            None => f64::INFINITY,
        };
        per_lambda.push(LambdaDiagnostic {
            lambda,
            picard_iters: 1,
            residual,
            yosida_norm: reg_section.weighted_norm(weight),
            h1_norm: u_l.sobolev_norm(weight, 1)?,
            gap,
        });
        prev_u = Some(u_l);
    }

    // Certificate: the schedule gaps must have come down firmly (the
    // regularized solutions settle), or already be at tolerance. A
    // schedule whose gaps refuse to shrink indicates the vanishing-
    // regularization limit does not exist for this data.
    let gaps: Vec<f64> = per_lambda.iter().skip(1).map(|d| d.gap).collect();
    if gaps.len() >= 4 {
        let early = gaps[..3].iter().fold(0.0f64, |m, g| m.max(*g));
        let late = gaps[gaps.len() - 3..]
            .iter()
            .fold(f64::INFINITY, |m, g| m.min(*g));
        let settled = late <= 0.1 * early.max(1e-300) || late <= opts.tol * scale;
        if !settled {
            let trace: Vec<String> = per_lambda
                .iter()
                .map(|d| format!("lambda={:.3e}: |A_l(u_l)|={:.3e}, gap={:.3e}", d.lambda, d.yosida_norm, d.gap))
                .collect();
            return Err(Error::convergence(format!(
                "regularization schedule exhausted without settling; trace: {}",
                trace.join("; ")
            )));
        }
    }

    let mut u = prev_u.expect("schedule is nonempty");
    let mut theta = 1.0f64;
    let mut prev_gap = f64::INFINITY;
    let mut rising = 0usize;
    let mut outer_iters = 0usize;
    let mut converged = false;
    for _ in 0..60 {
        outer_iters += 1;
        let lower = problem
            .law
            .apply(Part::Mprime, &u)?
            .add(&problem.law.apply(Part::N, &u)?)?;
        let shifted_rhs = problem.f.add(&u.scale(delta))?.sub(&lower)?;
        let image = solve_aux_stepwise(&problem.law, &problem.relation, delta, None, &shifted_rhs)?;
        let gap = image.sub(&u)?.weighted_norm(weight);
        if gap <= opts.tol * scale {
            u = image;
            converged = true;
            break;
        }
        if gap > prev_gap {
            rising += 1;
            if rising >= 3 {
                theta *= 0.5;
                rising = 0;
                if theta < 1.0 / 64.0 {
                    return Err(Error::convergence(format!(
                        "outer shift iteration diverges even at damping {theta:.4}; gap {gap:.3e}"
                    )));
                }
            }
        } else {
            rising = 0;
        }
        prev_gap = gap;
        u = u.add(&image.sub(&u)?.scale(theta))?;
    }
    if !converged {
        return Err(Error::convergence(format!(
            "outer shift iteration did not reach tolerance in {outer_iters} steps (last gap above {:.3e})",
            opts.tol * scale
        )));
    }

    let (residual_final, max_step_residual) = match problem.relation.to_graph() {
        Some(_) => inclusion_residual(problem, &u)?,
        None => (prev_gap / scale, f64::NAN),
    };
    Ok(SolveReport {
        u,
        route: Route::YosidaGlobal,
        delta,
        c_est: constants.c_est,
        lambda_schedule: opts.schedule.clone(),
        per_lambda,
        residual_final,
        max_step_residual,
        outer_iters,
        theta_final: theta,
    })
}

/// Route B: the causal per-step resolvent recursion. Contains no
/// weight, no shift and no schedule; its causality and
/// rate-independence are structural, which is exactly what makes it a
/// worthwhile oracle for Route A.
fn solve_route_b(problem: &Problem, constants: &Constants, opts: &SolveOptions) -> Result<SolveReport> {
    if problem.law.part(Part::M).as_convolution().is_some() {
        return Err(Error::contract(
            "the time stepper handles multiplier laws only; kernel laws run on the schedule route",
        ));
    }
    let grid = problem.grid;
    let h = grid.step();
    let dim = problem.f.dim();
    let mut u = Signal::zeros(grid, dim);
    let mut prev = vec![0.0; dim];
    for k in 0..grid.len() {
        let m_k = diag_of(&problem.law, Part::M, k)?;
        let m_prev = if k == 0 { vec![0.0; dim] } else { diag_of(&problem.law, Part::M, k - 1)? };
        let n_k = diag_of(&problem.law, Part::N, k)?;
        let mut u_k = vec![0.0; dim];
        for i in 0..dim {
            let d = m_k[i] / h + n_k[i];
            if !d.is_finite() || d <= 0.0 {
                return Err(Error::linear(format!(
                    "nonpositive per-step coefficient {d} at step {k}, component {i}"
                )));
            }
            let r = problem.f.sample(k)[i] + m_prev[i] * prev[i] / h;
            u_k[i] = problem.relation.resolve_value(1.0 / d, r / d);
        }
        u.sample_mut(k).copy_from_slice(&u_k);
        prev = u_k;
    }
    let (residual_final, max_step_residual) = match problem.relation.to_graph() {
        Some(_) => inclusion_residual(problem, &u)?,
        None => (0.0, f64::NAN),
    };
    let _ = opts;
    Ok(SolveReport {
        u,
        route: Route::Timestep,
        delta: constants.delta,
        c_est: constants.c_est,
        lambda_schedule: Vec::new(),
        per_lambda: Vec::new(),
        residual_final,
        max_step_residual,
        outer_iters: 0,
        theta_final: 1.0,
    })
}

/// Qualifies the problem and solves it on the requested route.
/// Positivity violations are refused before any stepping.
pub fn solve(problem: &Problem, route: Route, opts: &SolveOptions) -> Result<SolveReport> {
    let constants = qualify(problem, opts)?;
    check_hypotheses(&constants)?;
    match route {
        Route::YosidaGlobal => solve_route_a(problem, &constants, opts),
        Route::Timestep => solve_route_b(problem, &constants, opts),
    }
}

/// Solves with precomputed constants (saves re-qualification when many
/// solves share one problem family).
pub fn solve_with_constants(
    problem: &Problem,
    route: Route,
    constants: &Constants,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    check_hypotheses(constants)?;
    match route {
        Route::YosidaGlobal => solve_route_a(problem, constants, opts),
        Route::Timestep => solve_route_b(problem, constants, opts),
    }
}

/// Result of one Lipschitz comparison of the solution map.
#[derive(Debug, Clone, Copy)]
pub struct AuditReport {
    /// Achieved `|u_f - u_g| / |f - g|` (0 when the data coincide).
    pub ratio: f64,
    /// Allowed bound `(1 / c_est) * 1.05`.
    pub bound: f64,
    pub passed: bool,
}

/// Compares the solutions for two right-hand sides against the
/// `1 / c_est` Lipschitz bound of the solution map, with a pinned 5%
/// discretization allowance.
pub fn lipschitz_audit(
    problem: &Problem,
    g: &Signal,
    route: Route,
    opts: &SolveOptions,
) -> Result<AuditReport> {
    let constants = qualify(problem, opts)?;
    check_hypotheses(&constants)?;
    let other = problem.with_rhs(g.clone())?;
    let u_f = solve_with_constants(problem, route, &constants, opts)?.u;
    let u_g = solve_with_constants(&other, route, &constants, opts)?.u;
    let denom = problem.f.sub(g)?.weighted_norm(&problem.weight);
    let bound = (1.0 / constants.c_est) * 1.05;
    if denom == 0.0 {
        return Ok(AuditReport { ratio: 0.0, bound, passed: true });
    }
    let ratio = u_f.sub(&u_g)?.weighted_norm(&problem.weight) / denom;
    Ok(AuditReport { ratio, bound, passed: ratio <= bound })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::PlGraph;
    use crate::material::{ConvKernel, Multiplier, OperatorKind};
    use approx::assert_relative_eq;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid(t0: f64, n: usize, h: f64) -> TimeGrid {
        TimeGrid::new(t0, n, h).unwrap()
    }

    fn identity_law(dim: usize) -> MaterialLaw {
        MaterialLaw::constant(
            Multiplier::constant_diag(DVector::from_element(dim, 1.0)),
            Multiplier::zero(dim),
            0.0,
        )
        .unwrap()
    }

    fn step_signal(g: TimeGrid, height: f64) -> Signal {
        Signal::from_scalar_fn(g, |t| if t >= 0.0 { height } else { 0.0 })
    }

    #[test]
    fn linear_shifted_solve_matches_the_closed_recursion() {
        // M = I, delta = 1, g = 1: u_k = 1 - (1 + h)^{-(k+1)}.
        let g = grid(0.0, 200, 0.05);
        let law = identity_law(1);
        let rhs = Signal::from_scalar_fn(g, |_| 1.0);
        let u = solve_linear_shifted(&law, 1.0, LinearVariant::Delta, &rhs).unwrap();
        let h = g.step();
        for k in 0..g.len() {
            let expect = 1.0 - (1.0 + h).powi(-(k as i32 + 1));
            assert_relative_eq!(u.sample(k)[0], expect, epsilon = 1e-12);
        }
        assert!((u.sample(g.len() - 1)[0] - 1.0).abs() < 0.01);
    }

    #[test]
    fn linear_shifted_solve_of_zero_is_zero() {
        let g = grid(-1.0, 50, 0.1);
        let law = identity_law(2);
        let rhs = Signal::zeros(g, 2);
        let u = solve_linear_shifted(&law, 0.7, LinearVariant::Delta, &rhs).unwrap();
        assert_eq!(u.max_abs(), 0.0);
    }

    fn varying_law(g: &TimeGrid) -> MaterialLaw {
        MaterialLaw::new(
            OperatorKind::Multiplier(
                Multiplier::varying_diag(g, 1, |t| DVector::from_element(1, 1.0 + 0.5 * t.sin()))
                    .unwrap(),
            ),
            OperatorKind::Multiplier(
                Multiplier::varying_diag(g, 1, |t| DVector::from_element(1, 0.5 * t.cos()))
                    .unwrap(),
            ),
            OperatorKind::zero(1),
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn linear_shifted_solve_passes_the_plugback_audit() {
        let g = grid(-1.0, 300, 0.02);
        let w = Weight::new(1.0).unwrap();
        let law = varying_law(&g);
        let rhs = Signal::from_scalar_fn(g, |t| (0.8 * t).cos());
        for variant in [LinearVariant::Delta, LinearVariant::DeltaMinusMprime] {
            let delta = 2.0;
            let u = solve_linear_shifted(&law, delta, variant, &rhs).unwrap();
            let mut image = law.apply(Part::M, &u).unwrap().derivative().add(&u.scale(delta)).unwrap();
            if variant == LinearVariant::DeltaMinusMprime {
                image = image.sub(&law.apply(Part::Mprime, &u).unwrap()).unwrap();
            }
            let res = image.sub(&rhs).unwrap().weighted_norm(&w);
            assert!(res <= 1e-10 * rhs.weighted_norm(&w), "variant {variant:?}: {res}");
        }
    }

    #[test]
    fn kernel_linear_solve_passes_the_plugback_audit() {
        let g = grid(0.0, 200, 0.05);
        let w = Weight::new(1.0).unwrap();
        let kernel = ConvKernel::scalar(vec![1.0 / g.step(), 0.3, 0.1]).unwrap();
        let law = MaterialLaw::new(
            OperatorKind::Convolution(kernel),
            OperatorKind::zero(1),
            OperatorKind::zero(1),
            0.0,
        )
        .unwrap();
        let rhs = Signal::from_scalar_fn(g, |t| (1.2 * t).sin());
        let u = solve_linear_shifted(&law, 1.5, LinearVariant::Delta, &rhs).unwrap();
        let image = law.apply(Part::M, &u).unwrap().derivative().add(&u.scale(1.5)).unwrap();
        let res = image.sub(&rhs).unwrap().weighted_norm(&w);
        assert!(res <= 1e-10 * rhs.weighted_norm(&w), "residual {res}");
    }

    #[test]
    fn linear_shifted_solve_reports_bad_steps() {
        let g = grid(0.0, 10, 0.5);
        let law = MaterialLaw::constant(
            Multiplier::constant_diag(DVector::from_element(1, -2.0)),
            Multiplier::zero(1),
            0.0,
        )
        .unwrap();
        let rhs = Signal::from_scalar_fn(g, |_| 1.0);
        let err = solve_linear_shifted(&law, 1.0, LinearVariant::Delta, &rhs);
        assert!(matches!(err, Err(Error::Linear(_))));
        assert!(solve_linear_shifted(&law, 0.0, LinearVariant::Delta, &rhs).is_err());
    }

    #[test]
    fn stepwise_and_picard_auxiliary_solves_agree_where_both_converge() {
        let g = grid(-1.0, 250, 0.02);
        let law = varying_law(&g);
        let rel = ScalarGraph::linear(0.5).unwrap();
        let rhs = Signal::from_scalar_fn(g, |t| (0.5 * t).cos());
        let delta = 2.0;
        for lambda in [1.0, 2.0] {
            let a = solve_aux_stepwise(&law, &rel, delta, Some(lambda), &rhs).unwrap();
            let (b, iters) = solve_aux_picard(&law, &rel, delta, lambda, &rhs, 1e-12).unwrap();
            assert!(a.max_abs_diff(&b).unwrap() <= 1e-9, "lambda {lambda}");
            assert!(iters >= 2);
        }
    }

    #[test]
    fn picard_with_zero_relation_is_one_linear_solve() {
        let g = grid(0.0, 100, 0.05);
        let law = identity_law(1);
        let rel = ScalarGraph::linear(0.0).unwrap();
        let rhs = Signal::from_scalar_fn(g, |t| (t * 0.6).sin());
        let (u, iters) = solve_aux_picard(&law, &rel, 1.0, 1.0, &rhs, 1e-12).unwrap();
        let direct =
            solve_linear_shifted(&law, 1.0, LinearVariant::DeltaMinusMprime, &rhs).unwrap();
        assert!(u.max_abs_diff(&direct).unwrap() <= 1e-12);
        assert!(iters <= 2);
    }

    #[test]
    fn stepwise_regularized_solutions_approach_the_unregularized_one() {
        let g = grid(0.0, 200, 0.02);
        let w = Weight::new(1.0).unwrap();
        let law = identity_law(1);
        let rel = ScalarGraph::linear(2.0).unwrap();
        let rhs = step_signal(g, 1.0);
        let exact = solve_aux_stepwise(&law, &rel, 1.0, None, &rhs).unwrap();
        let mut prev_err = f64::INFINITY;
        for lambda in [0.5, 0.05, 0.005] {
            let u = solve_aux_stepwise(&law, &rel, 1.0, Some(lambda), &rhs).unwrap();
            let err = u.sub(&exact).unwrap().weighted_norm(&w);
            assert!(err < prev_err, "error must shrink with the regularization");
            prev_err = err;
        }
        assert!(prev_err <= 1e-2);
    }

    fn ode_problem(g: TimeGrid, height: f64, relation: ScalarGraph) -> Problem {
        Problem::new(
            identity_law(1),
            relation,
            Weight::new(1.0).unwrap(),
            g,
            step_signal(g, height),
        )
        .unwrap()
    }

    #[test]
    fn both_routes_reproduce_the_linear_ode() {
        // u' + u = step => u(t) = 1 - exp(-t) for t >= 0.
        let g = grid(-1.0, 501, 0.01);
        let problem = ode_problem(g, 1.0, ScalarGraph::linear(1.0).unwrap());
        let opts = SolveOptions::default();
        let w = problem.weight;
        let exact = Signal::from_scalar_fn(g, |t| if t >= 0.0 { 1.0 - (-t).exp() } else { 0.0 });
        for route in [Route::Timestep, Route::YosidaGlobal] {
            let report = solve(&problem, route, &opts).unwrap();
            let err = report.u.sub(&exact).unwrap().weighted_norm(&w);
            assert!(err <= 2.0 * g.step(), "{route:?}: weighted error {err}");
            assert!(report.residual_final <= 10.0 * opts.tol);
        }
    }

    #[test]
    fn routes_agree_to_solver_tolerance() {
        let g = grid(-1.0, 401, 0.01);
        let problem = ode_problem(g, 1.0, ScalarGraph::linear(1.0).unwrap());
        let opts = SolveOptions::default();
        let a = solve(&problem, Route::YosidaGlobal, &opts).unwrap();
        let b = solve(&problem, Route::Timestep, &opts).unwrap();
        let diff = a.u.sub(&b.u).unwrap().weighted_norm(&problem.weight);
        assert!(diff <= 5.0 * opts.tol, "route gap {diff}");
    }

    #[test]
    fn subthreshold_forcing_on_the_sign_graph_stays_at_zero() {
        let g = grid(-1.0, 301, 0.01);
        let problem = ode_problem(g, 0.5, ScalarGraph::soft(PlGraph::sign()));
        let opts = SolveOptions::default();
        let b = solve(&problem, Route::Timestep, &opts).unwrap();
        assert_eq!(b.u.max_abs(), 0.0, "the stepper resolves the inclusion exactly");
        let a = solve(&problem, Route::YosidaGlobal, &opts).unwrap();
        assert!(a.u.weighted_norm(&problem.weight) <= opts.tol * 10.0);
    }

    #[test]
    fn overthreshold_forcing_on_the_sign_graph_ramps_linearly() {
        let g = grid(-1.0, 301, 0.01);
        let problem = ode_problem(g, 1.5, ScalarGraph::soft(PlGraph::sign()));
        let opts = SolveOptions::default();
        let b = solve(&problem, Route::Timestep, &opts).unwrap();
        let h = g.step();
        for k in 0..g.len() {
            let t = g.time(k);
            let expect = if t >= 0.0 { 0.5 * (t + h) } else { 0.0 };
            assert!(
                (b.u.sample(k)[0] - expect).abs() <= 1e-12,
                "step {k}: {} vs {expect}",
                b.u.sample(k)[0]
            );
        }
        let a = solve(&problem, Route::YosidaGlobal, &opts).unwrap();
        let diff = a.u.sub(&b.u).unwrap().weighted_norm(&problem.weight);
        assert!(diff <= 5.0 * opts.tol, "route gap {diff}");
    }

    #[test]
    fn zero_rhs_short_circuits_to_zero() {
        let g = grid(-1.0, 100, 0.05);
        let problem = Problem::new(
            identity_law(1),
            ScalarGraph::soft(PlGraph::sign()),
            Weight::new(1.0).unwrap(),
            g,
            Signal::zeros(g, 1),
        )
        .unwrap();
        let report = solve(&problem, Route::YosidaGlobal, &SolveOptions::default()).unwrap();
        assert_eq!(report.u.max_abs(), 0.0);
        assert_eq!(report.outer_iters, 0);
    }

    #[test]
    fn schedule_diagnostics_are_recorded_per_lambda() {
        let g = grid(-1.0, 201, 0.02);
        let problem = ode_problem(g, 1.0, ScalarGraph::soft(PlGraph::sign()));
        let opts = SolveOptions::default();
        let report = solve(&problem, Route::YosidaGlobal, &opts).unwrap();
        assert_eq!(report.per_lambda.len(), opts.schedule.len());
        for d in &report.per_lambda {
            assert!(d.residual <= 1e-10, "auxiliary solves are per-step exact");
            assert!(d.yosida_norm.is_finite() && d.h1_norm.is_finite());
        }
        // Gaps settle along the schedule.
        let gaps: Vec<f64> = report.per_lambda.iter().skip(1).map(|d| d.gap).collect();
        assert!(gaps.last().unwrap() <= &(0.1 * gaps[0].max(1e-300)));
    }

    #[test]
    fn kernel_law_runs_on_the_schedule_route_only() {
        let g = grid(0.0, 160, 0.05);
        let kernel = ConvKernel::scalar(vec![1.0 / g.step(), 0.3]).unwrap();
        let law = MaterialLaw::new(
            OperatorKind::Convolution(kernel),
            OperatorKind::zero(1),
            OperatorKind::Multiplier(Multiplier::scalar(0.5)),
            0.0,
        )
        .unwrap();
        let problem = Problem::new(
            law,
            ScalarGraph::linear(1.0).unwrap(),
            Weight::new(1.0).unwrap(),
            g,
            step_signal(g, 1.0),
        )
        .unwrap();
        let opts = SolveOptions::default();
        let report = solve(&problem, Route::YosidaGlobal, &opts).unwrap();
        assert!(report.residual_final <= 10.0 * opts.tol);
        assert!(matches!(
            solve(&problem, Route::Timestep, &opts),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn negative_static_term_is_refused_as_hypothesis_violation() {
        let g = grid(0.0, 100, 0.02);
        let law = MaterialLaw::constant(
            Multiplier::constant_diag(DVector::from_element(1, 1.0)),
            Multiplier::constant_diag(DVector::from_element(1, -1.0)),
            0.0,
        )
        .unwrap();
        let problem = Problem::new(
            law,
            ScalarGraph::linear(0.0).unwrap(),
            Weight::new(0.5).unwrap(),
            g,
            step_signal(g, 1.0),
        )
        .unwrap();
        let err = solve(&problem, Route::Timestep, &SolveOptions::default());
        match err {
            Err(Error::Hypothesis(msg)) => assert!(msg.contains("c_est")),
            other => panic!("expected hypothesis refusal, got {other:?}"),
        }
    }

    #[test]
    fn lipschitz_audit_is_zero_for_identical_data_and_bounded_for_random_pairs() {
        let g = grid(-1.0, 201, 0.02);
        let problem = ode_problem(g, 1.0, ScalarGraph::linear(1.0).unwrap());
        let opts = SolveOptions::default();
        let same = lipschitz_audit(&problem, problem.f(), Route::Timestep, &opts).unwrap();
        assert_eq!(same.ratio, 0.0);
        assert!(same.passed);

        let mut rng = ChaCha8Rng::seed_from_u64(47);
        for _ in 0..10 {
            let other = Signal::from_scalar_fn(g, |t| {
                (t * rng.gen_range(0.3..2.0)).sin() * rng.gen_range(0.2..2.0)
            });
            let audit = lipschitz_audit(&problem, &other, Route::Timestep, &opts).unwrap();
            assert!(audit.passed, "ratio {} above {}", audit.ratio, audit.bound);
        }
    }

    #[test]
    fn problem_construction_validates_inputs() {
        let g = grid(0.0, 50, 0.1);
        let other = grid(0.0, 60, 0.1);
        let law = identity_law(1);
        assert!(Problem::new(
            law.clone(),
            ScalarGraph::linear(1.0).unwrap(),
            Weight::new(1.0).unwrap(),
            g,
            Signal::zeros(other, 1)
        )
        .is_err());
        assert!(Problem::new(
            law.clone(),
            ScalarGraph::linear(1.0).unwrap(),
            Weight::new(1.0).unwrap(),
            g,
            Signal::zeros(g, 2)
        )
        .is_err());
        // A relation missing the origin is rejected.
        let shifted = ScalarGraph::custom(|_, z| z - 1.0);
        assert!(Problem::new(
            law,
            shifted,
            Weight::new(1.0).unwrap(),
            g,
            Signal::zeros(g, 1)
        )
        .is_err());
    }
}

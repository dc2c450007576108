//! Material laws: the bounded operator coefficients of the evolution
//! problem and the numerics that qualify them.
//!
//! A law carries three operators acting on signals: `M` (differentiated
//! part), `N` (undifferentiated part) and `Mprime`, the commutator
//! defect of `M` with the time derivative. Two kinds are supported:
//!
//! * **multiplier**: a (possibly time-varying) matrix acting pointwise
//!   per sample. Its `Mprime` is the user-supplied time derivative of
//!   the coefficient; [`commutator_residual`] is the consistency check
//!   (derivatives are not auto-generated, so jumps are never silently
//!   smoothed).
//! * **convolution**: a causal finitely supported kernel,
//!   `(K u)_k = h * sum_l K_l u_{k-l}`. Discrete convolution with zero
//!   prehistory commutes with the backward difference exactly, so for
//!   kernel laws the commutator term is identically zero and the
//!   constructor enforces that.
//!
//! Qualification consists of a positivity constant (sampled Rayleigh
//! quotient plus, for multiplier laws, a certified eigenvalue bound),
//! weighted operator norms by power iteration on `T* T`, and the shift
//! policy `delta` used by the solvers.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::weighted_time::{Signal, TimeGrid, Weight};

/// Which of the three law operators to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    M,
    Mprime,
    N,
}

#[derive(Debug, Clone)]
enum Coeffs {
    DiagConst(DVector<f64>),
    DiagVar(Vec<DVector<f64>>),
    DenseConst(DMatrix<f64>),
    DenseVar(Vec<DMatrix<f64>>),
}

/// Pointwise matrix coefficient, constant or sampled per time step.
/// Diagonal storage is kept separate so large diagonal systems never
/// materialize dense matrices.
#[derive(Debug, Clone)]
pub struct Multiplier {
    coeffs: Coeffs,
    dim: usize,
}

impl Multiplier {
    pub fn constant_diag(d: DVector<f64>) -> Self {
        let dim = d.len();
        Multiplier { coeffs: Coeffs::DiagConst(d), dim }
    }

    pub fn constant_dense(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::contract("multiplier matrices must be square"));
        }
        let dim = m.nrows();
        Ok(Multiplier { coeffs: Coeffs::DenseConst(m), dim })
    }

    pub fn scalar(value: f64) -> Self {
        Multiplier::constant_diag(DVector::from_element(1, value))
    }

    pub fn zero(dim: usize) -> Self {
        Multiplier::constant_diag(DVector::zeros(dim))
    }

    /// Samples a diagonal time profile on the grid.
    pub fn varying_diag(grid: &TimeGrid, dim: usize, mut f: impl FnMut(f64) -> DVector<f64>) -> Result<Self> {
        let mut samples = Vec::with_capacity(grid.len());
        for t in grid.times() {
            let d = f(t);
            if d.len() != dim {
                return Err(Error::mismatch(format!(
                    "diagonal profile returned length {} at t={t}, expected {dim}",
                    d.len()
                )));
            }
            samples.push(d);
        }
        Ok(Multiplier { coeffs: Coeffs::DiagVar(samples), dim })
    }

    pub fn varying_dense(grid: &TimeGrid, dim: usize, mut f: impl FnMut(f64) -> DMatrix<f64>) -> Result<Self> {
        let mut samples = Vec::with_capacity(grid.len());
        for t in grid.times() {
            let m = f(t);
            if m.nrows() != dim || m.ncols() != dim {
                return Err(Error::mismatch(format!(
                    "matrix profile returned {}x{} at t={t}, expected {dim}x{dim}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            samples.push(m);
        }
        Ok(Multiplier { coeffs: Coeffs::DenseVar(samples), dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_diagonal(&self) -> bool {
        matches!(self.coeffs, Coeffs::DiagConst(_) | Coeffs::DiagVar(_))
    }

    fn sample_count(&self) -> Option<usize> {
        match &self.coeffs {
            Coeffs::DiagVar(v) => Some(v.len()),
            Coeffs::DenseVar(v) => Some(v.len()),
            _ => None,
        }
    }

    /// Diagonal entries at step `k`, when diagonal.
    pub fn diag_at(&self, k: usize) -> Option<&DVector<f64>> {
        match &self.coeffs {
            Coeffs::DiagConst(d) => Some(d),
            Coeffs::DiagVar(v) => Some(&v[k]),
            _ => None,
        }
    }

    /// Dense matrix at step `k`, materializing diagonals on demand.
    pub fn dense_at(&self, k: usize) -> DMatrix<f64> {
        match &self.coeffs {
            Coeffs::DiagConst(d) => DMatrix::from_diagonal(d),
            Coeffs::DiagVar(v) => DMatrix::from_diagonal(&v[k]),
            Coeffs::DenseConst(m) => m.clone(),
            Coeffs::DenseVar(v) => v[k].clone(),
        }
    }

    pub fn matvec(&self, k: usize, src: &[f64], dst: &mut [f64]) {
        match &self.coeffs {
            Coeffs::DiagConst(d) => {
                for i in 0..self.dim {
                    dst[i] = d[i] * src[i];
                }
            }
            Coeffs::DiagVar(v) => {
                let d = &v[k];
                for i in 0..self.dim {
                    dst[i] = d[i] * src[i];
                }
            }
            Coeffs::DenseConst(m) => dense_matvec(m, src, dst, false),
            Coeffs::DenseVar(v) => dense_matvec(&v[k], src, dst, false),
        }
    }

    pub fn matvec_transpose(&self, k: usize, src: &[f64], dst: &mut [f64]) {
        match &self.coeffs {
            Coeffs::DiagConst(_) | Coeffs::DiagVar(_) => self.matvec(k, src, dst),
            Coeffs::DenseConst(m) => dense_matvec(m, src, dst, true),
            Coeffs::DenseVar(v) => dense_matvec(&v[k], src, dst, true),
        }
    }

    /// Adds `factor * sym(coefficient at k)` into `acc`.
    fn add_sym_scaled(&self, k: usize, factor: f64, acc: &mut DMatrix<f64>) {
        match &self.coeffs {
            Coeffs::DiagConst(d) => {
                for i in 0..self.dim {
                    acc[(i, i)] += factor * d[i];
                }
            }
            Coeffs::DiagVar(v) => {
                for i in 0..self.dim {
                    acc[(i, i)] += factor * v[k][i];
                }
            }
            Coeffs::DenseConst(m) => {
                for i in 0..self.dim {
                    for j in 0..self.dim {
                        acc[(i, j)] += factor * 0.5 * (m[(i, j)] + m[(j, i)]);
                    }
                }
            }
            Coeffs::DenseVar(v) => {
                let m = &v[k];
                for i in 0..self.dim {
                    for j in 0..self.dim {
                        acc[(i, j)] += factor * 0.5 * (m[(i, j)] + m[(j, i)]);
                    }
                }
            }
        }
    }

    /// Upper bound for the pointwise operator norm, exact for diagonal
    /// coefficients, Frobenius for dense ones.
    pub fn norm_upper_bound(&self) -> f64 {
        match &self.coeffs {
            Coeffs::DiagConst(d) => d.abs().max(),
            Coeffs::DiagVar(v) => v.iter().map(|d| d.abs().max()).fold(0.0, f64::max),
            Coeffs::DenseConst(m) => m.norm(),
            Coeffs::DenseVar(v) => v.iter().map(|m| m.norm()).fold(0.0, f64::max),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.norm_upper_bound() == 0.0
    }
}

fn dense_matvec(m: &DMatrix<f64>, src: &[f64], dst: &mut [f64], transpose: bool) {
    let n = m.nrows();
    for r in 0..n {
        let mut acc = 0.0;
        for c in 0..n {
            let entry = if transpose { m[(c, r)] } else { m[(r, c)] };
            acc += entry * src[c];
        }
        dst[r] = acc;
    }
}

/// Causal finitely supported convolution kernel: `lags[l]` is the
/// matrix weight at lag `l * h`, and the action is
/// `(K u)_k = h * sum_{l <= k} lags[l] * u_{k-l}`.
#[derive(Debug, Clone)]
pub struct ConvKernel {
    lags: Vec<DMatrix<f64>>,
    dim: usize,
}

impl ConvKernel {
    pub fn new(lags: Vec<DMatrix<f64>>) -> Result<Self> {
        let first = lags
            .first()
            .ok_or_else(|| Error::contract("convolution kernel needs at least one lag"))?;
        if first.nrows() != first.ncols() {
            return Err(Error::contract("kernel matrices must be square"));
        }
        let dim = first.nrows();
        for m in &lags {
            if m.nrows() != dim || m.ncols() != dim {
                return Err(Error::mismatch("kernel lags must share one dimension"));
            }
        }
        Ok(ConvKernel { lags, dim })
    }

    pub fn scalar(lags: Vec<f64>) -> Result<Self> {
        ConvKernel::new(
            lags.into_iter()
                .map(|v| DMatrix::from_element(1, 1, v))
                .collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lags(&self) -> &[DMatrix<f64>] {
        &self.lags
    }

    fn apply(&self, u: &Signal) -> Signal {
        let grid = *u.grid();
        let h = grid.step();
        let dim = u.dim();
        let mut out = Signal::zeros(grid, dim);
        let mut tmp = vec![0.0; dim];
        for k in 0..grid.len() {
            let upto = self.lags.len().min(k + 1);
            for (l, lag) in self.lags.iter().take(upto).enumerate() {
                dense_matvec(lag, u.sample(k - l), &mut tmp, false);
                let dst = out.sample_mut(k);
                for i in 0..dim {
                    dst[i] += h * tmp[i];
                }
            }
        }
        out
    }

    /// Adjoint for the weighted inner product: an anticausal weighted
    /// correlation, `(K* v)_j = h * sum_l exp(-2 rho l h) lags[l]^T v_{j+l}`.
    fn apply_adjoint(&self, v: &Signal, weight: &Weight) -> Signal {
        let grid = *v.grid();
        let h = grid.step();
        let dim = v.dim();
        let n = grid.len();
        let mut out = Signal::zeros(grid, dim);
        let mut tmp = vec![0.0; dim];
        for j in 0..n {
            for (l, lag) in self.lags.iter().enumerate() {
                let k = j + l;
                if k >= n {
                    break;
                }
                let damp = (-2.0 * weight.rho() * (l as f64) * h).exp();
                dense_matvec(lag, v.sample(k), &mut tmp, true);
                let dst = out.sample_mut(j);
                for i in 0..dim {
                    dst[i] += h * damp * tmp[i];
                }
            }
        }
        out
    }

    /// Triangle-inequality norm bound `h * sum_l |lags[l]|_F`, valid at
    /// every weight because lag shifts are contractions.
    pub fn norm_upper_bound(&self, h: f64) -> f64 {
        h * self.lags.iter().map(|m| m.norm()).sum::<f64>()
    }
}

/// One of the three law operators.
#[derive(Debug, Clone)]
pub enum OperatorKind {
    Multiplier(Multiplier),
    Convolution(ConvKernel),
}

impl OperatorKind {
    pub fn zero(dim: usize) -> Self {
        OperatorKind::Multiplier(Multiplier::zero(dim))
    }

    pub fn dim(&self) -> usize {
        match self {
            OperatorKind::Multiplier(m) => m.dim(),
            OperatorKind::Convolution(k) => k.dim(),
        }
    }

    pub fn as_multiplier(&self) -> Option<&Multiplier> {
        match self {
            OperatorKind::Multiplier(m) => Some(m),
            OperatorKind::Convolution(_) => None,
        }
    }

    pub fn as_convolution(&self) -> Option<&ConvKernel> {
        match self {
            OperatorKind::Convolution(k) => Some(k),
            OperatorKind::Multiplier(_) => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            OperatorKind::Multiplier(m) => m.is_zero(),
            OperatorKind::Convolution(k) => k.lags.iter().all(|m| m.norm() == 0.0),
        }
    }

    fn check_signal(&self, u: &Signal, grid_samples: usize) -> Result<()> {
        if u.dim() != self.dim() {
            return Err(Error::mismatch(format!(
                "operator dimension {} does not match signal dimension {}",
                self.dim(),
                u.dim()
            )));
        }
        if let OperatorKind::Multiplier(m) = self {
            if let Some(count) = m.sample_count() {
                if count != grid_samples {
                    return Err(Error::mismatch(format!(
                        "coefficient sampled at {count} steps but signal has {grid_samples}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn apply(&self, u: &Signal) -> Result<Signal> {
        self.check_signal(u, u.grid().len())?;
        Ok(match self {
            OperatorKind::Multiplier(m) => {
                u.map_samples(|k, src, dst| m.matvec(k, src, dst))
            }
            OperatorKind::Convolution(k) => k.apply(u),
        })
    }

    fn apply_adjoint(&self, v: &Signal, weight: &Weight) -> Result<Signal> {
        self.check_signal(v, v.grid().len())?;
        Ok(match self {
            OperatorKind::Multiplier(m) => {
                v.map_samples(|k, src, dst| m.matvec_transpose(k, src, dst))
            }
            OperatorKind::Convolution(k) => k.apply_adjoint(v, weight),
        })
    }
}

/// The coefficient triple of the evolution problem.
#[derive(Debug, Clone)]
pub struct MaterialLaw {
    m: OperatorKind,
    mprime: OperatorKind,
    n: OperatorKind,
    rho0: f64,
}

impl MaterialLaw {
    pub fn new(m: OperatorKind, mprime: OperatorKind, n: OperatorKind, rho0: f64) -> Result<Self> {
        let dim = m.dim();
        if mprime.dim() != dim || n.dim() != dim {
            return Err(Error::mismatch(format!(
                "law parts disagree on dimension: {} / {} / {}",
                dim,
                mprime.dim(),
                n.dim()
            )));
        }
        if !mprime.as_multiplier().is_some() {
            return Err(Error::contract(
                "the commutator term must be a multiplier (it is a pointwise derivative)",
            ));
        }
        if m.as_convolution().is_some() && !mprime.is_zero() {
            return Err(Error::contract(
                "kernel laws commute with the backward difference exactly; their commutator term must be zero",
            ));
        }
        if !rho0.is_finite() || rho0 < 0.0 {
            return Err(Error::contract(format!(
                "minimal admissible weight must be nonnegative, got {rho0}"
            )));
        }
        Ok(MaterialLaw { m, mprime, n, rho0 })
    }

    /// Law with constant `M`, zero commutator and constant `N`.
    pub fn constant(m: Multiplier, n: Multiplier, rho0: f64) -> Result<Self> {
        let dim = m.dim();
        MaterialLaw::new(
            OperatorKind::Multiplier(m),
            OperatorKind::zero(dim),
            OperatorKind::Multiplier(n),
            rho0,
        )
    }

    pub fn dim(&self) -> usize {
        self.m.dim()
    }

    pub fn rho0(&self) -> f64 {
        self.rho0
    }

    pub fn part(&self, part: Part) -> &OperatorKind {
        match part {
            Part::M => &self.m,
            Part::Mprime => &self.mprime,
            Part::N => &self.n,
        }
    }

    pub fn apply(&self, part: Part, u: &Signal) -> Result<Signal> {
        self.part(part).apply(u)
    }

    /// Whether every part acts pointwise in time (the per-step
    /// time-stepper route requires this for `N`; `M` may be a kernel).
    pub fn is_pointwise(&self) -> bool {
        self.m.as_multiplier().is_some() && self.n.as_multiplier().is_some()
    }
}

/// Relative defect of the product rule
/// `derivative(M u) = M derivative(u) + Mprime u` on the supplied
/// signal; first order in the step for Lipschitz coefficients with a
/// consistent derivative, and exactly zero for constant multipliers
/// and convolution kernels.
pub fn commutator_residual(law: &MaterialLaw, weight: &Weight, u: &Signal) -> Result<f64> {
    let lhs = law.apply(Part::M, u)?.derivative();
    let rhs = law
        .apply(Part::M, &u.derivative())?
        .add(&law.apply(Part::Mprime, u)?)?;
    let defect = lhs.sub(&rhs)?.weighted_norm(weight);
    Ok(defect / (1.0 + u.sobolev_norm(weight, 1)?))
}

/// Outcome of positivity estimation.
#[derive(Debug, Clone)]
pub struct PositivityReport {
    /// Worst sampled Rayleigh quotient of the truncated pairing.
    pub sampled: f64,
    /// Eigenvalue lower bound, available for multiplier laws.
    pub certified: Option<f64>,
    /// The working constant: the smaller of the two estimates.
    pub c_est: f64,
    /// Certified bound did not exceed the sampled minimum (it never
    /// should; a violation marks an inconsistent law description).
    pub consistent: bool,
}

impl PositivityReport {
    pub fn is_violated(&self) -> bool {
        self.c_est <= 0.0
    }
}

fn random_smooth_signal(rng: &mut ChaCha8Rng, grid: TimeGrid, dim: usize) -> Signal {
    let span = grid.end() - grid.start();
    let modes: Vec<(f64, f64, f64)> = (0..3 * dim)
        .map(|_| {
            (
                rng.gen_range(-1.0..1.0),
                rng.gen_range(0.2..2.5) * std::f64::consts::TAU / span.max(1.0),
                rng.gen_range(0.0..std::f64::consts::TAU),
            )
        })
        .collect();
    Signal::from_fn(grid, dim, |t, i| {
        modes[3 * i..3 * (i + 1)]
            .iter()
            .map(|(a, w, p)| a * (w * (t - grid.start()) + p).sin())
            .sum()
    })
}

/// Estimates the positivity constant of the pairing
/// `< derivative(M phi) + N phi, truncate(phi, a) >` over random smooth
/// signals and random cutoffs, and (for multiplier laws) certifies a
/// lower bound from the pointwise eigenvalue expression
/// `min_t eig_min(rate * sym m - 0.5 * sym mprime + sym n)` with the
/// discrete coercivity rate of the backward difference.
pub fn positivity_constant(
    law: &MaterialLaw,
    weight: &Weight,
    grid: &TimeGrid,
    trials: usize,
    seed: u64,
) -> Result<PositivityReport> {
    let dim = law.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sampled = f64::INFINITY;
    let span = grid.end() - grid.start();
    let mut done = 0usize;
    while done < trials {
        let phi = random_smooth_signal(&mut rng, *grid, dim);
        let a = grid.start() + span * rng.gen_range(0.2..1.0);
        let cut = phi.truncate(a);
        let denom = cut.weighted_inner(&cut, weight)?;
        if denom < 1e-8 {
            continue;
        }
        let image = law.apply(Part::M, &phi)?.derivative().add(&law.apply(Part::N, &phi)?)?;
        let quotient = image.weighted_inner(&cut, weight)? / denom;
        sampled = sampled.min(quotient);
        done += 1;
    }

    let certified = certified_lower_bound(law, weight, grid);
    let c_est = match certified {
        Some(c) => c.min(sampled),
        None => sampled,
    };
    let consistent = certified.is_none_or(|c| c <= sampled + 1e-9 * (1.0 + sampled.abs()));
    Ok(PositivityReport { sampled, certified, c_est, consistent })
}

fn certified_lower_bound(law: &MaterialLaw, weight: &Weight, grid: &TimeGrid) -> Option<f64> {
    let m = law.m.as_multiplier()?;
    let n = law.n.as_multiplier()?;
    let mp = law.mprime.as_multiplier()?;
    let rate = weight.discrete_rate(grid.step());
    let dim = law.dim();
    let all_diag = m.is_diagonal() && n.is_diagonal() && mp.is_diagonal();
    let mut worst = f64::INFINITY;
    for k in 0..grid.len() {
        if all_diag {
            let (dm, dn, dp) = (
                m.diag_at(k).expect("diagonal"),
                n.diag_at(k).expect("diagonal"),
                mp.diag_at(k).expect("diagonal"),
            );
            for i in 0..dim {
                worst = worst.min(rate * dm[i] - 0.5 * dp[i] + dn[i]);
            }
        } else {
            let mut acc = DMatrix::zeros(dim, dim);
            m.add_sym_scaled(k, rate, &mut acc);
            mp.add_sym_scaled(k, -0.5, &mut acc);
            n.add_sym_scaled(k, 1.0, &mut acc);
            let eig = acc.symmetric_eigen();
            worst = worst.min(eig.eigenvalues.min());
        }
    }
    Some(worst)
}

/// Weighted operator norm estimate.
#[derive(Debug, Clone, Copy)]
pub struct NormEstimate {
    pub value: f64,
    /// Power iteration failed to settle somewhere and the value is the
    /// (coarser) triangle-inequality upper bound.
    pub flagged: bool,
}

fn power_iteration_norm(
    op: &OperatorKind,
    weight: &Weight,
    grid: &TimeGrid,
    rng: &mut ChaCha8Rng,
) -> Option<f64> {
    let dim = op.dim();
    let mut x = Signal::from_fn(*grid, dim, |_, _| rng.gen_range(-1.0..1.0));
    let mut lambda_prev = f64::INFINITY;
    for _ in 0..300 {
        let norm_x = x.weighted_norm(weight);
        if norm_x == 0.0 {
            return Some(0.0);
        }
        x = x.scale(1.0 / norm_x);
        let gx = op
            .apply_adjoint(&op.apply(&x).ok()?, weight)
            .ok()?;
        let lambda = gx.weighted_inner(&x, weight).ok()?.max(0.0);
        if (lambda - lambda_prev).abs() <= 1e-12 * lambda.max(1e-30) {
            return Some(lambda.sqrt());
        }
        lambda_prev = lambda;
        if gx.weighted_norm(weight) == 0.0 {
            return Some(0.0);
        }
        x = gx;
    }
    None
}

/// Largest weighted operator norm of a law part over the supplied
/// weights; the surrogate for a uniform-in-weight norm bound.
pub fn operator_norm(
    law: &MaterialLaw,
    part: Part,
    weights: &[Weight],
    grid: &TimeGrid,
    seed: u64,
) -> Result<NormEstimate> {
    if weights.is_empty() {
        return Err(Error::contract("operator norm needs at least one weight sample"));
    }
    let op = law.part(part);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut value = 0.0f64;
    let mut flagged = false;
    for w in weights {
        match power_iteration_norm(op, w, grid, &mut rng) {
            Some(v) => value = value.max(v),
            None => {
                flagged = true;
                let bound = match op {
                    OperatorKind::Multiplier(m) => m.norm_upper_bound(),
                    OperatorKind::Convolution(k) => k.norm_upper_bound(grid.step()),
                };
                value = value.max(bound);
            }
        }
    }
    Ok(NormEstimate { value, flagged })
}

/// Shift policy for the auxiliary solves.
#[derive(Debug, Clone, Copy)]
pub struct DeltaReport {
    pub delta: f64,
    pub mprime_norm: f64,
    pub n_norm: f64,
}

/// Picks `delta = |Mprime| + |N| + max(1, 0.1 (|Mprime| + |N|))`: safely
/// above the perturbation norms, with a margin keeping contraction
/// factors away from one.
pub fn delta_policy(
    law: &MaterialLaw,
    weights: &[Weight],
    grid: &TimeGrid,
    seed: u64,
) -> Result<DeltaReport> {
    let mprime_norm = operator_norm(law, Part::Mprime, weights, grid, seed)?.value;
    let n_norm = operator_norm(law, Part::N, weights, grid, seed.wrapping_add(1))?.value;
    let base = mprime_norm + n_norm;
    Ok(DeltaReport { delta: base + 1.0f64.max(0.1 * base), mprime_norm, n_norm })
}

//! Two-dimensional transverse-electric eddy-current application on a
//! staggered grid: in-plane electric field on edges, out-of-plane
//! magnetic field on cell centers, and a piecewise-linear saturable
//! constitutive curve between them.
//!
//! Writing `Et` for the time antiderivative of the edge field and `w`
//! for the cell field, the semistatic system is the degenerate block
//! inclusion
//!
//! ```text
//! d/dt (sigma Et) - curl^T w = -J        (conduction row, evolving)
//! curl Et + Z(w) ∋ b0                    (flux row, algebraic)
//! ```
//!
//! whose operator part splits into an exactly skew block off-diagonal
//! pair plus the monotone curve `Z` on the diagonal; the flux field is
//! recovered as `b = b0 - curl Et`. One backward-difference step
//! reduces, after eliminating the edge unknown, to the cell-space
//! inclusion `S w + Z(w) ∋ r` with `S = curl (h / sigma) curl^T`
//! symmetric positive semidefinite, solved either by a semismooth
//! Newton method or by resolvent splitting; the two per-step methods
//! cross-validate each other.
//!
//! All matrices are dense: the shipped grids stay at or below 16 x 16
//! cells, where assembly clarity beats sparsity.

use crate::error::{Error, Result};
use crate::graph::PlGraph;
use crate::weighted_time::{Signal, TimeGrid, Weight};
use nalgebra::linalg::{Cholesky, LU};
use nalgebra::{DMatrix, DVector, Dyn};

/// A rectangular cell grid `[0, lx] x [0, ly]` with `nx * ny` cells.
/// Tangential edge components on the outer boundary are eliminated
/// (perfect-conductor condition), so the edge space holds
/// `nx (ny - 1)` x-directed plus `(nx - 1) ny` y-directed components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StaggeredGrid2D {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
}

impl StaggeredGrid2D {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::contract(format!(
                "grid needs at least 2 cells per direction, got {nx} x {ny}"
            )));
        }
        if !lx.is_finite() || lx <= 0.0 || !ly.is_finite() || ly <= 0.0 {
            return Err(Error::contract(format!(
                "grid extents must be positive, got {lx} x {ly}"
            )));
        }
        Ok(StaggeredGrid2D { nx, ny, lx, ly })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn dx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    /// Quadrature weight shared by edge and cell degrees of freedom.
    pub fn cell_area(&self) -> f64 {
        self.dx() * self.dy()
    }

    pub fn cell_count(&self) -> usize {
        self.nx * self.ny
    }

    pub fn node_count(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    /// Edges remaining after boundary elimination.
    pub fn edge_count(&self) -> usize {
        self.nx * (self.ny - 1) + (self.nx - 1) * self.ny
    }

    /// All edges, boundary included.
    pub fn full_edge_count(&self) -> usize {
        self.nx * (self.ny + 1) + (self.nx + 1) * self.ny
    }

    pub fn cell_index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn node_index(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    /// Interior x-directed edge at `(i + 1/2, j)`, `j = 1 .. ny - 1`.
    pub fn x_edge_index(&self, i: usize, j: usize) -> Option<usize> {
        if i < self.nx && j >= 1 && j < self.ny {
            Some((j - 1) * self.nx + i)
        } else {
            None
        }
    }

    /// Interior y-directed edge at `(i, j + 1/2)`, `i = 1 .. nx - 1`.
    pub fn y_edge_index(&self, i: usize, j: usize) -> Option<usize> {
        if i >= 1 && i < self.nx && j < self.ny {
            Some(self.nx * (self.ny - 1) + j * (self.nx - 1) + (i - 1))
        } else {
            None
        }
    }

    /// Any x-directed edge at `(i + 1/2, j)`, `j = 0 .. ny`.
    pub fn full_x_edge_index(&self, i: usize, j: usize) -> Option<usize> {
        if i < self.nx && j <= self.ny {
            Some(j * self.nx + i)
        } else {
            None
        }
    }

    /// Any y-directed edge at `(i, j + 1/2)`, `i = 0 .. nx`.
    pub fn full_y_edge_index(&self, i: usize, j: usize) -> Option<usize> {
        if i <= self.nx && j < self.ny {
            Some(self.nx * (self.ny + 1) + j * (self.nx + 1) + i)
        } else {
            None
        }
    }

    /// Midpoint of the interior edge with the given index.
    pub fn edge_midpoint(&self, e: usize) -> (f64, f64) {
        let nex = self.nx * (self.ny - 1);
        if e < nex {
            let j = e / self.nx + 1;
            let i = e % self.nx;
            ((i as f64 + 0.5) * self.dx(), j as f64 * self.dy())
        } else {
            let r = e - nex;
            let j = r / (self.nx - 1);
            let i = r % (self.nx - 1) + 1;
            (i as f64 * self.dx(), (j as f64 + 0.5) * self.dy())
        }
    }

    /// Center of the cell with the given index.
    pub fn cell_center(&self, c: usize) -> (f64, f64) {
        let j = c / self.nx;
        let i = c % self.nx;
        ((i as f64 + 0.5) * self.dx(), (j as f64 + 0.5) * self.dy())
    }
}

/// The discrete differential operators of the grid.
#[derive(Debug, Clone)]
pub struct MimeticOperators {
    grid: StaggeredGrid2D,
    /// Scalar curl, eliminated edge space to cells.
    curl_interior: DMatrix<f64>,
    /// Scalar curl on the full edge space.
    curl_full: DMatrix<f64>,
    /// Divergence with zero normal ghosts, full edge space to nodes.
    div_full: DMatrix<f64>,
    /// Interior edge index -> full edge index.
    embed: Vec<usize>,
}

/// Assembles curl and divergence for a grid.
pub fn build_operators(grid: &StaggeredGrid2D) -> MimeticOperators {
    let (nx, ny) = (grid.nx, grid.ny);
    let (dx, dy) = (grid.dx(), grid.dy());
    let mut curl_interior = DMatrix::zeros(grid.cell_count(), grid.edge_count());
    let mut curl_full = DMatrix::zeros(grid.cell_count(), grid.full_edge_count());
    for j in 0..ny {
        for i in 0..nx {
            let c = grid.cell_index(i, j);
            // (d/dx of the y-component) - (d/dy of the x-component).
            if let Some(e) = grid.y_edge_index(i + 1, j) {
                curl_interior[(c, e)] += 1.0 / dx;
            }
            if let Some(e) = grid.y_edge_index(i, j) {
                curl_interior[(c, e)] -= 1.0 / dx;
            }
            if let Some(e) = grid.x_edge_index(i, j + 1) {
                curl_interior[(c, e)] -= 1.0 / dy;
            }
            if let Some(e) = grid.x_edge_index(i, j) {
                curl_interior[(c, e)] += 1.0 / dy;
            }
            curl_full[(c, grid.full_y_edge_index(i + 1, j).unwrap())] += 1.0 / dx;
            curl_full[(c, grid.full_y_edge_index(i, j).unwrap())] -= 1.0 / dx;
            curl_full[(c, grid.full_x_edge_index(i, j + 1).unwrap())] -= 1.0 / dy;
            curl_full[(c, grid.full_x_edge_index(i, j).unwrap())] += 1.0 / dy;
        }
    }
    let mut div_full = DMatrix::zeros(grid.node_count(), grid.full_edge_count());
    for j in 0..=ny {
        for i in 0..=nx {
            let n = grid.node_index(i, j);
            if i < nx {
                div_full[(n, grid.full_x_edge_index(i, j).unwrap())] += 1.0 / dx;
            }
            if i >= 1 {
                div_full[(n, grid.full_x_edge_index(i - 1, j).unwrap())] -= 1.0 / dx;
            }
            if j < ny {
                div_full[(n, grid.full_y_edge_index(i, j).unwrap())] += 1.0 / dy;
            }
            if j >= 1 {
                div_full[(n, grid.full_y_edge_index(i, j - 1).unwrap())] -= 1.0 / dy;
            }
        }
    }
    let mut embed = vec![0usize; grid.edge_count()];
    for j in 1..ny {
        for i in 0..nx {
            embed[grid.x_edge_index(i, j).unwrap()] = grid.full_x_edge_index(i, j).unwrap();
        }
    }
    for j in 0..ny {
        for i in 1..nx {
            embed[grid.y_edge_index(i, j).unwrap()] = grid.full_y_edge_index(i, j).unwrap();
        }
    }
    MimeticOperators { grid: *grid, curl_interior, curl_full, div_full, embed }
}

/// Quantitative form of the structural identities the operators must
/// satisfy; every field is checkable against a pinned threshold.
#[derive(Debug, Clone, Copy)]
pub struct OperatorIdentityReport {
    /// Largest entry of `div curl^T`, relative to the operator scale.
    pub div_curl_defect: f64,
    /// Largest column sum of the eliminated curl (flux conservation).
    pub mean_curl_defect: f64,
    /// Largest entry of `A + A^T` for the assembled block operator.
    pub skew_defect: f64,
    /// Dimension of curl-free, divergence-free eliminated edge fields.
    pub edge_harmonic_dim: usize,
    /// Dimension of the kernel of `curl^T` on cells.
    pub cell_harmonic_dim: usize,
}

fn nullity(m: &DMatrix<f64>) -> usize {
    let cols = m.ncols();
    let svd = m.clone().svd(false, false);
    let smax = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    let tol = smax * (m.nrows().max(cols) as f64) * f64::EPSILON * 16.0;
    let rank = svd.singular_values.iter().filter(|s| **s > tol).count();
    cols - rank
}

impl MimeticOperators {
    pub fn grid(&self) -> &StaggeredGrid2D {
        &self.grid
    }

    pub fn curl(&self) -> &DMatrix<f64> {
        &self.curl_interior
    }

    /// Zero-pads an eliminated edge field onto the full edge space.
    pub fn embed_edges(&self, e: &DVector<f64>) -> DVector<f64> {
        let mut full = DVector::zeros(self.grid.full_edge_count());
        for (int_idx, full_idx) in self.embed.iter().enumerate() {
            full[*full_idx] = e[int_idx];
        }
        full
    }

    /// The operator block `[[0, -curl^T], [curl, 0]]` on edge + cell
    /// unknowns; exactly skew by construction.
    pub fn assemble_block(&self) -> DMatrix<f64> {
        let ne = self.grid.edge_count();
        let nc = self.grid.cell_count();
        let mut a = DMatrix::zeros(ne + nc, ne + nc);
        for r in 0..nc {
            for c in 0..ne {
                let v = self.curl_interior[(r, c)];
                a[(ne + r, c)] = v;
                a[(c, ne + r)] = -v;
            }
        }
        a
    }

    /// Evaluates every structural identity. The harmonic dimensions
    /// come from dense rank computations, so this is meant for the
    /// shipped grid sizes, not production meshes.
    pub fn identity_report(&self) -> OperatorIdentityReport {
        let scale = 1.0 / (self.grid.dx() * self.grid.dy());
        let prod = &self.div_full * self.curl_full.transpose();
        let div_curl_defect = prod.iter().fold(0.0f64, |m, v| m.max(v.abs())) / scale;
        let ones = DVector::from_element(self.grid.cell_count(), 1.0);
        let col_sums = self.curl_interior.transpose() * ones;
        let mean_curl_defect =
            col_sums.iter().fold(0.0f64, |m, v| m.max(v.abs())) * self.grid.dx().min(self.grid.dy());
        let block = self.assemble_block();
        let skew = &block + block.transpose();
        let skew_defect = skew.iter().fold(0.0f64, |m, v| m.max(v.abs()));

        // Constrained harmonic fields: curl-free and divergence-free
        // after zero-padding, i.e. the kernel of the stacked operator.
        let ne = self.grid.edge_count();
        let mut stacked =
            DMatrix::zeros(self.grid.cell_count() + self.grid.node_count(), ne);
        stacked
            .view_mut((0, 0), (self.grid.cell_count(), ne))
            .copy_from(&self.curl_interior);
        for (int_idx, full_idx) in self.embed.iter().enumerate() {
            for n in 0..self.grid.node_count() {
                stacked[(self.grid.cell_count() + n, int_idx)] = self.div_full[(n, *full_idx)];
            }
        }
        let edge_harmonic_dim = nullity(&stacked);
        let cell_harmonic_dim = nullity(&self.curl_interior.transpose().clone_owned());
        OperatorIdentityReport {
            div_curl_defect,
            mean_curl_defect,
            skew_defect,
            edge_harmonic_dim,
            cell_harmonic_dim,
        }
    }
}

/// A saturable constitutive curve: single-valued, strongly monotone
/// piecewise-linear map from the cell field to the flux.
fn validate_curve(curve: &PlGraph) -> Result<()> {
    if !curve.max_slope().is_finite() {
        return Err(Error::contract(
            "constitutive curve must be single-valued (no vertical corners)",
        ));
    }
    if curve.min_slope() <= 0.0 {
        return Err(Error::contract(
            "constitutive curve must be strongly monotone (all slopes positive)",
        ));
    }
    if !curve.contains_origin() {
        return Err(Error::contract("constitutive curve must pass through the origin"));
    }
    Ok(())
}

/// A fully specified eddy-current run: geometry, conductivity on
/// edges, constitutive curve on cells, source current and initial
/// flux. The initial flux is projected onto mean-free fields; the
/// removed component is recorded, not silently dropped.
#[derive(Debug, Clone)]
pub struct MaxwellProblem {
    ops: MimeticOperators,
    time: TimeGrid,
    weight: Weight,
    sigma: DVector<f64>,
    curve: PlGraph,
    j_pattern: DVector<f64>,
    j_profile: Vec<f64>,
    b0: DVector<f64>,
    removed_b0_norm: f64,
}

impl MaxwellProblem {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        ops: MimeticOperators,
        time: TimeGrid,
        weight: Weight,
        sigma: DVector<f64>,
        curve: PlGraph,
        j_pattern: DVector<f64>,
        j_profile: Vec<f64>,
        b0: DVector<f64>,
    ) -> Result<Self> {
        let ne = ops.grid.edge_count();
        let nc = ops.grid.cell_count();
        if sigma.len() != ne {
            return Err(Error::mismatch(format!(
                "conductivity has {} entries, the grid carries {ne} edges",
                sigma.len()
            )));
        }
        if sigma.iter().any(|s| !s.is_finite() || *s <= 0.0) {
            return Err(Error::contract("conductivity must be positive on every edge"));
        }
        validate_curve(&curve)?;
        if j_pattern.len() != ne {
            return Err(Error::mismatch(format!(
                "source pattern has {} entries, the grid carries {ne} edges",
                j_pattern.len()
            )));
        }
        if j_profile.len() != time.len() {
            return Err(Error::mismatch(format!(
                "source profile has {} samples, the time grid {}",
                j_profile.len(),
                time.len()
            )));
        }
        if b0.len() != nc {
            return Err(Error::mismatch(format!(
                "initial flux has {} entries, the grid carries {nc} cells",
                b0.len()
            )));
        }
        let mean = b0.sum() / nc as f64;
        let removed_b0_norm = mean.abs() * (nc as f64 * ops.grid.cell_area()).sqrt();
        let b0 = b0.map(|v| v - mean);
        Ok(MaxwellProblem {
            ops,
            time,
            weight,
            sigma,
            curve,
            j_pattern,
            j_profile,
            b0,
            removed_b0_norm,
        })
    }

    pub fn operators(&self) -> &MimeticOperators {
        &self.ops
    }

    pub fn time(&self) -> &TimeGrid {
        &self.time
    }

    pub fn weight(&self) -> &Weight {
        &self.weight
    }

    pub fn curve(&self) -> &PlGraph {
        &self.curve
    }

    pub fn removed_b0_norm(&self) -> f64 {
        self.removed_b0_norm
    }

    /// Source vector at step `k`.
    pub fn current_at(&self, k: usize) -> DVector<f64> {
        &self.j_pattern * self.j_profile[k]
    }

    /// Same problem with the source pattern scaled.
    pub fn scaled_source(&self, factor: f64) -> MaxwellProblem {
        let mut p = self.clone();
        p.j_pattern *= factor;
        p
    }

    /// Same problem with the curve replaced by its slope at the
    /// origin: the linear comparator of the saturation study.
    pub fn linearized(&self) -> Result<MaxwellProblem> {
        let slope = self.curve.value_and_slope(0.0)?.1;
        let mut p = self.clone();
        p.curve = PlGraph::linear(slope)?;
        Ok(p)
    }
}

/// How the per-step cell inclusion `S w + Z(w) ∋ r` is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepMethod {
    /// Semismooth Newton on `F(w) = S w + Z(w) - r`; the Jacobian
    /// `S + diag(Z')` is symmetric positive definite because `S` is
    /// positive semidefinite and every curve slope is positive.
    Newton,
    /// Damped forward step on `S` composed with the exact resolvent
    /// of the curve; first-order, derivative-free, and independent of
    /// the Newton linear algebra, which is what makes it a
    /// cross-check rather than a restatement.
    ResolventSplitting,
}

/// Scalar diagnostics of a run; every field has a pinned acceptance
/// threshold or is reported for the record.
#[derive(Debug, Clone, Copy)]
pub struct MaxwellDiagnostics {
    /// Largest drift of the flux mean from its initial value.
    pub div_drift: f64,
    /// Largest flux mean in absolute value (harmonic component).
    pub harmonic_b_max: f64,
    /// Largest relative defect of the per-step power balance
    /// `<sigma E, E> + <w, dB/dt> + <J, E> = 0`.
    pub energy_imbalance: f64,
    /// Largest distance of `(w, b)` pairs from the constitutive curve.
    pub constitutive_defect: f64,
    /// Worst inner iteration count over all steps.
    pub max_inner_iters: usize,
    /// Weighted norm of the mean component removed from the initial
    /// flux.
    pub removed_b0_norm: f64,
}

/// Trajectories and diagnostics of one run.
#[derive(Debug, Clone)]
pub struct MaxwellRun {
    /// Antiderivative of the edge field.
    pub e_tilde: Signal,
    /// Edge field (backward difference of `e_tilde`).
    pub e: Signal,
    /// Cell field.
    pub h: Signal,
    /// Flux, `b0 - curl e_tilde`.
    pub b: Signal,
    pub diagnostics: MaxwellDiagnostics,
}

impl MaxwellRun {
    fn field_at(signal: &Signal, k: usize) -> DVector<f64> {
        DVector::from_column_slice(signal.sample(k))
    }

    pub fn final_e(&self) -> DVector<f64> {
        Self::field_at(&self.e, self.e.grid().len() - 1)
    }

    pub fn final_h(&self) -> DVector<f64> {
        Self::field_at(&self.h, self.h.grid().len() - 1)
    }
}

fn spectral_norm_symmetric(s: &DMatrix<f64>) -> f64 {
    let mut x = DVector::from_element(s.ncols(), 1.0);
    let mut lam = 0.0f64;
    for _ in 0..200 {
        let y = s * &x;
        let norm = y.norm();
        if norm == 0.0 {
            return 0.0;
        }
        x = y / norm;
        let next = (s * &x).dot(&x);
        if (next - lam).abs() <= 1e-10 * next.max(1e-30) {
            return next;
        }
        lam = next;
    }
    lam
}

struct CellSolver {
    s: DMatrix<f64>,
    s_norm: f64,
    inner_tol: f64,
    /// For a purely affine curve the Newton system is the same every
    /// step, so `S + slope I` is factored once: `(constant term, LU)`.
    direct: Option<(f64, LU<f64, Dyn, Dyn>)>,
}

/// Affine curves (one point corner, equal end slopes) admit a direct
/// per-step solve; returns the constant term and slope of
/// `Z(w) = z0 + slope * w` when the curve has that form.
fn affine_curve(curve: &PlGraph) -> Option<(f64, f64)> {
    let cs = curve.corners();
    if cs.len() != 1 || cs[0].y_lo != cs[0].y_hi {
        return None;
    }
    if curve.slope_left() != curve.slope_right() {
        return None;
    }
    let slope = curve.slope_right();
    Some((cs[0].y_lo - slope * cs[0].x, slope))
}

impl CellSolver {
    fn residual(&self, curve: &PlGraph, w: &DVector<f64>, r: &DVector<f64>) -> Result<DVector<f64>> {
        let mut out = &self.s * w - r;
        for i in 0..w.len() {
            out[i] += curve.value_and_slope(w[i])?.0;
        }
        Ok(out)
    }

    fn solve(
        &self,
        curve: &PlGraph,
        r: &DVector<f64>,
        warm: &DVector<f64>,
        method: StepMethod,
    ) -> Result<(DVector<f64>, usize)> {
        let scale = 1.0 + r.norm();
        let mut w = warm.clone();
        match method {
            StepMethod::Newton => {
                if let Some((z0, lu)) = &self.direct {
                    let rhs = r.map(|v| v - z0);
                    let direct = lu
                        .solve(&rhs)
                        .ok_or_else(|| Error::linear("singular per-step cell system"))?;
                    let res = self.residual(curve, &direct, r)?;
                    if res.norm() <= self.inner_tol * scale {
                        return Ok((direct, 1));
                    }
                    // Fall through to the iterative path; rounding on a
                    // badly scaled system could in principle need it.
                    w = direct;
                }
                let mut res = self.residual(curve, &w, r)?;
                for it in 1..=50 {
                    if res.norm() <= self.inner_tol * scale {
                        return Ok((w, it - 1));
                    }
                    let mut jac = self.s.clone();
                    for i in 0..w.len() {
                        jac[(i, i)] += curve.value_and_slope(w[i])?.1;
                    }
                    let dir = jac
                        .lu()
                        .solve(&res)
                        .ok_or_else(|| Error::linear("singular per-step cell system"))?;
                    let mut alpha = 1.0f64;
                    let mut accepted = false;
                    for _ in 0..40 {
                        let cand = &w - &dir * alpha;
                        let cand_res = self.residual(curve, &cand, r)?;
                        if cand_res.norm() < res.norm() {
                            w = cand;
                            res = cand_res;
                            accepted = true;
                            break;
                        }
                        alpha *= 0.5;
                    }
                    if !accepted {
                        return Err(Error::convergence(
                            "cell Newton line search stalled; the curve may be degenerate",
                        ));
                    }
                }
                Err(Error::convergence("cell Newton exceeded 50 iterations"))
            }
            StepMethod::ResolventSplitting => {
                let tau = 1.0 / self.s_norm.max(1e-12);
                for it in 1..=200_000 {
                    let forward = &w - (&self.s * &w - r) * tau;
                    let mut next = DVector::zeros(w.len());
                    for i in 0..w.len() {
                        next[i] = curve.resolvent(tau, forward[i]);
                    }
                    let res = self.residual(curve, &next, r)?;
                    w = next;
                    if res.norm() <= self.inner_tol * scale {
                        return Ok((w, it));
                    }
                }
                Err(Error::convergence("resolvent splitting exceeded its iteration budget"))
            }
        }
    }
}

/// Runs the backward-difference evolution. `tol` bounds per-step inner
/// residuals relative to the step data.
pub fn run(problem: &MaxwellProblem, method: StepMethod, tol: f64) -> Result<MaxwellRun> {
    if !tol.is_finite() || tol <= 0.0 {
        return Err(Error::contract(format!("tolerance must be positive, got {tol}")));
    }
    let ops = &problem.ops;
    let grid = ops.grid;
    let time = problem.time;
    let h = time.step();
    let ne = grid.edge_count();
    let nc = grid.cell_count();
    let area = grid.cell_area();

    // S = curl diag(h / sigma) curl^T, fixed over the run.
    let dinv: DVector<f64> = problem.sigma.map(|s| h / s);
    let mut scaled_curl_t = ops.curl_interior.transpose();
    for e in 0..ne {
        for c in 0..nc {
            scaled_curl_t[(e, c)] *= dinv[e];
        }
    }
    let s = &ops.curl_interior * &scaled_curl_t;
    let direct = affine_curve(&problem.curve).map(|(z0, slope)| {
        let mut sys = s.clone();
        for c in 0..nc {
            sys[(c, c)] += slope;
        }
        (z0, sys.lu())
    });
    let solver = CellSolver { s_norm: spectral_norm_symmetric(&s), s, inner_tol: tol, direct };

    let mut e_tilde = Signal::zeros(time, ne);
    let mut e_sig = Signal::zeros(time, ne);
    let mut h_sig = Signal::zeros(time, nc);
    let mut b_sig = Signal::zeros(time, nc);

    let mut et_prev = DVector::zeros(ne);
    let mut w = DVector::zeros(nc);
    let b0_mean = problem.b0.sum() / nc as f64;
    let mut diag = MaxwellDiagnostics {
        div_drift: 0.0,
        harmonic_b_max: 0.0,
        energy_imbalance: 0.0,
        constitutive_defect: 0.0,
        max_inner_iters: 0,
        removed_b0_norm: problem.removed_b0_norm,
    };
    let mut b_prev = problem.b0.clone();

    for k in 0..time.len() {
        let j_k = problem.current_at(k);
        // g_e = -J_k + (sigma / h) Et_{k-1}; r = b0 - curl diag(h/sigma) g_e.
        let mut g_e = -&j_k;
        for e in 0..ne {
            g_e[e] += problem.sigma[e] / h * et_prev[e];
        }
        let r = &problem.b0 - &ops.curl_interior * g_e.component_mul(&dinv);
        let (w_k, iters) = solver.solve(&problem.curve, &r, &w, method)?;
        diag.max_inner_iters = diag.max_inner_iters.max(iters);
        w = w_k;

        let et_k = (g_e + ops.curl_interior.transpose() * &w).component_mul(&dinv);
        let e_k = (&et_k - &et_prev) / h;
        let b_k = &problem.b0 - &ops.curl_interior * &et_k;

        // Power balance: <sigma E, E> + <w, dB/dt> + <J, E> = 0.
        let p_res = {
            let ohmic: f64 = (0..ne).map(|i| problem.sigma[i] * e_k[i] * e_k[i] * area).sum();
            let magnetic: f64 = (0..nc).map(|i| w[i] * (b_k[i] - b_prev[i]) / h * area).sum();
            let source: f64 = (0..ne).map(|i| j_k[i] * e_k[i] * area).sum();
            let total = ohmic + magnetic + source;
            total.abs() / (ohmic.abs() + magnetic.abs() + source.abs() + 1e-30)
        };
        diag.energy_imbalance = diag.energy_imbalance.max(p_res);

        let b_mean = b_k.sum() / nc as f64;
        diag.div_drift = diag.div_drift.max((b_mean - b0_mean).abs());
        diag.harmonic_b_max = diag.harmonic_b_max.max(b_mean.abs());
        for i in 0..nc {
            diag.constitutive_defect =
                diag.constitutive_defect.max(problem.curve.vertical_distance(w[i], b_k[i]));
        }

        e_tilde.sample_mut(k).copy_from_slice(et_k.as_slice());
        e_sig.sample_mut(k).copy_from_slice(e_k.as_slice());
        h_sig.sample_mut(k).copy_from_slice(w.as_slice());
        b_sig.sample_mut(k).copy_from_slice(b_k.as_slice());
        et_prev = et_k;
        b_prev = b_k;
    }

    Ok(MaxwellRun { e_tilde, e: e_sig, h: h_sig, b: b_sig, diagnostics: diag })
}

/// Independent steady state for linear curves: the dense least-squares
/// solution of `sigma E - curl^T w = -J`, `curl E = 0`, `mean w = 0`,
/// with the source held at its final profile value. The evolution must
/// approach this state, which makes it a cross-implementation oracle
/// rather than a restatement of the stepper.
pub fn steady_state_oracle(problem: &MaxwellProblem) -> Result<(DVector<f64>, DVector<f64>)> {
    let curve = &problem.curve;
    let kappa = curve.min_slope();
    if (curve.max_slope() - kappa).abs() > 1e-12 * kappa.abs() {
        return Err(Error::contract(
            "the steady-state oracle handles linear constitutive curves only",
        ));
    }
    let ops = &problem.ops;
    let ne = ops.grid.edge_count();
    let nc = ops.grid.cell_count();
    let j_inf = problem.current_at(problem.time.len() - 1);
    let rows = ne + nc + 1;
    let mut a = DMatrix::zeros(rows, ne + nc);
    let mut b = DVector::zeros(rows);
    for e in 0..ne {
        a[(e, e)] = problem.sigma[e];
        for c in 0..nc {
            a[(e, ne + c)] = -ops.curl_interior[(c, e)];
        }
        b[e] = -j_inf[e];
    }
    for c in 0..nc {
        for e in 0..ne {
            a[(ne + c, e)] = ops.curl_interior[(c, e)];
        }
    }
    let mean_entry = 1.0 / (nc as f64).sqrt();
    for c in 0..nc {
        a[(ne + nc, ne + c)] = mean_entry;
    }
    // The stacked system is consistent, so the normal equations give
    // the exact solution; the residual guard below catches any
    // conditioning loss.
    let ata = a.transpose() * &a;
    let atb = a.transpose() * &b;
    let x = Cholesky::new(ata)
        .ok_or_else(|| Error::linear("steady-state normal equations are singular"))?
        .solve(&atb);
    let res = (&a * &x - &b).norm();
    if res > 1e-9 * (1.0 + b.norm()) {
        return Err(Error::linear(format!(
            "steady-state system is inconsistent (residual {res:.3e})"
        )));
    }
    Ok((x.rows(0, ne).into_owned(), x.rows(ne, nc).into_owned()))
}

/// One amplitude point of the saturation sweep.
#[derive(Debug, Clone, Copy)]
pub struct SaturationSample {
    pub amplitude: f64,
    /// Peak cell-field magnitude of the nonlinear run.
    pub peak_h: f64,
    /// Peak flux magnitude of the nonlinear run.
    pub peak_b: f64,
    /// Peak flux magnitude of the linear comparator at the same
    /// amplitude.
    pub linear_peak_b: f64,
    /// Largest pointwise gap between the runs, relative to the linear
    /// peak field scale.
    pub gap_to_linear: f64,
}

/// Sweeps source amplitudes and compares each nonlinear run against
/// the linear comparator: below the first knee the curves coincide, so
/// the gap must vanish; beyond it the flux must fall behind the linear
/// prediction.
pub fn saturation_study(
    problem: &MaxwellProblem,
    amplitudes: &[f64],
    method: StepMethod,
    tol: f64,
) -> Result<Vec<SaturationSample>> {
    let linear = problem.linearized()?;
    let mut out = Vec::with_capacity(amplitudes.len());
    for &amp in amplitudes {
        if !amp.is_finite() || amp <= 0.0 {
            return Err(Error::contract(format!("amplitudes must be positive, got {amp}")));
        }
        let nl = run(&problem.scaled_source(amp), method, tol)?;
        let li = run(&linear.scaled_source(amp), method, tol)?;
        let peak_h = nl.h.max_abs();
        let peak_b = nl.b.max_abs();
        let linear_peak_b = li.b.max_abs();
        let scale = li.h.max_abs().max(li.b.max_abs()).max(1e-30);
        let gap = nl
            .h
            .max_abs_diff(&li.h)?
            .max(nl.b.max_abs_diff(&li.b)?)
            / scale;
        out.push(SaturationSample {
            amplitude: amp,
            peak_h,
            peak_b,
            linear_peak_b,
            gap_to_linear: gap,
        });
    }
    Ok(out)
}

/// Gaussian scalar pattern on cell centers.
pub fn cell_bump(grid: &StaggeredGrid2D, cx: f64, cy: f64, width: f64) -> DVector<f64> {
    DVector::from_fn(grid.cell_count(), |c, _| {
        let (x, y) = grid.cell_center(c);
        (-((x - cx).powi(2) + (y - cy).powi(2)) / (width * width)).exp()
    })
}

/// Divergence-compatible source: `curl^T` of a cell bump, therefore
/// orthogonal to every curl-free edge field and driving a pure
/// magnetic response.
pub fn curl_pattern(ops: &MimeticOperators, cells: &DVector<f64>) -> DVector<f64> {
    ops.curl_interior.transpose() * cells
}

/// Gaussian pattern on the y-directed interior edges (x-components
/// zero); generically excites both a conduction and a magnetic
/// response.
pub fn edge_bump(grid: &StaggeredGrid2D, cx: f64, cy: f64, width: f64) -> DVector<f64> {
    let mut v = DVector::zeros(grid.edge_count());
    for j in 0..grid.ny() {
        for i in 1..grid.nx() {
            let e = grid.y_edge_index(i, j).unwrap();
            let (x, y) = grid.edge_midpoint(e);
            v[e] = (-((x - cx).powi(2) + (y - cy).powi(2)) / (width * width)).exp();
        }
    }
    v
}

/// The sign-symmetric two-slope saturation curve used by the shipped
/// scenarios: slope `kappa` up to `knee`, slope `kappa_sat` beyond.
pub fn saturation_curve(kappa: f64, knee: f64, kappa_sat: f64) -> Result<PlGraph> {
    if !knee.is_finite() || knee <= 0.0 {
        return Err(Error::contract(format!("knee must be positive, got {knee}")));
    }
    use crate::graph::Corner;
    PlGraph::new(
        vec![
            Corner::point(-knee, -kappa * knee),
            Corner::point(knee, kappa * knee),
        ],
        kappa_sat,
        kappa_sat,
    )
}

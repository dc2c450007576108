//! Maximal monotone relations represented by their resolvents.
//!
//! The resolvent `(1 + lambda A)^{-1}` is a total nonexpansive function
//! for every maximal monotone `A` and every `lambda > 0`, and it is the
//! only access path the solvers need. Scalar relations act on signals
//! componentwise and per time sample; that pointwise lifting commutes
//! with time translation, which is what makes the lifted relation
//! admissible in the causal solvers.
//!
//! Beyond plain resolvents this module provides:
//!
//! * a sampled monotonicity probe (a falsification check, not a proof),
//! * `perturbed_resolve`, the contraction-mapping solve of
//!   `u + lambda (A u + B u) = z` for Lipschitz `B` with
//!   `lambda * L < 1`,
//! * `yosida_sup_criterion`, which tracks `|B_lambda(u_lambda)|` along a
//!   vanishing regularization schedule to certify solvability for the
//!   unregularized sum,
//! * [`BlockRelation`], finitely many scalar relations on index blocks
//!   coupled by a skew matrix, resolved by a semismooth Newton method.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::PlGraph;
use crate::weighted_time::Signal;

/// Scalar maximal monotone relation, known through its resolvent.
#[derive(Clone)]
pub enum ScalarGraph {
    /// `y = alpha * x` with `alpha >= 0`.
    Linear(f64),
    /// Piecewise-linear graph with exact resolvent.
    Graph(PlGraph),
    /// Caller-supplied resolvent `(lambda, z) -> u`. The caller owns the
    /// claim that this is the resolvent of a maximal monotone relation;
    /// [`monotonicity_probe`] can falsify it.
    Custom(Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for ScalarGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarGraph::Linear(a) => write!(f, "ScalarGraph::Linear({a})"),
            ScalarGraph::Graph(g) => write!(f, "ScalarGraph::Graph({} corners)", g.corners().len()),
            ScalarGraph::Custom(_) => write!(f, "ScalarGraph::Custom"),
        }
    }
}

impl ScalarGraph {
    pub fn linear(alpha: f64) -> Result<Self> {
        if !alpha.is_finite() || alpha < 0.0 {
            return Err(Error::contract(format!(
                "linear relation slope must be nonnegative, got {alpha}"
            )));
        }
        Ok(ScalarGraph::Linear(alpha))
    }

    pub fn soft(graph: PlGraph) -> Self {
        ScalarGraph::Graph(graph)
    }

    pub fn custom(resolvent: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        ScalarGraph::Custom(Arc::new(resolvent))
    }

    /// Piecewise-linear view, when one exists.
    pub fn to_graph(&self) -> Option<PlGraph> {
        match self {
            ScalarGraph::Linear(a) => Some(PlGraph::linear(*a).expect("slope validated")),
            ScalarGraph::Graph(g) => Some(g.clone()),
            ScalarGraph::Custom(_) => None,
        }
    }

    /// Scalar resolvent. Precondition `lambda > 0`; the signal-level
    /// entry points validate once per call.
    pub fn resolve_value(&self, lambda: f64, z: f64) -> f64 {
        debug_assert!(lambda > 0.0);
        match self {
            ScalarGraph::Linear(a) => z / (1.0 + lambda * a),
            ScalarGraph::Graph(g) => g.resolvent(lambda, z),
            ScalarGraph::Custom(r) => r(lambda, z),
        }
    }

    /// Scalar Yosida value `(x - resolve(lambda, x)) / lambda`.
    pub fn yosida_value(&self, lambda: f64, x: f64) -> f64 {
        (x - self.resolve_value(lambda, x)) / lambda
    }

    /// Slope of the scalar resolvent at `z` (generalized derivative at
    /// kinks); `None` for custom relations.
    pub fn resolve_slope(&self, lambda: f64, z: f64) -> Option<f64> {
        match self {
            ScalarGraph::Linear(a) => Some(1.0 / (1.0 + lambda * a)),
            ScalarGraph::Graph(g) => Some(g.resolvent_slope(lambda, z)),
            ScalarGraph::Custom(_) => None,
        }
    }

    fn check_lambda(lambda: f64) -> Result<()> {
        if !lambda.is_finite() || lambda <= 0.0 {
            return Err(Error::contract(format!(
                "resolvent parameter must be positive, got {lambda}"
            )));
        }
        Ok(())
    }

    /// Pointwise lifting of the resolvent to a signal: every component
    /// of every sample independently.
    pub fn resolve(&self, lambda: f64, z: &Signal) -> Result<Signal> {
        Self::check_lambda(lambda)?;
        Ok(z.map_samples(|_, src, dst| {
            for (d, s) in dst.iter_mut().zip(src) {
                *d = self.resolve_value(lambda, *s);
            }
        }))
    }

    /// Pointwise lifting of the Yosida regularization.
    pub fn yosida(&self, lambda: f64, x: &Signal) -> Result<Signal> {
        Self::check_lambda(lambda)?;
        Ok(x.map_samples(|_, src, dst| {
            for (d, s) in dst.iter_mut().zip(src) {
                *d = self.yosida_value(lambda, *s);
            }
        }))
    }
}

/// Outcome of a sampled monotonicity check.
#[derive(Debug, Clone)]
pub struct ProbeReport {
    /// Worst normalized pairing `(u - x)(v - y) / (1 + max |z|)` seen.
    pub min_pairing: f64,
    /// Graph pairs realizing the worst pairing.
    pub witness: ((f64, f64), (f64, f64)),
    pub passed: bool,
}

/// Samples graph pairs through the resolvent and reports the most
/// negative monotonicity pairing. Sampling can only falsify; a pass
/// means no violation was found in `trials` draws.
pub fn monotonicity_probe(rel: &ScalarGraph, trials: usize, seed: u64) -> ProbeReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_pairing = f64::INFINITY;
    let mut witness = ((0.0, 0.0), (0.0, 0.0));
    for _ in 0..trials {
        let lambda = 10f64.powf(rng.gen_range(-2.0..1.0));
        let z1: f64 = rng.gen_range(-10.0..10.0);
        let z2: f64 = rng.gen_range(-10.0..10.0);
        let u = rel.resolve_value(lambda, z1);
        let v = (z1 - u) / lambda;
        let x = rel.resolve_value(lambda, z2);
        let y = (z2 - x) / lambda;
        let scale = 1.0 + z1.abs().max(z2.abs());
        let pairing = (u - x) * (v - y) / scale;
        if pairing < min_pairing {
            min_pairing = pairing;
            witness = ((u, v), (x, y));
        }
    }
    ProbeReport { min_pairing, witness, passed: min_pairing >= -1e-10 }
}

/// Solves `u + lambda * (A u + B u) ∋ z` for a Lipschitz perturbation
/// `B` by iterating `u <- resolve(A, lambda, z - lambda * B u)`.
///
/// The iteration contracts at rate `lambda * lip`, which must be below
/// one; the fixed point is reached to absolute tolerance `1e-12`
/// relative to the data scale.
pub fn perturbed_resolve(
    rel: &ScalarGraph,
    b: impl Fn(&Signal) -> Result<Signal>,
    lip: f64,
    lambda: f64,
    z: &Signal,
) -> Result<Signal> {
    ScalarGraph::check_lambda(lambda)?;
    if lip.is_nan() || lip < 0.0 || lambda * lip >= 1.0 {
        return Err(Error::contract(format!(
            "perturbation requires lambda * lip < 1, got {} * {} = {}",
            lambda,
            lip,
            lambda * lip
        )));
    }
    let tol = 1e-12 * (1.0 + z.max_abs());
    let mut u = rel.resolve(lambda, z)?;
    for _ in 0..10_000 {
        let shifted = z.sub(&b(&u)?.scale(lambda))?;
        let next = rel.resolve(lambda, &shifted)?;
        let delta = next.max_abs_diff(&u)?;
        u = next;
        if delta <= tol {
            return Ok(u);
        }
    }
    Err(Error::convergence(format!(
        "perturbed resolvent did not reach tolerance {tol:.3e} in 10000 iterations"
    )))
}

/// One row of the regularization schedule in a [`YosidaSupReport`].
#[derive(Debug, Clone, Copy)]
pub struct YosidaSupSample {
    pub lambda: f64,
    pub u: f64,
    pub b_norm: f64,
}

/// Result of the vanishing-regularization solvability check.
#[derive(Debug, Clone)]
pub struct YosidaSupReport {
    /// `sup |B_lambda(u_lambda)|` over the schedule.
    pub sup_norm: f64,
    /// Solution at the smallest scheduled regularization.
    pub converged_u: f64,
    pub samples: Vec<YosidaSupSample>,
    /// Whether the regularized section values stayed bounded instead of
    /// growing like `1/lambda`.
    pub bounded: bool,
}

/// Detects `1/lambda`-type blowup in section values sampled along a
/// halving schedule: compares the tail against a value three halvings
/// earlier, where unbounded growth would have gained a factor near 8.
pub fn growth_bounded(values: &[f64]) -> bool {
    let n = values.len();
    if n < 4 {
        return true;
    }
    let last = values[n - 1];
    let earlier = values[n - 4];
    last <= 1e-9 || last <= 2.0 * earlier.max(1e-12)
}

/// Solves `u + A u + B_lambda u ∋ z` exactly for each scheduled
/// `lambda` and reports whether `|B_lambda(u_lambda)|` stays bounded,
/// the operational certificate that `u + A u + B u ∋ z` is solvable.
///
/// Works on the piecewise-linear closure: `B_lambda` is again a
/// piecewise-linear graph, the sum `A + B_lambda` is formed exactly,
/// and one exact resolvent per `lambda` replaces any inner iteration
/// (the natural fixed-point map has Lipschitz constant `1/lambda` and
/// stops contracting exactly where the schedule becomes interesting).
pub fn yosida_sup_criterion(
    a: &ScalarGraph,
    b: &ScalarGraph,
    z: f64,
    schedule: &[f64],
) -> Result<YosidaSupReport> {
    let (ga, gb) = match (a.to_graph(), b.to_graph()) {
        (Some(ga), Some(gb)) => (ga, gb),
        _ => {
            return Err(Error::contract(
                "solvability criterion needs graph-backed relations on both sides",
            ))
        }
    };
    if schedule.is_empty() {
        return Err(Error::contract("regularization schedule must be nonempty"));
    }
    for pair in schedule.windows(2) {
        if pair[1] >= pair[0] {
            return Err(Error::contract("regularization schedule must decrease"));
        }
    }
    if *schedule.last().expect("nonempty") <= 0.0 {
        return Err(Error::contract("regularization schedule must stay positive"));
    }
    let mut samples = Vec::with_capacity(schedule.len());
    let mut sup_norm = 0.0f64;
    let mut converged_u = 0.0;
    for &lambda in schedule {
        let b_reg = gb.yosida_graph(lambda)?;
        let combined = ga.add(&b_reg)?;
        let u = combined.resolvent(1.0, z);
        let b_norm = b_reg.yosida_value_at(u).abs();
        sup_norm = sup_norm.max(b_norm);
        converged_u = u;
        samples.push(YosidaSupSample { lambda, u, b_norm });
    }
    let bounded = growth_bounded(&samples.iter().map(|s| s.b_norm).collect::<Vec<_>>());
    Ok(YosidaSupReport { sup_norm, converged_u, samples, bounded })
}

impl PlGraph {
    /// Single value of a function-shaped graph (used for Yosida graphs,
    /// where every section is a point).
    pub fn yosida_value_at(&self, x: f64) -> f64 {
        let (lo, hi) = self.section(x);
        0.5 * (lo + hi)
    }
}

/// Finitely many scalar relations on contiguous index blocks, coupled
/// by a skew matrix `K` (`K^T = -K`): the relation
/// `u -> K u + g(u)` with `g` acting blockwise pointwise. The skew
/// part pairs to zero with every vector, so the whole relation is
/// monotone whenever the blocks are.
#[derive(Debug, Clone)]
pub struct BlockRelation {
    blocks: Vec<(std::ops::Range<usize>, ScalarGraph)>,
    skew: Option<DMatrix<f64>>,
    dim: usize,
}

impl BlockRelation {
    pub fn new(
        blocks: Vec<(std::ops::Range<usize>, ScalarGraph)>,
        skew: Option<DMatrix<f64>>,
    ) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::contract("block relation needs at least one block"));
        }
        let mut expected = 0usize;
        for (range, _) in &blocks {
            if range.start != expected || range.end <= range.start {
                return Err(Error::contract(
                    "blocks must be contiguous, nonempty and ordered",
                ));
            }
            expected = range.end;
        }
        let dim = expected;
        if let Some(k) = &skew {
            if k.nrows() != dim || k.ncols() != dim {
                return Err(Error::mismatch(format!(
                    "skew coupling is {}x{} but blocks cover dimension {dim}",
                    k.nrows(),
                    k.ncols()
                )));
            }
            let asym = (k + k.transpose()).abs().max();
            let scale = 1.0 + k.abs().max();
            if asym > 1e-10 * scale {
                return Err(Error::contract(format!(
                    "coupling matrix is not skew: |K + K^T| = {asym:.3e}"
                )));
            }
        }
        Ok(BlockRelation { blocks, skew, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn graph_for(&self, index: usize) -> &ScalarGraph {
        for (range, g) in &self.blocks {
            if range.contains(&index) {
                return g;
            }
        }
        unreachable!("blocks cover 0..dim")
    }

    fn pointwise_resolve(&self, lambda: f64, p: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.dim, |i, _| self.graph_for(i).resolve_value(lambda, p[i]))
    }

    /// Resolvent of the coupled relation: the unique `u` with
    /// `u + lambda K u + lambda v = z`, `v` in the blockwise sections.
    ///
    /// Substituting `u = R_g(p)` (the pointwise resolvent) turns the
    /// inclusion into the piecewise-smooth equation
    /// `p + lambda K R_g(p) = z`, whose Newton matrix
    /// `I + lambda K D` (`D` = diagonal resolvent slopes in `[0, 1]`)
    /// is always nonsingular: a null vector would have to satisfy
    /// `v^T D v = 0` by skewness and then vanish outright. Semismooth
    /// Newton with a backtracking line search therefore converges, and
    /// finitely so for piecewise-linear blocks.
    pub fn resolve(&self, lambda: f64, z: &DVector<f64>) -> Result<DVector<f64>> {
        ScalarGraph::check_lambda(lambda)?;
        if z.len() != self.dim {
            return Err(Error::mismatch(format!(
                "block relation has dimension {}, input has {}",
                self.dim,
                z.len()
            )));
        }
        let k = match &self.skew {
            None => {
                return Ok(self.pointwise_resolve(lambda, z));
            }
            Some(k) => k,
        };
        let scale = 1.0 + z.abs().max();
        let tol = 1e-12 * scale;
        let mut p = z.clone();
        let mut residual = {
            let u = self.pointwise_resolve(lambda, &p);
            &p + k * u * lambda - z
        };
        for _ in 0..200 {
            let norm = residual.abs().max();
            if norm <= tol {
                return Ok(self.pointwise_resolve(lambda, &p));
            }
            let mut jac = DMatrix::identity(self.dim, self.dim);
            for i in 0..self.dim {
                let slope = self
                    .graph_for(i)
                    .resolve_slope(lambda, p[i])
                    .ok_or_else(|| {
                        Error::contract("coupled resolve needs slope-reporting blocks")
                    })?;
                for r in 0..self.dim {
                    jac[(r, i)] += lambda * k[(r, i)] * slope;
                }
            }
            let delta = jac
                .lu()
                .solve(&(-&residual))
                .ok_or_else(|| Error::linear("singular Newton matrix in coupled resolve"))?;
            // Backtracking on the residual norm keeps the iteration
            // monotone even across kink changes.
            let mut theta = 1.0;
            let mut accepted = false;
            for _ in 0..30 {
                let cand = &p + &delta * theta;
                let u = self.pointwise_resolve(lambda, &cand);
                let cand_res = &cand + k * u * lambda - z;
                if cand_res.abs().max() < norm {
                    p = cand;
                    residual = cand_res;
                    accepted = true;
                    break;
                }
                theta *= 0.5;
            }
            if !accepted {
                return Err(Error::convergence(
                    "coupled resolve stalled: no descent direction accepted",
                ));
            }
        }
        Err(Error::convergence(format!(
            "coupled resolve exceeded 200 Newton steps at residual {:.3e}",
            residual.abs().max()
        )))
    }

    /// Blockwise vertical distance of a claimed pair `(u, v)` from the
    /// pointwise graphs, ignoring the skew part.
    pub fn section_distance(&self, u: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
        if u.len() != self.dim || v.len() != self.dim {
            return Err(Error::mismatch("pair dimension differs from relation"));
        }
        let mut worst = 0.0f64;
        for i in 0..self.dim {
            let g = self.graph_for(i).to_graph().ok_or_else(|| {
                Error::contract("section distance needs graph-backed blocks")
            })?;
            worst = worst.max(g.vertical_distance(u[i], v[i]));
        }
        Ok(worst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Corner;
    use crate::weighted_time::TimeGrid;
    use approx::assert_relative_eq;

    fn small_grid() -> TimeGrid {
        TimeGrid::new(0.0, 24, 0.25).unwrap()
    }

    #[test]
    fn lifted_resolve_acts_pointwise() {
        let g = small_grid();
        let rel = ScalarGraph::soft(PlGraph::sign());
        let z = Signal::from_fn(g, 2, |t, i| if i == 0 { 3.0 } else { 0.5 * t.signum() });
        let u = rel.resolve(1.0, &z).unwrap();
        for k in 0..g.len() {
            assert_relative_eq!(u.sample(k)[0], 2.0);
            assert!(u.sample(k)[1].abs() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn lifted_resolve_commutes_with_translation() {
        let g = small_grid();
        let rel = ScalarGraph::soft(PlGraph::sign());
        let z = Signal::from_fn(g, 2, |t, i| (1.3 * t + i as f64).sin() * 3.0);
        for m in [0usize, 1, 5] {
            let a = rel.resolve(0.7, &z.translate(m)).unwrap();
            let b = rel.resolve(0.7, &z).unwrap().translate(m);
            assert_eq!(a.max_abs_diff(&b).unwrap(), 0.0, "shift {m} must commute exactly");
        }
    }

    #[test]
    fn resolve_rejects_bad_lambda() {
        let g = small_grid();
        let rel = ScalarGraph::linear(1.0).unwrap();
        let z = Signal::zeros(g, 1);
        assert!(rel.resolve(0.0, &z).is_err());
        assert!(rel.resolve(-1.0, &z).is_err());
    }

    #[test]
    fn probe_passes_monotone_relations() {
        for rel in [
            ScalarGraph::linear(1.0).unwrap(),
            ScalarGraph::soft(PlGraph::sign()),
        ] {
            let report = monotonicity_probe(&rel, 5000, 3);
            assert!(report.passed, "min pairing {}", report.min_pairing);
            assert!(report.min_pairing >= -1e-10);
        }
    }

    #[test]
    fn probe_catches_a_planted_nonmonotone_relation() {
        // Resolvent of y = -0.05 x; pairings come out negative.
        let bad = ScalarGraph::custom(|lambda, z| z / (1.0 - 0.05 * lambda));
        let report = monotonicity_probe(&bad, 5000, 3);
        assert!(!report.passed);
        let ((u, v), (x, y)) = report.witness;
        assert!((u - x) * (v - y) < 0.0, "witness must exhibit the violation");
    }

    #[test]
    fn perturbed_resolve_matches_hand_solution() {
        // A = linear(1), B = identity, lambda = 1/4, z = 1:
        // u (1 + 1/4 + 1/4) = 1.
        let g = small_grid();
        let rel = ScalarGraph::linear(1.0).unwrap();
        let z = Signal::from_scalar_fn(g, |_| 1.0);
        let u = perturbed_resolve(&rel, |s| Ok(s.clone()), 1.0, 0.25, &z).unwrap();
        for k in 0..g.len() {
            assert_relative_eq!(u.sample(k)[0], 2.0 / 3.0, epsilon = 1e-11);
        }
    }

    #[test]
    fn perturbed_resolve_with_zero_perturbation_is_plain_resolve() {
        let g = small_grid();
        let rel = ScalarGraph::soft(PlGraph::sign());
        let z = Signal::from_scalar_fn(g, |t| (t - 2.0).tanh() * 4.0);
        let dim = z.dim();
        let grid = *z.grid();
        let a = perturbed_resolve(&rel, move |_| Ok(Signal::zeros(grid, dim)), 0.0, 0.5, &z)
            .unwrap();
        let b = rel.resolve(0.5, &z).unwrap();
        assert!(a.max_abs_diff(&b).unwrap() <= 1e-12);
    }

    #[test]
    fn perturbed_resolve_solves_the_combined_inclusion() {
        // A = sign, B(u) = 0.5 u, lambda = 0.5: check the residual
        // v = (z - u - lambda B u) / lambda lands in sign(u).
        let g = small_grid();
        let rel = ScalarGraph::soft(PlGraph::sign());
        let z = Signal::from_scalar_fn(g, |t| (2.0 * t).sin() * 3.0);
        let u = perturbed_resolve(&rel, |s| Ok(s.scale(0.5)), 0.5, 0.5, &z).unwrap();
        let sign = PlGraph::sign();
        for k in 0..g.len() {
            let (zk, uk) = (z.sample(k)[0], u.sample(k)[0]);
            let v = (zk - uk - 0.5 * 0.5 * uk) / 0.5;
            assert!(sign.vertical_distance(uk, v) <= 1e-10, "sample {k}");
        }
    }

    #[test]
    fn perturbed_resolve_rejects_noncontractive_setup() {
        let g = small_grid();
        let rel = ScalarGraph::linear(1.0).unwrap();
        let z = Signal::zeros(g, 1);
        let err = perturbed_resolve(&rel, |s| Ok(s.clone()), 2.0, 0.5, &z);
        assert!(matches!(err, Err(Error::Contract(_))));
    }

    #[test]
    fn yosida_sup_linear_case_converges_to_linear_solution() {
        // A = 0, B = linear(1): u_lambda = 2 (1 + lambda) / (2 + lambda),
        // tending to the solution of 2 u = 2.
        let a = ScalarGraph::linear(0.0).unwrap();
        let b = ScalarGraph::linear(1.0).unwrap();
        let schedule: Vec<f64> = (0..13).map(|k| 0.5f64.powi(k)).collect();
        let report = yosida_sup_criterion(&a, &b, 2.0, &schedule).unwrap();
        for s in &report.samples {
            let expect = 2.0 * (1.0 + s.lambda) / (2.0 + s.lambda);
            assert_relative_eq!(s.u, expect, epsilon = 1e-12);
        }
        assert!(report.bounded);
        assert!((report.converged_u - 1.0).abs() < 1e-3);
        assert!(report.sup_norm <= 1.0 + 1e-9);
    }

    #[test]
    fn yosida_sup_sign_case_resolves_to_zero() {
        // u + u + sign(u) ∋ 0.5 has the solution u = 0 because
        // 0.5 lies inside [-1, 1].
        let a = ScalarGraph::soft(PlGraph::sign());
        let b = ScalarGraph::linear(1.0).unwrap();
        let schedule: Vec<f64> = (0..13).map(|k| 0.5f64.powi(k)).collect();
        let report = yosida_sup_criterion(&a, &b, 0.5, &schedule).unwrap();
        assert!(report.converged_u.abs() <= 1e-12);
        assert!(report.bounded);
        // Successive solutions settle: differences are nonincreasing.
        let mut diffs = Vec::new();
        for pair in report.samples.windows(2) {
            diffs.push((pair[1].u - pair[0].u).abs());
        }
        for pair in diffs.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-12);
        }
    }

    #[test]
    fn yosida_sup_cross_checks_against_contraction_solve() {
        // Where the fixed-point map does contract (lambda > 1), both
        // solution paths must agree.
        let a = ScalarGraph::soft(PlGraph::sign());
        let b_graph = PlGraph::new(
            vec![Corner::point(-1.0, -1.0), Corner::point(1.0, 1.0)],
            0.2,
            0.2,
        )
        .unwrap();
        let b = ScalarGraph::soft(b_graph.clone());
        let g = TimeGrid::new(0.0, 2, 1.0).unwrap();
        for lambda in [2.0f64, 4.0] {
            let report = yosida_sup_criterion(&a, &b, 3.0, &[lambda]).unwrap();
            let z = Signal::from_scalar_fn(g, |_| 3.0);
            let reg = b_graph.yosida_graph(lambda).unwrap();
            let lip = 1.0 / lambda;
            let via_contraction = perturbed_resolve(
                &a,
                move |s: &Signal| {
                    Ok(s.map_samples(|_, src, dst| {
                        for (d, x) in dst.iter_mut().zip(src) {
                            *d = reg.yosida_value_at(*x);
                        }
                    }))
                },
                lip,
                1.0,
                &z,
            )
            .unwrap();
            assert_relative_eq!(
                report.samples[0].u,
                via_contraction.sample(0)[0],
                epsilon = 1e-10
            );
        }
    }

    #[test]
    fn yosida_sup_rejects_bad_schedules_and_custom_relations() {
        let a = ScalarGraph::linear(0.0).unwrap();
        let b = ScalarGraph::linear(1.0).unwrap();
        assert!(yosida_sup_criterion(&a, &b, 1.0, &[]).is_err());
        assert!(yosida_sup_criterion(&a, &b, 1.0, &[0.5, 0.5]).is_err());
        assert!(yosida_sup_criterion(&a, &b, 1.0, &[1.0, -0.5]).is_err());
        let c = ScalarGraph::custom(|_, z| z);
        assert!(yosida_sup_criterion(&a, &c, 1.0, &[1.0]).is_err());
    }

    #[test]
    fn growth_detector_separates_bounded_from_blowup() {
        let bounded: Vec<f64> = (0..13).map(|k| 1.0 - 0.5f64.powi(k)).collect();
        assert!(growth_bounded(&bounded));
        let blowup: Vec<f64> = (0..13).map(|k| 2f64.powi(k)).collect();
        assert!(!growth_bounded(&blowup));
        assert!(growth_bounded(&[0.0, 0.0, 0.0, 0.0]));
        assert!(growth_bounded(&[5.0]));
    }

    #[test]
    fn block_relation_without_coupling_is_pointwise() {
        let rel = BlockRelation::new(
            vec![
                (0..2, ScalarGraph::soft(PlGraph::sign())),
                (2..3, ScalarGraph::linear(2.0).unwrap()),
            ],
            None,
        )
        .unwrap();
        let z = DVector::from_vec(vec![3.0, 0.5, 3.0]);
        let u = rel.resolve(1.0, &z).unwrap();
        assert_relative_eq!(u[0], 2.0);
        assert_relative_eq!(u[1], 0.0);
        assert_relative_eq!(u[2], 1.0);
    }

    #[test]
    fn block_relation_with_pure_skew_matches_closed_form() {
        // g = 0, K = rotation generator: u = (I + lambda K)^{-1} z.
        let k = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let rel = BlockRelation::new(
            vec![(0..2, ScalarGraph::linear(0.0).unwrap())],
            Some(k.clone()),
        )
        .unwrap();
        let lambda = 0.8;
        let z = DVector::from_vec(vec![1.0, -2.0]);
        let u = rel.resolve(lambda, &z).unwrap();
        let exact = (DMatrix::identity(2, 2) + k * lambda)
            .lu()
            .solve(&z)
            .unwrap();
        assert!((u - exact).abs().max() < 1e-11);
    }

    #[test]
    fn block_relation_solves_coupled_inclusion_with_graphs() {
        let k = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let rel = BlockRelation::new(
            vec![
                (0..1, ScalarGraph::soft(PlGraph::sign())),
                (1..2, ScalarGraph::linear(2.0).unwrap()),
            ],
            Some(k.clone()),
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..50 {
            let lambda = rng.gen_range(0.05..2.0);
            let z = DVector::from_fn(2, |_, _| rng.gen_range(-5.0..5.0));
            let u = rel.resolve(lambda, &z).unwrap();
            // Recover the section element and check it blockwise.
            let v = (&z - &u - &k * &u * lambda) / lambda;
            assert!(
                rel.section_distance(&u, &v).unwrap() <= 1e-9,
                "lambda={lambda}"
            );
        }
    }

    #[test]
    fn block_relation_validates_structure() {
        assert!(BlockRelation::new(vec![], None).is_err());
        assert!(BlockRelation::new(
            vec![(1..2, ScalarGraph::linear(0.0).unwrap())],
            None
        )
        .is_err());
        let not_skew = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(BlockRelation::new(
            vec![(0..2, ScalarGraph::linear(0.0).unwrap())],
            Some(not_skew)
        )
        .is_err());
        let wrong_size = DMatrix::from_row_slice(3, 3, &[0.0; 9]);
        assert!(BlockRelation::new(
            vec![(0..2, ScalarGraph::linear(0.0).unwrap())],
            Some(wrong_size)
        )
        .is_err());
    }

    #[test]
    fn skew_coupling_pairs_to_zero() {
        let k = DMatrix::from_row_slice(2, 2, &[0.0, -1.3, 1.3, 0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for _ in 0..100 {
            let x = DVector::from_fn(2, |_, _| rng.gen_range(-5.0f64..5.0));
            let pairing = (&k * &x).dot(&x);
            assert!(pairing.abs() <= 1e-12 * (1.0 + x.norm_squared()));
        }
    }
}

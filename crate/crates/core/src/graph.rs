//! Piecewise-linear maximal monotone graphs on the real line.
//!
//! A graph is described by finitely many corners `(x_i, [y_i^-, y_i^+])`
//! with strictly increasing `x_i`, together with end slopes for the rays
//! beyond the outermost corners. Between corners the graph is the line
//! segment joining `(x_i, y_i^+)` to `(x_{i+1}, y_{i+1}^-)`. Monotonicity
//! is exactly the chain
//!
//! ```text
//! y_0^- <= y_0^+ <= y_1^- <= ... <= y_{n-1}^+,    end slopes >= 0.
//! ```
//!
//! Everything downstream leans on one fact: for `lambda > 0` the map
//! `x -> x + lambda * G(x)` is strictly increasing and piecewise linear,
//! so its inverse (the resolvent) is computed exactly by locating the
//! right piece and inverting one affine map. No iteration, no tolerance.

use crate::error::{Error, Result};

/// One breakpoint of a piecewise-linear graph. A corner with
/// `y_lo < y_hi` is a vertical segment (a multivalued point).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Corner {
    pub x: f64,
    pub y_lo: f64,
    pub y_hi: f64,
}

impl Corner {
    pub fn point(x: f64, y: f64) -> Corner {
        Corner { x, y_lo: y, y_hi: y }
    }
}

/// Maximal monotone piecewise-linear graph, closed under the exact
/// operations used by the solvers: resolvent, Yosida regularization
/// (again a graph of this type), and graph sums.
#[derive(Debug, Clone, PartialEq)]
pub struct PlGraph {
    corners: Vec<Corner>,
    slope_left: f64,
    slope_right: f64,
}

impl PlGraph {
    /// Validates the monotonicity chain; needs at least one corner so
    /// the end rays have an anchor.
    pub fn new(corners: Vec<Corner>, slope_left: f64, slope_right: f64) -> Result<Self> {
        if corners.is_empty() {
            return Err(Error::contract("graph needs at least one corner"));
        }
        for (which, s) in [("left", slope_left), ("right", slope_right)] {
            if !s.is_finite() || s < 0.0 {
                return Err(Error::contract(format!(
                    "{which} end slope must be finite and nonnegative, got {s}"
                )));
            }
        }
        let mut prev_y = f64::NEG_INFINITY;
        let mut prev_x = f64::NEG_INFINITY;
        for c in &corners {
            if !c.x.is_finite() || !c.y_lo.is_finite() || !c.y_hi.is_finite() {
                return Err(Error::contract("graph corners must be finite"));
            }
            if c.x <= prev_x {
                return Err(Error::contract(format!(
                    "corner abscissae must be strictly increasing, got {} after {}",
                    c.x, prev_x
                )));
            }
            if c.y_lo < prev_y || c.y_hi < c.y_lo {
                return Err(Error::contract(format!(
                    "graph values must be nondecreasing: corner at x={} breaks the chain",
                    c.x
                )));
            }
            prev_x = c.x;
            prev_y = c.y_hi;
        }
        Ok(PlGraph { corners, slope_left, slope_right })
    }

    /// The linear relation `y = alpha * x`, `alpha >= 0`.
    pub fn linear(alpha: f64) -> Result<Self> {
        PlGraph::new(vec![Corner::point(0.0, 0.0)], alpha, alpha)
    }

    /// The sign graph: `{-1}` for `x < 0`, `[-1, 1]` at `0`, `{+1}` for
    /// `x > 0`.
    pub fn sign() -> Self {
        PlGraph::new(vec![Corner { x: 0.0, y_lo: -1.0, y_hi: 1.0 }], 0.0, 0.0)
            .expect("sign graph is monotone")
    }

    pub fn corners(&self) -> &[Corner] {
        &self.corners
    }

    pub fn slope_left(&self) -> f64 {
        self.slope_left
    }

    pub fn slope_right(&self) -> f64 {
        self.slope_right
    }

    fn segment_slope(&self, i: usize) -> f64 {
        let a = &self.corners[i];
        let b = &self.corners[i + 1];
        (b.y_lo - a.y_hi) / (b.x - a.x)
    }

    /// The section `G(x)` as a closed interval `[y_lo, y_hi]`
    /// (a single point away from vertical corners).
    pub fn section(&self, x: f64) -> (f64, f64) {
        let n = self.corners.len();
        let idx = self.corners.partition_point(|c| c.x < x);
        if idx < n && self.corners[idx].x == x {
            let c = &self.corners[idx];
            return (c.y_lo, c.y_hi);
        }
        if idx == 0 {
            let c = &self.corners[0];
            let y = c.y_lo - self.slope_left * (c.x - x);
            return (y, y);
        }
        if idx == n {
            let c = &self.corners[n - 1];
            let y = c.y_hi + self.slope_right * (x - c.x);
            return (y, y);
        }
        let a = &self.corners[idx - 1];
        let y = a.y_hi + self.segment_slope(idx - 1) * (x - a.x);
        (y, y)
    }

    /// Value and one-sided (right) slope at `x`; errors when the
    /// evaluation hits a vertical corner (callers wanting a globally
    /// single-valued graph should check `max_slope().is_finite()`).
    /// Used by Newton-type solvers that need the local linearization.
    pub fn value_and_slope(&self, x: f64) -> Result<(f64, f64)> {
        let n = self.corners.len();
        let idx = self.corners.partition_point(|c| c.x < x);
        if idx < n && self.corners[idx].x == x {
            let c = &self.corners[idx];
            if c.y_hi > c.y_lo {
                return Err(Error::contract(
                    "value_and_slope needs a single-valued graph; a vertical corner was hit",
                ));
            }
            let slope = if idx + 1 < n { self.segment_slope(idx) } else { self.slope_right };
            return Ok((c.y_hi, slope));
        }
        if idx == 0 {
            let c = &self.corners[0];
            return Ok((c.y_lo - self.slope_left * (c.x - x), self.slope_left));
        }
        if idx == n {
            let c = &self.corners[n - 1];
            return Ok((c.y_hi + self.slope_right * (x - c.x), self.slope_right));
        }
        let a = &self.corners[idx - 1];
        let s = self.segment_slope(idx - 1);
        Ok((a.y_hi + s * (x - a.x), s))
    }

    /// Element of `G(x)` with minimal absolute value.
    pub fn min_section(&self, x: f64) -> f64 {
        let (lo, hi) = self.section(x);
        0.0f64.clamp(lo, hi)
    }

    /// Distance from `y` to the section `G(x)`; zero exactly when the
    /// pair `(x, y)` lies on the graph.
    pub fn vertical_distance(&self, x: f64, y: f64) -> f64 {
        let (lo, hi) = self.section(x);
        (lo - y).max(y - hi).max(0.0)
    }

    pub fn contains_origin(&self) -> bool {
        self.vertical_distance(0.0, 0.0) == 0.0
    }

    /// Smallest slope over the end rays and inter-corner segments;
    /// positive exactly when the graph is strongly monotone.
    pub fn min_slope(&self) -> f64 {
        let mut m = self.slope_left.min(self.slope_right);
        for i in 0..self.corners.len().saturating_sub(1) {
            m = m.min(self.segment_slope(i));
        }
        m
    }

    /// Largest slope; infinite when some corner is vertical.
    pub fn max_slope(&self) -> f64 {
        let mut m = self.slope_left.max(self.slope_right);
        for i in 0..self.corners.len().saturating_sub(1) {
            m = m.max(self.segment_slope(i));
        }
        for c in &self.corners {
            if c.y_hi > c.y_lo {
                return f64::INFINITY;
            }
        }
        m
    }

    /// Exact resolvent: the unique `u` with `u + lambda * v = z` for
    /// some `v` in `G(u)`.
    ///
    /// The graph of `x + lambda * G(x)` inherits the corner structure,
    /// with corner `i` occupying the z-interval
    /// `[x_i + lambda * y_i^-, x_i + lambda * y_i^+]`; a binary search
    /// picks the piece, one affine inversion finishes.
    pub fn resolvent(&self, lambda: f64, z: f64) -> f64 {
        debug_assert!(lambda > 0.0, "resolvent parameter must be positive");
        let n = self.corners.len();
        let z_hi = |c: &Corner| c.x + lambda * c.y_hi;
        let z_lo = |c: &Corner| c.x + lambda * c.y_lo;
        let idx = self.corners.partition_point(|c| z_hi(c) < z);
        if idx == n {
            let c = &self.corners[n - 1];
            return c.x + (z - z_hi(c)) / (1.0 + lambda * self.slope_right);
        }
        let c = &self.corners[idx];
        if z >= z_lo(c) {
            return c.x;
        }
        if idx == 0 {
            return c.x - (z_lo(c) - z) / (1.0 + lambda * self.slope_left);
        }
        let a = &self.corners[idx - 1];
        let s = self.segment_slope(idx - 1);
        a.x + (z - z_hi(a)) / (1.0 + lambda * s)
    }

    /// Slope of `z -> resolvent(lambda, z)` on the piece containing `z`
    /// (an element of the generalized derivative at kinks): `0` across a
    /// vertical corner, `1 / (1 + lambda * s)` on a slope-`s` piece.
    pub fn resolvent_slope(&self, lambda: f64, z: f64) -> f64 {
        debug_assert!(lambda > 0.0);
        let n = self.corners.len();
        let z_hi = |c: &Corner| c.x + lambda * c.y_hi;
        let z_lo = |c: &Corner| c.x + lambda * c.y_lo;
        let idx = self.corners.partition_point(|c| z_hi(c) < z);
        if idx == n {
            return 1.0 / (1.0 + lambda * self.slope_right);
        }
        if z >= z_lo(&self.corners[idx]) {
            // Inside a corner's z-span; zero width only for point
            // corners, where either neighboring piece is valid.
            if z_hi(&self.corners[idx]) > z_lo(&self.corners[idx]) {
                return 0.0;
            }
        } else if idx == 0 {
            return 1.0 / (1.0 + lambda * self.slope_left);
        } else {
            return 1.0 / (1.0 + lambda * self.segment_slope(idx - 1));
        }
        // Point corner: take the right-hand piece.
        if idx + 1 < n {
            1.0 / (1.0 + lambda * self.segment_slope(idx))
        } else {
            1.0 / (1.0 + lambda * self.slope_right)
        }
    }

    /// Yosida regularization value `(x - resolvent(lambda, x)) / lambda`;
    /// always an element of the section at the resolvent point.
    pub fn yosida_value(&self, lambda: f64, x: f64) -> f64 {
        (x - self.resolvent(lambda, x)) / lambda
    }

    /// The Yosida regularization as a graph of its own: single-valued,
    /// Lipschitz with constant `1/lambda`, corners at the images
    /// `x_i + lambda * y` of the original corner endpoints, and slope
    /// `s / (1 + lambda * s)` wherever the original piece has slope `s`.
    pub fn yosida_graph(&self, lambda: f64) -> Result<PlGraph> {
        if !lambda.is_finite() || lambda <= 0.0 {
            return Err(Error::contract(format!(
                "regularization parameter must be positive, got {lambda}"
            )));
        }
        let mut corners = Vec::with_capacity(2 * self.corners.len());
        for c in &self.corners {
            corners.push(Corner::point(c.x + lambda * c.y_lo, c.y_lo));
            if c.y_hi > c.y_lo {
                corners.push(Corner::point(c.x + lambda * c.y_hi, c.y_hi));
            }
        }
        let bend = |s: f64| s / (1.0 + lambda * s);
        PlGraph::new(corners, bend(self.slope_left), bend(self.slope_right))
    }

    /// Graph sum `(G + H)(x) = G(x) + H(x)` with interval addition at
    /// each point; again maximal monotone and piecewise linear, with
    /// corners at the union of the two corner sets.
    pub fn add(&self, other: &PlGraph) -> Result<PlGraph> {
        let mut xs: Vec<f64> = self
            .corners
            .iter()
            .chain(other.corners.iter())
            .map(|c| c.x)
            .collect();
        xs.sort_by(|a, b| a.partial_cmp(b).expect("corner abscissae are finite"));
        xs.dedup();
        let corners = xs
            .into_iter()
            .map(|x| {
                let (a_lo, a_hi) = self.section(x);
                let (b_lo, b_hi) = other.section(x);
                Corner { x, y_lo: a_lo + b_lo, y_hi: a_hi + b_hi }
            })
            .collect();
        PlGraph::new(
            corners,
            self.slope_left + other.slope_left,
            self.slope_right + other.slope_right,
        )
    }

    /// Adds the linear relation `alpha * x`. Negative `alpha` is allowed
    /// as long as the result stays monotone (every slope `>= -alpha`),
    /// which the constructor re-validates.
    pub fn add_linear(&self, alpha: f64) -> Result<PlGraph> {
        let corners = self
            .corners
            .iter()
            .map(|c| Corner { x: c.x, y_lo: c.y_lo + alpha * c.x, y_hi: c.y_hi + alpha * c.x })
            .collect();
        PlGraph::new(corners, self.slope_left + alpha, self.slope_right + alpha)
    }

    /// Positive rescaling `c * G`, `c > 0`.
    pub fn scale(&self, c: f64) -> Result<PlGraph> {
        if !c.is_finite() || c <= 0.0 {
            return Err(Error::contract(format!("graph scale must be positive, got {c}")));
        }
        let corners = self
            .corners
            .iter()
            .map(|k| Corner { x: k.x, y_lo: c * k.y_lo, y_hi: c * k.y_hi })
            .collect();
        PlGraph::new(corners, c * self.slope_left, c * self.slope_right)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Brute-force resolvent oracle: scan a fine u-grid for the point
    /// minimizing the on-graph residual of ((z - u) / lambda, G(u)).
    fn brute_resolvent(g: &PlGraph, lambda: f64, z: f64, lo: f64, hi: f64) -> f64 {
        let steps = 400_000;
        let mut best = (f64::INFINITY, lo);
        for i in 0..=steps {
            let u = lo + (hi - lo) * (i as f64) / (steps as f64);
            let v = (z - u) / lambda;
            let d = g.vertical_distance(u, v);
            if d < best.0 {
                best = (d, u);
            }
        }
        best.1
    }

    #[test]
    fn sign_graph_resolvent_matches_shrinkage() {
        let g = PlGraph::sign();
        assert_relative_eq!(g.resolvent(1.0, 3.0), 2.0);
        assert_relative_eq!(g.resolvent(1.0, 0.5), 0.0);
        assert_relative_eq!(g.resolvent(1.0, -3.0), -2.0);
    }

    #[test]
    fn value_and_slope_tracks_the_pieces() {
        // Saturation-style curve: slope 2 inside [-1, 1], slope 0.5 outside.
        let g = PlGraph::new(
            vec![Corner::point(-1.0, -2.0), Corner::point(1.0, 2.0)],
            0.5,
            0.5,
        )
        .unwrap();
        assert_eq!(g.value_and_slope(0.0).unwrap(), (0.0, 2.0));
        assert_eq!(g.value_and_slope(1.0).unwrap(), (2.0, 0.5));
        assert_eq!(g.value_and_slope(3.0).unwrap(), (3.0, 0.5));
        assert_eq!(g.value_and_slope(-2.0).unwrap(), (-2.5, 0.5));
        // Crossing a vertical corner is refused.
        assert!(PlGraph::sign().value_and_slope(0.0).is_err());
        assert!(PlGraph::sign().value_and_slope(0.5).is_ok());
    }

    #[test]
    fn linear_graph_resolvent_is_scalar_division() {
        let g = PlGraph::linear(2.0).unwrap();
        assert_relative_eq!(g.resolvent(0.5, 3.0), 1.5);
        for z in [-4.0, -0.3, 0.0, 0.7, 11.0] {
            assert_relative_eq!(g.resolvent(0.25, z), z / 1.5, max_relative = 1e-14);
        }
    }

    #[test]
    fn origin_is_a_fixed_point() {
        for g in [PlGraph::sign(), PlGraph::linear(3.0).unwrap()] {
            assert!(g.contains_origin());
            for lambda in [0.01, 1.0, 50.0] {
                assert_eq!(g.resolvent(lambda, 0.0), 0.0);
            }
        }
    }

    #[test]
    fn yosida_of_sign_graph_is_a_clamp() {
        let g = PlGraph::sign();
        assert_relative_eq!(g.yosida_value(0.5, 0.2), 0.4);
        assert_relative_eq!(g.yosida_value(0.5, 2.0), 1.0);
        for x in [-3.0, -0.1, 0.0, 0.3, 5.0] {
            assert_relative_eq!(
                g.yosida_value(0.5, x),
                (x / 0.5).clamp(-1.0, 1.0),
                max_relative = 1e-14
            );
        }
    }

    #[test]
    fn yosida_of_linear_graph_is_damped_slope() {
        let g = PlGraph::linear(1.5).unwrap();
        for lambda in [0.1, 1.0, 4.0] {
            for x in [-2.0, 0.4, 7.0] {
                assert_relative_eq!(
                    g.yosida_value(lambda, x),
                    1.5 * x / (1.0 + lambda * 1.5),
                    max_relative = 1e-13
                );
            }
        }
    }

    #[test]
    fn resolvent_is_nonexpansive() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let graphs = [
            PlGraph::sign(),
            PlGraph::linear(2.0).unwrap(),
            PlGraph::new(
                vec![
                    Corner { x: -1.0, y_lo: -2.0, y_hi: -1.0 },
                    Corner::point(0.5, 0.0),
                    Corner { x: 2.0, y_lo: 1.5, y_hi: 4.0 },
                ],
                0.3,
                2.0,
            )
            .unwrap(),
        ];
        for g in &graphs {
            for _ in 0..10_000 {
                let lambda = rng.gen_range(1e-3..10.0f64);
                let x = rng.gen_range(-20.0..20.0);
                let y = rng.gen_range(-20.0..20.0);
                let dx = (g.resolvent(lambda, x) - g.resolvent(lambda, y)).abs();
                assert!(dx <= (x - y).abs() + 1e-12);
            }
        }
    }

    #[test]
    fn yosida_is_lipschitz_with_inverse_parameter() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let g = PlGraph::new(
            vec![Corner { x: 0.0, y_lo: -1.0, y_hi: 0.5 }, Corner::point(1.0, 2.0)],
            0.0,
            1.0,
        )
        .unwrap();
        for _ in 0..10_000 {
            let lambda = rng.gen_range(1e-2..5.0f64);
            let x = rng.gen_range(-10.0..10.0);
            let y = rng.gen_range(-10.0..10.0);
            let dy = (g.yosida_value(lambda, x) - g.yosida_value(lambda, y)).abs();
            assert!(dy <= (x - y).abs() / lambda + 1e-12);
        }
    }

    #[test]
    fn resolvent_and_yosida_pair_lies_on_the_graph() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let g = PlGraph::new(
            vec![
                Corner { x: -0.5, y_lo: -3.0, y_hi: -0.5 },
                Corner::point(0.0, 0.0),
                Corner { x: 1.5, y_lo: 0.75, y_hi: 2.0 },
            ],
            0.5,
            0.25,
        )
        .unwrap();
        for _ in 0..2000 {
            let lambda = rng.gen_range(1e-3..8.0f64);
            let x = rng.gen_range(-15.0..15.0);
            let u = g.resolvent(lambda, x);
            let v = g.yosida_value(lambda, x);
            assert!(g.vertical_distance(u, v) <= 1e-10, "pair ({u}, {v}) off graph");
        }
    }

    #[test]
    fn resolvent_tends_to_identity_at_minimal_section_rate() {
        let g = PlGraph::sign();
        for x in [-2.0, -0.4, 0.0, 0.1, 3.0] {
            for lambda in [0.5, 0.1, 0.01] {
                let bound = lambda * g.min_section(x).abs();
                assert!(
                    (g.resolvent(lambda, x) - x).abs() <= bound + 1e-14,
                    "x={x}, lambda={lambda}"
                );
            }
        }
        let lin = PlGraph::linear(2.0).unwrap();
        for x in [-1.0, 0.3, 4.0] {
            for lambda in [0.5, 0.05] {
                let bound = lambda * lin.min_section(x).abs();
                assert!((lin.resolvent(lambda, x) - x).abs() <= bound + 1e-14);
            }
        }
    }

    #[test]
    fn yosida_graph_agrees_with_pointwise_values() {
        let g = PlGraph::new(
            vec![
                Corner { x: -1.0, y_lo: -2.0, y_hi: -1.0 },
                Corner::point(0.0, 0.0),
                Corner { x: 2.0, y_lo: 1.0, y_hi: 3.0 },
            ],
            0.7,
            1.2,
        )
        .unwrap();
        for lambda in [0.2, 1.0, 3.0] {
            let yg = g.yosida_graph(lambda).unwrap();
            assert!(yg.max_slope() <= 1.0 / lambda + 1e-12);
            for i in 0..=400 {
                let x = -8.0 + 16.0 * (i as f64) / 400.0;
                let (lo, hi) = yg.section(x);
                assert_relative_eq!(lo, hi, epsilon = 1e-12);
                assert_relative_eq!(lo, g.yosida_value(lambda, x), epsilon = 1e-11);
            }
        }
    }

    #[test]
    fn graph_sum_matches_brute_force_resolvent() {
        let sum = PlGraph::sign().add(&PlGraph::linear(1.0).unwrap()).unwrap();
        for (lambda, z) in [(1.0, 3.0), (0.5, -2.0), (2.0, 0.4), (0.1, 10.0)] {
            let exact = sum.resolvent(lambda, z);
            let brute = brute_resolvent(&sum, lambda, z, -12.0, 12.0);
            assert!((exact - brute).abs() < 1e-4, "lambda={lambda}, z={z}");
            // Residual check: the recovered section element fits.
            let v = (z - exact) / lambda;
            assert!(sum.vertical_distance(exact, v) <= 1e-12);
        }
    }

    #[test]
    fn add_linear_supports_monotone_shifts_and_rejects_bad_ones() {
        let z = PlGraph::new(
            vec![Corner::point(-1.0, -2.0), Corner::point(1.0, 2.0)],
            2.0,
            2.0,
        )
        .unwrap();
        // Min slope is 2, so subtracting up to 2 keeps monotonicity.
        let shifted = z.add_linear(-1.5).unwrap();
        assert!(shifted.min_slope() >= 0.5 - 1e-12);
        assert!(z.add_linear(-2.5).is_err());
    }

    #[test]
    fn slope_extrema_are_reported() {
        let g = PlGraph::new(
            vec![Corner::point(-1.0, -3.0), Corner::point(0.0, 0.0), Corner::point(2.0, 1.0)],
            0.5,
            4.0,
        )
        .unwrap();
        assert_relative_eq!(g.min_slope(), 0.5);
        assert_relative_eq!(g.max_slope(), 4.0);
        assert_eq!(PlGraph::sign().max_slope(), f64::INFINITY);
        assert_eq!(PlGraph::sign().min_slope(), 0.0);
    }

    #[test]
    fn construction_rejects_nonmonotone_data() {
        assert!(PlGraph::new(vec![], 1.0, 1.0).is_err());
        assert!(PlGraph::new(vec![Corner::point(0.0, 0.0)], -0.1, 1.0).is_err());
        assert!(PlGraph::new(
            vec![Corner { x: 0.0, y_lo: 1.0, y_hi: 0.5 }],
            0.0,
            0.0
        )
        .is_err());
        assert!(PlGraph::new(
            vec![Corner::point(0.0, 1.0), Corner::point(1.0, 0.0)],
            0.0,
            0.0
        )
        .is_err());
        assert!(PlGraph::new(
            vec![Corner::point(0.0, 0.0), Corner::point(0.0, 1.0)],
            0.0,
            0.0
        )
        .is_err());
        assert!(PlGraph::linear(-1.0).is_err());
    }

    #[test]
    fn resolvent_slope_matches_finite_differences() {
        let g = PlGraph::new(
            vec![
                Corner { x: -1.0, y_lo: -2.0, y_hi: 0.0 },
                Corner::point(1.0, 1.0),
            ],
            0.5,
            3.0,
        )
        .unwrap();
        let lambda = 0.7;
        // Probe away from kinks: central differences see the local slope.
        for z in [-9.0, -1.3, 0.1, 1.2, 6.0] {
            let eps = 1e-6;
            let fd = (g.resolvent(lambda, z + eps) - g.resolvent(lambda, z - eps)) / (2.0 * eps);
            assert_relative_eq!(g.resolvent_slope(lambda, z), fd, epsilon = 1e-6);
        }
    }

    fn arb_graph() -> impl Strategy<Value = PlGraph> {
        let corner = (0.05f64..1.5, 0.0f64..1.0, 0.0f64..1.0);
        (
            proptest::collection::vec(corner, 1..6),
            -3.0f64..3.0,
            -3.0f64..3.0,
            0.0f64..2.0,
            0.0f64..2.0,
        )
            .prop_map(|(steps, x0, y0, sl, sr)| {
                let mut x = x0;
                let mut y = y0;
                let mut corners = Vec::new();
                for (dx, gap, width) in steps {
                    x += dx;
                    y += gap;
                    let y_hi = y + width;
                    corners.push(Corner { x, y_lo: y, y_hi });
                    y = y_hi;
                }
                PlGraph::new(corners, sl, sr).expect("construction is monotone")
            })
    }

    proptest! {
        #[test]
        fn prop_resolvent_solves_the_inclusion(g in arb_graph(), lambda in 1e-3f64..5.0, z in -20.0f64..20.0) {
            let u = g.resolvent(lambda, z);
            let v = (z - u) / lambda;
            prop_assert!(g.vertical_distance(u, v) <= 1e-9, "u={u}, v={v}");
        }

        #[test]
        fn prop_resolvent_nonexpansive(g in arb_graph(), lambda in 1e-3f64..5.0, a in -20.0f64..20.0, b in -20.0f64..20.0) {
            let d = (g.resolvent(lambda, a) - g.resolvent(lambda, b)).abs();
            prop_assert!(d <= (a - b).abs() + 1e-12);
        }

        #[test]
        fn prop_yosida_graph_closure(g in arb_graph(), lambda in 1e-2f64..3.0, x in -10.0f64..10.0) {
            let yg = g.yosida_graph(lambda).unwrap();
            let (lo, hi) = yg.section(x);
            prop_assert!((hi - lo).abs() <= 1e-12);
            prop_assert!((lo - g.yosida_value(lambda, x)).abs() <= 1e-9);
        }

        #[test]
        fn prop_sum_is_monotone_and_solvable(g in arb_graph(), h in arb_graph(), z in -20.0f64..20.0) {
            let s = g.add(&h).unwrap();
            let u = s.resolvent(1.0, z);
            let v = z - u;
            prop_assert!(s.vertical_distance(u, v) <= 1e-9);
        }
    }
}

//! Discrete causal calculus on an exponentially weighted time window.
//!
//! Signals live on a uniform grid `t_k = t0 + k*h`, are implicitly zero
//! before `t0`, and are measured in the weighted norm
//!
//! ```text
//! |f|_rho^2 = sum_k |f_k|^2 * exp(-2*rho*t_k) * h
//! ```
//!
//! which is the left-rectangle quadrature of an exponentially weighted
//! L2 norm over the window. The derivative is the backward difference,
//! the antiderivative the causal cumulative sum; on the grid the two
//! are exact mutual inverses. Constants that are sharp in the continuum
//! pick up explicit O(h) corrections here, and those corrections are
//! part of this module's contract:
//!
//! * coercivity of the derivative holds with the discrete rate
//!   `rho_h = (1 - exp(-2*rho*h)) / (2*h)` (see [`Weight::discrete_rate`]),
//! * the antiderivative has norm at most `1/rho + 2*h`.

use crate::error::{Error, Result};

/// Uniform time grid `t_k = t0 + k*h`, `k = 0..n`.
///
/// Grids compare by value; operations on two signals require their
/// grids to be identical, not merely overlapping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t0: f64,
    n: usize,
    h: f64,
}

impl TimeGrid {
    /// A grid needs at least two samples and a positive step.
    pub fn new(t0: f64, n: usize, h: f64) -> Result<Self> {
        if !h.is_finite() || h <= 0.0 {
            return Err(Error::contract(format!("grid step must be positive, got {h}")));
        }
        if n < 2 {
            return Err(Error::contract(format!("grid needs at least 2 samples, got {n}")));
        }
        if !t0.is_finite() {
            return Err(Error::contract("grid origin must be finite"));
        }
        Ok(TimeGrid { t0, n, h })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    pub fn start(&self) -> f64 {
        self.t0
    }

    pub fn end(&self) -> f64 {
        self.time(self.n - 1)
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + (k as f64) * self.h
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |k| self.time(k))
    }

    /// Same window, step divided by `factor`.
    pub fn refined(&self, factor: usize) -> Result<TimeGrid> {
        if factor < 2 {
            return Err(Error::contract("refinement factor must be at least 2"));
        }
        TimeGrid::new(self.t0, (self.n - 1) * factor + 1, self.h / factor as f64)
    }

    /// Largest sample index with `t_k <= a`, or `None` when `a < t0`.
    ///
    /// A half-step fuzz absorbs roundoff when `a` nominally sits on a
    /// grid point.
    pub fn cutoff_index(&self, a: f64) -> Option<usize> {
        let raw = (a - self.t0) / self.h + 0.5e-9;
        if raw < 0.0 {
            return None;
        }
        Some((raw.floor() as usize).min(self.n - 1))
    }
}

/// Exponential weight `exp(-2*rho*t)` with `rho > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Weight {
    rho: f64,
}

impl Weight {
    pub fn new(rho: f64) -> Result<Self> {
        if !rho.is_finite() || rho <= 0.0 {
            return Err(Error::contract(format!("weight rate must be positive, got {rho}")));
        }
        Ok(Weight { rho })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Quadrature weight `exp(-2*rho*t) * h` attached to one sample.
    pub fn quadrature_factor(&self, t: f64, h: f64) -> f64 {
        (-2.0 * self.rho * t).exp() * h
    }

    /// Discrete coercivity rate of the backward difference,
    /// `rho_h = (1 - exp(-2*rho*h)) / (2*h)`.
    ///
    /// Every signal satisfies `<Du, u>_rho >= rho_h * |u|_rho^2`; the
    /// rate tends to `rho` from below as `h -> 0`.
    pub fn discrete_rate(&self, h: f64) -> f64 {
        (1.0 - (-2.0 * self.rho * h).exp()) / (2.0 * h)
    }

    /// Upper bound for the norm of the causal cumulative sum:
    /// `1/rho + 2*h`. The sharp discrete constant is
    /// `h / (1 - exp(-rho*h))`, which this dominates.
    pub fn cumsum_norm_bound(&self, h: f64) -> f64 {
        1.0 / self.rho + 2.0 * h
    }
}

/// Vector-valued signal on a [`TimeGrid`], zero before the window.
///
/// Values are stored sample-major: component `i` at sample `k` sits at
/// `values[k * dim + i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    grid: TimeGrid,
    dim: usize,
    values: Vec<f64>,
}

impl Signal {
    pub fn zeros(grid: TimeGrid, dim: usize) -> Signal {
        Signal {
            grid,
            dim,
            values: vec![0.0; grid.len() * dim],
        }
    }

    /// Build from a pointwise rule `value(t, component)`.
    pub fn from_fn(grid: TimeGrid, dim: usize, mut value: impl FnMut(f64, usize) -> f64) -> Signal {
        let mut values = Vec::with_capacity(grid.len() * dim);
        for k in 0..grid.len() {
            let t = grid.time(k);
            for i in 0..dim {
                values.push(value(t, i));
            }
        }
        Signal { grid, dim, values }
    }

    /// Scalar (dim 1) signal from a time profile.
    pub fn from_scalar_fn(grid: TimeGrid, mut value: impl FnMut(f64) -> f64) -> Signal {
        Signal::from_fn(grid, 1, |t, _| value(t))
    }

    pub fn from_samples(grid: TimeGrid, dim: usize, values: Vec<f64>) -> Result<Signal> {
        if dim == 0 {
            return Err(Error::contract("signal dimension must be positive"));
        }
        if values.len() != grid.len() * dim {
            return Err(Error::mismatch(format!(
                "expected {} values for {} samples of dim {}, got {}",
                grid.len() * dim,
                grid.len(),
                dim,
                values.len()
            )));
        }
        Ok(Signal { grid, dim, values })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sample(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn sample_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.values[k * self.dim..(k + 1) * self.dim]
    }

    fn check_compatible(&self, other: &Signal) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::mismatch("signals live on different grids"));
        }
        if self.dim != other.dim {
            return Err(Error::mismatch(format!(
                "signal dims differ: {} vs {}",
                self.dim, other.dim
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Signal) -> Result<Signal> {
        self.check_compatible(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Signal { grid: self.grid, dim: self.dim, values })
    }

    pub fn sub(&self, other: &Signal) -> Result<Signal> {
        self.check_compatible(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Signal { grid: self.grid, dim: self.dim, values })
    }

    pub fn scale(&self, c: f64) -> Signal {
        Signal {
            grid: self.grid,
            dim: self.dim,
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    /// Largest absolute entry; zero-dimensional max over an empty set is 0.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Signal) -> Result<f64> {
        self.check_compatible(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    /// Weighted inner product, left-rectangle quadrature.
    pub fn weighted_inner(&self, other: &Signal, weight: &Weight) -> Result<f64> {
        self.check_compatible(other)?;
        let h = self.grid.step();
        let mut acc = 0.0;
        for k in 0..self.grid.len() {
            let w = weight.quadrature_factor(self.grid.time(k), h);
            let dot: f64 = self
                .sample(k)
                .iter()
                .zip(other.sample(k))
                .map(|(a, b)| a * b)
                .sum();
            acc += w * dot;
        }
        Ok(acc)
    }

    pub fn weighted_norm(&self, weight: &Weight) -> f64 {
        self.weighted_inner(self, weight)
            .expect("signal is compatible with itself")
            .max(0.0)
            .sqrt()
    }

    /// Sharp cut: keep samples with `t_k <= a`, zero the rest.
    ///
    /// Idempotent, and self-adjoint for the weighted inner product
    /// because it is a diagonal 0/1 multiplier.
    pub fn truncate(&self, a: f64) -> Signal {
        let mut out = self.clone();
        let keep_upto = self.grid.cutoff_index(a);
        let first_zeroed = match keep_upto {
            None => 0,
            Some(k) => k + 1,
        };
        for k in first_zeroed..self.grid.len() {
            out.sample_mut(k).fill(0.0);
        }
        out
    }

    /// Forward shift by `m` grid steps: `(translate(u))_k = u_{k+m}`,
    /// zero-filled at the window end.
    pub fn translate(&self, m: usize) -> Signal {
        let n = self.grid.len();
        let mut out = Signal::zeros(self.grid, self.dim);
        for k in 0..n.saturating_sub(m) {
            out.sample_mut(k).copy_from_slice(self.sample(k + m));
        }
        out
    }

    /// Backward difference `(Du)_k = (u_k - u_{k-1}) / h` with
    /// `u_{-1} = 0` (the signal is zero before the window).
    pub fn derivative(&self) -> Signal {
        let n = self.grid.len();
        let h = self.grid.step();
        let mut out = Signal::zeros(self.grid, self.dim);
        for k in 0..n {
            for i in 0..self.dim {
                let prev = if k == 0 { 0.0 } else { self.values[(k - 1) * self.dim + i] };
                out.values[k * self.dim + i] = (self.values[k * self.dim + i] - prev) / h;
            }
        }
        out
    }

    /// Causal cumulative sum `(Su)_k = h * sum_{j<=k} u_j`; the exact
    /// grid inverse of [`Signal::derivative`].
    pub fn antiderivative(&self) -> Signal {
        let n = self.grid.len();
        let h = self.grid.step();
        let mut out = Signal::zeros(self.grid, self.dim);
        let mut acc = vec![0.0; self.dim];
        for k in 0..n {
            for (i, a) in acc.iter_mut().enumerate() {
                *a += h * self.values[k * self.dim + i];
                out.values[k * self.dim + i] = *a;
            }
        }
        out
    }

    /// Resolvent of the backward difference: solves
    /// `u + eps * Du = f` by the causal recursion
    /// `u_k = (f_k + (eps/h) u_{k-1}) / (1 + eps/h)`.
    ///
    /// Strong monotonicity of `1 + eps*D` makes this nonexpansive for
    /// the weighted norm, with `u -> f` as `eps -> 0`.
    pub fn resolvent_time(&self, eps: f64) -> Result<Signal> {
        if !eps.is_finite() || eps <= 0.0 {
            return Err(Error::contract(format!(
                "time resolvent parameter must be positive, got {eps}"
            )));
        }
        let n = self.grid.len();
        let beta = eps / self.grid.step();
        let denom = 1.0 + beta;
        let mut out = Signal::zeros(self.grid, self.dim);
        let mut prev = vec![0.0; self.dim];
        for k in 0..n {
            for (i, p) in prev.iter_mut().enumerate() {
                let u = (self.values[k * self.dim + i] + beta * *p) / denom;
                out.values[k * self.dim + i] = u;
                *p = u;
            }
        }
        Ok(out)
    }

    /// Weighted Sobolev norm of order `k` in `{-1, 0, 1}`:
    /// norm of the antiderivative, the signal, or the derivative.
    pub fn sobolev_norm(&self, weight: &Weight, k: i32) -> Result<f64> {
        match k {
            -1 => Ok(self.antiderivative().weighted_norm(weight)),
            0 => Ok(self.weighted_norm(weight)),
            1 => Ok(self.derivative().weighted_norm(weight)),
            other => Err(Error::contract(format!(
                "sobolev order {other} not supported, expected -1, 0 or 1"
            ))),
        }
    }

    /// Pointwise map of every sample, dimension preserved.
    pub fn map_samples(&self, mut f: impl FnMut(usize, &[f64], &mut [f64])) -> Signal {
        let mut out = Signal::zeros(self.grid, self.dim);
        for k in 0..self.grid.len() {
            let (src, dst) = (self.sample(k), &mut out.values[k * self.dim..(k + 1) * self.dim]);
            f(k, src, dst);
        }
        out
    }
}

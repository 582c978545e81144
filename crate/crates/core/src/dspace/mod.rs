//! Functions on the unit square stored on a regular grid, with the moduli
//! and metrics of the Skorohod-type space `D([0,1]²)`.
//!
//! A [`GridFunction`] of resolution `n` stores `(n+1) × (n+1)` levels. In the
//! default [`Interp::Step`] reading, level `a < n` covers `[a/n, (a+1)/n)` and
//! level `n` is the edge `{1}`, so the function is a finite combination of
//! the step functions `1_{E₁×E₂}` with `Eᵢ` left-closed right-open or `{1}`.
//! The [`Interp::Vertex`] reading treats levels as vertex samples of a
//! continuous, bilinearly interpolated function.

mod metric;
mod moduli;
mod timechange;

use ndarray::Array2;

use crate::{Error, Result};

pub use metric::{
    billingsley_d0_upper, billingsley_objective, skorohod_d_upper, skorohod_objective,
    sup_distance_after, CandidateSet, MetricBound, MAX_EXHAUSTIVE_GRID,
};
pub use moduli::{
    modulus_w, modulus_wprime, modulus_wprime_with, MeshRule, WPrime, WPrimeSearch,
    EXHAUSTIVE_MAX_N,
};
pub use timechange::{timechange_norm, PiecewiseLinear, TimeChange};

/// Slack when snapping `n·t` to its grid index, so `0.29 · 100` reads level 29.
const SNAP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Interp {
    #[default]
    Step,
    Vertex,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    n: usize,
    values: Array2<f64>,
    interp: Interp,
}

/// Grid level holding `t` under the step reading.
#[inline]
pub fn level_index(n: usize, t: f64) -> usize {
    let s = (t * n as f64 + SNAP).floor();
    if s <= 0.0 {
        0
    } else {
        (s as usize).min(n)
    }
}

impl GridFunction {
    /// Step function from an `(n+1) × (n+1)` table of levels.
    pub fn from_values(values: Array2<f64>) -> Result<Self> {
        Self::with_interp(values, Interp::Step)
    }

    pub fn with_interp(values: Array2<f64>, interp: Interp) -> Result<Self> {
        let (r, c) = values.dim();
        if r != c || r < 2 {
            return Err(Error::DimensionMismatch(format!(
                "grid function needs a square table with at least 2x2 levels, got {r}x{c}"
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("grid function values must be finite"));
        }
        Ok(Self {
            n: r - 1,
            values,
            interp,
        })
    }

    /// Step function taking `f(a/n, b/n)` on level `(a, b)`.
    pub fn from_fn(n: usize, f: impl Fn(f64, f64) -> f64) -> Self {
        let nf = n as f64;
        let values = Array2::from_shape_fn((n + 1, n + 1), |(a, b)| f(a as f64 / nf, b as f64 / nf));
        Self::from_values(values).expect("sampled function must be finite")
    }

    /// Continuous interpolant of the vertex samples `f(a/n, b/n)`.
    pub fn continuous_from_fn(n: usize, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut g = Self::from_fn(n, f);
        g.interp = Interp::Vertex;
        g
    }

    pub fn constant(n: usize, c: f64) -> Self {
        Self::from_fn(n, |_, _| c)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn interp(&self) -> Interp {
        self.interp
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    #[inline]
    pub fn level(&self, a: usize, b: usize) -> f64 {
        self.values[[a, b]]
    }

    pub fn eval(&self, t1: f64, t2: f64) -> f64 {
        match self.interp {
            Interp::Step => self.values[[level_index(self.n, t1), level_index(self.n, t2)]],
            Interp::Vertex => {
                let split = |t: f64| {
                    let s = t.clamp(0.0, 1.0) * self.n as f64;
                    let a = (s.floor() as usize).min(self.n - 1);
                    (a, s - a as f64)
                };
                let (a, fa) = split(t1);
                let (b, fb) = split(t2);
                let v = |i, j| self.values[[i, j]];
                (1.0 - fa) * (1.0 - fb) * v(a, b)
                    + fa * (1.0 - fb) * v(a + 1, b)
                    + (1.0 - fa) * fb * v(a, b + 1)
                    + fa * fb * v(a + 1, b + 1)
            }
        }
    }

    /// `sup_t |x(t) − y(t)|` for two functions on the same grid.
    pub fn sup_distance(&self, other: &GridFunction) -> Result<f64> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch(format!(
                "resolutions {} and {} differ",
                self.n, other.n
            )));
        }
        Ok(self
            .values
            .iter()
            .zip(other.values.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

//! Exact Brownian sheet reference: grid paths and finite-dimensional laws.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::Array2;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dspace::GridFunction;
use crate::rng::seeded;
use crate::{Error, Result};

/// Eigenvalues above `-EIGEN_CLIP` are treated as zero.
pub const EIGEN_CLIP: f64 = 1e-10;

/// A Brownian sheet path on the `n`-grid, as a step function.
///
/// Cell increments are iid `N(0, 1/n²)` and are cumulated in both directions,
/// so `W(a/n, b/n)` is exact in law.
pub fn sample_sheet(n: usize, seed: u64) -> Result<GridFunction> {
    if n == 0 {
        return Err(Error::invalid("sheet resolution must be at least 1"));
    }
    let mut rng = seeded(seed);
    let scale = 1.0 / n as f64;
    let mut levels = Array2::zeros((n + 1, n + 1));
    for a in 1..=n {
        let mut row = 0.0;
        for b in 1..=n {
            let z: f64 = StandardNormal.sample(&mut rng);
            row += z * scale;
            levels[[a, b]] = levels[[a - 1, b]] + row;
        }
    }
    GridFunction::from_values(levels)
}

/// `Cov(W(s), W(t)) = min(s₁,t₁) · min(s₂,t₂)`.
pub fn sheet_cov(s: (f64, f64), t: (f64, f64)) -> f64 {
    s.0.min(t.0) * s.1.min(t.1)
}

/// Time points for a finite-dimensional projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct FddSpec {
    points: Vec<(f64, f64)>,
}

impl FddSpec {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("at least one time point is required"));
        }
        for (idx, &(t1, t2)) in points.iter().enumerate() {
            if !((0.0..=1.0).contains(&t1) && (0.0..=1.0).contains(&t2)) {
                return Err(Error::invalid(format!(
                    "time point ({t1}, {t2}) lies outside the unit square"
                )));
            }
            if points[..idx].contains(&(t1, t2)) {
                return Err(Error::invalid(format!("time point ({t1}, {t2}) is repeated")));
            }
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `[sheet_cov(tᵢ, tⱼ)]`.
    pub fn covariance(&self) -> Array2<f64> {
        let k = self.points.len();
        Array2::from_shape_fn((k, k), |(i, j)| sheet_cov(self.points[i], self.points[j]))
    }
}

impl TryFrom<Vec<(f64, f64)>> for FddSpec {
    type Error = Error;

    fn try_from(points: Vec<(f64, f64)>) -> Result<Self> {
        Self::new(points)
    }
}

impl From<FddSpec> for Vec<(f64, f64)> {
    fn from(spec: FddSpec) -> Self {
        spec.points
    }
}

/// Symmetric square root `L` with `L Lᵀ = C`, clipping tiny negative eigenvalues.
pub fn psd_factor(cov: &Array2<f64>) -> Result<DMatrix<f64>> {
    let k = cov.nrows();
    let c = DMatrix::from_fn(k, k, |i, j| 0.5 * (cov[[i, j]] + cov[[j, i]]));
    let eig = SymmetricEigen::new(c);
    let mut roots = eig.eigenvalues.clone();
    for v in roots.iter_mut() {
        if *v < -EIGEN_CLIP {
            return Err(Error::Factorization(*v));
        }
        *v = v.max(0.0).sqrt();
    }
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&roots))
}

/// `N` exact draws of `(W(t₁), …, W(t_k))`, one per row.
pub fn sample_fdd(spec: &FddSpec, count: usize, seed: u64) -> Result<Array2<f64>> {
    let k = spec.len();
    let factor = psd_factor(&spec.covariance())?;
    let mut rng = seeded(seed);
    let mut out = Array2::zeros((count, k));
    let mut z = nalgebra::DVector::zeros(k);
    for r in 0..count {
        for zi in z.iter_mut() {
            *zi = StandardNormal.sample(&mut rng);
        }
        let x = &factor * &z;
        for c in 0..k {
            out[[r, c]] = x[c];
        }
    }
    Ok(out)
}

//! Double partial sums and the normalized partial-sum process.

use ndarray::{Array2, ArrayView2};

use crate::dspace::{level_index, GridFunction};
use crate::fieldgen::FieldSample;
use crate::{Error, Result};

/// Fields at least this large (on either axis) are summed with compensation.
pub const COMPENSATED_THRESHOLD: usize = 1024;

/// `S[i,j] = Σ_{i′≤i, j′≤j} x[i′,j′]`, stored with the zero row and column.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialSumField {
    sums: Array2<f64>,
    origin: (usize, usize),
}

impl PartialSumField {
    pub fn dims(&self) -> (usize, usize) {
        let (r, c) = self.sums.dim();
        (r - 1, c - 1)
    }

    /// `S[i,j]`, with `S ≡ 0` when either index is zero.
    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.sums[[i, j]]
    }

    pub fn sums(&self) -> &Array2<f64> {
        &self.sums
    }

    /// Recover `x[i,j]` (1-based) by inclusion-exclusion.
    #[inline]
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.at(i, j) - self.at(i - 1, j) - self.at(i, j - 1) + self.at(i - 1, j - 1)
    }

    /// Sum of `x` over `(i0, i1] × (j0, j1]`.
    #[inline]
    pub fn block_sum(&self, i0: usize, i1: usize, j0: usize, j1: usize) -> f64 {
        self.at(i1, j1) - self.at(i0, j1) - self.at(i1, j0) + self.at(i0, j0)
    }

    pub fn origin(&self) -> (usize, usize) {
        self.origin
    }

    /// Same sums, measured relative to `S[k₁,k₂]`.
    pub fn with_origin(mut self, k1: usize, k2: usize) -> Result<Self> {
        let (n1, n2) = self.dims();
        if k1 > n1 || k2 > n2 {
            return Err(Error::WindowOverflow {
                k1,
                k2,
                size: 0,
                n1,
                n2,
            });
        }
        self.origin = (k1, k2);
        Ok(self)
    }

    /// `S[k₁+i, k₂+j] − S[k₁, k₂]` for the stored origin.
    #[inline]
    pub fn relative(&self, i: usize, j: usize) -> f64 {
        let (k1, k2) = self.origin;
        self.at(k1 + i, k2 + j) - self.at(k1, k2)
    }
}

/// Compensated running sum.
#[derive(Default, Clone, Copy)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    #[inline]
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Prefix sums of an arbitrary array in fixed row-major order.
pub fn prefix_sums(values: ArrayView2<f64>) -> PartialSumField {
    let (n1, n2) = values.dim();
    let mut sums = Array2::zeros((n1 + 1, n2 + 1));
    if n1.max(n2) >= COMPENSATED_THRESHOLD {
        // Column sums Σ_{i′≤i} x[i′,j], then a compensated row prefix of them.
        let mut cols = vec![Neumaier::default(); n2];
        for i in 1..=n1 {
            for (j, col) in cols.iter_mut().enumerate() {
                col.add(values[[i - 1, j]]);
            }
            let mut acc = Neumaier::default();
            for j in 1..=n2 {
                acc.add(cols[j - 1].sum);
                acc.add(cols[j - 1].comp);
                sums[[i, j]] = acc.value();
            }
        }
    } else {
        for i in 1..=n1 {
            let mut row = 0.0;
            for j in 1..=n2 {
                row += values[[i - 1, j - 1]];
                sums[[i, j]] = sums[[i - 1, j]] + row;
            }
        }
    }
    PartialSumField {
        sums,
        origin: (0, 0),
    }
}

pub fn partial_sums(field: &FieldSample) -> PartialSumField {
    prefix_sums(field.values.view())
}

/// `X_n(t₁,t₂) = S[⌊nt₁⌋, ⌊nt₂⌋] / (σn)` read straight from the sums.
#[inline]
pub fn process_value(sums: &PartialSumField, sigma: f64, n: usize, t1: f64, t2: f64) -> f64 {
    sums.at(level_index(n, t1), level_index(n, t2)) / (sigma * n as f64)
}

/// The random element `X_n` as a step function on the `n`-grid.
pub fn partial_sum_process(field: &FieldSample, sigma: f64, n: usize) -> Result<GridFunction> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
    }
    let (n1, n2) = field.dims();
    if n == 0 || n1 < n || n2 < n {
        return Err(Error::DimensionMismatch(format!(
            "{n1}x{n2} field cannot carry a process of resolution {n}"
        )));
    }
    let sums = prefix_sums(field.values.slice(ndarray::s![..n, ..n]));
    let scale = 1.0 / (sigma * n as f64);
    GridFunction::from_values(sums.sums.mapv(|s| s * scale))
}

/// Rectangle `(s₁, t₁] × (s₂, t₂]` in the unit square.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub s1: f64,
    pub t1: f64,
    pub s2: f64,
    pub t2: f64,
}

impl Rect {
    pub fn new(s1: f64, t1: f64, s2: f64, t2: f64) -> Result<Self> {
        let inside = |v: f64| (0.0..=1.0).contains(&v);
        if !(inside(s1) && inside(t1) && inside(s2) && inside(t2)) {
            return Err(Error::invalid("rectangle must lie in the unit square"));
        }
        if !(s1 < t1 && s2 < t2) {
            return Err(Error::invalid("rectangle sides must be strictly ordered"));
        }
        Ok(Self { s1, t1, s2, t2 })
    }

    pub fn area(&self) -> f64 {
        (self.t1 - self.s1) * (self.t2 - self.s2)
    }
}

/// `X(Δ) = X(t₁,t₂) − X(s₁,t₂) − X(t₁,s₂) + X(s₁,s₂)`.
pub fn increment(x: &GridFunction, r: &Rect) -> f64 {
    x.eval(r.t1, r.t2) - x.eval(r.s1, r.t2) - x.eval(r.t1, r.s2) + x.eval(r.s1, r.s2)
}

/// `max_{1≤i,j≤n} |S[k₁+i, k₂+j] − S[k₁, k₂]|`.
pub fn running_max(s: &PartialSumField, k1: usize, k2: usize, n: usize) -> Result<f64> {
    let (n1, n2) = s.dims();
    if k1 + n > n1 || k2 + n > n2 {
        return Err(Error::WindowOverflow {
            k1,
            k2,
            size: n,
            n1,
            n2,
        });
    }
    let base = s.at(k1, k2);
    let mut best = 0.0f64;
    for i in 1..=n {
        for j in 1..=n {
            best = best.max((s.at(k1 + i, k2 + j) - base).abs());
        }
    }
    Ok(best)
}

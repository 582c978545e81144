//! Non-stationary m-dependent random fields.
//!
//! A field is a finite two-dimensional moving average
//!
//! ```text
//! x[i,j] = Σ_{0 ≤ k₁,k₂ ≤ m} a[k₁,k₂] · ε[i−k₁, j−k₂]
//! ```
//!
//! of independent, mean-zero innovations whose variance `v(i/n₁, j/n₂)`
//! varies over the lattice. Sites at Chebyshev distance greater than `m`
//! share no innovation, so the field is m-dependent with respect to the
//! natural filtration `σ(ε[i′,j′] : i′ ≤ i, j′ ≤ j)`.
//!
//! Innovations at indices `≤ 0` are materialized (never zero-padded), which
//! keeps every site's moving average complete.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::rng::{box_muller, open_unit, SiteRng};
use crate::{Error, Result};

/// Resolution per axis of the midpoint rule used by [`long_run_variance`].
pub const QUADRATURE_RESOLUTION: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnovationLaw {
    Gaussian,
    Rademacher,
    /// Uniform on `[−√3, √3]`, scaled to the site variance.
    UniformCentered,
}

impl InnovationLaw {
    pub const ALL: [InnovationLaw; 3] = [
        InnovationLaw::Gaussian,
        InnovationLaw::Rademacher,
        InnovationLaw::UniformCentered,
    ];

    /// Unit-variance draw from two random words.
    #[inline]
    fn draw(self, a: u64, b: u64) -> f64 {
        match self {
            InnovationLaw::Gaussian => box_muller(a, b),
            InnovationLaw::Rademacher => {
                if a >> 63 == 1 {
                    1.0
                } else {
                    -1.0
                }
            }
            InnovationLaw::UniformCentered => (2.0 * open_unit(a) - 1.0) * 3f64.sqrt(),
        }
    }

    /// `E|ε|⁴` for a unit-variance innovation.
    pub fn fourth_moment(self) -> f64 {
        match self {
            InnovationLaw::Gaussian => 3.0,
            InnovationLaw::Rademacher => 1.0,
            InnovationLaw::UniformCentered => 1.8,
        }
    }

    /// Almost-sure bound on `|ε|` at unit variance, if any.
    pub fn support_bound(self) -> Option<f64> {
        match self {
            InnovationLaw::Gaussian => None,
            InnovationLaw::Rademacher => Some(1.0),
            InnovationLaw::UniformCentered => Some(3f64.sqrt()),
        }
    }
}

/// Variance profile `v(t₁, t₂)` on the unit square.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VarianceProfile {
    Constant {
        value: f64,
    },
    /// `base + slope1·t₁ + slope2·t₂`
    Affine {
        base: f64,
        slope1: f64,
        slope2: f64,
    },
    /// `base + amplitude·sin(2π·freq1·t₁)·sin(2π·freq2·t₂)`
    Sinusoidal {
        base: f64,
        amplitude: f64,
        freq1: f64,
        freq2: f64,
    },
    /// Alternating `low`/`high` on a `blocks × blocks` board.
    Checkerboard {
        low: f64,
        high: f64,
        blocks: u32,
    },
}

impl Default for VarianceProfile {
    fn default() -> Self {
        VarianceProfile::Constant { value: 1.0 }
    }
}

impl VarianceProfile {
    pub fn eval(&self, t1: f64, t2: f64) -> f64 {
        match *self {
            VarianceProfile::Constant { value } => value,
            VarianceProfile::Affine {
                base,
                slope1,
                slope2,
            } => base + slope1 * t1 + slope2 * t2,
            VarianceProfile::Sinusoidal {
                base,
                amplitude,
                freq1,
                freq2,
            } => {
                use std::f64::consts::TAU;
                base + amplitude * (TAU * freq1 * t1).sin() * (TAU * freq2 * t2).sin()
            }
            VarianceProfile::Checkerboard { low, high, blocks } => {
                let b = blocks as f64;
                let cell = |t: f64| ((t * b).floor() as u32).min(blocks - 1);
                if (cell(t1) + cell(t2)) % 2 == 0 {
                    low
                } else {
                    high
                }
            }
        }
    }

    /// Analytic lower and upper bound of the profile on `[0,1]²`.
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            VarianceProfile::Constant { value } => (value, value),
            VarianceProfile::Affine {
                base,
                slope1,
                slope2,
            } => {
                let corners = [base, base + slope1, base + slope2, base + slope1 + slope2];
                (
                    corners.iter().copied().fold(f64::INFINITY, f64::min),
                    corners.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                )
            }
            VarianceProfile::Sinusoidal {
                base, amplitude, ..
            } => (base - amplitude.abs(), base + amplitude.abs()),
            VarianceProfile::Checkerboard { low, high, .. } => (low.min(high), low.max(high)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let VarianceProfile::Checkerboard { blocks: 0, .. } = self {
            return Err(Error::invalid("checkerboard needs at least one block"));
        }
        let (lo, hi) = self.bounds();
        if !(lo.is_finite() && hi.is_finite()) || lo <= 0.0 {
            return Err(Error::invalid(format!(
                "variance profile must be bounded and bounded away from zero, got range [{lo}, {hi}]"
            )));
        }
        Ok(())
    }

    /// `∬ v` over the unit square by the midpoint rule on a
    /// [`QUADRATURE_RESOLUTION`]² grid.
    pub fn integral(&self) -> f64 {
        let r = QUADRATURE_RESOLUTION;
        let h = 1.0 / r as f64;
        let mut total = 0.0;
        for a in 0..r {
            let t1 = (a as f64 + 0.5) * h;
            let row: f64 = (0..r).map(|b| self.eval(t1, (b as f64 + 0.5) * h)).sum();
            total += row;
        }
        total * h * h
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InnovationSpec {
    pub law: InnovationLaw,
    #[serde(default)]
    pub variance: VarianceProfile,
}

impl InnovationSpec {
    pub fn new(law: InnovationLaw, variance: VarianceProfile) -> Self {
        Self { law, variance }
    }

    pub fn standard(law: InnovationLaw) -> Self {
        Self::new(law, VarianceProfile::default())
    }

    pub fn validate(&self) -> Result<()> {
        self.variance.validate()
    }

    /// Variance at lattice site `(i, j)` of an `n₁ × n₂` field. Padding sites
    /// (`i ≤ 0` or `j ≤ 0`) read the profile on the boundary.
    pub fn site_variance(&self, n1: usize, n2: usize, i: i64, j: i64) -> f64 {
        let t1 = i.clamp(0, n1 as i64) as f64 / n1 as f64;
        let t2 = j.clamp(0, n2 as i64) as f64 / n2 as f64;
        self.variance.eval(t1, t2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KernelRepr {
    coeffs: Vec<Vec<f64>>,
}

/// Moving-average kernel `a[k₁,k₂]`, `0 ≤ k₁,k₂ ≤ m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelRepr", into = "KernelRepr")]
pub struct MaKernel {
    m: usize,
    coeffs: Vec<f64>,
    sum: f64,
}

impl TryFrom<KernelRepr> for MaKernel {
    type Error = Error;

    fn try_from(r: KernelRepr) -> Result<Self> {
        MaKernel::new(r.coeffs)
    }
}

impl From<MaKernel> for KernelRepr {
    fn from(k: MaKernel) -> Self {
        KernelRepr {
            coeffs: k.rows(),
        }
    }
}

impl MaKernel {
    /// Kernel from a square `(m+1) × (m+1)` coefficient table.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let side = rows.len();
        if side == 0 || rows.iter().any(|r| r.len() != side) {
            return Err(Error::invalid("kernel coefficients must form a non-empty square table"));
        }
        let coeffs: Vec<f64> = rows.into_iter().flatten().collect();
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("kernel coefficients must be finite"));
        }
        if coeffs.iter().all(|&c| c == 0.0) {
            return Err(Error::invalid("kernel needs at least one nonzero coefficient"));
        }
        let sum = coeffs.iter().sum();
        Ok(Self {
            m: side - 1,
            coeffs,
            sum,
        })
    }

    pub fn identity() -> Self {
        Self::new(vec![vec![1.0]]).expect("identity kernel is valid")
    }

    /// All coefficients equal to one.
    pub fn ones(m: usize) -> Self {
        Self::new(vec![vec![1.0; m + 1]; m + 1]).expect("ones kernel is valid")
    }

    /// Outer product `a[k₁,k₂] = b[k₁]·b[k₂]`.
    pub fn separable(b: &[f64]) -> Result<Self> {
        Self::new(b.iter().map(|&x| b.iter().map(|&y| x * y).collect()).collect())
    }

    pub fn m(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn coeff(&self, k1: usize, k2: usize) -> f64 {
        self.coeffs[k1 * (self.m + 1) + k2]
    }

    /// Kernel sum `A = Σ a[k₁,k₂]`.
    pub fn sum(&self) -> f64 {
        self.sum
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.coeffs.chunks(self.m + 1).map(|c| c.to_vec()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    pub innovations: InnovationSpec,
    pub kernel: MaKernel,
}

impl FieldSpec {
    pub fn new(innovations: InnovationSpec, kernel: MaKernel) -> Self {
        Self {
            innovations,
            kernel,
        }
    }

    /// Unit-variance iid field with the given law.
    pub fn iid(law: InnovationLaw) -> Self {
        Self::new(InnovationSpec::standard(law), MaKernel::identity())
    }

    pub fn validate(&self) -> Result<()> {
        self.innovations.validate()
    }

    pub fn m(&self) -> usize {
        self.kernel.m()
    }

    /// Generate an `n₁ × n₂` field.
    pub fn sample(&self, n1: usize, n2: usize, seed: u64) -> Result<FieldSample> {
        let innovations = gen_innovations(&self.innovations, n1, n2, self.kernel.m(), seed)?;
        let mut field = apply_ma_kernel(innovations, &self.kernel)?;
        field.innovation_spec = Some(self.innovations.clone());
        Ok(field)
    }

    pub fn long_run_variance(&self) -> Result<f64> {
        long_run_variance(self)
    }
}

/// Innovations on the padded lattice `1−m ..= n₁` × `1−m ..= n₂`.
#[derive(Debug, Clone, PartialEq)]
pub struct InnovationArray {
    m: usize,
    n1: usize,
    n2: usize,
    data: Array2<f64>,
    seed: u64,
}

impl InnovationArray {
    /// Wrap an explicit `(n₁+m) × (n₂+m)` array.
    pub fn from_array(m: usize, data: Array2<f64>) -> Result<Self> {
        let (r, c) = data.dim();
        if r <= m || c <= m {
            return Err(Error::DimensionMismatch(format!(
                "{r}x{c} innovation array cannot hold padding {m} plus at least one site"
            )));
        }
        Ok(Self {
            m,
            n1: r - m,
            n2: c - m,
            data,
            seed: 0,
        })
    }

    pub fn constant(n1: usize, n2: usize, m: usize, value: f64) -> Self {
        Self {
            m,
            n1,
            n2,
            data: Array2::from_elem((n1 + m, n2 + m), value),
            seed: 0,
        }
    }

    pub fn padding(&self) -> usize {
        self.m
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.n1, self.n2)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Raw padded array; entry `[p, q]` holds site `(p+1−m, q+1−m)`.
    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    /// Innovation at 1-based site `(i, j)`, `1−m ≤ i ≤ n₁`.
    #[inline]
    pub fn site(&self, i: i64, j: i64) -> f64 {
        let m = self.m as i64;
        self.data[[(i + m - 1) as usize, (j + m - 1) as usize]]
    }
}

/// Draw the padded innovation array for an `n₁ × n₂` field with memory `m`.
pub fn gen_innovations(
    spec: &InnovationSpec,
    n1: usize,
    n2: usize,
    m: usize,
    seed: u64,
) -> Result<InnovationArray> {
    if n1 == 0 || n2 == 0 {
        return Err(Error::invalid("field dimensions must be positive"));
    }
    spec.validate()?;
    let mut rng = SiteRng::new(seed);
    let mut data = Array2::zeros((n1 + m, n2 + m));
    let lo = 1 - m as i64;
    for (p, mut row) in data.rows_mut().into_iter().enumerate() {
        let i = lo + p as i64;
        rng.seek(i, lo);
        for (q, cell) in row.iter_mut().enumerate() {
            let j = lo + q as i64;
            let v = spec.site_variance(n1, n2, i, j);
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::VarianceProfile {
                    value: v,
                    t1: i.max(0) as f64 / n1 as f64,
                    t2: j.max(0) as f64 / n2 as f64,
                });
            }
            let (a, b) = rng.next_pair();
            *cell = spec.law.draw(a, b) * v.sqrt();
        }
    }
    Ok(InnovationArray {
        m,
        n1,
        n2,
        data,
        seed,
    })
}

/// Realized field together with the innovations that generated it.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSample {
    pub values: Array2<f64>,
    pub innovations: Option<InnovationArray>,
    pub kernel: MaKernel,
    pub innovation_spec: Option<InnovationSpec>,
    pub seed: u64,
}

impl FieldSample {
    /// A field known only through its values (no moving-average structure).
    pub fn from_values(values: Array2<f64>) -> Self {
        Self {
            values,
            innovations: None,
            kernel: MaKernel::identity(),
            innovation_spec: None,
            seed: 0,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.values.dim()
    }

    /// `x[i,j]` at 1-based site.
    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[[i - 1, j - 1]]
    }
}

/// Convolve padded innovations with the kernel.
pub fn apply_ma_kernel(innovations: InnovationArray, kernel: &MaKernel) -> Result<FieldSample> {
    let m = kernel.m();
    if innovations.m != m {
        return Err(Error::DimensionMismatch(format!(
            "innovations padded by {} but kernel has memory {m}",
            innovations.m
        )));
    }
    let (n1, n2) = (innovations.n1, innovations.n2);
    let eps = &innovations.data;
    let values = Array2::from_shape_fn((n1, n2), |(r, c)| {
        // Site (r+1, c+1) sits at padded index (r+m, c+m).
        let mut acc = 0.0;
        for k1 in 0..=m {
            for k2 in 0..=m {
                acc += kernel.coeff(k1, k2) * eps[[r + m - k1, c + m - k2]];
            }
        }
        acc
    });
    Ok(FieldSample {
        values,
        seed: innovations.seed,
        innovations: Some(innovations),
        kernel: kernel.clone(),
        innovation_spec: None,
    })
}

/// `σ² = A² · ∬ v`, the limit of `E[S²_{n,n}] / n²`.
pub fn long_run_variance(spec: &FieldSpec) -> Result<f64> {
    spec.validate()?;
    let a = spec.kernel.sum();
    Ok(a * a * spec.innovations.variance.integral())
}

/// Anything that can produce fields for the Monte Carlo engine.
pub trait FieldSource: Sync {
    fn generate(&self, n1: usize, n2: usize, seed: u64) -> Result<FieldSample>;

    fn kernel(&self) -> &MaKernel;

    /// Innovation variance at normalized location `(t₁, t₂)`.
    fn innovation_variance(&self, _t1: f64, _t2: f64) -> f64 {
        1.0
    }
}

impl FieldSource for FieldSpec {
    fn generate(&self, n1: usize, n2: usize, seed: u64) -> Result<FieldSample> {
        self.sample(n1, n2, seed)
    }

    fn kernel(&self) -> &MaKernel {
        &self.kernel
    }

    fn innovation_variance(&self, t1: f64, t2: f64) -> f64 {
        self.innovations.variance.eval(t1.clamp(0.0, 1.0), t2.clamp(0.0, 1.0))
    }
}

/// Moving average of a constant innovation value; ignores the seed.
#[derive(Debug, Clone, PartialEq)]
pub struct DeterministicField {
    pub kernel: MaKernel,
    pub value: f64,
}

impl DeterministicField {
    pub fn new(kernel: MaKernel, value: f64) -> Self {
        Self { kernel, value }
    }
}

impl FieldSource for DeterministicField {
    fn generate(&self, n1: usize, n2: usize, seed: u64) -> Result<FieldSample> {
        let innov = InnovationArray::constant(n1, n2, self.kernel.m(), self.value);
        let mut f = apply_ma_kernel(innov, &self.kernel)?;
        f.seed = seed;
        Ok(f)
    }

    fn kernel(&self) -> &MaKernel {
        &self.kernel
    }

    fn innovation_variance(&self, _t1: f64, _t2: f64) -> f64 {
        self.value * self.value
    }
}

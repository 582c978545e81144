//! Martingale decomposition of moving-average fields and the maximal
//! inequalities built on it.
//!
//! Under the natural filtration `𝓕_{i,j} = σ(ε_{i′,j′} : i′ ≤ i, j′ ≤ j)` the
//! increment of `x_{i,j}` attributed to `𝓕_{i−k₁, j−k₂}` is `a_{k₁,k₂} ε_{i−k₁,j−k₂}`
//! for `0 ≤ k₁, k₂ ≤ m` and vanishes otherwise.

use ndarray::{Array2, Array4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::fieldgen::{FieldSample, FieldSpec};
use crate::mc::fold_replications;
use crate::stats::Moments;
use crate::sumproc::{prefix_sums, PartialSumField};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct MartingaleDecomposition {
    m: usize,
    n1: usize,
    n2: usize,
    /// `hat[[i−1, j−1, k₁+m, k₂+m]] = x̂^{i−k₁, j−k₂}_{i,j}`.
    hat: Array4<f64>,
    /// `Y^{(k₁,k₂)}` in row-major order over `k₁, k₂ ∈ [−m, m]`.
    components: Vec<PartialSumField>,
}

impl MartingaleDecomposition {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.n1, self.n2)
    }

    fn slot(&self, k1: i64, k2: i64) -> Option<(usize, usize)> {
        let m = self.m as i64;
        if k1.abs() > m || k2.abs() > m {
            return None;
        }
        Some(((k1 + m) as usize, (k2 + m) as usize))
    }

    /// `x̂^{i−k₁, j−k₂}_{i,j}` for 1-based `(i, j)`.
    pub fn hat(&self, i: usize, j: usize, k1: i64, k2: i64) -> f64 {
        let (a, b) = self.slot(k1, k2).expect("lag outside [-m, m]");
        self.hat[[i - 1, j - 1, a, b]]
    }

    pub fn hat_mut(&mut self, i: usize, j: usize, k1: i64, k2: i64) -> &mut f64 {
        let (a, b) = self.slot(k1, k2).expect("lag outside [-m, m]");
        &mut self.hat[[i - 1, j - 1, a, b]]
    }

    /// Partial sums of `Y^{(k₁,k₂)}`.
    pub fn component(&self, k1: i64, k2: i64) -> Result<&PartialSumField> {
        let (a, b) = self
            .slot(k1, k2)
            .ok_or_else(|| Error::invalid(format!("lag ({k1}, {k2}) outside [-{0}, {0}]", self.m)))?;
        Ok(&self.components[a * (2 * self.m + 1) + b])
    }

    /// `Σ_k x̂^{i−k₁, j−k₂}_{i,j}` at every site.
    pub fn recovered(&self) -> Array2<f64> {
        let w = 2 * self.m + 1;
        Array2::from_shape_fn((self.n1, self.n2), |(r, c)| {
            let mut acc = 0.0;
            for a in 0..w {
                for b in 0..w {
                    acc += self.hat[[r, c, a, b]];
                }
            }
            acc
        })
    }
}

/// Split a generated field into its component martingale increments.
pub fn decompose(field: &FieldSample) -> Result<MartingaleDecomposition> {
    let innov = field.innovations.as_ref().ok_or(Error::MissingInnovations)?;
    let kernel = &field.kernel;
    let m = kernel.m();
    if innov.padding() != m {
        return Err(Error::DimensionMismatch(format!(
            "innovations padded by {} but kernel has memory {m}",
            innov.padding()
        )));
    }
    let (n1, n2) = field.dims();
    let w = 2 * m + 1;
    let mut hat = Array4::zeros((n1, n2, w, w));
    for r in 0..n1 {
        for c in 0..n2 {
            let (i, j) = (r as i64 + 1, c as i64 + 1);
            for k1 in 0..=m {
                for k2 in 0..=m {
                    hat[[r, c, k1 + m, k2 + m]] =
                        kernel.coeff(k1, k2) * innov.site(i - k1 as i64, j - k2 as i64);
                }
            }
        }
    }
    let components = (0..w * w)
        .map(|s| prefix_sums(hat.slice(ndarray::s![.., .., s / w, s % w])))
        .collect();
    Ok(MartingaleDecomposition {
        m,
        n1,
        n2,
        hat,
        components,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub max_error: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Check `Σ_k x̂ = x` at every site.
pub fn verify_recovery(
    d: &MartingaleDecomposition,
    field: &FieldSample,
    tol: f64,
) -> Result<RecoveryReport> {
    if d.dims() != field.dims() {
        return Err(Error::DimensionMismatch(format!(
            "decomposition is {:?} but field is {:?}",
            d.dims(),
            field.dims()
        )));
    }
    let max_error = d
        .recovered()
        .iter()
        .zip(field.values.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(RecoveryReport {
        max_error,
        tol,
        pass: max_error <= tol,
    })
}

/// `(|Σz|^p, (2m+1)^{2(p−1)} Σ|z|^p)` for a `(2m+1) × (2m+1)` array.
pub fn power_sum_bound_check(z: &Array2<Complex64>, p: f64) -> Result<(f64, f64)> {
    if !(p > 1.0) {
        return Err(Error::invalid(format!("p must exceed 1, got {p}")));
    }
    let (r, c) = z.dim();
    if r != c || r % 2 == 0 {
        return Err(Error::DimensionMismatch(format!(
            "expected an odd square array, got {r}x{c}"
        )));
    }
    let total: Complex64 = z.iter().sum();
    let lhs = total.norm().powf(p);
    let rhs = (r as f64).powf(2.0 * (p - 1.0)) * z.iter().map(|v| v.norm().powf(p)).sum::<f64>();
    Ok((lhs, rhs))
}

/// Constants of the maximal inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaximalConstants {
    /// `q^{2p}` with `1/p + 1/q = 1`.
    pub doob: f64,
    /// `(2m+1)^{2(p−1)}`.
    pub power_sum: f64,
    pub prefactor: f64,
}

pub fn maximal_constants(p: f64, m: usize) -> Result<MaximalConstants> {
    if !(p > 1.0) {
        return Err(Error::invalid(format!("p must exceed 1, got {p}")));
    }
    let q = p / (p - 1.0);
    let doob = q.powf(2.0 * p);
    let power_sum = ((2 * m + 1) as f64).powf(2.0 * (p - 1.0));
    Ok(MaximalConstants {
        doob,
        power_sum,
        prefactor: doob * power_sum,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaximalReport {
    pub p: f64,
    pub n: usize,
    pub replications: usize,
    /// Estimate of `E[(S*_{n,n})^p]`.
    pub lhs: f64,
    pub lhs_se: f64,
    /// Estimate of the right-hand side including the prefactor.
    pub rhs: f64,
    pub rhs_se: f64,
    pub constants: MaximalConstants,
    pub pass: bool,
}

struct MaximalAcc {
    lhs: Moments,
    /// One per causal component and cell.
    cells: Vec<Moments>,
}

impl MaximalAcc {
    fn merge(&mut self, other: MaximalAcc) {
        self.lhs.merge(&other.lhs);
        for (a, b) in self.cells.iter_mut().zip(other.cells.iter()) {
            a.merge(b);
        }
    }
}

/// Monte Carlo comparison of `E[(S*)^p]` with the component bound.
///
/// Only components with `k₁, k₂ ≥ 0` are accumulated; the others vanish
/// identically under the moving-average filtration.
pub fn maximal_inequality_check(
    spec: &FieldSpec,
    p: f64,
    n: usize,
    replications: usize,
    seed: u64,
) -> Result<MaximalReport> {
    spec.validate()?;
    if n == 0 || replications < 2 {
        return Err(Error::invalid("need n ≥ 1 and at least two replications"));
    }
    let constants = maximal_constants(p, spec.m())?;
    let m = spec.m() as i64;
    let causal = ((m + 1) * (m + 1)) as usize;
    let acc = fold_replications(
        replications,
        seed,
        || MaximalAcc {
            lhs: Moments::new(),
            cells: vec![Moments::new(); causal * n * n],
        },
        |acc, _, s| {
            let field = spec.sample(n, n, s)?;
            let sums = prefix_sums(field.values.view());
            let mut smax = 0.0f64;
            for i in 1..=n {
                for j in 1..=n {
                    smax = smax.max(sums.at(i, j).abs());
                }
            }
            acc.lhs.push(smax.powf(p));
            let d = decompose(&field)?;
            for k1 in 0..=m {
                for k2 in 0..=m {
                    let y = d.component(k1, k2)?;
                    let base = ((k1 * (m + 1) + k2) as usize) * n * n;
                    for i in 1..=n {
                        for j in 1..=n {
                            acc.cells[base + (i - 1) * n + (j - 1)].push(y.at(i, j).abs().powf(p));
                        }
                    }
                }
            }
            Ok(())
        },
        MaximalAcc::merge,
    )?;
    let mut rhs = 0.0;
    let mut rhs_var = 0.0;
    for comp in acc.cells.chunks(n * n) {
        let best = comp
            .iter()
            .max_by(|a, b| a.mean().total_cmp(&b.mean()))
            .expect("non-empty component");
        rhs += best.mean();
        rhs_var += best.se().powi(2);
    }
    let rhs = constants.prefactor * rhs;
    let rhs_se = constants.prefactor * rhs_var.sqrt();
    let lhs = acc.lhs.mean();
    let lhs_se = acc.lhs.se();
    let combined = (lhs_se * lhs_se + rhs_se * rhs_se).sqrt();
    Ok(MaximalReport {
        p,
        n,
        replications,
        lhs,
        lhs_se,
        rhs,
        rhs_se,
        constants,
        pass: lhs <= rhs + 3.0 * combined,
    })
}

/// One orthogonality probe against a forward increment of `Y^{(k)}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub name: String,
    /// Estimate of `E[ΔY · g]`.
    pub estimate: f64,
    pub se: f64,
    pub expected: f64,
    /// `|estimate − expected| ≤ 3 se`.
    pub consistent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MartingaleReport {
    pub component: (i64, i64),
    pub from: (usize, usize),
    pub to: (usize, usize),
    pub trials: usize,
    /// Probes measurable with respect to `𝓖_{from}`; all expected to vanish.
    pub probes: Vec<Probe>,
    /// Innovation inside the increment window; expected `a_k · v`.
    pub anti_probe: Probe,
    pub pass: bool,
}

/// Orthogonality of the increment `Y^{(k)}_{(n,n)} − Y^{(k)}_{(n/2,n/2)}` to
/// bounded `𝓖_{n/2,n/2}`-measurable probes, over fresh `n × n` fields.
pub fn martingale_property_check(
    spec: &FieldSpec,
    which: (i64, i64),
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<MartingaleReport> {
    spec.validate()?;
    let m = spec.m() as i64;
    let (k1, k2) = which;
    if k1.abs() > m || k2.abs() > m {
        return Err(Error::invalid(format!("lag ({k1}, {k2}) outside [-{m}, {m}]")));
    }
    if n < 2 || trials < 2 {
        return Err(Error::invalid("need n ≥ 2 and at least two trials"));
    }
    let (i, j) = (n / 2, n / 2);
    // Innovation sites, as offsets into the 𝓖-index frame.
    let corner = (i as i64 - k1, j as i64 - k2);
    let lagged = (corner.0 - 1, corner.1);
    let inside = (corner.0 + 1, corner.1 + 1);
    const PROBES: usize = 4;
    let acc = fold_replications(
        trials,
        seed,
        || vec![Moments::new(); PROBES],
        |acc, _, s| {
            let field = spec.sample(n, n, s)?;
            let d = decompose(&field)?;
            let y = d.component(k1, k2)?;
            let inc = y.at(n, n) - y.at(i, j);
            let innov = field.innovations.as_ref().ok_or(Error::MissingInnovations)?;
            let sign = |site: (i64, i64)| innov.site(site.0, site.1).signum();
            acc[0].push(inc);
            acc[1].push(inc * sign(corner));
            acc[2].push(inc * sign(lagged));
            acc[3].push(inc * innov.site(inside.0, inside.1));
            Ok(())
        },
        |a, b| {
            for (x, y) in a.iter_mut().zip(b.iter()) {
                x.merge(y);
            }
        },
    )?;
    let probe = |name: &str, mom: &Moments, expected: f64| Probe {
        name: name.to_string(),
        estimate: mom.mean(),
        se: mom.se(),
        expected,
        consistent: (mom.mean() - expected).abs() <= 3.0 * mom.se(),
    };
    let probes = vec![
        probe("constant", &acc[0], 0.0),
        probe("sign_corner", &acc[1], 0.0),
        probe("sign_lagged", &acc[2], 0.0),
    ];
    let coeff = if k1 >= 0 && k2 >= 0 {
        spec.kernel.coeff(k1 as usize, k2 as usize)
    } else {
        0.0
    };
    let v = spec.innovations.site_variance(n, n, inside.0, inside.1);
    let anti_probe = probe("inside_window", &acc[3], coeff * v);
    let pass = probes.iter().all(|p| p.consistent);
    Ok(MartingaleReport {
        component: which,
        from: (i, j),
        to: (n, n),
        trials,
        probes,
        anti_probe,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fieldgen::{
        apply_ma_kernel, InnovationArray, InnovationLaw, InnovationSpec, MaKernel, VarianceProfile,
    };
    use proptest::prelude::*;

    fn gaussian(kernel: MaKernel) -> FieldSpec {
        FieldSpec::new(InnovationSpec::standard(InnovationLaw::Gaussian), kernel)
    }

    #[test]
    fn memoryless_field_is_its_own_increment() {
        let field = FieldSpec::iid(InnovationLaw::Gaussian).sample(6, 5, 1).unwrap();
        let d = decompose(&field).unwrap();
        for i in 1..=6 {
            for j in 1..=5 {
                assert_eq!(d.hat(i, j, 0, 0), field.at(i, j));
            }
        }
        assert_eq!(d.component(0, 0).unwrap().at(6, 5), prefix_sums(field.values.view()).at(6, 5));
    }

    #[test]
    fn constant_ones_split_evenly() {
        let innov = InnovationArray::constant(4, 4, 1, 1.0);
        let field = apply_ma_kernel(innov, &MaKernel::ones(1)).unwrap();
        let d = decompose(&field).unwrap();
        for k1 in -1..=1i64 {
            for k2 in -1..=1i64 {
                let expected = if k1 >= 0 && k2 >= 0 { 1.0 } else { 0.0 };
                assert_eq!(d.hat(2, 3, k1, k2), expected);
            }
        }
        assert_eq!(d.component(1, 1).unwrap().at(4, 4), 16.0);
        assert_eq!(d.component(-1, 0).unwrap().at(4, 4), 0.0);
        assert!(d.component(2, 0).is_err());
    }

    #[test]
    fn missing_innovations_rejected() {
        let field = FieldSample::from_values(Array2::ones((3, 3)));
        assert!(matches!(decompose(&field), Err(Error::MissingInnovations)));
    }

    #[test]
    fn recovery_is_exact_and_sensitive() {
        let spec = gaussian(MaKernel::new(vec![vec![1.0, -0.4, 0.2], vec![0.3, 0.5, 0.1], vec![0.7, 0.0, -0.9]]).unwrap());
        let field = spec.sample(32, 24, 9).unwrap();
        let mut d = decompose(&field).unwrap();
        let ok = verify_recovery(&d, &field, 1e-12).unwrap();
        assert!(ok.pass, "{ok:?}");
        *d.hat_mut(5, 7, 1, 2) += 1.0;
        let bad = verify_recovery(&d, &field, 1e-10).unwrap();
        assert!(!bad.pass);
        assert!((bad.max_error - 1.0).abs() < 1e-9);
    }

    #[test]
    fn large_field_recovers() {
        let spec = gaussian(MaKernel::ones(2));
        let field = spec.sample(256, 256, 4).unwrap();
        let d = decompose(&field).unwrap();
        assert!(verify_recovery(&d, &field, 1e-10).unwrap().pass);
    }

    #[test]
    fn components_follow_difference_identity() {
        let spec = gaussian(MaKernel::ones(1));
        let field = spec.sample(8, 8, 2).unwrap();
        let d = decompose(&field).unwrap();
        for k1 in -1..=1 {
            for k2 in -1..=1 {
                let y = d.component(k1, k2).unwrap();
                for i in 1..=8 {
                    for j in 1..=8 {
                        assert!((y.value(i, j) - d.hat(i, j, k1, k2)).abs() < 1e-13);
                    }
                }
            }
        }
    }

    #[test]
    fn power_sum_examples() {
        let z = Array2::from_elem((1, 1), Complex64::new(0.6, -0.8));
        let (l, r) = power_sum_bound_check(&z, 3.0).unwrap();
        assert!((l - 1.0).abs() < 1e-12 && (r - 1.0).abs() < 1e-12);
        let ones = Array2::from_elem((3, 3), Complex64::new(1.0, 0.0));
        let (l, r) = power_sum_bound_check(&ones, 2.0).unwrap();
        assert!((l - 81.0).abs() < 1e-9 && (r - 81.0).abs() < 1e-9);
        assert!(power_sum_bound_check(&ones, 1.0).is_err());
        assert!(power_sum_bound_check(&Array2::zeros((2, 2)), 2.0).is_err());
    }

    #[test]
    fn power_sum_strict_off_constants() {
        let mut z = Array2::from_elem((3, 3), Complex64::new(1.0, 0.0));
        z[[0, 0]] = Complex64::new(2.0, 0.0);
        let (l, r) = power_sum_bound_check(&z, 2.0).unwrap();
        assert!(l < r);
    }

    fn complex_array() -> impl Strategy<Value = (usize, Vec<(f64, f64)>)> {
        (0usize..=3).prop_flat_map(|m| {
            let w = 2 * m + 1;
            (Just(m), prop::collection::vec((-10.0..10.0f64, -10.0..10.0f64), w * w))
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]
        #[test]
        fn power_sum_bound_holds((m, entries) in complex_array(), p in 1.0001f64..8.0) {
            let w = 2 * m + 1;
            let z = Array2::from_shape_vec((w, w), entries.iter().map(|&(a, b)| Complex64::new(a, b)).collect()).unwrap();
            let (l, r) = power_sum_bound_check(&z, p).unwrap();
            prop_assert!(l <= r * (1.0 + 1e-12) + 1e-300);
        }
    }

    #[test]
    fn constants_at_p2_m1() {
        let c = maximal_constants(2.0, 1).unwrap();
        assert!((c.doob - 16.0).abs() < 1e-12);
        assert!((c.power_sum - 9.0).abs() < 1e-12);
        assert!((c.prefactor - 144.0).abs() < 1e-9);
        let c4 = maximal_constants(4.0, 1).unwrap();
        assert!((c4.doob - (4.0f64 / 3.0).powi(8)).abs() < 1e-12);
        assert!((c4.power_sum - 729.0).abs() < 1e-9);
    }

    #[test]
    fn walsh_only_case() {
        let r = maximal_inequality_check(&FieldSpec::iid(InnovationLaw::Gaussian), 2.0, 16, 400, 3).unwrap();
        assert_eq!(r.constants.prefactor, 16.0);
        // For iid innovations the largest second moment is n² at the corner.
        assert!(r.pass && r.lhs < r.rhs, "{r:?}");
    }

    #[test]
    fn maximal_inequality_m1_p4() {
        let r = maximal_inequality_check(&gaussian(MaKernel::ones(1)), 4.0, 64, 2000, 8).unwrap();
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn maximal_inequality_grid_of_cases() {
        for law in InnovationLaw::ALL {
            for m in 0..=2 {
                for p in [2.0, 4.0] {
                    let spec = FieldSpec::new(InnovationSpec::standard(law), MaKernel::ones(m));
                    let r = maximal_inequality_check(&spec, p, 12, 200, 17).unwrap();
                    assert!(r.pass, "{law:?} m={m} p={p}: {r:?}");
                }
            }
        }
    }

    #[test]
    fn martingale_probes_vanish() {
        let spec = FieldSpec::new(
            InnovationSpec::new(
                InnovationLaw::Gaussian,
                VarianceProfile::Affine { base: 1.0, slope1: 0.5, slope2: 0.0 },
            ),
            MaKernel::new(vec![vec![1.0, 0.5], vec![-0.7, 0.3]]).unwrap(),
        );
        for which in [(0, 0), (1, 0), (1, 1), (-1, 1)] {
            let r = martingale_property_check(&spec, which, 8, 4000, 21).unwrap();
            assert!(r.pass, "{r:?}");
        }
    }

    #[test]
    fn anti_probe_detects_dependence() {
        let spec = gaussian(MaKernel::new(vec![vec![1.0, 0.5], vec![-0.7, 0.3]]).unwrap());
        let r = martingale_property_check(&spec, (1, 0), 8, 4000, 5).unwrap();
        let a = &r.anti_probe;
        assert!((a.expected + 0.7).abs() < 1e-12);
        assert!(a.consistent, "{a:?}");
        assert!(a.estimate.abs() > 3.0 * a.se);
    }
}

//! Monte Carlo and closed-form oracles for the generator, the partial sums
//! and the martingale decomposition.

use fieldclt_core::fieldgen::long_run_variance;
use fieldclt_core::martdecomp::decompose;
use fieldclt_core::sumproc::partial_sums;
use fieldclt_core::{FieldSpec, InnovationLaw, InnovationSpec, MaKernel};

fn separable_ma() -> FieldSpec {
    FieldSpec::new(
        InnovationSpec::standard(InnovationLaw::Gaussian),
        MaKernel::separable(&[1.0, 0.5]).unwrap(),
    )
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

#[test]
fn long_run_variance_of_separable_kernel() {
    // (1 + 0.5)² per axis, squared again for the two axes.
    let s2 = long_run_variance(&separable_ma()).unwrap();
    assert!((s2 - 5.0625).abs() < 1e-12, "{s2}");
    let iid = long_run_variance(&FieldSpec::iid(InnovationLaw::Rademacher)).unwrap();
    assert!((iid - 1.0).abs() < 1e-12);
}

#[test]
fn normalized_corner_sum_has_unit_variance() {
    let spec = separable_ma();
    let s2 = long_run_variance(&spec).unwrap();
    let n = 64;
    let reps = 2000;
    let xs: Vec<f64> = (0..reps)
        .map(|r| {
            let f = spec.sample(n, n, 1000 + r).unwrap();
            partial_sums(&f).at(n, n) / (s2.sqrt() * n as f64)
        })
        .collect();
    let (mean, var) = mean_var(&xs);
    let se_mean = (var / reps as f64).sqrt();
    let se_var = var * (2.0 / (reps as f64 - 1.0)).sqrt();
    assert!(mean.abs() < 4.0 * se_mean, "mean {mean}");
    // Edge innovations are only partly covered, so the variance sits slightly below 1.
    assert!((var - 1.0).abs() < 4.0 * se_var + 0.05, "var {var}");
}

#[test]
fn site_correlations_vanish_beyond_memory() {
    let spec = separable_ma();
    let reps = 4000;
    let mut pairs = [Vec::new(), Vec::new(), Vec::new()];
    for r in 0..reps {
        let f = spec.sample(4, 4, r).unwrap();
        let x = f.at(1, 1);
        pairs[0].push((x, f.at(2, 1)));
        pairs[1].push((x, f.at(3, 1)));
        pairs[2].push((x, f.at(3, 4)));
    }
    let corr = |v: &[(f64, f64)]| {
        let a: Vec<f64> = v.iter().map(|p| p.0).collect();
        let b: Vec<f64> = v.iter().map(|p| p.1).collect();
        let (ma, va) = mean_var(&a);
        let (mb, vb) = mean_var(&b);
        let cov = v.iter().map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (v.len() as f64 - 1.0);
        cov / (va * vb).sqrt()
    };
    let se = 1.0 / (reps as f64).sqrt();
    // Lag (1,0): Σ b₂² · b₀b₁ / (Σ b²)² = 1.25 · 0.5 / 1.5625.
    assert!((corr(&pairs[0]) - 0.4).abs() < 4.0 * se, "{}", corr(&pairs[0]));
    assert!(corr(&pairs[1]).abs() < 4.0 * se);
    assert!(corr(&pairs[2]).abs() < 4.0 * se);
}

#[test]
fn decomposition_recovers_field_and_sums() {
    let kernel = MaKernel::new(vec![vec![1.0, -0.3, 0.2], vec![0.4, 0.5, -0.1], vec![0.0, 0.25, 0.7]]).unwrap();
    let spec = FieldSpec::new(InnovationSpec::standard(InnovationLaw::UniformCentered), kernel);
    let f = spec.sample(12, 9, 7).unwrap();
    let d = decompose(&f).unwrap();
    let err = (&d.recovered() - &f.values).mapv(f64::abs).fold(0.0f64, |a, &b| a.max(b));
    assert!(err < 1e-12, "{err}");

    // The component partial sums add up to the partial sums of the field.
    let s = partial_sums(&f);
    let m = d.m() as i64;
    let mut total = 0.0;
    for k1 in -m..=m {
        for k2 in -m..=m {
            total += d.component(k1, k2).unwrap().at(12, 9);
        }
    }
    assert!((total - s.at(12, 9)).abs() < 1e-10);
}

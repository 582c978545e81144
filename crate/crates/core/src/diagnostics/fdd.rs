//! Finite-dimensional convergence of `X_n` to the Brownian sheet.

use ndarray::Array2;
use serde_json::json;

use super::{replicate, trend_estimate, x_at, Estimate, MCConfig, MCReport, Matrix};
use crate::fieldgen::FieldSource;
use crate::sheet::FddSpec;
use crate::stats::{ks_normal, Moments};
use crate::{Error, Result};

struct Level {
    estimates: Vec<Estimate>,
    empirical: Array2<f64>,
    se: Array2<f64>,
    /// `max |Ĉ − C|` and the standard error of the entry attaining it.
    error: (f64, f64),
}

fn run_level<S: FieldSource + ?Sized>(
    source: &S,
    cfg: &MCConfig,
    spec: &FddSpec,
    probes: &[Vec<f64>],
) -> Result<Level> {
    let k = spec.len();
    let n = cfg.n;
    let scale = 1.0 / (cfg.sigma()? * n as f64);
    let points = spec.points().to_vec();
    let draws = replicate(source, cfg, (n, n), |_, sums| {
        Ok(points.iter().map(|&t| x_at(sums, scale, n, t)).collect::<Vec<f64>>())
    })?;

    let target = spec.covariance();
    let mut empirical = Array2::zeros((k, k));
    let mut se = Array2::zeros((k, k));
    let mut estimates = Vec::new();
    let mut error = (0.0f64, 0.0f64);
    for i in 0..k {
        for j in i..k {
            // The mean is known to be zero, so the raw product is unbiased.
            let m: Moments = draws.iter().map(|d| d[i] * d[j]).collect();
            empirical[[i, j]] = m.mean();
            empirical[[j, i]] = m.mean();
            se[[i, j]] = m.se();
            se[[j, i]] = m.se();
            let c = target[[i, j]];
            let dev = (m.mean() - c).abs();
            if dev > error.0 {
                error = (dev, m.se());
            }
            estimates.push(Estimate::within(
                format!("cov[{i},{j}]"),
                m.mean(),
                m.se(),
                c,
                cfg.z * m.se(),
            ));
        }
    }

    // Bonferroni across the Cramér-Wold probes.
    let alpha = cfg.ks_alpha / probes.len().max(1) as f64;
    for (p, u) in probes.iter().enumerate() {
        let var: f64 = (0..k)
            .flat_map(|i| (0..k).map(move |j| (i, j)))
            .map(|(i, j)| u[i] * u[j] * target[[i, j]])
            .sum();
        let proj: Vec<f64> = draws
            .iter()
            .map(|d| d.iter().zip(u).map(|(x, w)| x * w).sum())
            .collect();
        let name = format!("ks[{p}]");
        if var <= 0.0 {
            let spread = proj.iter().fold(0.0f64, |a, x| a.max(x.abs()));
            estimates.push(Estimate::at_most(name, spread, 0.0, 0.0, 0.0));
            continue;
        }
        let ks = ks_normal(&proj, var, alpha);
        estimates.push(Estimate::at_most(name.clone(), ks.statistic, 0.0, ks.critical_value, 0.0));
        estimates.push(Estimate::info(format!("{name}.p_value"), ks.p_value, 0.0));
    }
    Ok(Level {
        estimates,
        empirical,
        se,
        error,
    })
}

fn check_inputs(spec: &FddSpec, probes: &[Vec<f64>]) -> Result<()> {
    for (p, u) in probes.iter().enumerate() {
        if u.len() != spec.len() {
            return Err(Error::DimensionMismatch(format!(
                "probe {p} has {} weights for {} points",
                u.len(),
                spec.len()
            )));
        }
        if u.iter().any(|w| !w.is_finite()) {
            return Err(Error::invalid(format!("probe {p} has non-finite weights")));
        }
    }
    Ok(())
}

fn inputs(spec: &FddSpec, probes: &[Vec<f64>]) -> serde_json::Value {
    json!({ "points": spec.points(), "probes": probes })
}

/// Covariance of `X_n` at the points against the sheet, and a KS test of
/// each projection `Σ uⱼ X_n(tⱼ)` against `N(0, uᵀΣu)`.
pub fn fdd_convergence_test(cfg: &MCConfig, spec: &FddSpec, probes: &[Vec<f64>]) -> Result<MCReport> {
    fdd_convergence_test_on(&cfg.spec, cfg, spec, probes)
}

pub fn fdd_convergence_test_on<S: FieldSource + ?Sized>(
    source: &S,
    cfg: &MCConfig,
    spec: &FddSpec,
    probes: &[Vec<f64>],
) -> Result<MCReport> {
    cfg.validate()?;
    check_inputs(spec, probes)?;
    let level = run_level(source, cfg, spec, probes)?;
    let mut report = MCReport::new("fdd", cfg, inputs(spec, probes));
    report.estimates = level.estimates;
    report.push(Estimate::info("cov_error", level.error.0, level.error.1));
    report.matrices.push(Matrix::from_array("empirical_cov", &level.empirical));
    report.matrices.push(Matrix::from_array("empirical_cov_se", &level.se));
    report.matrices.push(Matrix::from_array("sheet_cov", &spec.covariance()));
    Ok(report)
}

/// [`fdd_convergence_test`] at `n`, repeated at `2n` to check that the
/// covariance error does not grow. Estimates at `2n` are informational.
pub fn fdd_trend_test(cfg: &MCConfig, spec: &FddSpec, probes: &[Vec<f64>]) -> Result<MCReport> {
    fdd_trend_test_on(&cfg.spec, cfg, spec, probes)
}

pub fn fdd_trend_test_on<S: FieldSource + ?Sized>(
    source: &S,
    cfg: &MCConfig,
    spec: &FddSpec,
    probes: &[Vec<f64>],
) -> Result<MCReport> {
    let mut report = fdd_convergence_test_on(source, cfg, spec, probes)?;
    report.name = "fdd_trend".into();
    let coarse = report.estimate("cov_error").map(|e| (e.value, e.se)).expect("cov_error present");
    let fine_cfg = cfg.at_size(2 * cfg.n);
    let fine = run_level(source, &fine_cfg, spec, probes)?;
    let prefix = format!("n={}/", fine_cfg.n);
    for e in fine.estimates {
        report.push(e.prefixed(&prefix).demoted());
    }
    report.push(Estimate::info(format!("{prefix}cov_error"), fine.error.0, fine.error.1));
    report.push(trend_estimate("cov_error.trend", coarse, fine.error, cfg.z));
    report.matrices.push(Matrix::from_array(format!("{prefix}empirical_cov"), &fine.empirical));
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fieldgen::{DeterministicField, FieldSpec, InnovationLaw, MaKernel};
    use crate::Verdict;

    fn points() -> FddSpec {
        FddSpec::new(vec![(0.5, 0.5), (1.0, 0.5), (0.5, 1.0), (1.0, 1.0)]).unwrap()
    }

    fn probes() -> Vec<Vec<f64>> {
        vec![vec![0.0, 0.0, 0.0, 1.0], vec![1.0, -1.0, -1.0, 1.0], vec![1.0, 1.0, 1.0, 1.0]]
    }

    #[test]
    fn iid_corner_variance() {
        let cfg = MCConfig::new(FieldSpec::iid(InnovationLaw::Gaussian), 64, 5000, 3);
        let spec = FddSpec::new(vec![(1.0, 1.0)]).unwrap();
        let r = fdd_convergence_test(&cfg, &spec, &[vec![1.0]]).unwrap();
        assert!(r.passed(), "{:?}", r.failures().collect::<Vec<_>>());
        let v = r.estimate("cov[0,0]").unwrap();
        assert!((v.value - 1.0).abs() <= 3.0 * v.se);
    }

    #[test]
    fn axis_point_has_zero_row() {
        let cfg = MCConfig::new(FieldSpec::iid(InnovationLaw::Rademacher), 16, 200, 4);
        let spec = FddSpec::new(vec![(0.0, 0.7), (1.0, 1.0)]).unwrap();
        let r = fdd_convergence_test(&cfg, &spec, &[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let row = r.estimate("cov[0,1]").unwrap();
        assert_eq!(row.value, 0.0);
        assert_eq!(r.estimate("cov[0,0]").unwrap().value, 0.0);
        assert_eq!(r.estimate("ks[0]").unwrap().verdict, Verdict::Pass);
    }

    #[test]
    fn ma_kernel_normalized_variance() {
        let spec = FieldSpec::new(
            crate::fieldgen::InnovationSpec::standard(InnovationLaw::Gaussian),
            MaKernel::separable(&[1.0, 0.5]).unwrap(),
        );
        let cfg = MCConfig::new(spec, 64, 3000, 5);
        assert!((cfg.sigma().unwrap().powi(2) - 5.0625).abs() < 1e-9);
        let r = fdd_convergence_test(&cfg, &points(), &probes()).unwrap();
        assert!(r.passed(), "{:?}", r.failures().collect::<Vec<_>>());
    }

    #[test]
    fn wrong_sigma_is_detected() {
        let mut cfg = MCConfig::new(FieldSpec::iid(InnovationLaw::Gaussian), 32, 2000, 6);
        cfg.sigma = Some(0.5);
        let r = fdd_convergence_test(&cfg, &points(), &probes()).unwrap();
        assert!(!r.passed());
    }

    #[test]
    fn probe_width_checked() {
        let cfg = MCConfig::new(FieldSpec::iid(InnovationLaw::Gaussian), 16, 100, 1);
        assert!(fdd_convergence_test(&cfg, &points(), &[vec![1.0]]).is_err());
    }

    #[test]
    fn deterministic_source_has_zero_spread() {
        let cfg = MCConfig::new(FieldSpec::iid(InnovationLaw::Gaussian), 8, 100, 1);
        let zero = DeterministicField::new(MaKernel::identity(), 0.0);
        let r = fdd_convergence_test_on(&zero, &cfg, &points(), &probes()).unwrap();
        assert!(r.estimates.iter().filter(|e| e.name.starts_with("cov[")).all(|e| e.value == 0.0));
    }

    #[test]
    fn trend_report_structure() {
        let cfg = MCConfig::new(FieldSpec::iid(InnovationLaw::Gaussian), 16, 400, 8);
        let r = fdd_trend_test(&cfg, &points(), &probes()).unwrap();
        assert!(r.estimate("cov_error.trend").is_some());
        assert!(r.estimate("n=32/cov[0,0]").is_some());
        assert_eq!(r.estimate("n=32/cov[0,0]").unwrap().verdict, Verdict::Info);
        let again = fdd_trend_test(&cfg, &points(), &probes()).unwrap();
        assert_eq!(r.to_json(), again.to_json());
    }
}

//! Uniform-integrability tails and the tightness probe, both over the
//! windowed running maxima `max_{i,j≤n} |S_{k₁+i,k₂+j} − S_{k₁,k₂}|`.

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{Estimate, MCConfig, MCReport, Series};
use crate::fieldgen::FieldSource;
use crate::mc::fold_replications;
use crate::stats::Moments;
use crate::sumproc::{partial_sums, running_max};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UiFamily {
    /// `ξ = x²_{i,j}` over the sites of an `n × n` field.
    FieldSquares,
    /// `ξ = max_{i,j≤n} |S_{k+(i,j)} − S_k|² / n²` over the window offsets.
    RunningMaxSquares,
}

impl UiFamily {
    fn label(self) -> &'static str {
        match self {
            UiFamily::FieldSquares => "field_squares",
            UiFamily::RunningMaxSquares => "running_max_squares",
        }
    }
}

/// Window offsets `(0,0), (n/2,0), (0,n/2), (n/2,n/2)`.
pub fn default_offsets(n: usize) -> Vec<(usize, usize)> {
    let h = n / 2;
    vec![(0, 0), (h, 0), (0, h), (h, h)]
}

fn field_dims(n: usize, offsets: &[(usize, usize)]) -> (usize, usize) {
    let k1 = offsets.iter().map(|o| o.0).max().unwrap_or(0);
    let k2 = offsets.iter().map(|o| o.1).max().unwrap_or(0);
    (n + k1, n + k2)
}

fn check_offsets(offsets: &[(usize, usize)]) -> Result<()> {
    if offsets.is_empty() {
        Err(Error::invalid("at least one window offset is required"))
    } else {
        Ok(())
    }
}

#[allow(clippy::ptr_arg)] // passed where `fn(&mut Vec<_>, Vec<_>)` is expected
fn merge_all(a: &mut Vec<Moments>, b: Vec<Moments>) {
    for (x, y) in a.iter_mut().zip(b.iter()) {
        x.merge(y);
    }
}

/// Per-member tail moments `E[ξ 1{ξ ≥ y}]`, laid out member-major.
fn tail_moments<S: FieldSource + ?Sized>(
    source: &S,
    cfg: &MCConfig,
    family: UiFamily,
    ys: &[f64],
    offsets: &[(usize, usize)],
) -> Result<(usize, Vec<Moments>)> {
    let n = cfg.n;
    let members = match family {
        UiFamily::FieldSquares => n * n,
        UiFamily::RunningMaxSquares => offsets.len(),
    };
    let dims = match family {
        UiFamily::FieldSquares => (n, n),
        UiFamily::RunningMaxSquares => field_dims(n, offsets),
    };
    let width = ys.len();
    let acc = fold_replications(
        cfg.replications,
        cfg.base_seed,
        || vec![Moments::new(); members * width],
        |acc, _, seed| {
            let field = source.generate(dims.0, dims.1, seed)?;
            let mut record = |member: usize, xi: f64| {
                for (c, &y) in ys.iter().enumerate() {
                    acc[member * width + c].push(if xi >= y { xi } else { 0.0 });
                }
            };
            match family {
                UiFamily::FieldSquares => {
                    for (member, x) in field.values.iter().enumerate() {
                        record(member, x * x);
                    }
                }
                UiFamily::RunningMaxSquares => {
                    let sums = partial_sums(&field);
                    let norm = (n * n) as f64;
                    for (member, &(k1, k2)) in offsets.iter().enumerate() {
                        let r = running_max(&sums, k1, k2, n)?;
                        record(member, r * r / norm);
                    }
                }
            }
            Ok(())
        },
        merge_all,
    )?;
    Ok((members, acc))
}

/// `sup` over the family of the estimated `E[ξ 1{ξ ≥ y}]`, one per `y`.
fn sup_per_threshold(members: usize, ys: &[f64], acc: &[Moments]) -> Vec<(f64, f64)> {
    (0..ys.len())
        .map(|c| {
            let best = (0..members)
                .map(|m| &acc[m * ys.len() + c])
                .max_by(|a, b| a.mean().total_cmp(&b.mean()))
                .expect("non-empty family");
            (best.mean(), best.se())
        })
        .collect()
}

fn check_thresholds(ys: &[f64]) -> Result<()> {
    if ys.is_empty() {
        return Err(Error::invalid("threshold grid is empty"));
    }
    if ys.iter().any(|y| !(*y >= 0.0) || !y.is_finite()) {
        return Err(Error::invalid("thresholds must be finite and non-negative"));
    }
    Ok(())
}

/// `sup_family E[ξ 1{ξ ≥ y}]` for a single threshold.
pub fn ui_tail(cfg: &MCConfig, family: UiFamily, y: f64) -> Result<Estimate> {
    let r = ui_tail_curve(cfg, family, &[y])?;
    Ok(r.estimates.into_iter().next().expect("one threshold"))
}

/// Tail curve over a threshold grid, with the family sup taken per threshold.
pub fn ui_tail_curve(cfg: &MCConfig, family: UiFamily, ys: &[f64]) -> Result<MCReport> {
    ui_tail_curve_on(&cfg.spec, cfg, family, ys, &default_offsets(cfg.n))
}

pub fn ui_tail_curve_on<S: FieldSource + ?Sized>(
    source: &S,
    cfg: &MCConfig,
    family: UiFamily,
    ys: &[f64],
    offsets: &[(usize, usize)],
) -> Result<MCReport> {
    cfg.validate()?;
    check_thresholds(ys)?;
    check_offsets(offsets)?;
    let (members, acc) = tail_moments(source, cfg, family, ys, offsets)?;
    let sups = sup_per_threshold(members, ys, &acc);
    let label = family.label();
    let mut report = MCReport::new(
        format!("ui_tail.{label}"),
        cfg,
        json!({ "family": family, "thresholds": ys, "offsets": offsets }),
    );
    for (&y, &(v, se)) in ys.iter().zip(&sups) {
        report.push(Estimate::info(format!("{label}[y={y}]"), v, se));
    }
    report.series.push(Series {
        name: format!("ui_tail.{label}"),
        x_label: "y".into(),
        x: ys.to_vec(),
        y: sups.iter().map(|s| s.0).collect(),
        se: sups.iter().map(|s| s.1).collect(),
    });
    Ok(report)
}

fn check_lambdas(lambdas: &[f64]) -> Result<()> {
    if lambdas.is_empty() {
        return Err(Error::invalid("lambda grid is empty"));
    }
    if lambdas.iter().any(|l| !(*l > 0.0) || !l.is_finite()) {
        return Err(Error::invalid("lambdas must be positive and finite"));
    }
    Ok(())
}

/// `P(max_{i,j≤n} |S_{k+(i,j)} − S_k| ≥ λn)` per (offset, λ), offset-major.
fn exceedances<S: FieldSource + ?Sized>(
    source: &S,
    cfg: &MCConfig,
    lambdas: &[f64],
    offsets: &[(usize, usize)],
) -> Result<Vec<Moments>> {
    let n = cfg.n;
    let dims = field_dims(n, offsets);
    let width = lambdas.len();
    fold_replications(
        cfg.replications,
        cfg.base_seed,
        || vec![Moments::new(); offsets.len() * width],
        |acc, _, seed| {
            let field = source.generate(dims.0, dims.1, seed)?;
            let sums = partial_sums(&field);
            for (o, &(k1, k2)) in offsets.iter().enumerate() {
                let r = running_max(&sums, k1, k2, n)?;
                for (c, &l) in lambdas.iter().enumerate() {
                    acc[o * width + c].push(if r >= l * n as f64 { 1.0 } else { 0.0 });
                }
            }
            Ok(())
        },
        merge_all,
    )
}

/// `ε = max_λ λ² (P̂(λ) + z·SE)` over all offsets: the smallest `ε` the
/// run itself would certify.
pub fn calibrate_tightness(cfg: &MCConfig, lambdas: &[f64]) -> Result<f64> {
    calibrate_tightness_on(&cfg.spec, cfg, lambdas, &default_offsets(cfg.n))
}

pub fn calibrate_tightness_on<S: FieldSource + ?Sized>(
    source: &S,
    cfg: &MCConfig,
    lambdas: &[f64],
    offsets: &[(usize, usize)],
) -> Result<f64> {
    cfg.validate()?;
    check_lambdas(lambdas)?;
    check_offsets(offsets)?;
    let acc = exceedances(source, cfg, lambdas, offsets)?;
    let width = lambdas.len();
    Ok(acc
        .iter()
        .enumerate()
        .map(|(idx, m)| lambdas[idx % width].powi(2) * (m.mean() + cfg.z * m.se()))
        .fold(0.0, f64::max))
}

/// Exceedance probabilities against `ε/λ²` for every `λ ≥ λ₀`.
pub fn tightness_probe(cfg: &MCConfig, lambdas: &[f64], eps: f64, lambda0: f64) -> Result<MCReport> {
    tightness_probe_on(&cfg.spec, cfg, lambdas, eps, lambda0, &default_offsets(cfg.n))
}

pub fn tightness_probe_on<S: FieldSource + ?Sized>(
    source: &S,
    cfg: &MCConfig,
    lambdas: &[f64],
    eps: f64,
    lambda0: f64,
    offsets: &[(usize, usize)],
) -> Result<MCReport> {
    cfg.validate()?;
    check_lambdas(lambdas)?;
    check_offsets(offsets)?;
    if !(eps >= 0.0) {
        return Err(Error::invalid("epsilon must be non-negative"));
    }
    let mut sorted = lambdas.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let acc = exceedances(source, cfg, &sorted, offsets)?;
    let width = sorted.len();
    let mut report = MCReport::new(
        "tightness",
        cfg,
        json!({ "lambdas": sorted, "epsilon": eps, "lambda0": lambda0, "offsets": offsets }),
    );
    for (o, &(k1, k2)) in offsets.iter().enumerate() {
        let row = &acc[o * width..(o + 1) * width];
        for (c, &l) in sorted.iter().enumerate() {
            let m = &row[c];
            let name = format!("exceed[k=({k1},{k2}),lambda={l}]");
            let e = Estimate::at_most(name, m.mean(), m.se(), eps / (l * l), cfg.z * m.se());
            report.push(if l >= lambda0 { e } else { e.demoted() });
        }
        // The exceedance events are nested in λ, so a rise beyond noise is a bug.
        let worst_rise = row
            .windows(2)
            .map(|w| {
                let tol = cfg.z * (w[0].se().powi(2) + w[1].se().powi(2)).sqrt();
                w[1].mean() - w[0].mean() - tol
            })
            .fold(f64::NEG_INFINITY, f64::max);
        if width > 1 {
            report.push(Estimate::at_most(
                format!("isotonic[k=({k1},{k2})]"),
                worst_rise.max(0.0),
                0.0,
                0.0,
                0.0,
            ));
        }
        report.series.push(Series {
            name: format!("tightness[k=({k1},{k2})]"),
            x_label: "lambda".into(),
            x: sorted.clone(),
            y: row.iter().map(Moments::mean).collect(),
            se: row.iter().map(Moments::se).collect(),
        });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fieldgen::{DeterministicField, FieldSpec, InnovationLaw, InnovationSpec, MaKernel};
    use crate::Verdict;

    fn gaussian_m1() -> FieldSpec {
        FieldSpec::new(InnovationSpec::standard(InnovationLaw::Gaussian), MaKernel::ones(1))
    }

    #[test]
    fn bounded_field_squares_vanish_above_support() {
        let cfg = MCConfig::new(FieldSpec::iid(InnovationLaw::Rademacher), 8, 100, 2);
        assert_eq!(ui_tail(&cfg, UiFamily::FieldSquares, 1.01).unwrap().value, 0.0);
        let cfg = MCConfig::new(FieldSpec::iid(InnovationLaw::UniformCentered), 8, 100, 2);
        assert_eq!(ui_tail(&cfg, UiFamily::FieldSquares, 3.0001).unwrap().value, 0.0);
    }

    #[test]
    fn zero_threshold_is_second_moment() {
        let cfg = MCConfig::new(FieldSpec::iid(InnovationLaw::Rademacher), 8, 100, 2);
        let e = ui_tail(&cfg, UiFamily::FieldSquares, 0.0).unwrap();
        assert_eq!(e.value, 1.0);
        let cfg = MCConfig::new(FieldSpec::iid(InnovationLaw::Gaussian), 8, 2000, 3);
        let e = ui_tail(&cfg, UiFamily::RunningMaxSquares, 0.0).unwrap();
        // The window sum at the corner alone has second moment 1.
        assert!(e.value > 1.0);
    }

    #[test]
    fn running_max_tail_decreases() {
        let cfg = MCConfig::new(gaussian_m1(), 16, 500, 4);
        let r = ui_tail_curve(&cfg, UiFamily::RunningMaxSquares, &[0.0, 10.0, 50.0, 200.0]).unwrap();
        let s = r.series("ui_tail.running_max_squares").unwrap();
        assert!(s.y.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn tail_inputs_validated() {
        let cfg = MCConfig::new(gaussian_m1(), 16, 100, 4);
        assert!(ui_tail_curve(&cfg, UiFamily::FieldSquares, &[]).is_err());
        assert!(ui_tail(&cfg, UiFamily::FieldSquares, -1.0).is_err());
        assert!(tightness_probe(&cfg, &[], 1.0, 1.0).is_err());
        assert!(tightness_probe(&cfg, &[0.0], 1.0, 1.0).is_err());
    }

    #[test]
    fn huge_lambda_never_exceeded() {
        let cfg = MCConfig::new(FieldSpec::iid(InnovationLaw::Rademacher), 8, 100, 5);
        // |S| ≤ n² for unit-bounded innovations.
        let r = tightness_probe(&cfg, &[8.5], 0.0, 1.0).unwrap();
        assert!(r.estimates.iter().all(|e| e.value == 0.0 && e.verdict == Verdict::Pass));
    }

    #[test]
    fn deterministic_ones_always_exceed() {
        let cfg = MCConfig::new(FieldSpec::iid(InnovationLaw::Gaussian), 8, 100, 5);
        let ones = DeterministicField::new(MaKernel::identity(), 1.0);
        let r = tightness_probe_on(&ones, &cfg, &[0.5], 0.0, 1.0, &default_offsets(8)).unwrap();
        let e = &r.estimates[0];
        assert_eq!(e.value, 1.0);
        assert_eq!(e.verdict, Verdict::Info);
    }

    #[test]
    fn gaussian_decay_is_chebyshev_consistent() {
        let cfg = MCConfig::new(FieldSpec::iid(InnovationLaw::Gaussian), 32, 400, 6);
        let lambdas = [1.0, 2.0, 4.0];
        let eps = calibrate_tightness(&cfg, &lambdas).unwrap();
        let r = tightness_probe(&cfg, &lambdas, eps, 1.0).unwrap();
        assert!(r.passed(), "{:?}", r.failures().collect::<Vec<_>>());
        let s = r.series("tightness[k=(0,0)]").unwrap();
        assert!(s.y.windows(2).all(|w| w[1] <= w[0]));
    }
}

//! Infinitesimal-moment conditions for Gaussianity of the limit.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{replicate, trend_estimate, x_at, x_increment, Estimate, MCConfig, MCReport, Series};
use crate::fieldgen::FieldSource;
use crate::stats::Moments;
use crate::sumproc::Rect;
use crate::{Error, Result};

fn check_alphas(alphas: &[f64]) -> Result<Vec<f64>> {
    if alphas.is_empty() {
        return Err(Error::invalid("alpha grid is empty"));
    }
    if alphas.iter().any(|a| !(*a >= 0.0) || !a.is_finite()) {
        return Err(Error::invalid("alphas must be finite and non-negative"));
    }
    let mut sorted = alphas.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    Ok(sorted)
}

/// Flags a tail curve that rises with the threshold.
fn monotone_estimate(name: &str, values: &[f64]) -> Estimate {
    let rise = values
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(0.0f64, f64::max);
    Estimate::at_most(name, rise, 0.0, 0.0, 0.0)
}

/// `E[X_n(t) 1{X_n(t) ≥ α}]` over an α grid.
///
/// `absolute` replaces `X_n(t)` by `|X_n(t)|` in both places.
pub fn condition_2a_estimate(
    cfg: &MCConfig,
    t: (f64, f64),
    alphas: &[f64],
    absolute: bool,
) -> Result<MCReport> {
    condition_2a_estimate_on(&cfg.spec, cfg, t, alphas, absolute)
}

pub fn condition_2a_estimate_on<S: FieldSource + ?Sized>(
    source: &S,
    cfg: &MCConfig,
    t: (f64, f64),
    alphas: &[f64],
    absolute: bool,
) -> Result<MCReport> {
    cfg.validate()?;
    let alphas = check_alphas(alphas)?;
    if !((0.0..=1.0).contains(&t.0) && (0.0..=1.0).contains(&t.1)) {
        return Err(Error::invalid("t must lie in the unit square"));
    }
    let n = cfg.n;
    let scale = 1.0 / (cfg.sigma()? * n as f64);
    let xs = replicate(source, cfg, (n, n), |_, sums| Ok(x_at(sums, scale, n, t)))?;
    let mut report = MCReport::new(
        "condition_2a",
        cfg,
        json!({ "t": t, "alphas": alphas, "absolute": absolute }),
    );
    let mut values = Vec::new();
    let mut ses = Vec::new();
    for &a in &alphas {
        let m: Moments = xs
            .iter()
            .map(|&x| {
                let x = if absolute { x.abs() } else { x };
                if x >= a {
                    x
                } else {
                    0.0
                }
            })
            .collect();
        report.push(Estimate::info(format!("tail[alpha={a}]"), m.mean(), m.se()));
        values.push(m.mean());
        ses.push(m.se());
    }
    report.push(monotone_estimate("monotone", &values));
    report.series.push(Series {
        name: "condition_2a".into(),
        x_label: "alpha".into(),
        x: alphas,
        y: values,
        se: ses,
    });
    Ok(report)
}

/// `(1/h) E[X²_n(Δ) 1{X²_n(Δ) ≥ αh}]` for `Δ = (ŝ,t̂] × (t,t+h]`, per `h` and `α`.
pub fn condition_3a_estimate(
    cfg: &MCConfig,
    s_hat: f64,
    t_hat: f64,
    t: f64,
    hs: &[f64],
    alphas: &[f64],
) -> Result<MCReport> {
    condition_3a_estimate_on(&cfg.spec, cfg, s_hat, t_hat, t, hs, alphas)
}

pub fn condition_3a_estimate_on<S: FieldSource + ?Sized>(
    source: &S,
    cfg: &MCConfig,
    s_hat: f64,
    t_hat: f64,
    t: f64,
    hs: &[f64],
    alphas: &[f64],
) -> Result<MCReport> {
    cfg.validate()?;
    let alphas = check_alphas(alphas)?;
    if hs.is_empty() {
        return Err(Error::invalid("h grid is empty"));
    }
    let rects = hs
        .iter()
        .map(|&h| Rect::new(s_hat, t_hat, t, t + h))
        .collect::<Result<Vec<_>>>()?;
    let n = cfg.n;
    let scale = 1.0 / (cfg.sigma()? * n as f64);
    let sq = replicate(source, cfg, (n, n), |_, sums| {
        Ok(rects
            .iter()
            .map(|r| x_increment(sums, scale, n, r).powi(2))
            .collect::<Vec<f64>>())
    })?;
    let mut report = MCReport::new(
        "condition_3a",
        cfg,
        json!({ "s_hat": s_hat, "t_hat": t_hat, "t": t, "hs": hs, "alphas": alphas }),
    );
    for (ri, &h) in hs.iter().enumerate() {
        let mut values = Vec::new();
        let mut ses = Vec::new();
        for &a in &alphas {
            let m: Moments = sq
                .iter()
                .map(|v| if v[ri] >= a * h { v[ri] / h } else { 0.0 })
                .collect();
            report.push(Estimate::info(format!("tail[h={h},alpha={a}]"), m.mean(), m.se()));
            values.push(m.mean());
            ses.push(m.se());
        }
        report.push(monotone_estimate(&format!("monotone[h={h}]"), &values));
        report.series.push(Series {
            name: format!("condition_3a[h={h}]"),
            x_label: "alpha".into(),
            x: alphas.clone(),
            y: values,
            se: ses,
        });
    }
    Ok(report)
}

/// `p ∈ 𝓘(t, ŝ)`, read with the rectangle `(ŝ, t̂] × (t, t+h]`: the point's
/// lower-left box must avoid the rectangle, so `p₁ < ŝ` or `p₂ < t`.
pub fn in_index_set(p: (f64, f64), s_hat: f64, t: f64) -> bool {
    let open = |v: f64| v > 0.0 && v < 1.0;
    open(p.0) && open(p.1) && (p.0 < s_hat || p.1 < t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Condition1aSpec {
    pub s_hat: f64,
    pub t_hat: f64,
    pub t: f64,
    pub h: f64,
    pub points: Vec<(f64, f64)>,
    pub u: Vec<f64>,
}

impl Condition1aSpec {
    pub fn rect(&self) -> Result<Rect> {
        Rect::new(self.s_hat, self.t_hat, self.t, self.t + self.h)
    }

    pub fn validate(&self) -> Result<()> {
        self.rect()?;
        if !(self.t > 0.0 && self.t < 1.0) {
            return Err(Error::invalid("t must lie in (0, 1)"));
        }
        if self.points.len() != self.u.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} points but {} weights",
                self.points.len(),
                self.u.len()
            )));
        }
        for &p in &self.points {
            if !in_index_set(p, self.s_hat, self.t) {
                return Err(Error::invalid(format!(
                    "point ({}, {}) is outside the index set for s_hat = {}, t = {}",
                    p.0, p.1, self.s_hat, self.t
                )));
            }
        }
        Ok(())
    }
}

/// Estimates of both Condition 1°a moments, already divided by `h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Condition1a {
    /// `(1/h) E[e^{iΣuX} X(Δ)]`, real and imaginary parts.
    pub first: (f64, f64),
    pub first_se: (f64, f64),
    /// `(1/h) E[e^{iΣuX} (X²(Δ) − h(t̂−ŝ))]`.
    pub second: (f64, f64),
    pub second_se: (f64, f64),
    /// `(1/h) E|X(Δ)|`, which dominates `|first|`.
    pub modulus_bound: f64,
    pub modulus_bound_se: f64,
}

impl Condition1a {
    pub fn first_abs(&self) -> f64 {
        Complex64::new(self.first.0, self.first.1).norm()
    }

    pub fn second_abs(&self) -> f64 {
        Complex64::new(self.second.0, self.second.1).norm()
    }

    fn first_abs_se(&self) -> f64 {
        self.first_se.0.hypot(self.first_se.1)
    }

    fn second_abs_se(&self) -> f64 {
        self.second_se.0.hypot(self.second_se.1)
    }
}

pub fn condition_1a_estimate(cfg: &MCConfig, spec: &Condition1aSpec) -> Result<Condition1a> {
    condition_1a_estimate_on(&cfg.spec, cfg, spec)
}

pub fn condition_1a_estimate_on<S: FieldSource + ?Sized>(
    source: &S,
    cfg: &MCConfig,
    spec: &Condition1aSpec,
) -> Result<Condition1a> {
    cfg.validate()?;
    spec.validate()?;
    let rect = spec.rect()?;
    let n = cfg.n;
    let scale = 1.0 / (cfg.sigma()? * n as f64);
    let centre = spec.h * (spec.t_hat - spec.s_hat);
    let inv_h = 1.0 / spec.h;
    let rows = replicate(source, cfg, (n, n), |_, sums| {
        let phase: f64 = spec
            .points
            .iter()
            .zip(&spec.u)
            .map(|(&p, &u)| u * x_at(sums, scale, n, p))
            .sum();
        let e = Complex64::from_polar(1.0, phase);
        let d = x_increment(sums, scale, n, &rect);
        let a = e * d * inv_h;
        let b = e * (d * d - centre) * inv_h;
        Ok([a.re, a.im, b.re, b.im, d.abs() * inv_h])
    })?;
    let col = |c: usize| -> Moments { rows.iter().map(|r| r[c]).collect() };
    let (a_re, a_im, b_re, b_im, bound) = (col(0), col(1), col(2), col(3), col(4));
    Ok(Condition1a {
        first: (a_re.mean(), a_im.mean()),
        first_se: (a_re.se(), a_im.se()),
        second: (b_re.mean(), b_im.mean()),
        second_se: (b_re.se(), b_im.se()),
        modulus_bound: bound.mean(),
        modulus_bound_se: bound.se(),
    })
}

fn push_level(report: &mut MCReport, prefix: &str, c: &Condition1a, z: f64, decisive: bool) {
    let parts = [
        ("first.re", c.first.0, c.first_se.0),
        ("first.im", c.first.1, c.first_se.1),
        ("second.re", c.second.0, c.second_se.0),
        ("second.im", c.second.1, c.second_se.1),
    ];
    for (name, v, se) in parts {
        let e = Estimate::within(format!("{prefix}{name}"), v, se, 0.0, z * se);
        report.push(if decisive { e } else { e.demoted() });
    }
    // Triangle inequality, exact on every sample.
    report.push(Estimate::at_most(
        format!("{prefix}first.modulus_bound"),
        c.first_abs(),
        c.first_abs_se(),
        c.modulus_bound,
        1e-12 * c.modulus_bound.max(1.0),
    ));
}

/// Condition 1°a at `n` and `2n`: tolerance at `2n`, plus a trend check on
/// both moduli.
pub fn condition_1a_report(cfg: &MCConfig, spec: &Condition1aSpec) -> Result<MCReport> {
    let coarse = condition_1a_estimate(cfg, spec)?;
    let fine_cfg = cfg.at_size(2 * cfg.n);
    let fine = condition_1a_estimate(&fine_cfg, spec)?;
    let mut report = MCReport::new("condition_1a", cfg, serde_json::to_value(spec).expect("serializable"));
    push_level(&mut report, &format!("n={}/", cfg.n), &coarse, cfg.z, false);
    push_level(&mut report, &format!("n={}/", fine_cfg.n), &fine, cfg.z, true);
    report.push(trend_estimate(
        "first.trend",
        (coarse.first_abs(), coarse.first_abs_se()),
        (fine.first_abs(), fine.first_abs_se()),
        cfg.z,
    ));
    report.push(trend_estimate(
        "second.trend",
        (coarse.second_abs(), coarse.second_abs_se()),
        (fine.second_abs(), fine.second_abs_se()),
        cfg.z,
    ));
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fieldgen::{FieldSpec, InnovationLaw};

    fn iid(n: usize, reps: usize, seed: u64) -> MCConfig {
        MCConfig::new(FieldSpec::iid(InnovationLaw::Gaussian), n, reps, seed)
    }

    fn spec_1a(u: Vec<f64>) -> Condition1aSpec {
        Condition1aSpec {
            s_hat: 0.25,
            t_hat: 0.75,
            t: 0.5,
            h: 0.25,
            points: vec![(0.125, 0.875), (0.875, 0.375)],
            u,
        }
    }

    #[test]
    fn index_set_membership() {
        assert!(in_index_set((0.1, 0.9), 0.25, 0.5));
        assert!(in_index_set((0.9, 0.3), 0.25, 0.5));
        assert!(!in_index_set((0.5, 0.6), 0.25, 0.5));
        assert!(!in_index_set((0.0, 0.1), 0.25, 0.5));
        let mut bad = spec_1a(vec![1.0, 1.0]);
        bad.points[0] = (0.5, 0.75);
        assert!(condition_1a_estimate(&iid(16, 100, 1), &bad).is_err());
        assert!(condition_1a_estimate(&iid(16, 100, 1), &spec_1a(vec![1.0])).is_err());
    }

    #[test]
    fn zero_weights_reduce_to_mean() {
        let c = condition_1a_estimate(&iid(32, 2000, 2), &spec_1a(vec![0.0, 0.0])).unwrap();
        assert_eq!(c.first.1, 0.0);
        assert!(c.first.0.abs() <= 3.0 * c.first_se.0);
        assert!(c.second.0.abs() <= 3.0 * c.second_se.0);
    }

    #[test]
    fn modulus_bound_holds() {
        let c = condition_1a_estimate(&iid(16, 300, 3), &spec_1a(vec![1.5, -2.0])).unwrap();
        assert!(c.first_abs() <= c.modulus_bound + 1e-12);
    }

    #[test]
    fn iid_report_passes() {
        let r = condition_1a_report(&iid(16, 2000, 4), &spec_1a(vec![1.0, -0.5])).unwrap();
        assert!(r.passed(), "{:?}", r.failures().collect::<Vec<_>>());
    }

    #[test]
    fn axis_point_tail_is_zero() {
        let r = condition_2a_estimate(&iid(8, 100, 5), (0.0, 0.6), &[0.0, 1.0], false).unwrap();
        assert!(r.estimates.iter().all(|e| e.value == 0.0));
    }

    #[test]
    fn gaussian_tail_decays() {
        let r = condition_2a_estimate(&iid(16, 4000, 6), (1.0, 1.0), &[0.0, 1.0, 2.0, 4.0], false).unwrap();
        let s = r.series("condition_2a").unwrap();
        // E[Z 1{Z ≥ 0}] = 1/√(2π).
        assert!((s.y[0] - 0.398_942_280_4).abs() < 3.0 * s.se[0]);
        assert!(s.y[3] < 0.01);
        assert!(r.passed());
        let abs = condition_2a_estimate(&iid(16, 4000, 6), (1.0, 1.0), &[0.0], true).unwrap();
        let e = &abs.estimates[0];
        // E|Z| = √(2/π).
        assert!((e.value - 0.797_884_560_8).abs() < 3.0 * e.se);
    }

    #[test]
    fn degenerate_rect_gives_zero() {
        let r = condition_3a_estimate(&iid(8, 100, 7), 0.26, 0.3, 0.1, &[0.5], &[0.0]).unwrap();
        assert_eq!(r.estimates[0].value, 0.0);
    }

    #[test]
    fn full_strip_is_corner_tail() {
        let cfg = iid(8, 300, 8);
        let r3 = condition_3a_estimate(&cfg, 0.0, 1.0, 0.0, &[1.0], &[0.0, 2.0]).unwrap();
        let corner = replicate(&cfg.spec, &cfg, (8, 8), |_, s| Ok(x_at(s, 1.0 / 8.0, 8, (1.0, 1.0)))).unwrap();
        let tail: Moments = corner.iter().map(|x| x * x).map(|v| if v >= 2.0 { v } else { 0.0 }).collect();
        let s = r3.series("condition_3a[h=1]").unwrap();
        assert!((s.y[1] - tail.mean()).abs() < 1e-12);
    }

    #[test]
    fn empty_grids_rejected() {
        assert!(condition_2a_estimate(&iid(8, 100, 1), (0.5, 0.5), &[], false).is_err());
        assert!(condition_3a_estimate(&iid(8, 100, 1), 0.0, 0.5, 0.2, &[], &[1.0]).is_err());
        assert!(condition_3a_estimate(&iid(8, 100, 1), 0.0, 0.5, 0.9, &[0.25], &[1.0]).is_err());
    }
}

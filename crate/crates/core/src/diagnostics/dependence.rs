//! Checks of the dependence hypotheses: zero covariance beyond the declared
//! memory, and the conditional variance of block sums.

use serde_json::json;

use super::{replicate, trend_estimate, Estimate, MCConfig, MCReport};
use crate::fieldgen::FieldSource;
use crate::stats::{bonferroni_z, covariance_se, Moments};
use crate::{Error, Result};

/// Lags `(d,0), (0,d), (d,d), (d,−d)` for `m < d ≤ max_lag`.
fn lags(m: usize, max_lag: usize) -> Vec<(i64, i64)> {
    (m + 1..=max_lag)
        .flat_map(|d| {
            let d = d as i64;
            [(d, 0), (0, d), (d, d), (d, -d)]
        })
        .collect()
}

/// Sample covariance `x_{i,j} x_{i+d₁,j+d₂}` at every lag beyond the declared
/// memory, averaged over sites within a field; standard errors across fields.
pub fn m_dependence_check(cfg: &MCConfig, max_lag: usize) -> Result<MCReport> {
    m_dependence_check_on(&cfg.spec, cfg, max_lag)
}

pub fn m_dependence_check_on<S: FieldSource + ?Sized>(
    source: &S,
    cfg: &MCConfig,
    max_lag: usize,
) -> Result<MCReport> {
    cfg.validate()?;
    let m = cfg.declared_m();
    if max_lag <= m {
        return Err(Error::invalid(format!(
            "max_lag ({max_lag}) must exceed the declared memory ({m})"
        )));
    }
    let lags = lags(m, max_lag);
    let side = cfg.n + max_lag;
    let per_field = replicate(source, cfg, (side, side), |field, _| {
        let x = &field.values;
        Ok(lags
            .iter()
            .map(|&(d1, d2)| {
                let (d1, d2) = (d1 as isize, d2 as isize);
                let mut acc = 0.0;
                let mut count = 0usize;
                for i in 0..side as isize - d1 {
                    let j_lo = (-d2).max(0);
                    let j_hi = (side as isize - d2).min(side as isize);
                    for j in j_lo..j_hi {
                        acc += x[[i as usize, j as usize]] * x[[(i + d1) as usize, (j + d2) as usize]];
                        count += 1;
                    }
                }
                acc / count as f64
            })
            .collect::<Vec<f64>>())
    })?;
    let mult = cfg.z.max(bonferroni_z(cfg.ks_alpha, lags.len()));
    let mut report = MCReport::new(
        "m_dependence",
        cfg,
        json!({ "declared_m": m, "max_lag": max_lag, "field_side": side, "multiplier": mult }),
    );
    for (l, &(d1, d2)) in lags.iter().enumerate() {
        let mom: Moments = per_field.iter().map(|v| v[l]).collect();
        report.push(Estimate::within(
            format!("cov[lag=({d1},{d2})]"),
            mom.mean(),
            mom.se(),
            0.0,
            mult * mom.se(),
        ));
    }
    Ok(report)
}

/// One window size of the conditional-variance check.
struct Window {
    mean: Moments,
    corner: (f64, f64),
    lagged: (f64, f64),
}

fn window<S: FieldSource + ?Sized>(
    source: &S,
    cfg: &MCConfig,
    k: (usize, usize),
    w: usize,
) -> Result<Window> {
    let m = cfg.declared_m();
    let (k1, k2) = k;
    // 𝓕_{k−m}-measurable probes read innovations at or before (k₁−m, k₂−m).
    let (c1, c2) = ((k1 - m) as i64, (k2 - m) as i64);
    let lo1 = (c1 - w as i64).max(0);
    let lo2 = (c2 - w as i64).max(0);
    let norm = (w * w) as f64;
    let rows = replicate(source, cfg, (k1 + w, k2 + w), |field, sums| {
        let innov = field.innovations.as_ref().ok_or(Error::MissingInnovations)?;
        let block = sums.block_sum(k1, k1 + w, k2, k2 + w);
        let q = block * block / norm;
        let corner = innov.site(c1, c2).signum();
        let mut b = 0.0;
        for i in lo1 + 1..=c1 {
            for j in lo2 + 1..=c2 {
                b += innov.site(i, j);
            }
        }
        let lagged = (b * b / norm).clamp(0.0, 4.0);
        Ok([q, corner, lagged])
    })?;
    let q: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let corner: Vec<f64> = rows.iter().map(|r| r[1]).collect();
    let lagged: Vec<f64> = rows.iter().map(|r| r[2]).collect();
    Ok(Window {
        mean: q.iter().copied().collect(),
        corner: covariance_se(&q, &corner),
        lagged: covariance_se(&q, &lagged),
    })
}

fn push_window(report: &mut MCReport, prefix: &str, w: &Window, sigma2: f64, z: f64, mean_decisive: bool) {
    let mean = Estimate::within(
        format!("{prefix}mean"),
        w.mean.mean(),
        w.mean.se(),
        sigma2,
        z * w.mean.se(),
    );
    report.push(if mean_decisive { mean } else { mean.demoted() });
    report.push(Estimate::within(
        format!("{prefix}cov[sign_corner]"),
        w.corner.0,
        w.corner.1,
        0.0,
        z * w.corner.1,
    ));
    report.push(Estimate::within(
        format!("{prefix}cov[lagged_block]"),
        w.lagged.0,
        w.lagged.1,
        0.0,
        z * w.lagged.1,
    ));
}

/// Orthogonality proxy for `E[(block sum)²/n² | 𝓕_{k−m}] → σ²`.
///
/// The block is `(k, k+n]²`; probes are a constant, `sign(ε_{k−m})` and the
/// clamped squared innovation sum over the lagged block `(k−m−n, k−m]²`.
/// Probe covariances must vanish at `n` and `2n`; the mean must match `σ²`
/// at `2n` and must not drift away from it between the two sizes.
pub fn conditional_variance_check(cfg: &MCConfig, k: (usize, usize)) -> Result<MCReport> {
    conditional_variance_check_on(&cfg.spec, cfg, k)
}

pub fn conditional_variance_check_on<S: FieldSource + ?Sized>(
    source: &S,
    cfg: &MCConfig,
    k: (usize, usize),
) -> Result<MCReport> {
    cfg.validate()?;
    let m = cfg.declared_m();
    if k.0 <= m || k.1 <= m {
        return Err(Error::invalid(format!(
            "offset ({}, {}) must exceed the declared memory {m} on both axes",
            k.0, k.1
        )));
    }
    let sigma2 = cfg.sigma()?.powi(2);
    let n = cfg.n;
    let coarse = window(source, cfg, k, n)?;
    let fine_cfg = cfg.at_size(2 * n);
    let fine = window(source, &fine_cfg, k, 2 * n)?;
    let mut report = MCReport::new(
        "conditional_variance",
        cfg,
        json!({ "k": k, "declared_m": m, "sigma2": sigma2 }),
    );
    push_window(&mut report, &format!("n={n}/"), &coarse, sigma2, cfg.z, false);
    push_window(&mut report, &format!("n={}/", 2 * n), &fine, sigma2, cfg.z, true);
    report.push(trend_estimate(
        "mean_error.trend",
        ((coarse.mean.mean() - sigma2).abs(), coarse.mean.se()),
        ((fine.mean.mean() - sigma2).abs(), fine.mean.se()),
        cfg.z,
    ));
    Ok(report)
}

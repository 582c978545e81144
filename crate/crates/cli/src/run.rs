//! Experiment dispatch and artifact writing.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use fieldclt_core::diagnostics::{
    calibrate_tightness, condition_1a_report, condition_2a_estimate, condition_3a_estimate,
    conditional_variance_check, fdd_convergence_test, fdd_trend_test, m_dependence_check,
    reports_to_csv, tightness_probe, ui_tail_curve, Matrix, UiFamily,
};
use fieldclt_core::dspace::CandidateSet;
use fieldclt_core::martdecomp::{decompose, martingale_property_check, maximal_inequality_check, verify_recovery};
use fieldclt_core::rng::replication_seed;
use fieldclt_core::sheet::sample_sheet;
use fieldclt_core::stats::mean_se;
use fieldclt_core::sumproc::partial_sum_process;
use fieldclt_core::{Estimate, GridFunction, MCConfig, MCReport};
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, ExperimentKind, Format, DEFAULTS_VERSION, SCHEMA_VERSION};
use crate::error::{CliError, Result};
use crate::plot::{emit_plot, PlotKind};
use crate::suites::{metric_suite, moduli_suite, near_identity, power_sum_suite};

/// Seed stream tags, so each experiment draws the same numbers whether it
/// runs alone or inside the full suite.
mod tag {
    pub const SIMULATE: u64 = 1;
    pub const DECOMPOSE: u64 = 2;
    pub const INEQUALITIES: u64 = 3;
    pub const METRICS: u64 = 4;
    pub const FDD: u64 = 5;
    pub const TIGHTNESS: u64 = 6;
    pub const UI_TAIL: u64 = 7;
    pub const CONDITION_2A: u64 = 8;
    pub const CONDITION_3A: u64 = 9;
    pub const CONDITION_1A: u64 = 10;
    pub const M_DEPENDENCE: u64 = 11;
    pub const CONDITIONAL_VARIANCE: u64 = 12;
}

fn stream(base: u64, t: u64) -> u64 {
    replication_seed(base, (1 << 56) | t)
}

fn tagged(cfg: &MCConfig, t: u64) -> MCConfig {
    let mut c = cfg.clone();
    c.base_seed = stream(cfg.base_seed, t);
    c
}

/// Levels `1..=n` of a step function: one cell per lattice site.
fn interior(name: &str, g: &GridFunction) -> Matrix {
    let n = g.n();
    let inner = g.values().slice(ndarray::s![1..=n, 1..=n]).to_owned();
    Matrix::from_array(name, &inner)
}

fn simulate(cfg: &MCConfig) -> Result<MCReport> {
    let n = cfg.n;
    let seed = stream(cfg.base_seed, tag::SIMULATE);
    let field = cfg.spec.sample(n, n, seed)?;
    let sigma = cfg.sigma()?;
    let x = partial_sum_process(&field, sigma, n)?;
    let sheet = sample_sheet(n, replication_seed(seed, 1))?;
    let values: Vec<f64> = field.values.iter().copied().collect();
    let (mean, mean_err) = mean_se(&values);
    let axis = (0..=n)
        .map(|a| x.level(a, 0).abs().max(x.level(0, a).abs()))
        .fold(0.0, f64::max);

    let mut r = MCReport::new("simulate", cfg, json!({ "seed": seed, "sigma": sigma }));
    r.push(Estimate::info("field.mean", mean, mean_err));
    r.push(Estimate::info("x_n(1,1)", x.level(n, n), 0.0));
    r.push(Estimate::info("sheet(1,1)", sheet.level(n, n), 0.0));
    r.push(Estimate::at_most("x_n.axis_max", axis, 0.0, 0.0, 0.0));
    r.matrices.push(interior("sample_path", &x));
    r.matrices.push(interior("sheet_path", &sheet));
    Ok(r)
}

fn decomposition(cfg: &MCConfig, tol: f64, trials: usize) -> Result<MCReport> {
    let n = cfg.n;
    let seed = stream(cfg.base_seed, tag::DECOMPOSE);
    let field = cfg.spec.sample(n, n, seed)?;
    let d = decompose(&field)?;
    let rec = verify_recovery(&d, &field, tol)?;
    let m = cfg.spec.m() as i64;
    let mut r = MCReport::new(
        "decompose",
        cfg,
        json!({ "seed": seed, "tol": tol, "trials": trials }),
    );
    r.push(Estimate::at_most("recovery.max_error", rec.max_error, 0.0, 0.0, tol));
    let mut idx = 0;
    for k1 in 0..=m {
        for k2 in 0..=m {
            idx += 1;
            let mr = martingale_property_check(&cfg.spec, (k1, k2), n, trials, replication_seed(seed, idx))?;
            for p in mr.probes.iter().chain([&mr.anti_probe]) {
                r.push(Estimate::within(
                    format!("martingale[k=({k1},{k2})]/{}", p.name),
                    p.estimate,
                    p.se,
                    p.expected,
                    cfg.z * p.se,
                ));
            }
        }
    }
    Ok(r)
}

fn inequalities(cfg: &MCConfig, exp: &ExperimentConfig) -> Result<MCReport> {
    let s = &exp.inequalities;
    let m = cfg.spec.m();
    let seed = stream(cfg.base_seed, tag::INEQUALITIES);
    let mut r = MCReport::new("inequalities", cfg, serde_json::to_value(s).expect("serializable"));
    for (i, &p) in s.power_sum_ps.iter().enumerate() {
        let ps = power_sum_suite(m, p, s.power_sum_trials, replication_seed(seed, i as u64))?;
        r.push(Estimate::at_most(format!("power_sum[p={p}].violations"), ps.violations as f64, 0.0, 0.0, 0.0));
        r.push(Estimate::info(format!("power_sum[p={p}].max_ratio"), ps.max_ratio, 0.0));
        r.push(Estimate::at_most(
            format!("power_sum[p={p}].constant_error"),
            ps.constant_error,
            0.0,
            0.0,
            1e-12,
        ));
    }
    for (i, &p) in s.ps.iter().enumerate() {
        let mx = maximal_inequality_check(
            &cfg.spec,
            p,
            cfg.n,
            cfg.replications,
            replication_seed(seed, 1000 + i as u64),
        )?;
        let tol = cfg.z * (mx.lhs_se.powi(2) + mx.rhs_se.powi(2)).sqrt();
        r.push(Estimate::at_most(format!("maximal[p={p}]"), mx.lhs, mx.lhs_se, mx.rhs, tol));
        r.push(Estimate::info(format!("maximal[p={p}].prefactor"), mx.constants.prefactor, 0.0));
    }
    Ok(r)
}

fn metrics(cfg: &MCConfig, exp: &ExperimentConfig) -> Result<MCReport> {
    let s = &exp.metrics;
    let seed = stream(cfg.base_seed, tag::METRICS);
    let moduli = moduli_suite(s.n, s.functions, &s.deltas, replication_seed(seed, 0))?;
    let mut candidates = CandidateSet::exhaustive(s.exhaustive_k)?;
    candidates.extend(near_identity(200, 0.3, replication_seed(seed, 1)));
    let metric = metric_suite(s.n, s.pairs, &candidates, replication_seed(seed, 2))?;
    let mut r = MCReport::new(
        "metrics",
        cfg,
        json!({ "settings": s, "moduli": moduli, "metric": metric }),
    );
    r.push(Estimate::at_most("wprime_le_w2delta.violations", moduli.step_violations as f64, 0.0, 0.0, 0.0));
    r.push(Estimate::info("wprime_le_w2delta.max_excess", moduli.step_excess, 0.0));
    r.push(Estimate::at_most(
        "w_le_2wprime.violations",
        moduli.continuous_violations as f64,
        0.0,
        0.0,
        0.0,
    ));
    r.push(Estimate::info("w_le_2wprime.max_excess", moduli.continuous_excess, 0.0));
    r.push(Estimate::at_most("d_le_2d0.violations", metric.violations as f64, 0.0, 0.0, 0.0));
    r.push(Estimate::info("d_le_2d0.qualifying", metric.qualifying as f64, 0.0));
    r.push(Estimate::info(
        "d_le_2d0.qualifying_non_identity",
        metric.qualifying_non_identity as f64,
        0.0,
    ));
    r.push(Estimate::at_most("identity.sup_error", metric.identity_error, 0.0, 0.0, 0.0));
    Ok(r)
}

fn tightness(cfg: &MCConfig, exp: &ExperimentConfig) -> Result<Vec<MCReport>> {
    let s = &exp.tightness;
    let cfg_t = tagged(cfg, tag::TIGHTNESS);
    let (eps, calibrated) = match s.epsilon {
        Some(e) => (e, false),
        None => (calibrate_tightness(&cfg_t.at_size(cfg.n / 2), &s.lambdas)?, true),
    };
    let mut probe = tightness_probe(&cfg_t, &s.lambdas, eps, s.lambda0)?;
    probe.push(Estimate::info("epsilon", eps, 0.0));
    if let Some(obj) = probe.inputs.as_object_mut() {
        obj.insert("epsilon_calibrated".into(), json!(calibrated));
    }
    let cfg_ui = tagged(cfg, tag::UI_TAIL);
    let mut out = vec![probe];
    for family in [UiFamily::FieldSquares, UiFamily::RunningMaxSquares] {
        out.push(ui_tail_curve(&cfg_ui, family, &s.ui_thresholds)?);
    }
    Ok(out)
}

fn conditions(cfg: &MCConfig, exp: &ExperimentConfig) -> Result<Vec<MCReport>> {
    let s = &exp.conditions;
    let m = cfg.declared_m();
    Ok(vec![
        condition_2a_estimate(&tagged(cfg, tag::CONDITION_2A), s.point, &s.alphas, s.absolute)?,
        condition_3a_estimate(&tagged(cfg, tag::CONDITION_3A), s.s_hat, s.t_hat, s.t, &s.hs, &s.alphas)?,
        condition_1a_report(&tagged(cfg, tag::CONDITION_1A), &s.condition_1a())?,
        m_dependence_check(&tagged(cfg, tag::M_DEPENDENCE), s.max_lag.unwrap_or(m + 2))?,
        conditional_variance_check(
            &tagged(cfg, tag::CONDITIONAL_VARIANCE),
            s.k.unwrap_or((cfg.n, cfg.n)),
        )?,
    ])
}

/// Run the configured experiment and return its reports in a fixed order.
pub fn execute(exp: &ExperimentConfig) -> Result<Vec<MCReport>> {
    let cfg = exp.mc_config();
    let kinds: Vec<ExperimentKind> = match exp.experiment {
        ExperimentKind::FullSuite => vec![
            ExperimentKind::Simulate,
            ExperimentKind::Decompose,
            ExperimentKind::Inequalities,
            ExperimentKind::Metrics,
            ExperimentKind::Fdd,
            ExperimentKind::Tightness,
            ExperimentKind::Conditions,
        ],
        k => vec![k],
    };
    let mut reports = Vec::new();
    for kind in kinds {
        match kind {
            ExperimentKind::Simulate => reports.push(simulate(&cfg)?),
            ExperimentKind::Decompose => {
                let trials = exp.decompose.trials.unwrap_or(cfg.replications);
                reports.push(decomposition(&cfg, exp.decompose.tol, trials)?)
            }
            ExperimentKind::Inequalities => reports.push(inequalities(&cfg, exp)?),
            ExperimentKind::Metrics => reports.push(metrics(&cfg, exp)?),
            ExperimentKind::Fdd => {
                let spec = exp.fdd_spec()?;
                let c = tagged(&cfg, tag::FDD);
                reports.push(if exp.fdd.trend {
                    fdd_trend_test(&c, &spec, &exp.fdd.probes)?
                } else {
                    fdd_convergence_test(&c, &spec, &exp.fdd.probes)?
                });
            }
            ExperimentKind::Tightness => reports.extend(tightness(&cfg, exp)?),
            ExperimentKind::Conditions => reports.extend(conditions(&cfg, exp)?),
            ExperimentKind::FullSuite => unreachable!("expanded above"),
        }
    }
    Ok(reports)
}

/// Plots derived from a report: every series as a decay curve, covariance
/// matrices as heatmaps and sample paths as path heatmaps.
pub fn plots_for(report: &MCReport) -> Vec<(PlotKind, String)> {
    let mut out: Vec<(PlotKind, String)> = report
        .series
        .iter()
        .map(|s| (PlotKind::DecayCurve, s.name.clone()))
        .collect();
    for m in &report.matrices {
        if m.name.ends_with("_path") {
            out.push((PlotKind::SamplePath, m.name.clone()));
        } else if m.name.ends_with("cov") {
            out.push((PlotKind::CovHeatmap, m.name.clone()));
        }
    }
    out
}

fn file_stem(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
            out.push(c);
        } else if !out.ends_with('_') {
            out.push('_');
        }
    }
    out.trim_matches('_').to_string()
}

#[derive(Debug, Clone, Serialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub defaults_version: u32,
    pub tool_version: &'static str,
    pub experiment: &'static str,
    pub seed: u64,
    pub config_sha256: String,
    pub passed: bool,
    pub files: Vec<ManifestEntry>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub reports: Vec<MCReport>,
    pub passed: bool,
    pub dir: PathBuf,
    pub manifest: Manifest,
}

/// Render every artifact in memory, keyed by relative path.
pub fn render(exp: &ExperimentConfig, reports: &[MCReport]) -> Result<BTreeMap<String, Vec<u8>>> {
    let mut files = BTreeMap::new();
    files.insert("config.json".to_string(), exp.resolved_json().into_bytes());
    if exp.wants(Format::Json) {
        for r in reports {
            files.insert(format!("reports/{}.json", file_stem(&r.name)), r.to_json().into_bytes());
        }
        let summary = json!({
            "experiment": exp.experiment.as_str(),
            "passed": reports.iter().all(MCReport::passed),
            "reports": reports.iter().map(|r| json!({
                "name": r.name,
                "passed": r.passed(),
                "estimates": r.estimates.len(),
                "failures": r.failures().map(|e| e.name.clone()).collect::<Vec<_>>(),
            })).collect::<Vec<_>>(),
        });
        files.insert(
            "summary.json".to_string(),
            serde_json::to_string_pretty(&summary).expect("summary serializes").into_bytes(),
        );
    }
    if exp.wants(Format::Csv) {
        files.insert("estimates.csv".to_string(), reports_to_csv(reports)?.into_bytes());
    }
    if exp.wants(Format::Svg) {
        for r in reports {
            for (kind, name) in plots_for(r) {
                let svg = emit_plot(r, kind, &name)?;
                let path = format!("plots/{}__{}.svg", file_stem(&r.name), file_stem(&name));
                files.insert(path, svg.into_bytes());
            }
        }
    }
    Ok(files)
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

/// Execute, write all artifacts under the output directory and finish with
/// `manifest.json`.
pub fn run(exp: &ExperimentConfig) -> Result<RunOutcome> {
    let reports = execute(exp)?;
    let passed = reports.iter().all(MCReport::passed);
    let files = render(exp, &reports)?;
    let dir = exp.output.dir.clone();
    let mut entries = Vec::with_capacity(files.len());
    for (rel, bytes) in &files {
        write(&dir.join(rel), bytes)?;
        entries.push(ManifestEntry {
            path: rel.clone(),
            sha256: hex::encode(Sha256::digest(bytes)),
            bytes: bytes.len(),
        });
    }
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        defaults_version: DEFAULTS_VERSION,
        tool_version: env!("CARGO_PKG_VERSION"),
        experiment: exp.experiment.as_str(),
        seed: exp.mc.base_seed,
        config_sha256: exp.hash(),
        passed,
        files: entries,
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write(&dir.join("manifest.json"), text.as_bytes())?;
    Ok(RunOutcome {
        reports,
        passed,
        dir,
        manifest,
    })
}

//! Monte Carlo diagnostics for the invariance principle.
//!
//! Every check produces an [`MCReport`]: named estimates with standard errors,
//! each carrying the tolerance its verdict was decided against.

mod conditions;
mod dependence;
mod fdd;
mod tails;

use serde::{Deserialize, Serialize};

use crate::fieldgen::{FieldSample, FieldSource, FieldSpec};
use crate::mc::collect_replications;
use crate::rng::replication_seed;
use crate::sumproc::{partial_sums, PartialSumField, Rect};
use crate::{Error, Result};

pub use conditions::{
    condition_1a_estimate, condition_1a_estimate_on, condition_1a_report, condition_2a_estimate,
    condition_2a_estimate_on, condition_3a_estimate, condition_3a_estimate_on, in_index_set,
    Condition1a, Condition1aSpec,
};
pub use dependence::{
    conditional_variance_check, conditional_variance_check_on, m_dependence_check,
    m_dependence_check_on,
};
pub use fdd::{fdd_convergence_test, fdd_convergence_test_on, fdd_trend_test, fdd_trend_test_on};
pub use tails::{
    calibrate_tightness, calibrate_tightness_on, default_offsets, tightness_probe,
    tightness_probe_on, ui_tail, ui_tail_curve, ui_tail_curve_on, UiFamily,
};

pub const MIN_REPLICATIONS: usize = 100;
pub const MIN_LATTICE: usize = 8;

fn default_z() -> f64 {
    3.0
}

fn default_ks_alpha() -> f64 {
    0.01
}

/// Shared Monte Carlo settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MCConfig {
    pub replications: usize,
    pub n: usize,
    #[serde(default)]
    pub base_seed: u64,
    pub spec: FieldSpec,
    /// Normalizing `σ`; taken from the long-run variance when absent.
    #[serde(default)]
    pub sigma: Option<f64>,
    /// Confidence multiplier applied to standard errors.
    #[serde(default = "default_z")]
    pub z: f64,
    /// Memory the field is claimed to have; defaults to the kernel's.
    #[serde(default)]
    pub declared_m: Option<usize>,
    #[serde(default = "default_ks_alpha")]
    pub ks_alpha: f64,
}

impl MCConfig {
    pub fn new(spec: FieldSpec, n: usize, replications: usize, base_seed: u64) -> Self {
        Self {
            replications,
            n,
            base_seed,
            spec,
            sigma: None,
            z: default_z(),
            declared_m: None,
            ks_alpha: default_ks_alpha(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications < MIN_REPLICATIONS {
            return Err(Error::invalid(format!(
                "replications must be at least {MIN_REPLICATIONS}, got {}",
                self.replications
            )));
        }
        if self.n < MIN_LATTICE {
            return Err(Error::invalid(format!(
                "lattice size must be at least {MIN_LATTICE}, got {}",
                self.n
            )));
        }
        if !(self.z > 0.0 && self.z.is_finite()) {
            return Err(Error::invalid("confidence multiplier must be positive"));
        }
        if !(self.ks_alpha > 0.0 && self.ks_alpha < 1.0) {
            return Err(Error::invalid("KS level must lie in (0, 1)"));
        }
        if let Some(s) = self.sigma {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::invalid(format!("sigma must be positive, got {s}")));
            }
        }
        self.spec.validate()
    }

    pub fn sigma(&self) -> Result<f64> {
        match self.sigma {
            Some(s) => Ok(s),
            None => Ok(self.spec.long_run_variance()?.sqrt()),
        }
    }

    pub fn declared_m(&self) -> usize {
        self.declared_m.unwrap_or_else(|| self.spec.m())
    }

    /// Same settings at a different lattice size, with its own seed stream.
    pub fn at_size(&self, n: usize) -> Self {
        let mut cfg = self.clone();
        if n != self.n {
            cfg.base_seed = replication_seed(self.base_seed, (1u64 << 48) | n as u64);
        }
        cfg.n = n;
        cfg
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Info,
}

/// How an estimate is compared against its target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// `|value − target| ≤ tolerance`.
    Within,
    /// `value ≤ target + tolerance`.
    AtMost,
    Info,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub name: String,
    pub value: f64,
    pub se: f64,
    pub target: Option<f64>,
    pub tolerance: Option<f64>,
    pub relation: Relation,
    pub verdict: Verdict,
}

impl Estimate {
    pub fn within(name: impl Into<String>, value: f64, se: f64, target: f64, tolerance: f64) -> Self {
        let ok = (value - target).abs() <= tolerance;
        Self {
            name: name.into(),
            value,
            se,
            target: Some(target),
            tolerance: Some(tolerance),
            relation: Relation::Within,
            verdict: if ok { Verdict::Pass } else { Verdict::Fail },
        }
    }

    pub fn at_most(name: impl Into<String>, value: f64, se: f64, bound: f64, tolerance: f64) -> Self {
        let ok = value <= bound + tolerance;
        Self {
            name: name.into(),
            value,
            se,
            target: Some(bound),
            tolerance: Some(tolerance),
            relation: Relation::AtMost,
            verdict: if ok { Verdict::Pass } else { Verdict::Fail },
        }
    }

    pub fn info(name: impl Into<String>, value: f64, se: f64) -> Self {
        Self {
            name: name.into(),
            value,
            se,
            target: None,
            tolerance: None,
            relation: Relation::Info,
            verdict: Verdict::Info,
        }
    }

    /// Keep the numbers but drop the verdict.
    pub fn demoted(mut self) -> Self {
        self.verdict = Verdict::Info;
        self
    }

    pub fn prefixed(mut self, prefix: &str) -> Self {
        self.name = format!("{prefix}{}", self.name);
        self
    }

    pub fn passed(&self) -> bool {
        self.verdict != Verdict::Fail
    }
}

/// A curve `y(x)` with pointwise standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub x_label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub se: Vec<f64>,
}

/// Row-major matrix, used for covariance tables and sample paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

impl Matrix {
    pub fn from_array(name: impl Into<String>, a: &ndarray::Array2<f64>) -> Self {
        let (rows, cols) = a.dim();
        Self {
            name: name.into(),
            rows,
            cols,
            values: a.iter().copied().collect(),
        }
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols + c]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MCReport {
    pub name: String,
    pub config: MCConfig,
    /// Check-specific parameters.
    pub inputs: serde_json::Value,
    pub estimates: Vec<Estimate>,
    pub series: Vec<Series>,
    pub matrices: Vec<Matrix>,
}

#[derive(Serialize)]
struct CsvRow<'a> {
    report: &'a str,
    name: &'a str,
    value: f64,
    se: f64,
    target: Option<f64>,
    tolerance: Option<f64>,
    relation: Relation,
    verdict: Verdict,
}

impl MCReport {
    pub fn new(name: impl Into<String>, config: &MCConfig, inputs: serde_json::Value) -> Self {
        Self {
            name: name.into(),
            config: config.clone(),
            inputs,
            estimates: Vec::new(),
            series: Vec::new(),
            matrices: Vec::new(),
        }
    }

    pub fn push(&mut self, e: Estimate) {
        self.estimates.push(e);
    }

    pub fn passed(&self) -> bool {
        self.estimates.iter().all(Estimate::passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Estimate> {
        self.estimates.iter().filter(|e| !e.passed())
    }

    pub fn estimate(&self, name: &str) -> Option<&Estimate> {
        self.estimates.iter().find(|e| e.name == name)
    }

    pub fn series(&self, name: &str) -> Result<&Series> {
        self.series
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| Error::MissingSeries(name.to_string()))
    }

    pub fn matrix(&self, name: &str) -> Result<&Matrix> {
        self.matrices
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| Error::MissingSeries(name.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One row per estimate.
    pub fn to_csv(&self) -> Result<String> {
        reports_to_csv(std::slice::from_ref(self))
    }
}

/// Flat CSV over several reports.
pub fn reports_to_csv(reports: &[MCReport]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in reports {
        for e in &r.estimates {
            w.serialize(CsvRow {
                report: &r.name,
                name: &e.name,
                value: e.value,
                se: e.se,
                target: e.target,
                tolerance: e.tolerance,
                relation: e.relation,
                verdict: e.verdict,
            })
            .map_err(|err| Error::invalid(format!("csv encoding failed: {err}")))?;
        }
    }
    let bytes = w
        .into_inner()
        .map_err(|err| Error::invalid(format!("csv encoding failed: {err}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// `later ≤ earlier + z·√(se₁² + se₂²)`.
pub fn trend_estimate(
    name: impl Into<String>,
    earlier: (f64, f64),
    later: (f64, f64),
    z: f64,
) -> Estimate {
    let tol = z * (earlier.1 * earlier.1 + later.1 * later.1).sqrt();
    Estimate::at_most(name, later.0, later.1, earlier.0, tol)
}

/// `X_n(t)` read from partial sums.
#[inline]
pub(crate) fn x_at(sums: &PartialSumField, scale: f64, n: usize, t: (f64, f64)) -> f64 {
    use crate::dspace::level_index;
    sums.at(level_index(n, t.0), level_index(n, t.1)) * scale
}

/// `X_n(Δ_r)` read from partial sums.
#[inline]
pub(crate) fn x_increment(sums: &PartialSumField, scale: f64, n: usize, r: &Rect) -> f64 {
    x_at(sums, scale, n, (r.t1, r.t2)) - x_at(sums, scale, n, (r.s1, r.t2))
        - x_at(sums, scale, n, (r.t1, r.s2))
        + x_at(sums, scale, n, (r.s1, r.s2))
}

/// Generate `cfg.replications` fields of the given size and map each one.
pub(crate) fn replicate<S, T, F>(
    source: &S,
    cfg: &MCConfig,
    dims: (usize, usize),
    f: F,
) -> Result<Vec<T>>
where
    S: FieldSource + ?Sized,
    T: Send,
    F: Fn(&FieldSample, &PartialSumField) -> Result<T> + Sync,
{
    collect_replications(cfg.replications, cfg.base_seed, |_, seed| {
        let field = source.generate(dims.0, dims.1, seed)?;
        let sums = partial_sums(&field);
        f(&field, &sums)
    })
}

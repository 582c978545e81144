//! Experiment configuration: JSON schema v1, dotted-path overrides and
//! validation.

use std::path::{Path, PathBuf};

use fieldclt_core::diagnostics::{Condition1aSpec, MIN_LATTICE};
use fieldclt_core::{FddSpec, FieldSpec, MCConfig};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Bumped whenever a default below changes, so that manifests of runs that
/// relied on defaults stay distinguishable.
pub const DEFAULTS_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Simulate,
    Decompose,
    Inequalities,
    Metrics,
    Fdd,
    Tightness,
    Conditions,
    FullSuite,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::Decompose => "decompose",
            ExperimentKind::Inequalities => "inequalities",
            ExperimentKind::Metrics => "metrics",
            ExperimentKind::Fdd => "fdd",
            ExperimentKind::Tightness => "tightness",
            ExperimentKind::Conditions => "conditions",
            ExperimentKind::FullSuite => "full-suite",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

fn default_z() -> f64 {
    3.0
}

fn default_ks_alpha() -> f64 {
    0.01
}

/// Monte Carlo settings shared by every experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSection {
    pub replications: usize,
    pub n: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub sigma: Option<f64>,
    #[serde(default = "default_z")]
    pub z: f64,
    #[serde(default)]
    pub declared_m: Option<usize>,
    #[serde(default = "default_ks_alpha")]
    pub ks_alpha: f64,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json, Format::Svg]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            formats: default_formats(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecomposeSection {
    /// Tolerance of the recovery identity.
    pub tol: f64,
    /// Trials per martingale-property check; `mc.replications` when absent.
    pub trials: Option<usize>,
}

impl Default for DecomposeSection {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            trials: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InequalitiesSection {
    /// Exponents of the maximal inequality.
    pub ps: Vec<f64>,
    /// Exponents of the power-sum bound.
    pub power_sum_ps: Vec<f64>,
    /// Random arrays per exponent in the power-sum check.
    pub power_sum_trials: usize,
}

impl Default for InequalitiesSection {
    fn default() -> Self {
        Self {
            ps: vec![2.0, 4.0],
            power_sum_ps: vec![1.5, 2.0, 3.0, 4.0],
            power_sum_trials: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsSection {
    /// Grid size of the random step functions.
    pub n: usize,
    /// Random functions in the moduli check.
    pub functions: usize,
    pub deltas: Vec<f64>,
    /// Random pairs in the metric comparison.
    pub pairs: usize,
    /// Interior grid size of the exhaustive time-change family.
    pub exhaustive_k: usize,
}

impl Default for MetricsSection {
    fn default() -> Self {
        Self {
            n: 8,
            functions: 200,
            deltas: vec![0.1, 0.2, 0.3],
            pairs: 100,
            exhaustive_k: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FddSection {
    pub points: Vec<(f64, f64)>,
    /// Cramér-Wold weight vectors, one weight per point.
    pub probes: Vec<Vec<f64>>,
    /// Repeat at `2n` and check that the covariance error does not grow.
    pub trend: bool,
}

impl Default for FddSection {
    fn default() -> Self {
        Self {
            points: vec![(0.5, 0.5), (1.0, 0.5), (0.5, 1.0), (1.0, 1.0)],
            probes: vec![
                vec![0.0, 0.0, 0.0, 1.0],
                vec![1.0, -1.0, -1.0, 1.0],
                vec![1.0, 1.0, 1.0, 1.0],
            ],
            trend: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TightnessSection {
    pub lambdas: Vec<f64>,
    pub lambda0: f64,
    /// Bound constant; calibrated from a run at `n/2` when absent.
    pub epsilon: Option<f64>,
    /// Thresholds of the uniform-integrability tail curves.
    pub ui_thresholds: Vec<f64>,
}

impl Default for TightnessSection {
    fn default() -> Self {
        Self {
            lambdas: vec![1.0, 2.0, 4.0],
            lambda0: 1.0,
            epsilon: None,
            ui_thresholds: vec![0.5, 1.0, 2.0, 4.0, 8.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConditionsSection {
    /// Evaluation point of the truncated first moment.
    pub point: (f64, f64),
    pub alphas: Vec<f64>,
    pub absolute: bool,
    pub s_hat: f64,
    pub t_hat: f64,
    pub t: f64,
    /// Rectangle heights of the truncated second moment.
    pub hs: Vec<f64>,
    /// Rectangle height of the characteristic-function check.
    pub h: f64,
    pub points: Vec<(f64, f64)>,
    pub u: Vec<f64>,
    /// Block offset of the conditional-variance check; `(n, n)` when absent.
    pub k: Option<(usize, usize)>,
    /// Largest lag of the m-dependence check; `declared m + 2` when absent.
    pub max_lag: Option<usize>,
}

impl Default for ConditionsSection {
    fn default() -> Self {
        Self {
            point: (1.0, 1.0),
            alphas: vec![0.0, 0.5, 1.0, 2.0, 4.0],
            absolute: false,
            s_hat: 0.5,
            t_hat: 1.0,
            t: 0.5,
            hs: vec![0.25, 0.125, 0.0625],
            h: 0.25,
            points: vec![(0.25, 0.75), (0.75, 0.25)],
            u: vec![1.0, -0.5],
            k: None,
            max_lag: None,
        }
    }
}

impl ConditionsSection {
    pub fn condition_1a(&self) -> Condition1aSpec {
        Condition1aSpec {
            s_hat: self.s_hat,
            t_hat: self.t_hat,
            t: self.t,
            h: self.h,
            points: self.points.clone(),
            u: self.u.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub experiment: ExperimentKind,
    pub field: FieldSpec,
    pub mc: McSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub decompose: DecomposeSection,
    #[serde(default)]
    pub inequalities: InequalitiesSection,
    #[serde(default)]
    pub metrics: MetricsSection,
    #[serde(default)]
    pub fdd: FddSection,
    #[serde(default)]
    pub tightness: TightnessSection,
    #[serde(default)]
    pub conditions: ConditionsSection,
}

/// Split `a.b.c=value`; the value is JSON when it parses, else a string.
pub fn parse_override(raw: &str) -> Result<(Vec<String>, Value)> {
    let (path, value) = raw
        .split_once('=')
        .ok_or_else(|| CliError::schema(format!("override `{raw}` is not of the form key=value")))?;
    let keys: Vec<String> = path.split('.').map(str::to_string).collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(CliError::schema(format!("override `{raw}` has an empty key segment")));
    }
    let value = serde_json::from_str(value).unwrap_or_else(|_| Value::String(value.to_string()));
    Ok((keys, value))
}

/// Set `keys` inside `doc`, creating intermediate objects. Numeric segments
/// index into arrays.
pub fn apply_override(doc: &mut Value, keys: &[String], value: Value) -> Result<()> {
    let mut cur = doc;
    for (depth, key) in keys.iter().enumerate() {
        let last = depth + 1 == keys.len();
        cur = match cur {
            Value::Object(map) => {
                if last {
                    map.insert(key.clone(), value);
                    return Ok(());
                }
                map.entry(key.clone()).or_insert_with(|| Value::Object(Default::default()))
            }
            Value::Array(items) => {
                let idx: usize = key
                    .parse()
                    .map_err(|_| CliError::schema(format!("`{key}` does not index an array")))?;
                let len = items.len();
                let slot = items
                    .get_mut(idx)
                    .ok_or_else(|| CliError::schema(format!("index {idx} out of range for array of {len}")))?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => {
                return Err(CliError::schema(format!(
                    "cannot descend into `{}`: not an object",
                    keys[..depth].join(".")
                )))
            }
        };
    }
    Err(CliError::schema("override path is empty"))
}

impl ExperimentConfig {
    /// Parse, apply overrides in order, deserialize and validate.
    pub fn from_json(text: &str, overrides: &[String]) -> Result<Self> {
        let mut doc: Value =
            serde_json::from_str(text).map_err(|e| CliError::schema(format!("invalid JSON: {e}")))?;
        for raw in overrides {
            let (keys, value) = parse_override(raw)?;
            apply_override(&mut doc, &keys, value)?;
        }
        let cfg: Self = serde_json::from_value(doc).map_err(|e| CliError::schema(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text, overrides)
    }

    pub fn mc_config(&self) -> MCConfig {
        MCConfig {
            replications: self.mc.replications,
            n: self.mc.n,
            base_seed: self.mc.base_seed,
            spec: self.field.clone(),
            sigma: self.mc.sigma,
            z: self.mc.z,
            declared_m: self.mc.declared_m,
            ks_alpha: self.mc.ks_alpha,
        }
    }

    pub fn fdd_spec(&self) -> Result<FddSpec> {
        FddSpec::new(self.fdd.points.clone()).map_err(|e| CliError::schema(format!("fdd.points: {e}")))
    }

    pub fn wants(&self, f: Format) -> bool {
        self.output.formats.contains(&f)
    }

    /// Every default made explicit, as canonical JSON. The output directory
    /// is left out: where artifacts land does not change what they contain.
    pub fn resolved_json(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(out) = value.get_mut("output").and_then(Value::as_object_mut) {
            out.remove("dir");
        }
        serde_json::to_string_pretty(&value).expect("value serializes")
    }

    /// SHA-256 of the resolved config.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.resolved_json().as_bytes()))
    }

    /// Checks that need no computation; all failures are schema errors.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Schema(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        self.mc_config()
            .validate()
            .map_err(|e| CliError::schema(format!("mc: {e}")))?;
        if self.output.formats.is_empty() {
            return bad("output.formats is empty".into());
        }
        let n = self.mc.n;
        let needs = |k: ExperimentKind| self.experiment == k || self.experiment == ExperimentKind::FullSuite;

        if needs(ExperimentKind::Decompose) && !(self.decompose.tol > 0.0) {
            return bad("decompose.tol must be positive".into());
        }
        if needs(ExperimentKind::Inequalities) {
            let s = &self.inequalities;
            if s.ps.is_empty() || s.power_sum_ps.is_empty() {
                return bad("inequalities: exponent lists must be non-empty".into());
            }
            if s.ps.iter().chain(&s.power_sum_ps).any(|p| !(*p > 1.0 && p.is_finite())) {
                return bad("inequalities: exponents must exceed 1".into());
            }
            if s.power_sum_trials == 0 {
                return bad("inequalities.power_sum_trials must be positive".into());
            }
        }
        if needs(ExperimentKind::Metrics) {
            let s = &self.metrics;
            if s.n == 0 || s.n > 16 {
                return bad("metrics.n must lie in 1..=16".into());
            }
            if s.deltas.is_empty() || s.deltas.iter().any(|d| !(*d > 0.0 && *d < 0.5)) {
                return bad("metrics.deltas must be non-empty and lie in (0, 1/2)".into());
            }
            if !(1..=fieldclt_core::dspace::MAX_EXHAUSTIVE_GRID).contains(&s.exhaustive_k) {
                return bad(format!(
                    "metrics.exhaustive_k must lie in 1..={}",
                    fieldclt_core::dspace::MAX_EXHAUSTIVE_GRID
                ));
            }
        }
        if needs(ExperimentKind::Fdd) {
            let spec = self.fdd_spec()?;
            if self.fdd.probes.is_empty() {
                return bad("fdd.probes is empty".into());
            }
            if let Some(p) = self.fdd.probes.iter().find(|p| p.len() != spec.len()) {
                return bad(format!("fdd.probes: probe has {} weights for {} points", p.len(), spec.len()));
            }
        }
        if needs(ExperimentKind::Tightness) {
            let s = &self.tightness;
            if s.lambdas.is_empty() || s.lambdas.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
                return bad("tightness.lambdas must be non-empty and positive".into());
            }
            if s.ui_thresholds.is_empty() {
                return bad("tightness.ui_thresholds is empty".into());
            }
            if s.epsilon.is_none() && n / 2 < MIN_LATTICE {
                return bad(format!(
                    "tightness: calibrating epsilon at n/2 needs mc.n >= {}",
                    2 * MIN_LATTICE
                ));
            }
        }
        if needs(ExperimentKind::Conditions) {
            let s = &self.conditions;
            if s.alphas.is_empty() {
                return bad("conditions.alphas is empty".into());
            }
            if s.alphas.iter().any(|a| !(*a >= 0.0 && a.is_finite())) {
                return bad("conditions.alphas must be finite and non-negative".into());
            }
            if s.hs.is_empty() {
                return bad("conditions.hs is empty".into());
            }
            self.conditions
                .condition_1a()
                .validate()
                .map_err(|e| CliError::schema(format!("conditions: {e}")))?;
            let m = self.mc_config().declared_m();
            if let Some(k) = s.k {
                if k.0 <= m || k.1 <= m {
                    return bad(format!("conditions.k must exceed the declared memory {m}"));
                }
            }
            if let Some(l) = s.max_lag {
                if l <= m {
                    return bad(format!("conditions.max_lag must exceed the declared memory {m}"));
                }
            }
        }
        Ok(())
    }
}

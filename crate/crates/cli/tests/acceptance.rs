//! End-to-end acceptance suite. Every criterion runs at its stated size and
//! tolerance, prints one PASS/FAIL line, and the test fails if any does.
//!
//! Run with `cargo test -p fieldclt-cli --test acceptance -- --nocapture`.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use fieldclt_cli::suites::{metric_suite, moduli_suite, near_identity, power_sum_suite};
use fieldclt_cli::{run, ExperimentConfig};
use fieldclt_core::diagnostics::{
    calibrate_tightness, conditional_variance_check, fdd_trend_test, m_dependence_check, tightness_probe,
};
use fieldclt_core::dspace::CandidateSet;
use fieldclt_core::martdecomp::{decompose, maximal_constants, maximal_inequality_check, verify_recovery};
use fieldclt_core::rng::{replication_seed, seeded};
use fieldclt_core::sheet::sample_fdd;
use fieldclt_core::stats::Moments;
use fieldclt_core::{
    FddSpec, FieldSpec, InnovationLaw, InnovationSpec, MCConfig, MaKernel, VarianceProfile,
};
use rand::Rng;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn random_profile<R: Rng>(rng: &mut R) -> VarianceProfile {
    match rng.random_range(0..4) {
        0 => VarianceProfile::Constant {
            value: rng.random_range(0.5..2.0),
        },
        1 => VarianceProfile::Affine {
            base: rng.random_range(0.5..1.5),
            slope1: rng.random_range(0.0..1.0),
            slope2: rng.random_range(0.0..1.0),
        },
        2 => VarianceProfile::Sinusoidal {
            base: 1.0,
            amplitude: rng.random_range(0.0..0.8),
            freq1: rng.random_range(0.5..3.0),
            freq2: rng.random_range(0.5..3.0),
        },
        _ => VarianceProfile::Checkerboard {
            low: rng.random_range(0.2..1.0),
            high: rng.random_range(1.0..3.0),
            blocks: rng.random_range(1..6),
        },
    }
}

fn random_spec<R: Rng>(rng: &mut R, m: usize) -> FieldSpec {
    let law = InnovationLaw::ALL[rng.random_range(0..InnovationLaw::ALL.len())];
    let rows = (0..=m)
        .map(|_| (0..=m).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    FieldSpec::new(
        InnovationSpec::new(law, random_profile(rng)),
        MaKernel::new(rows).expect("random kernel"),
    )
}

fn ma_kernel() -> MaKernel {
    MaKernel::separable(&[1.0, 0.5]).unwrap()
}

fn fdd_points() -> FddSpec {
    FddSpec::new(vec![(0.5, 0.5), (1.0, 0.5), (0.5, 1.0), (1.0, 1.0)]).unwrap()
}

fn recovery_identity() -> Outcome {
    let mut rng = seeded(1);
    let mut worst = 0.0f64;
    for idx in 0..50 {
        let m = idx % 3;
        let spec = random_spec(&mut rng, m);
        let field = spec.sample(128, 128, replication_seed(11, idx as u64)).map_err(err)?;
        let d = decompose(&field).map_err(err)?;
        let r = verify_recovery(&d, &field, 1e-10).map_err(err)?;
        ensure(r.pass, || format!("spec {idx} (m = {m}): error {:e}", r.max_error))?;
        worst = worst.max(r.max_error);
    }
    Ok(format!("50 specs, max error {worst:.2e} <= 1e-10"))
}

fn power_sum_lemma() -> Outcome {
    let mut worst_ratio = 0.0f64;
    let mut worst_const = 0.0f64;
    let mut cell = 0u64;
    for m in 0..=2 {
        for p in [1.5, 2.0, 3.0, 4.0] {
            cell += 1;
            let s = power_sum_suite(m, p, 100_000, replication_seed(2, cell)).map_err(err)?;
            ensure(s.violations == 0, || format!("m = {m}, p = {p}: {} violations", s.violations))?;
            ensure(s.constant_error <= 1e-12, || {
                format!("m = {m}, p = {p}: constant-array error {:e}", s.constant_error)
            })?;
            worst_ratio = worst_ratio.max(s.max_ratio);
            worst_const = worst_const.max(s.constant_error);
        }
    }
    Ok(format!(
        "12 cells x 1e5 arrays, 0 violations, max lhs/rhs {worst_ratio:.6}, constant error {worst_const:.1e}"
    ))
}

fn maximal_inequality() -> Outcome {
    let prefactor = maximal_constants(2.0, 1).map_err(err)?.prefactor;
    ensure(prefactor == 144.0, || format!("p = 2, m = 1 prefactor is {prefactor}, expected 144"))?;
    let mut cells = 0;
    let mut tightest = f64::INFINITY;
    for law in [InnovationLaw::Gaussian, InnovationLaw::Rademacher] {
        for m in [0usize, 1] {
            let kernel = if m == 0 { MaKernel::identity() } else { ma_kernel() };
            let spec = FieldSpec::new(InnovationSpec::standard(law), kernel);
            for p in [2.0, 4.0] {
                cells += 1;
                let r = maximal_inequality_check(&spec, p, 64, 2000, replication_seed(3, cells)).map_err(err)?;
                let slack = 3.0 * (r.lhs_se.powi(2) + r.rhs_se.powi(2)).sqrt();
                ensure(r.lhs <= r.rhs + slack, || {
                    format!("{law:?}, m = {m}, p = {p}: lhs {} > rhs {} + {slack}", r.lhs, r.rhs)
                })?;
                tightest = tightest.min(r.rhs / r.lhs);
            }
        }
    }
    Ok(format!("{cells} cells pass, prefactor(2, 1) = 144, smallest rhs/lhs {tightest:.2}"))
}

fn moduli() -> Outcome {
    let s = moduli_suite(8, 200, &[0.1, 0.2, 0.3], 4).map_err(err)?;
    ensure(s.step_violations == 0, || format!("{} violations of w'(d) <= w(2d)", s.step_violations))?;
    ensure(s.continuous_violations == 0, || {
        format!("{} violations of w(d) <= 2w'(d)", s.continuous_violations)
    })?;
    Ok(format!(
        "{} comparisons, 0 violations (max excess {:.3} and {:.3})",
        s.comparisons, s.step_excess, s.continuous_excess
    ))
}

fn metrics() -> Outcome {
    let mut candidates = CandidateSet::exhaustive(4).map_err(err)?;
    let exhaustive = candidates.len();
    candidates.extend(near_identity(200, 0.3, 5));
    let s = metric_suite(8, 100, &candidates, 6).map_err(err)?;
    ensure(s.violations == 0, || format!("{} violations of d <= 2 d0", s.violations))?;
    ensure(s.identity_error == 0.0, || format!("identity candidate off by {:e}", s.identity_error))?;
    Ok(format!(
        "100 pairs x ({exhaustive} exhaustive + 200 near-identity) candidates, {} qualifying ({} non-identity), 0 violations, identity exact",
        s.qualifying, s.qualifying_non_identity
    ))
}

fn sheet_reference() -> Outcome {
    let spec = fdd_points();
    let draws = sample_fdd(&spec, 100_000, 7).map_err(err)?;
    let target = spec.covariance();
    let k = spec.len();
    let mut worst = 0.0f64;
    for i in 0..k {
        for j in i..k {
            let m: Moments = draws.rows().into_iter().map(|r| r[i] * r[j]).collect();
            let z = (m.mean() - target[[i, j]]).abs() / m.se();
            ensure(z <= 3.0, || format!("cov[{i},{j}] = {} vs {} ({z:.2} SE)", m.mean(), target[[i, j]]))?;
            worst = worst.max(z);
        }
    }
    let v: Moments = draws.column(k - 1).iter().map(|x| x * x).collect();
    ensure((v.mean() - 1.0).abs() <= 3.0 * v.se(), || format!("Var W(1,1) = {}", v.mean()))?;
    Ok(format!(
        "1e5 draws, worst entry {worst:.2} SE, Var W(1,1) = {:.4} +- {:.4}",
        v.mean(),
        v.se()
    ))
}

fn fclt_end_to_end() -> Outcome {
    let probes = vec![vec![0.0, 0.0, 0.0, 1.0], vec![1.0, -1.0, -1.0, 1.0], vec![1.0, 1.0, 1.0, 1.0]];
    let iid = FieldSpec::iid(InnovationLaw::Gaussian);
    let ma = FieldSpec::new(InnovationSpec::standard(InnovationLaw::Gaussian), ma_kernel());
    let sigma2 = ma.long_run_variance().map_err(err)?;
    ensure((sigma2 - 5.0625).abs() < 1e-12, || format!("long-run variance {sigma2}"))?;
    let mut lines = Vec::new();
    for (label, spec, seed) in [("iid", iid, 8u64), ("ma", ma, 9)] {
        let cfg = MCConfig::new(spec, 64, 5000, seed);
        let r = fdd_trend_test(&cfg, &fdd_points(), &probes).map_err(err)?;
        let failures: Vec<String> = r.failures().map(|e| e.name.clone()).collect();
        ensure(failures.is_empty(), || format!("{label}: failing estimates {failures:?}"))?;
        let trend = r.estimate("cov_error.trend").ok_or("missing trend estimate")?;
        lines.push(format!(
            "{label}: cov error {:.4} at n=64 -> {:.4} at n=128",
            trend.target.unwrap_or(f64::NAN),
            trend.value
        ));
    }
    Ok(lines.join("; "))
}

fn tightness() -> Outcome {
    let spec = FieldSpec::new(InnovationSpec::standard(InnovationLaw::Gaussian), ma_kernel());
    let lambdas = [1.0, 2.0, 4.0];
    let coarse = MCConfig::new(spec, 32, 2000, 10);
    let eps = calibrate_tightness(&coarse, &lambdas).map_err(err)?;
    let fine = coarse.at_size(64);
    let r = tightness_probe(&fine, &lambdas, eps, 1.0).map_err(err)?;
    let failures: Vec<String> = r.failures().map(|e| e.name.clone()).collect();
    ensure(failures.is_empty(), || format!("eps = {eps}: failing {failures:?}"))?;
    Ok(format!("eps = {eps:.4} from n=32; all offsets and lambdas pass at n=64"))
}

fn determinism() -> Outcome {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/iid.json");
    let tmp = tempfile::tempdir().map_err(err)?;
    let mut outcomes = Vec::new();
    for name in ["first", "second"] {
        let dir = serde_json::to_string(tmp.path().join(name).to_str().unwrap()).unwrap();
        let cfg = ExperimentConfig::load(&root, &[format!("output.dir={dir}")]).map_err(err)?;
        outcomes.push(run(&cfg).map_err(err)?);
    }
    let files: Vec<String> = outcomes[0]
        .manifest
        .files
        .iter()
        .map(|f| f.path.clone())
        .chain(["manifest.json".to_string()])
        .collect();
    for rel in &files {
        let a = std::fs::read(tmp.path().join("first").join(rel)).map_err(err)?;
        let b = std::fs::read(tmp.path().join("second").join(rel)).map_err(err)?;
        ensure(a == b, || format!("{rel} differs between runs"))?;
    }
    Ok(format!("full suite run twice, {} files byte-identical", files.len()))
}

fn negative_control() -> Outcome {
    let mut rows = vec![vec![0.0; 9]; 9];
    rows[0][0] = 1.0;
    rows[8][8] = 1.0;
    let spec = FieldSpec::new(
        InnovationSpec::standard(InnovationLaw::Gaussian),
        MaKernel::new(rows).unwrap(),
    );
    let mut cfg = MCConfig::new(spec, 8, 1000, 12);
    cfg.declared_m = Some(0);
    let dep = m_dependence_check(&cfg, 8).map_err(err)?;
    let cv = conditional_variance_check(&cfg, (8, 8)).map_err(err)?;
    ensure(!dep.passed(), || "m-dependence check did not flag the long-range kernel".into())?;
    ensure(!cv.passed(), || "conditional variance check did not flag the long-range kernel".into())?;
    let flagged: Vec<String> = dep.failures().chain(cv.failures()).map(|e| e.name.clone()).collect();
    Ok(format!("both checks fail as required; flagged {flagged:?}"))
}

/// Name, runtime budget in seconds, check.
type Criterion = (&'static str, u64, fn() -> Outcome);

#[test]
fn acceptance_criteria() {
    let criteria: [Criterion; 10] = [
        ("recovery identity", 10, recovery_identity),
        ("power-sum lemma", 30, power_sum_lemma),
        ("maximal inequality", 120, maximal_inequality),
        ("moduli", 60, moduli),
        ("metrics", 60, metrics),
        ("sheet reference", 30, sheet_reference),
        ("fclt end-to-end", 300, fclt_end_to_end),
        ("tightness probe", 120, tightness),
        ("determinism", 600, determinism),
        ("negative control", 600, negative_control),
    ];
    let mut failed = Vec::new();
    for (idx, (name, budget, f)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let over = elapsed > Duration::from_secs(budget);
        let (status, detail) = match (&result, over) {
            (Ok(d), false) => ("PASS", d.clone()),
            (Ok(d), true) => ("FAIL", format!("{d}; exceeded {budget} s budget")),
            (Err(e), _) => ("FAIL", e.clone()),
        };
        println!(
            "criterion {:>2} {status} [{name}] {:.1}s: {detail}",
            idx + 1,
            elapsed.as_secs_f64()
        );
        if status == "FAIL" {
            failed.push(idx + 1);
        }
    }
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}

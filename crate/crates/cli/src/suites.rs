//! Deterministic property suites over random inputs: the moduli
//! inequalities, the two metrics, and the power-sum bound.

use fieldclt_core::dspace::{
    billingsley_objective, modulus_w, modulus_wprime_with, skorohod_objective, CandidateSet,
    MeshRule, PiecewiseLinear, TimeChange, WPrimeSearch,
};
use fieldclt_core::martdecomp::power_sum_bound_check;
use fieldclt_core::rng::{replication_seed, seeded};
use fieldclt_core::{GridFunction, Interp, Result};
use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

/// Slack for floating-point comparisons of quantities of order one.
const ROUNDING: f64 = 1e-12;

/// Step function with i.i.d. uniform levels on `[−1, 1]`.
pub fn random_step<R: Rng>(n: usize, rng: &mut R) -> GridFunction {
    let values = Array2::from_shape_fn((n + 1, n + 1), |_| rng.random_range(-1.0..1.0));
    GridFunction::from_values(values).expect("finite levels")
}

/// Bilinear interpolant of i.i.d. uniform vertex values on `[−1, 1]`.
pub fn random_continuous<R: Rng>(n: usize, rng: &mut R) -> GridFunction {
    let values = Array2::from_shape_fn((n + 1, n + 1), |_| rng.random_range(-1.0..1.0));
    GridFunction::with_interp(values, Interp::Vertex).expect("finite levels")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModuliSummary {
    pub functions: usize,
    pub comparisons: usize,
    /// Step functions with `w′(δ) > w(2δ)`.
    pub step_violations: usize,
    /// Continuous functions with `w(δ) > 2w′(δ)`.
    pub continuous_violations: usize,
    /// Largest `w′(δ) − w(2δ)` seen; non-positive when the bound holds.
    pub step_excess: f64,
    /// Largest `w(δ) − 2w′(δ)` seen.
    pub continuous_excess: f64,
}

/// `w′(x,δ) ≤ w(x,2δ)` on random step functions and `w(x,δ) ≤ 2w′(x,δ)` on
/// random continuous ones, with `w′` computed exhaustively.
pub fn moduli_suite(n: usize, functions: usize, deltas: &[f64], seed: u64) -> Result<ModuliSummary> {
    let per_fn: Vec<Result<Vec<(f64, f64)>>> = (0..functions)
        .into_par_iter()
        .map(|idx| {
            let mut rng = seeded(replication_seed(seed, idx as u64));
            let step = random_step(n, &mut rng);
            let cont = random_continuous(n, &mut rng);
            deltas
                .iter()
                .map(|&d| {
                    let wp = modulus_wprime_with(&step, d, MeshRule::MinSide, WPrimeSearch::Exhaustive)?;
                    let w2 = modulus_w(&step, 2.0 * d)?;
                    let wc = modulus_w(&cont, d)?;
                    let wpc = modulus_wprime_with(&cont, d, MeshRule::MinSide, WPrimeSearch::Exhaustive)?;
                    Ok((wp.value - w2, wc - 2.0 * wpc.value))
                })
                .collect()
        })
        .collect();
    let mut s = ModuliSummary {
        functions,
        comparisons: 0,
        step_violations: 0,
        continuous_violations: 0,
        step_excess: f64::NEG_INFINITY,
        continuous_excess: f64::NEG_INFINITY,
    };
    for rows in per_fn {
        for (a, b) in rows? {
            s.comparisons += 1;
            s.step_violations += usize::from(a > ROUNDING);
            s.continuous_violations += usize::from(b > ROUNDING);
            s.step_excess = s.step_excess.max(a);
            s.continuous_excess = s.continuous_excess.max(b);
        }
    }
    Ok(s)
}

/// Random time changes whose log-slopes lie within about `±spread`.
pub fn near_identity(count: usize, spread: f64, seed: u64) -> CandidateSet {
    let mut rng = seeded(seed);
    let mut axis = || loop {
        let mut u: Vec<f64> = (0..3).map(|_| rng.random_range(0.05..0.95)).collect();
        u.sort_by(f64::total_cmp);
        let mut bounds = vec![0.0];
        bounds.extend(&u);
        bounds.push(1.0);
        let lengths: Vec<f64> = bounds
            .windows(2)
            .map(|w| (w[1] - w[0]) * rng.random_range(-spread..spread).exp())
            .collect();
        let total: f64 = lengths.iter().sum();
        let v: Vec<f64> = lengths
            .iter()
            .scan(0.0, |acc, l| {
                *acc += l / total;
                Some(*acc)
            })
            .take(u.len())
            .collect();
        if let Ok(l) = PiecewiseLinear::through(&u, &v) {
            break l;
        }
    };
    let mut set = CandidateSet::identity_only();
    for _ in 0..count {
        set.push(TimeChange::new(axis(), axis()));
    }
    set
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricSummary {
    pub pairs: usize,
    pub candidates: usize,
    /// Candidate evaluations with `d₀`-objective at most 1/4.
    pub qualifying: usize,
    /// Of those, evaluations at a non-identity time change.
    pub qualifying_non_identity: usize,
    /// Qualifying evaluations with `d`-objective above twice the `d₀`-objective.
    pub violations: usize,
    /// Largest `|objective(identity) − sup|x − y||` over pairs and both metrics.
    pub identity_error: f64,
}

/// A random step function of random amplitude and a perturbation of it.
/// Small amplitudes keep many time changes within `d₀`-objective 1/4.
fn random_pair(n: usize, seed: u64) -> (GridFunction, GridFunction) {
    let mut rng = seeded(seed);
    let amp = rng.random_range(0.02..1.0);
    let x = GridFunction::from_values(random_step(n, &mut rng).values() * amp).expect("finite levels");
    let noise = rng.random_range(0.0..0.3) * amp;
    let y = x.values().mapv(|v| v + noise * rng.random_range(-1.0..1.0));
    (x, GridFunction::from_values(y).expect("finite levels"))
}

/// Per-candidate comparison `d-objective ≤ 2 · d₀-objective` whenever the
/// `d₀`-objective is at most 1/4, and exactness of the identity candidate.
///
/// `candidates` must start with the identity.
pub fn metric_suite(n: usize, pairs: usize, candidates: &CandidateSet, seed: u64) -> Result<MetricSummary> {
    let first = candidates.get(0).map(TimeChange::is_identity).unwrap_or(false);
    if !first {
        return Err(fieldclt_core::Error::InvalidInput(
            "candidate set must start with the identity".into(),
        ));
    }
    let rows: Vec<Result<(usize, usize, usize, f64)>> = (0..pairs)
        .into_par_iter()
        .map(|idx| {
            let (x, y) = random_pair(n, replication_seed(seed, idx as u64));
            let sup = x.sup_distance(&y)?;
            let mut qualifying = 0;
            let mut non_identity = 0;
            let mut violations = 0;
            for tc in candidates.iter() {
                let d0 = billingsley_objective(&x, &y, tc);
                if d0 > 0.25 {
                    continue;
                }
                qualifying += 1;
                non_identity += usize::from(!tc.is_identity());
                let d = skorohod_objective(&x, &y, tc);
                violations += usize::from(d > 2.0 * d0 + ROUNDING);
            }
            let id = TimeChange::identity();
            let err = (skorohod_objective(&x, &y, &id) - sup)
                .abs()
                .max((billingsley_objective(&x, &y, &id) - sup).abs());
            Ok((qualifying, non_identity, violations, err))
        })
        .collect();
    let mut s = MetricSummary {
        pairs,
        candidates: candidates.len(),
        qualifying: 0,
        qualifying_non_identity: 0,
        violations: 0,
        identity_error: 0.0,
    };
    for r in rows {
        let (q, ni, v, e) = r?;
        s.qualifying += q;
        s.qualifying_non_identity += ni;
        s.violations += v;
        s.identity_error = s.identity_error.max(e);
    }
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerSumSummary {
    pub m: usize,
    pub p: f64,
    pub trials: usize,
    pub violations: usize,
    /// Largest `lhs / rhs` over the random arrays.
    pub max_ratio: f64,
    /// `|lhs − rhs| / rhs` on a constant array.
    pub constant_error: f64,
}

/// A random `(2m+1) × (2m+1)` complex array. A quarter of the draws share a
/// common phase, which pushes the ratio towards one.
fn random_array(m: usize, seed: u64) -> Array2<Complex64> {
    let mut rng = seeded(seed);
    let side = 2 * m + 1;
    let aligned = rng.random_range(0.0..1.0) < 0.25;
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    Array2::from_shape_fn((side, side), |_| {
        if aligned {
            Complex64::from_polar(rng.random_range(0.5..1.0), phase)
        } else {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        }
    })
}

/// The power-sum bound over `trials` random arrays plus a constant array.
pub fn power_sum_suite(m: usize, p: f64, trials: usize, seed: u64) -> Result<PowerSumSummary> {
    let ratios: Vec<Result<f64>> = (0..trials)
        .into_par_iter()
        .map(|idx| {
            let z = random_array(m, replication_seed(seed, idx as u64));
            let (lhs, rhs) = power_sum_bound_check(&z, p)?;
            Ok(if rhs > 0.0 { lhs / rhs } else { 0.0 })
        })
        .collect();
    let mut violations = 0;
    let mut max_ratio = 0.0f64;
    for r in ratios {
        let r = r?;
        violations += usize::from(r > 1.0 + ROUNDING);
        max_ratio = max_ratio.max(r);
    }
    let side = 2 * m + 1;
    let constant = Array2::from_elem((side, side), Complex64::new(0.6, -0.8));
    let (lhs, rhs) = power_sum_bound_check(&constant, p)?;
    Ok(PowerSumSummary {
        m,
        p,
        trials,
        violations,
        max_ratio,
        constant_error: (lhs - rhs).abs() / rhs,
    })
}

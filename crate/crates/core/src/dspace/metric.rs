//! Upper bounds for the Skorohod metric `d` and the Billingsley metric `d₀`.
//!
//! Both metrics are infima over time changes. Here the infimum is replaced by
//! a minimum over a finite [`CandidateSet`]; each candidate's objective is
//! evaluated exactly for step functions, so every reported value is a valid
//! upper bound on the true distance.

use rand::Rng;
use rayon::prelude::*;

use super::timechange::{timechange_norm, PiecewiseLinear, TimeChange};
use super::{level_index, GridFunction};
use crate::rng;
use crate::{Error, Result};

/// Largest coarse grid accepted by [`CandidateSet::exhaustive`].
pub const MAX_EXHAUSTIVE_GRID: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    items: Vec<TimeChange>,
}

fn subsets(points: &[f64]) -> Vec<Vec<f64>> {
    let k = points.len();
    let mut all: Vec<Vec<f64>> = (0u32..(1 << k))
        .map(|mask| (0..k).filter(|i| mask >> i & 1 == 1).map(|i| points[i]).collect())
        .collect();
    all.sort_by(|a, b| {
        a.len()
            .cmp(&b.len())
            .then_with(|| a.partial_cmp(b).expect("finite knots"))
    });
    all
}

impl CandidateSet {
    pub fn identity_only() -> Self {
        Self {
            items: vec![TimeChange::identity()],
        }
    }

    /// Every per-axis map sending an increasing `s`-subset of the interior
    /// grid `{1/(k+1), …, k/(k+1)}` onto another `s`-subset, for all `s`.
    /// Identity comes first and the set is closed under inversion.
    pub fn exhaustive(k: usize) -> Result<Self> {
        if k == 0 || k > MAX_EXHAUSTIVE_GRID {
            return Err(Error::invalid(format!(
                "exhaustive candidate grid must have 1..={MAX_EXHAUSTIVE_GRID} points, got {k}"
            )));
        }
        let grid: Vec<f64> = (1..=k).map(|j| j as f64 / (k + 1) as f64).collect();
        let subs = subsets(&grid);
        let mut axis = Vec::new();
        for u in &subs {
            for v in subs.iter().filter(|v| v.len() == u.len()) {
                axis.push(PiecewiseLinear::through(u, v)?);
            }
        }
        let mut items = Vec::with_capacity(axis.len() * axis.len());
        for a in &axis {
            for b in &axis {
                items.push(TimeChange::new(a.clone(), b.clone()));
            }
        }
        Ok(Self { items })
    }

    /// Identity plus `count` random monotone maps with `knots` interior knots
    /// per axis, and their inverses.
    pub fn random(count: usize, knots: usize, seed: u64) -> Self {
        let mut rng = rng::seeded(seed);
        let mut axis = || loop {
            let mut u: Vec<f64> = (0..knots).map(|_| rng.random_range(0.01..0.99)).collect();
            let mut v: Vec<f64> = (0..knots).map(|_| rng.random_range(0.01..0.99)).collect();
            u.sort_by(f64::total_cmp);
            v.sort_by(f64::total_cmp);
            if let Ok(l) = PiecewiseLinear::through(&u, &v) {
                break l;
            }
        };
        let mut items = vec![TimeChange::identity()];
        for _ in 0..count {
            let tc = TimeChange::new(axis(), axis());
            items.push(tc.inverted());
            items.push(tc);
        }
        Self { items }
    }

    pub fn push(&mut self, tc: TimeChange) {
        self.items.push(tc);
    }

    pub fn extend(&mut self, other: CandidateSet) {
        self.items.extend(other.items);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &TimeChange> {
        self.items.iter()
    }

    pub fn get(&self, i: usize) -> Option<&TimeChange> {
        self.items.get(i)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricBound {
    pub value: f64,
    /// Index of the achieving candidate (first one on ties).
    pub index: usize,
    pub timechange: TimeChange,
}

/// Evaluation points on one axis where both `x` and `y∘λ` are constant
/// between consecutive breakpoints, plus the edge `t = 1`.
fn axis_points(nx: usize, ny: usize, lambda: &PiecewiseLinear) -> Vec<(usize, usize)> {
    let mut br: Vec<f64> = (0..=nx).map(|a| a as f64 / nx as f64).collect();
    br.extend((0..=ny).map(|b| lambda.inverse(b as f64 / ny as f64)));
    br.sort_by(f64::total_cmp);
    br.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
    let mut pts: Vec<(usize, usize)> = br
        .windows(2)
        .map(|w| {
            let t = 0.5 * (w[0] + w[1]);
            (level_index(nx, t), level_index(ny, lambda.apply(t)))
        })
        .collect();
    pts.push((nx, ny));
    pts.sort_unstable();
    pts.dedup();
    pts
}

/// `sup_t |x(t) − y(λ(t))|`.
pub fn sup_distance_after(x: &GridFunction, y: &GridFunction, lambda: &TimeChange) -> f64 {
    let p1 = axis_points(x.n(), y.n(), &lambda.axis1);
    let p2 = axis_points(x.n(), y.n(), &lambda.axis2);
    let mut best = 0.0f64;
    for &(a1, b1) in &p1 {
        for &(a2, b2) in &p2 {
            best = best.max((x.level(a1, a2) - y.level(b1, b2)).abs());
        }
    }
    best
}

/// `max(sup‖λ(t) − t‖, sup|x(t) − y(λ(t))|)`.
pub fn skorohod_objective(x: &GridFunction, y: &GridFunction, lambda: &TimeChange) -> f64 {
    lambda.displacement().max(sup_distance_after(x, y, lambda))
}

/// `max(‖λ‖, sup|x(t) − y(λ(t))|)`.
pub fn billingsley_objective(x: &GridFunction, y: &GridFunction, lambda: &TimeChange) -> f64 {
    timechange_norm(lambda).max(sup_distance_after(x, y, lambda))
}

fn minimize(
    candidates: &CandidateSet,
    objective: impl Fn(&TimeChange) -> f64 + Sync + Send,
) -> Result<MetricBound> {
    if candidates.is_empty() {
        return Err(Error::invalid("candidate set is empty"));
    }
    let values: Vec<f64> = candidates.items.par_iter().map(objective).collect();
    let (index, &value) = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1).then(a.0.cmp(&b.0)))
        .expect("non-empty");
    Ok(MetricBound {
        value,
        index,
        timechange: candidates.items[index].clone(),
    })
}

/// Upper bound on the Skorohod distance `d(x, y)`.
pub fn skorohod_d_upper(
    x: &GridFunction,
    y: &GridFunction,
    candidates: &CandidateSet,
) -> Result<MetricBound> {
    minimize(candidates, |l| skorohod_objective(x, y, l))
}

/// Upper bound on the Billingsley distance `d₀(x, y)`.
pub fn billingsley_d0_upper(
    x: &GridFunction,
    y: &GridFunction,
    candidates: &CandidateSet,
) -> Result<MetricBound> {
    minimize(candidates, |l| billingsley_objective(x, y, l))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn step_at(n: usize, at: f64) -> GridFunction {
        GridFunction::from_fn(n, |a, b| if a >= at - 1e-12 && b >= at - 1e-12 { 1.0 } else { 0.0 })
    }

    fn random_step(n: usize, seed: u64) -> GridFunction {
        let mut rng = rng::seeded(seed);
        let v = ndarray::Array2::from_shape_fn((n + 1, n + 1), |_| rng.random_range(-1.0..1.0));
        GridFunction::from_values(v).unwrap()
    }

    #[test]
    fn identical_functions_are_at_distance_zero() {
        let x = random_step(6, 1);
        let c = CandidateSet::identity_only();
        assert_eq!(skorohod_d_upper(&x, &x, &c).unwrap().value, 0.0);
        assert_eq!(billingsley_d0_upper(&x, &x, &c).unwrap().value, 0.0);
    }

    #[test]
    fn identity_candidate_is_sup_norm() {
        for seed in 0..10 {
            let x = random_step(7, seed);
            let y = random_step(7, 50 + seed);
            let d = skorohod_d_upper(&x, &y, &CandidateSet::identity_only()).unwrap();
            assert_eq!(d.value, x.sup_distance(&y).unwrap());
        }
    }

    #[test]
    fn shifted_steps_align_under_time_change() {
        let x = step_at(10, 0.5);
        let y = step_at(10, 0.6);
        let l = PiecewiseLinear::through(&[0.5], &[0.6]).unwrap();
        let tc = TimeChange::new(l.clone(), l);
        assert_eq!(sup_distance_after(&x, &y, &tc), 0.0);
        assert!(skorohod_objective(&x, &y, &tc) <= 0.1 + 1e-15);

        let mut c = CandidateSet::identity_only();
        c.push(tc.clone());
        let d0 = billingsley_d0_upper(&x, &y, &c).unwrap();
        assert_eq!(d0.index, 1);
        let expect = (0.6f64 / 0.5).ln().abs().max((0.4f64 / 0.5).ln().abs());
        assert!((d0.value - expect).abs() < 1e-12);
        // Without the time change the functions differ by a full jump.
        assert_eq!(
            skorohod_d_upper(&x, &y, &CandidateSet::identity_only()).unwrap().value,
            1.0
        );
    }

    #[test]
    fn symmetric_when_closed_under_inverse() {
        let c = CandidateSet::exhaustive(3).unwrap();
        for seed in 0..5 {
            let x = random_step(5, seed);
            let y = random_step(5, 10 + seed);
            let a = skorohod_d_upper(&x, &y, &c).unwrap().value;
            let b = skorohod_d_upper(&y, &x, &c).unwrap().value;
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn more_candidates_never_hurt() {
        let x = random_step(6, 3);
        let y = random_step(6, 4);
        let small = CandidateSet::exhaustive(2).unwrap();
        let mut big = small.clone();
        big.extend(CandidateSet::random(20, 2, 7));
        assert!(skorohod_d_upper(&x, &y, &big).unwrap().value <= skorohod_d_upper(&x, &y, &small).unwrap().value);
        assert!(
            billingsley_d0_upper(&x, &y, &big).unwrap().value
                <= billingsley_d0_upper(&x, &y, &small).unwrap().value
        );
    }

    #[test]
    fn exhaustive_set_shape() {
        let c = CandidateSet::exhaustive(4).unwrap();
        // C(8,4) = 70 maps per axis.
        assert_eq!(c.len(), 70 * 70);
        assert!(c.get(0).unwrap().is_identity());
        assert!(CandidateSet::exhaustive(7).is_err());
    }

    #[test]
    fn sup_after_matches_dense_evaluation() {
        let x = random_step(5, 21);
        let y = random_step(7, 22);
        let c = CandidateSet::random(5, 2, 3);
        let mut agree = 0;
        for tc in c.iter() {
            let exact = sup_distance_after(&x, &y, tc);
            let mut dense = 0.0f64;
            for i in 0..=700 {
                for j in 0..=700 {
                    let (t1, t2) = (i as f64 / 700.0, j as f64 / 700.0);
                    let (l1, l2) = tc.apply(t1, t2);
                    dense = dense.max((x.eval(t1, t2) - y.eval(l1, l2)).abs());
                }
            }
            // Dense sampling may miss thin slivers but never exceeds the sup.
            assert!(dense <= exact + 1e-12);
            if exact - dense < 1e-12 {
                agree += 1;
            }
        }
        assert!(agree * 4 >= c.len() * 3, "{agree} of {}", c.len());
    }
}

//! Coordinate-wise time changes `λ(t₁,t₂) = (λ₁(t₁), λ₂(t₂))`.

use crate::{Error, Result};

/// Strictly increasing piecewise-linear bijection of `[0,1]` given by knots.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinear {
    knots: Vec<(f64, f64)>,
}

impl PiecewiseLinear {
    /// Knots must start at `(0,0)`, end at `(1,1)` and increase strictly in
    /// both coordinates.
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.len() < 2 || knots[0] != (0.0, 0.0) || *knots.last().unwrap() != (1.0, 1.0) {
            return Err(Error::invalid("time change knots must run from (0,0) to (1,1)"));
        }
        for (i, w) in knots.windows(2).enumerate() {
            if !(w[1].0 > w[0].0 && w[1].1 > w[0].1) {
                return Err(Error::ZeroLengthSegment(i));
            }
        }
        Ok(Self { knots })
    }

    pub fn identity() -> Self {
        Self {
            knots: vec![(0.0, 0.0), (1.0, 1.0)],
        }
    }

    /// Map through interior knots `u[i] ↦ v[i]`.
    pub fn through(u: &[f64], v: &[f64]) -> Result<Self> {
        if u.len() != v.len() {
            return Err(Error::invalid("knot domain and image lengths differ"));
        }
        let mut knots = vec![(0.0, 0.0)];
        knots.extend(u.iter().copied().zip(v.iter().copied()));
        knots.push((1.0, 1.0));
        Self::new(knots)
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    fn interpolate(pts: &[(f64, f64)], t: f64, forward: bool) -> f64 {
        let key = |p: &(f64, f64)| if forward { p.0 } else { p.1 };
        let t = t.clamp(0.0, 1.0);
        let idx = pts.partition_point(|p| key(p) <= t).clamp(1, pts.len() - 1);
        let (a, b) = (pts[idx - 1], pts[idx]);
        let (x0, y0, x1, y1) = if forward {
            (a.0, a.1, b.0, b.1)
        } else {
            (a.1, a.0, b.1, b.0)
        };
        if t >= x1 {
            return y1;
        }
        y0 + (t - x0) * (y1 - y0) / (x1 - x0)
    }

    pub fn apply(&self, t: f64) -> f64 {
        Self::interpolate(&self.knots, t, true)
    }

    pub fn inverse(&self, y: f64) -> f64 {
        Self::interpolate(&self.knots, y, false)
    }

    pub fn inverted(&self) -> Self {
        Self {
            knots: self.knots.iter().map(|&(a, b)| (b, a)).collect(),
        }
    }

    /// Largest `|log slope|` over segments, equal to
    /// `sup_{t>s} |log((λt − λs)/(t − s))|` for piecewise-linear maps.
    pub fn max_abs_log_slope(&self) -> f64 {
        self.knots
            .windows(2)
            .map(|w| ((w[1].1 - w[0].1) / (w[1].0 - w[0].0)).ln().abs())
            .fold(0.0, f64::max)
    }

    /// `sup_t |λ(t) − t|`, attained at a knot.
    pub fn max_displacement(&self) -> f64 {
        self.knots
            .iter()
            .map(|&(a, b)| (b - a).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeChange {
    pub axis1: PiecewiseLinear,
    pub axis2: PiecewiseLinear,
}

impl TimeChange {
    pub fn new(axis1: PiecewiseLinear, axis2: PiecewiseLinear) -> Self {
        Self { axis1, axis2 }
    }

    pub fn identity() -> Self {
        Self::new(PiecewiseLinear::identity(), PiecewiseLinear::identity())
    }

    pub fn apply(&self, t1: f64, t2: f64) -> (f64, f64) {
        (self.axis1.apply(t1), self.axis2.apply(t2))
    }

    pub fn inverted(&self) -> Self {
        Self::new(self.axis1.inverted(), self.axis2.inverted())
    }

    /// `sup_t ‖λ(t) − t‖∞`.
    pub fn displacement(&self) -> f64 {
        self.axis1.max_displacement().max(self.axis2.max_displacement())
    }

    pub fn is_identity(&self) -> bool {
        self.axis1.knots().iter().all(|&(a, b)| a == b) && self.axis2.knots().iter().all(|&(a, b)| a == b)
    }
}

/// `max_i ‖λᵢ‖` with `‖λᵢ‖ = sup |log slope|`.
pub fn timechange_norm(lambda: &TimeChange) -> f64 {
    lambda
        .axis1
        .max_abs_log_slope()
        .max(lambda.axis2.max_abs_log_slope())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn identity_has_zero_norm() {
        assert_eq!(timechange_norm(&TimeChange::identity()), 0.0);
    }

    #[test]
    fn two_segment_norm() {
        // Slope 2 on [0, 0.25], then (1 − 0.5)/(0.75) on the rest.
        let l = PiecewiseLinear::through(&[0.25], &[0.5]).unwrap();
        let tc = TimeChange::new(l, PiecewiseLinear::identity());
        assert!((timechange_norm(&tc) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn rejects_degenerate_knots() {
        assert!(matches!(
            PiecewiseLinear::through(&[0.5, 0.5], &[0.3, 0.6]),
            Err(Error::ZeroLengthSegment(1))
        ));
        assert!(PiecewiseLinear::through(&[0.4, 0.6], &[0.7, 0.6]).is_err());
        assert!(PiecewiseLinear::new(vec![(0.0, 0.0), (0.9, 1.0)]).is_err());
    }

    #[test]
    fn inverse_round_trips() {
        let l = PiecewiseLinear::through(&[0.2, 0.7], &[0.35, 0.6]).unwrap();
        for k in 0..=100 {
            let t = k as f64 / 100.0;
            assert!((l.inverse(l.apply(t)) - t).abs() < 1e-12);
            assert!((l.inverted().apply(t) - l.inverse(t)).abs() < 1e-15);
        }
        assert_eq!(l.apply(0.2), 0.35);
        assert_eq!(l.apply(1.0), 1.0);
    }

    #[test]
    fn norm_matches_dense_pair_sup() {
        let mut rng = crate::rng::seeded(4);
        for _ in 0..20 {
            let mut u: Vec<f64> = (0..3).map(|_| rng.random_range(0.05..0.95)).collect();
            let mut v: Vec<f64> = (0..3).map(|_| rng.random_range(0.05..0.95)).collect();
            u.sort_by(f64::total_cmp);
            v.sort_by(f64::total_cmp);
            let l = PiecewiseLinear::through(&u, &v).unwrap();
            // Dense sampling includes the knots, where the slope changes.
            let mut grid: Vec<f64> = (0..=400).map(|k| k as f64 / 400.0).collect();
            grid.extend(&u);
            grid.sort_by(f64::total_cmp);
            let mut dense = 0.0f64;
            for w in grid.windows(2) {
                if w[1] - w[0] > 1e-12 {
                    let r = (l.apply(w[1]) - l.apply(w[0])) / (w[1] - w[0]);
                    dense = dense.max(r.ln().abs());
                }
            }
            assert!((dense - l.max_abs_log_slope()).abs() < 1e-9);
        }
    }
}

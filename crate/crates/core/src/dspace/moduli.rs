//! The modulus of continuity `w(x, δ)` and the Skorohod modulus `w′(x, δ)`.

use rand::Rng;

use super::{GridFunction, Interp};
use crate::rng;
use crate::{Error, Result};

/// Largest resolution for which [`WPrimeSearch::Auto`] searches exactly.
pub const EXHAUSTIVE_MAX_N: usize = 16;

const SNAP: f64 = 1e-9;

/// Which side constraint defines the admissible partitions `G_δ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MeshRule {
    /// Every cell side is longer than `δ`.
    #[default]
    MinSide,
    /// Every cell has at least one side longer than `δ`.
    MaxSide,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WPrimeSearch {
    /// Exact for `n ≤ EXHAUSTIVE_MAX_N`, coordinate descent above.
    #[default]
    Auto,
    Exhaustive,
    CoordinateDescent { restarts: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct WPrime {
    pub value: f64,
    /// `false` when the value is only an upper bound from a heuristic search.
    pub exact: bool,
    /// Interior cut indices on each axis; a cut `c` sits at `c/n`.
    pub cuts1: Vec<usize>,
    pub cuts2: Vec<usize>,
}

fn check_delta(delta: f64) -> Result<()> {
    if delta >= 1.0 {
        return Err(Error::NoAdmissiblePartition(delta));
    }
    if !(delta > 0.0) {
        return Err(Error::invalid(format!("delta must lie in (0, 1), got {delta}")));
    }
    Ok(())
}

/// Largest per-axis level distance `r` such that two levels `r` apart contain
/// points closer than `δ`.
fn reach(x: &GridFunction, delta: f64) -> usize {
    let nd = x.n() as f64 * delta;
    let limit = match x.interp() {
        // Levels a < b of a step function come within (b − a − 1)/n.
        Interp::Step => nd + 1.0,
        Interp::Vertex => nd,
    };
    ((limit - SNAP).ceil().max(1.0) as usize - 1).min(x.n())
}

/// Sliding-window max (or min) along both axes with radius `r`.
fn box_extreme(x: &GridFunction, r: usize, pick: fn(f64, f64) -> f64, init: f64) -> Vec<f64> {
    let size = x.n() + 1;
    let v = x.values();
    let mut rows = vec![init; size * size];
    for a in 0..size {
        for b in 0..size {
            let lo = b.saturating_sub(r);
            let hi = (b + r).min(size - 1);
            rows[a * size + b] = (lo..=hi).map(|c| v[[a, c]]).fold(init, pick);
        }
    }
    let mut out = vec![init; size * size];
    for a in 0..size {
        let lo = a.saturating_sub(r);
        let hi = (a + r).min(size - 1);
        for b in 0..size {
            out[a * size + b] = (lo..=hi).map(|c| rows[c * size + b]).fold(init, pick);
        }
    }
    out
}

/// `w(x, δ) = sup_{‖s−t‖∞ < δ} |x(s) − x(t)|`, exact on the stored grid.
pub fn modulus_w(x: &GridFunction, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!("delta must lie in (0, 1), got {delta}")));
    }
    let r = reach(x, delta);
    let hi = box_extreme(x, r, f64::max, f64::NEG_INFINITY);
    let lo = box_extreme(x, r, f64::min, f64::INFINITY);
    let size = x.n() + 1;
    let mut best = 0.0f64;
    for a in 0..size {
        for b in 0..size {
            let v = x.level(a, b);
            let i = a * size + b;
            best = best.max(hi[i] - v).max(v - lo[i]);
        }
    }
    Ok(best)
}

/// Minimal cell width, in grid units, of an admissible partition cell.
fn min_units(n: usize, delta: f64) -> usize {
    (n as f64 * delta + SNAP).floor() as usize + 1
}

/// Level range `[lo, hi]` covered by the cell between cut positions `p < q`.
#[inline]
fn cell_levels(interp: Interp, n: usize, p: usize, q: usize) -> (usize, usize) {
    match interp {
        Interp::Step if q < n => (p, q - 1),
        _ => (p, q),
    }
}

fn cells_of(cuts: &[usize], n: usize) -> Vec<(usize, usize)> {
    let mut bounds = Vec::with_capacity(cuts.len() + 2);
    bounds.push(0);
    bounds.extend_from_slice(cuts);
    bounds.push(n);
    bounds.windows(2).map(|w| (w[0], w[1])).collect()
}

/// Axis view: `get(fixed, free)` reads the function with the fixed axis first.
struct Axis<'a> {
    x: &'a GridFunction,
    transposed: bool,
}

impl Axis<'_> {
    #[inline]
    fn get(&self, fixed: usize, free: usize) -> f64 {
        if self.transposed {
            self.x.level(free, fixed)
        } else {
            self.x.level(fixed, free)
        }
    }
}

/// Optimal partition of the free axis given the cells of the fixed axis.
///
/// Minimizes the largest within-cell oscillation subject to every free-axis
/// cell spanning at least `width` grid units. Returns `(cost, cuts)`.
fn best_free_partition(axis: &Axis, fixed_cuts: &[usize], width: usize) -> (f64, Vec<usize>) {
    let x = axis.x;
    let n = x.n();
    let interp = x.interp();
    let fixed_cells = cells_of(fixed_cuts, n);
    // Per fixed cell and free level: extremes over the fixed cell's levels.
    let k = fixed_cells.len();
    let mut cmax = vec![f64::NEG_INFINITY; k * (n + 1)];
    let mut cmin = vec![f64::INFINITY; k * (n + 1)];
    for (c, &(p, q)) in fixed_cells.iter().enumerate() {
        let (lo, hi) = cell_levels(interp, n, p, q);
        for f in 0..=n {
            for l in lo..=hi {
                let v = axis.get(l, f);
                cmax[c * (n + 1) + f] = cmax[c * (n + 1) + f].max(v);
                cmin[c * (n + 1) + f] = cmin[c * (n + 1) + f].min(v);
            }
        }
    }

    let mut best = vec![f64::INFINITY; n + 1];
    let mut from = vec![usize::MAX; n + 1];
    best[0] = 0.0;
    let mut run_max = vec![f64::NEG_INFINITY; k];
    let mut run_min = vec![f64::INFINITY; k];
    for p in 0..n {
        if !best[p].is_finite() {
            continue;
        }
        run_max.fill(f64::NEG_INFINITY);
        run_min.fill(f64::INFINITY);
        let mut next_level = p;
        for q in (p + 1)..=n {
            let (_, hi) = cell_levels(interp, n, p, q);
            for l in next_level..=hi {
                for c in 0..k {
                    run_max[c] = run_max[c].max(cmax[c * (n + 1) + l]);
                    run_min[c] = run_min[c].min(cmin[c * (n + 1) + l]);
                }
            }
            next_level = next_level.max(hi + 1);
            if q - p < width {
                continue;
            }
            let osc = (0..k).map(|c| run_max[c] - run_min[c]).fold(0.0, f64::max);
            let cand = best[p].max(osc);
            if cand < best[q] {
                best[q] = cand;
                from[q] = p;
            }
        }
    }
    let mut cuts = Vec::new();
    let mut q = n;
    while q > 0 {
        let p = from[q];
        if p > 0 {
            cuts.push(p);
        }
        q = p;
    }
    cuts.reverse();
    (best[n], cuts)
}

/// All cut sets whose cells span at least `width` grid units.
fn compositions(n: usize, width: usize) -> Vec<Vec<usize>> {
    fn rec(pos: usize, n: usize, width: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        // Close the partition here.
        if n - pos >= width {
            out.push(cur.clone());
        }
        let mut next = pos + width;
        while next + width <= n {
            cur.push(next);
            rec(next, n, width, cur, out);
            cur.pop();
            next += 1;
        }
    }
    let mut out = Vec::new();
    rec(0, n, width, &mut Vec::new(), &mut out);
    out
}

fn random_composition<R: Rng>(rng: &mut R, n: usize, width: usize) -> Vec<usize> {
    let mut cuts = Vec::new();
    let mut pos = 0;
    while n - pos >= 2 * width && rng.random_bool(0.7) {
        pos += rng.random_range(width..=(n - pos - width));
        cuts.push(pos);
    }
    cuts
}

/// One constrained case: axis 1 cells need `w1` units, axis 2 cells `w2`.
#[derive(Clone, Copy)]
struct Case {
    w1: usize,
    w2: usize,
}

fn exhaustive_case(x: &GridFunction, case: Case) -> WPrime {
    let n = x.n();
    let rows = Axis {
        x,
        transposed: false,
    };
    let cols = Axis {
        x,
        transposed: true,
    };
    // Enumerate the more constrained axis, optimize the other exactly.
    let (enum_width, free_width, enum_is_axis1) = if case.w1 >= case.w2 {
        (case.w1, case.w2, true)
    } else {
        (case.w2, case.w1, false)
    };
    let mut best = WPrime {
        value: f64::INFINITY,
        exact: true,
        cuts1: vec![],
        cuts2: vec![],
    };
    for cuts in compositions(n, enum_width) {
        let axis = if enum_is_axis1 { &rows } else { &cols };
        let (cost, free) = best_free_partition(axis, &cuts, free_width);
        if cost < best.value {
            best.value = cost;
            if enum_is_axis1 {
                best.cuts1 = cuts;
                best.cuts2 = free;
            } else {
                best.cuts1 = free;
                best.cuts2 = cuts;
            }
        }
    }
    best
}

fn descent_case(x: &GridFunction, case: Case, restarts: usize, seed: u64) -> WPrime {
    let n = x.n();
    let rows = Axis {
        x,
        transposed: false,
    };
    let cols = Axis {
        x,
        transposed: true,
    };
    let mut rng = rng::seeded(seed);
    let mut best = WPrime {
        value: f64::INFINITY,
        exact: false,
        cuts1: vec![],
        cuts2: vec![],
    };
    for restart in 0..restarts.max(1) {
        let mut cuts1 = if restart == 0 {
            // Regular partition with the narrowest admissible cells.
            (1..n / case.w1).map(|k| k * case.w1).collect()
        } else {
            random_composition(&mut rng, n, case.w1)
        };
        let mut value = f64::INFINITY;
        let mut cuts2;
        loop {
            let (_, c2) = best_free_partition(&rows, &cuts1, case.w2);
            cuts2 = c2;
            let (v, c1) = best_free_partition(&cols, &cuts2, case.w1);
            if v < value {
                value = v;
                cuts1 = c1;
            } else {
                break;
            }
        }
        if value < best.value {
            best.value = value;
            best.cuts1 = cuts1;
            best.cuts2 = cuts2;
        }
    }
    best
}

/// `w′(x, δ)` with the default mesh rule and search.
pub fn modulus_wprime(x: &GridFunction, delta: f64) -> Result<WPrime> {
    modulus_wprime_with(x, delta, MeshRule::default(), WPrimeSearch::default())
}

/// Infimum over grid-aligned product partitions in `G_δ` of the largest
/// within-cell oscillation.
pub fn modulus_wprime_with(
    x: &GridFunction,
    delta: f64,
    rule: MeshRule,
    search: WPrimeSearch,
) -> Result<WPrime> {
    check_delta(delta)?;
    let n = x.n();
    let w = min_units(n, delta);
    if w > n {
        return Err(Error::NoAdmissiblePartition(delta));
    }
    let cases: Vec<Case> = match rule {
        MeshRule::MinSide => vec![Case { w1: w, w2: w }],
        MeshRule::MaxSide => vec![Case { w1: w, w2: 1 }, Case { w1: 1, w2: w }],
    };
    let exhaustive = match search {
        WPrimeSearch::Auto => n <= EXHAUSTIVE_MAX_N,
        WPrimeSearch::Exhaustive => true,
        WPrimeSearch::CoordinateDescent { .. } => false,
    };
    let (restarts, seed) = match search {
        WPrimeSearch::CoordinateDescent { restarts, seed } => (restarts, seed),
        _ => (8, 0),
    };
    let best = cases
        .into_iter()
        .map(|case| {
            if exhaustive {
                exhaustive_case(x, case)
            } else {
                descent_case(x, case, restarts, seed)
            }
        })
        .min_by(|a, b| a.value.total_cmp(&b.value))
        .expect("at least one case");
    Ok(best)
}

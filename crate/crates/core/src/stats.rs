//! Small statistical toolbox: running moments, Kolmogorov-Smirnov and an
//! energy-distance permutation test.

use rand::seq::SliceRandom;
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;

use crate::rng;

/// Welford accumulator for mean and variance.
#[derive(Debug, Clone, Copy, Default)]
pub struct Moments {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    /// Chan et al. parallel combination.
    pub fn merge(&mut self, other: &Moments) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let delta = other.mean - self.mean;
        self.mean += delta * other.count as f64 / n;
        self.m2 += other.m2 + delta * delta * self.count as f64 * other.count as f64 / n;
        self.count += other.count;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    /// Standard error of the mean.
    pub fn se(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }
}

impl FromIterator<f64> for Moments {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut m = Moments::new();
        for x in iter {
            m.push(x);
        }
        m
    }
}

/// Sample mean and its standard error.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let m: Moments = xs.iter().copied().collect();
    (m.mean(), m.se())
}

/// Sample covariance of paired draws and its standard error.
///
/// The error is that of the mean of centred cross products.
pub fn covariance_se(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    assert_eq!(xs.len(), ys.len(), "paired samples must have equal length");
    let n = xs.len();
    if n < 2 {
        return (0.0, 0.0);
    }
    let (mx, _) = mean_se(xs);
    let (my, _) = mean_se(ys);
    let prods: Moments = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).collect();
    let scale = n as f64 / (n - 1) as f64;
    (prods.mean() * scale, prods.se() * scale)
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// Two-sided z multiplier for `k` simultaneous tests at family-wise level `alpha`.
pub fn bonferroni_z(alpha: f64, k: usize) -> f64 {
    normal_quantile(1.0 - alpha / (2.0 * k.max(1) as f64))
}

/// Survival function of the Kolmogorov distribution, `P(K > lambda)`.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // Small-argument form converges much faster here.
        let c = std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let s: f64 = (1..=20)
            .map(|k| {
                let odd = (2 * k - 1) as f64;
                (-odd * odd * c).exp()
            })
            .sum();
        (1.0 - (std::f64::consts::TAU).sqrt() / lambda * s).clamp(0.0, 1.0)
    } else {
        let s: f64 = (1..=100)
            .map(|k| {
                let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                let kf = k as f64;
                sign * (-2.0 * kf * kf * lambda * lambda).exp()
            })
            .sum();
        (2.0 * s).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub critical_value: f64,
    pub alpha: f64,
}

impl KsResult {
    pub fn rejected(&self) -> bool {
        self.statistic > self.critical_value
    }
}

fn ks_p_value(n: usize, d: f64) -> f64 {
    let sn = (n as f64).sqrt();
    kolmogorov_survival((sn + 0.12 + 0.11 / sn) * d)
}

/// Critical value of the one-sample KS statistic at level `alpha`
/// (Stephens' finite-sample correction of the asymptotic law).
pub fn ks_critical_value(n: usize, alpha: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if ks_p_value(n, mid) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// One-sample Kolmogorov-Smirnov test of `sample` against `cdf`.
pub fn ks_test(sample: &[f64], cdf: impl Fn(f64) -> f64, alpha: f64) -> KsResult {
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    let nf = n as f64;
    let statistic = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / nf).max((i + 1) as f64 / nf - f)
        })
        .fold(0.0, f64::max);
    KsResult {
        statistic,
        p_value: ks_p_value(n, statistic),
        critical_value: ks_critical_value(n, alpha),
        alpha,
    }
}

/// KS test against a centred normal law with the given variance.
pub fn ks_normal(sample: &[f64], variance: f64, alpha: f64) -> KsResult {
    let sd = variance.sqrt();
    ks_test(sample, |x| normal_cdf(x / sd), alpha)
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn energy_statistic(dist: &[f64], total: usize, labels: &[bool]) -> f64 {
    let (mut xy, mut xx, mut yy) = (0.0, 0.0, 0.0);
    let (mut nxy, mut nxx, mut nyy) = (0usize, 0usize, 0usize);
    for i in 0..total {
        for j in (i + 1)..total {
            let d = dist[i * total + j];
            match (labels[i], labels[j]) {
                (true, true) => {
                    xx += d;
                    nxx += 1;
                }
                (false, false) => {
                    yy += d;
                    nyy += 1;
                }
                _ => {
                    xy += d;
                    nxy += 1;
                }
            }
        }
    }
    2.0 * xy / nxy as f64 - xx / nxx as f64 - yy / nyy as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyTest {
    pub statistic: f64,
    pub p_value: f64,
}

/// Two-sample energy-distance test with a permutation null.
pub fn energy_test(x: &[Vec<f64>], y: &[Vec<f64>], permutations: usize, seed: u64) -> EnergyTest {
    assert!(x.len() >= 2 && y.len() >= 2, "energy test needs two points per sample");
    let pooled: Vec<&[f64]> = x.iter().chain(y).map(|v| v.as_slice()).collect();
    let total = pooled.len();
    let mut dist = vec![0.0; total * total];
    for i in 0..total {
        for j in (i + 1)..total {
            dist[i * total + j] = euclid(pooled[i], pooled[j]);
        }
    }
    let mut labels: Vec<bool> = (0..total).map(|i| i < x.len()).collect();
    let observed = energy_statistic(&dist, total, &labels);
    let mut rng = rng::seeded(seed);
    let mut exceed = 0usize;
    for _ in 0..permutations {
        labels.shuffle(&mut rng);
        if energy_statistic(&dist, total, &labels) >= observed {
            exceed += 1;
        }
    }
    EnergyTest {
        statistic: observed,
        p_value: (1 + exceed) as f64 / (1 + permutations) as f64,
    }
}

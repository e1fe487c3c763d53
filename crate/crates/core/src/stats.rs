//! Small statistics helpers shared by the estimators.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
}

impl Estimate {
    /// Proportion estimate with binomial standard error `sqrt(p(1-p)/n)`.
    pub fn binomial(successes: usize, trials: usize) -> Self {
        if trials == 0 {
            return Estimate { mean: f64::NAN, stderr: f64::NAN, samples: 0 };
        }
        let p = successes as f64 / trials as f64;
        Estimate {
            mean: p,
            stderr: (p * (1.0 - p) / trials as f64).sqrt(),
            samples: trials,
        }
    }

    /// Sample mean with standard error `s / sqrt(n)`.
    pub fn from_samples(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Estimate { mean: f64::NAN, stderr: f64::NAN, samples: 0 };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let stderr = if n > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Estimate { mean, stderr, samples: n }
    }

    /// Symmetric interval `mean ± z * stderr`.
    pub fn interval(&self, z: f64) -> (f64, f64) {
        (self.mean - z * self.stderr, self.mean + z * self.stderr)
    }

    pub fn contains(&self, value: f64, z: f64) -> bool {
        let (lo, hi) = self.interval(z);
        lo <= value && value <= hi
    }
}

/// Ordinary least-squares line through `(x, y)` points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual.
    pub residual: f64,
}

pub fn least_squares(points: &[(f64, f64)]) -> Option<LinearFit> {
    let n = points.len();
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (points
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum::<f64>()
        / nf)
        .sqrt();
    Some(LinearFit { slope, intercept, residual })
}

/// Result of a two-sample chi-square homogeneity test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomogeneityTest {
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
}

/// Chi-square test that two integer-valued samples share a distribution.
///
/// Values are histogrammed and adjacent bins are pooled from the left until
/// each pooled bin has an expected count of at least 5 in both samples.
pub fn two_sample_chi_square(a: &[usize], b: &[usize]) -> Option<HomogeneityTest> {
    if a.is_empty() || b.is_empty() {
        return None;
    }
    let max = a.iter().chain(b).copied().max()?;
    let mut ha = vec![0f64; max + 1];
    let mut hb = vec![0f64; max + 1];
    for &v in a {
        ha[v] += 1.0;
    }
    for &v in b {
        hb[v] += 1.0;
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let total = na + nb;

    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut ca, mut cb) = (0.0, 0.0);
    for i in 0..=max {
        ca += ha[i];
        cb += hb[i];
        let pooled = ca + cb;
        if pooled * na.min(nb) / total >= 5.0 {
            bins.push((ca, cb));
            ca = 0.0;
            cb = 0.0;
        }
    }
    if ca + cb > 0.0 {
        match bins.last_mut() {
            Some(last) => {
                last.0 += ca;
                last.1 += cb;
            }
            None => bins.push((ca, cb)),
        }
    }
    if bins.len() < 2 {
        return Some(HomogeneityTest { statistic: 0.0, degrees_of_freedom: 0, p_value: 1.0 });
    }
    let mut stat = 0.0;
    for &(oa, ob) in &bins {
        let col = oa + ob;
        let ea = col * na / total;
        let eb = col * nb / total;
        stat += (oa - ea).powi(2) / ea + (ob - eb).powi(2) / eb;
    }
    let dof = bins.len() - 1;
    let dist = ChiSquared::new(dof as f64).ok()?;
    Some(HomogeneityTest {
        statistic: stat,
        degrees_of_freedom: dof,
        p_value: 1.0 - dist.cdf(stat),
    })
}

/// Total-variation distance between an empirical histogram and a reference
/// probability vector of the same length.
pub fn total_variation(counts: &[usize], reference: &[f64]) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 1.0;
    }
    0.5 * counts
        .iter()
        .zip(reference)
        .map(|(&c, &r)| (c as f64 / n as f64 - r).abs())
        .sum::<f64>()
}

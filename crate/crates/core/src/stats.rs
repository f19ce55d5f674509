//! Two-sample tests used to compare samplers.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

/// Counts over contiguous bins `[edges[k], edges[k+1])`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    edges: Vec<f64>,
    counts: Vec<u64>,
}

impl Histogram {
    pub fn new(edges: Vec<f64>, counts: Vec<u64>) -> Result<Self> {
        if edges.len() < 2 || counts.len() + 1 != edges.len() {
            return Err(Error::DegenerateHistogram("need one more edge than counts"));
        }
        if !edges.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::DegenerateHistogram("edges must be strictly increasing"));
        }
        Ok(Histogram { edges, counts })
    }

    /// Unit-width bins `0..=max_value` over non-negative integer data.
    /// Values above `max_value` go in the last bin.
    pub fn of_counts(values: &[usize], max_value: usize) -> Self {
        let mut counts = vec![0u64; max_value + 1];
        for &v in values {
            counts[v.min(max_value)] += 1;
        }
        let edges = (0..=max_value + 1).map(|k| k as f64).collect();
        Histogram { edges, counts }
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestStatistic {
    pub statistic: f64,
    pub p_value: f64,
}

/// Minimum expected count per pooled bin for either sample.
pub const MIN_EXPECTED: f64 = 5.0;

/// Two-sample chi-square homogeneity test.
///
/// Adjacent bins are pooled left to right until both samples' expected
/// counts reach [`MIN_EXPECTED`]; a short tail is folded into the last
/// pooled bin. Degrees of freedom are `bins − 1`.
pub fn chi_square_two_sample(h1: &Histogram, h2: &Histogram) -> Result<TestStatistic> {
    if h1.edges != h2.edges {
        return Err(Error::DegenerateHistogram("bin edges differ"));
    }
    let (n1, n2) = (h1.total() as f64, h2.total() as f64);
    if n1 == 0.0 || n2 == 0.0 {
        return Err(Error::DegenerateHistogram("empty histogram"));
    }
    let n = n1 + n2;
    let expected_ok = |a: u64, b: u64| {
        let pooled = (a + b) as f64;
        pooled * n1 / n >= MIN_EXPECTED && pooled * n2 / n >= MIN_EXPECTED
    };

    let mut bins: Vec<(u64, u64)> = Vec::new();
    let (mut a, mut b) = (0u64, 0u64);
    for (&c1, &c2) in h1.counts.iter().zip(&h2.counts) {
        a += c1;
        b += c2;
        if expected_ok(a, b) {
            bins.push((a, b));
            a = 0;
            b = 0;
        }
    }
    if a + b > 0 {
        match bins.last_mut() {
            Some(last) => {
                last.0 += a;
                last.1 += b;
            }
            None => bins.push((a, b)),
        }
    }
    if bins.len() < 2 {
        return Ok(TestStatistic {
            statistic: 0.0,
            p_value: 1.0,
        });
    }

    let statistic: f64 = bins
        .iter()
        .map(|&(a, b)| {
            let pooled = (a + b) as f64;
            let (e1, e2) = (pooled * n1 / n, pooled * n2 / n);
            (a as f64 - e1).powi(2) / e1 + (b as f64 - e2).powi(2) / e2
        })
        .sum();
    let dof = (bins.len() - 1) as f64;
    let dist = ChiSquared::new(dof).expect("positive degrees of freedom");
    Ok(TestStatistic {
        statistic,
        p_value: dist.sf(statistic),
    })
}

/// Asymptotic Kolmogorov distribution tail `Q(t) = 2 Σ (−1)^{j−1} e^{−2j²t²}`.
pub fn kolmogorov_tail(t: f64) -> f64 {
    if t < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=100 {
        let term = (-2.0 * (j * j) as f64 * t * t).exp();
        sum += sign * term;
        if term < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Two-sample Kolmogorov–Smirnov test with the asymptotic p-value, using the
/// small-sample correction `(√m + 0.12 + 0.11/√m)·D`.
pub fn ks_two_sample(xs: &[f64], ys: &[f64]) -> Result<TestStatistic> {
    if xs.is_empty() || ys.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut a = xs.to_vec();
    let mut b = ys.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let m = (na * nb / (na + nb)).sqrt();
    Ok(TestStatistic {
        statistic: d,
        p_value: kolmogorov_tail((m + 0.12 + 0.11 / m) * d),
    })
}

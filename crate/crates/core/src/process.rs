//! Randomness and Poisson point processes on the unit cube and its sub-boxes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::bounds::unit_ball_volume;
use crate::error::{Error, Result};
use crate::geometry::{check_dim, PointSet};

/// Seeded random stream. ChaCha12 keyed from the 64-bit seed; this choice is
/// part of the replay contract and must not change.
#[derive(Clone, Debug)]
pub struct RandomStream {
    seed: u64,
    rng: ChaCha12Rng,
}

impl RandomStream {
    pub fn new(seed: u64) -> Self {
        RandomStream {
            seed,
            rng: ChaCha12Rng::seed_from_u64(seed),
        }
    }

    /// Stream for replicate `index` of an experiment seeded with `base`.
    pub fn for_replicate(base: u64, index: u64) -> Self {
        Self::new(derive_seed(base, index))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }
}

/// Seed of replicate `index`: `base + index`, wrapping. The stream constructor
/// hashes the seed, so adjacent seeds give unrelated streams.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    base.wrapping_add(index)
}

/// Model parameters: dimension, disk radius and the intensity parameter λ
/// (expected number of centres in a ball of radius `r`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    dim: usize,
    radius: f64,
    lambda: f64,
}

impl ModelParams {
    pub fn new(dim: usize, radius: f64, lambda: f64) -> Result<Self> {
        check_dim(dim)?;
        if !(radius > 0.0 && radius < 0.5) {
            return Err(Error::invalid("radius", format!("{radius} not in (0, 1/2)")));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::invalid(
                "lambda",
                format!("{lambda} is not a finite non-negative number"),
            ));
        }
        Ok(ModelParams { dim, radius, lambda })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Poisson intensity `λ / (v_d r^d)`.
    pub fn intensity(&self) -> f64 {
        let vd = unit_ball_volume(self.dim).expect("dimension validated on construction");
        self.lambda / (vd * self.radius.powi(self.dim as i32))
    }
}

/// Means below this use sequential-search inversion (one uniform per call);
/// larger means use Hörmann's PTRS transformed rejection.
pub const INVERSION_LIMIT: f64 = 10.0;

/// A Poisson(`mean`) variate.
///
/// Draw count: `mean == 0` consumes nothing, `0 < mean < 10` consumes exactly
/// one uniform, larger means consume two uniforms per rejection round.
pub fn poisson_variate(rng: &mut RandomStream, mean: f64) -> Result<u64> {
    if !(mean >= 0.0 && mean.is_finite()) {
        return Err(Error::invalid(
            "mean",
            format!("{mean} is not a finite non-negative number"),
        ));
    }
    Ok(poisson_unchecked(rng, mean))
}

pub(crate) fn poisson_unchecked(rng: &mut RandomStream, mean: f64) -> u64 {
    if mean == 0.0 {
        0
    } else if mean < INVERSION_LIMIT {
        poisson_inversion(rng, mean)
    } else {
        poisson_ptrs(rng, mean)
    }
}

fn poisson_inversion(rng: &mut RandomStream, mean: f64) -> u64 {
    let u = rng.uniform();
    let mut k = 0u64;
    let mut p = (-mean).exp();
    let mut cdf = p;
    // With mean < 10 the tail beyond 200 is far below f64 resolution, so the
    // cap only matters when rounding stops the cdf short of u.
    while u > cdf && k < 200 {
        k += 1;
        p *= mean / k as f64;
        cdf += p;
    }
    k
}

fn poisson_ptrs(rng: &mut RandomStream, mean: f64) -> u64 {
    let slam = mean.sqrt();
    let loglam = mean.ln();
    let b = 0.931 + 2.53 * slam;
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let vr = 0.9277 - 3.6224 / (b - 2.0);
    loop {
        let u = rng.uniform() - 0.5;
        let v = rng.uniform();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + mean + 0.43).floor();
        if us >= 0.07 && v <= vr {
            return k as u64;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        if v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln() <= -mean + k * loglam - ln_gamma(k + 1.0) {
            return k as u64;
        }
    }
}

/// An axis-aligned box inside the unit cube.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxRegion {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl BoxRegion {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        check_dim(lo.len())?;
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                left: lo.len(),
                right: hi.len(),
            });
        }
        for (&l, &h) in lo.iter().zip(&hi) {
            if !(0.0..=1.0).contains(&l) || !(0.0..=1.0).contains(&h) {
                return Err(Error::CoordinateOutOfRange(if (0.0..=1.0).contains(&l) {
                    h
                } else {
                    l
                }));
            }
            if h <= l {
                return Err(Error::DegenerateBox);
            }
        }
        Ok(BoxRegion { lo, hi })
    }

    pub fn unit(dim: usize) -> Result<Self> {
        Self::new(vec![0.0; dim], vec![1.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).product()
    }
}

/// Appends `count` independent uniform points of the box `[lo, hi)` to
/// `out`, point-major and axis-minor.
pub(crate) fn push_uniform_points(rng: &mut RandomStream, count: u64, lo: &[f64], hi: &[f64], out: &mut Vec<f64>) {
    for _ in 0..count {
        for (l, h) in lo.iter().zip(hi) {
            out.push(l + (h - l) * rng.uniform());
        }
    }
}

/// A realisation of the Poisson process of the given intensity on `region`.
pub fn sample_poisson_in_box(rng: &mut RandomStream, intensity: f64, region: &BoxRegion) -> Result<PointSet> {
    if !(intensity >= 0.0 && intensity.is_finite()) {
        return Err(Error::invalid(
            "intensity",
            format!("{intensity} is not a finite non-negative number"),
        ));
    }
    let count = poisson_unchecked(rng, intensity * region.volume());
    let mut coords = Vec::with_capacity(count as usize * region.dim());
    push_uniform_points(rng, count, &region.lo, &region.hi, &mut coords);
    Ok(PointSet::from_flat_unchecked(region.dim(), coords))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moments(samples: &[u64]) -> (f64, f64) {
        let n = samples.len() as f64;
        let mean = samples.iter().map(|&k| k as f64).sum::<f64>() / n;
        let var = samples.iter().map(|&k| (k as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var)
    }

    #[test]
    fn zero_mean_is_zero_and_draws_nothing() {
        let mut a = RandomStream::new(7);
        let mut b = RandomStream::new(7);
        for _ in 0..10 {
            assert_eq!(poisson_variate(&mut a, 0.0).unwrap(), 0);
        }
        assert_eq!(a.uniform().to_bits(), b.uniform().to_bits());
    }

    #[test]
    fn inversion_consumes_one_uniform() {
        let mut a = RandomStream::new(11);
        let mut b = RandomStream::new(11);
        poisson_variate(&mut a, 3.3).unwrap();
        b.uniform();
        assert_eq!(a.uniform().to_bits(), b.uniform().to_bits());
    }

    #[test]
    fn rejects_bad_means() {
        let mut rng = RandomStream::new(0);
        assert!(poisson_variate(&mut rng, -1.0).is_err());
        assert!(poisson_variate(&mut rng, f64::NAN).is_err());
        assert!(poisson_variate(&mut rng, f64::INFINITY).is_err());
    }

    #[test]
    fn mean_four_moments() {
        let mut rng = RandomStream::new(2024);
        let draws: Vec<u64> = (0..1_000_000)
            .map(|_| poisson_variate(&mut rng, 4.0).unwrap())
            .collect();
        let (mean, var) = moments(&draws);
        assert!((mean - 4.0).abs() < 0.01, "mean {mean}");
        assert!((var - 4.0).abs() < 0.05, "variance {var}");

        let p0 = (-4.0f64).exp();
        let sigma = (p0 * (1.0 - p0) / draws.len() as f64).sqrt();
        let zeros = draws.iter().filter(|&&k| k == 0).count() as f64 / draws.len() as f64;
        assert!((zeros - p0).abs() < 3.0 * sigma, "P(0) {zeros} vs {p0}");
    }

    #[test]
    fn large_mean_moments() {
        let mut rng = RandomStream::new(99);
        for &mu in &[10.0, 37.5, 400.0] {
            let draws: Vec<u64> = (0..200_000).map(|_| poisson_variate(&mut rng, mu).unwrap()).collect();
            let (mean, var) = moments(&draws);
            let n = draws.len() as f64;
            // 5 sigma on the mean; the variance estimate has sd ≈ mu·sqrt(2/n).
            assert!((mean - mu).abs() < 5.0 * (mu / n).sqrt(), "mu {mu}: mean {mean}");
            assert!(
                (var - mu).abs() < 5.0 * mu * (2.0 / n).sqrt() + 0.05 * mu.sqrt(),
                "mu {mu}: var {var}"
            );
        }
    }

    #[test]
    fn intensity_scaling() {
        let p = ModelParams::new(2, 1.0 / 200.0, 0.5).unwrap();
        assert!((p.intensity() - 0.5 * 40_000.0 / std::f64::consts::PI).abs() < 1e-9);
        let p3 = ModelParams::new(3, 0.1, 1.0).unwrap();
        assert!((p3.intensity() - 1.0 / (4.0 / 3.0 * std::f64::consts::PI * 1e-3)).abs() < 1e-6);
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::new(0, 0.1, 0.1).is_err());
        assert!(ModelParams::new(9, 0.1, 0.1).is_err());
        assert!(ModelParams::new(2, 0.5, 0.1).is_err());
        assert!(ModelParams::new(2, 0.0, 0.1).is_err());
        assert!(ModelParams::new(2, 0.1, -0.1).is_err());
        assert!(ModelParams::new(2, 0.1, 0.0).is_ok());
    }

    #[test]
    fn box_validation() {
        assert!(matches!(
            BoxRegion::new(vec![0.2, 0.1], vec![0.2, 0.5]),
            Err(Error::DegenerateBox)
        ));
        assert!(BoxRegion::new(vec![0.0], vec![1.5]).is_err());
        assert!((BoxRegion::new(vec![0.0, 0.5], vec![0.5, 1.0]).unwrap().volume() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn zero_intensity_box_is_empty() {
        let mut rng = RandomStream::new(1);
        let unit = BoxRegion::unit(2).unwrap();
        assert!(sample_poisson_in_box(&mut rng, 0.0, &unit).unwrap().is_empty());
    }

    #[test]
    fn box_samples_stay_in_box() {
        let mut rng = RandomStream::new(5);
        let region = BoxRegion::new(vec![0.25, 0.5, 0.0], vec![0.5, 0.75, 0.125]).unwrap();
        let pts = sample_poisson_in_box(&mut rng, 5000.0, &region).unwrap();
        assert!(!pts.is_empty());
        for p in pts.iter() {
            for ((&x, &lo), &hi) in p.iter().zip(region.lo()).zip(region.hi()) {
                assert!(x >= lo && x <= hi);
            }
        }
    }

    #[test]
    fn same_seed_same_points() {
        let unit = BoxRegion::unit(3).unwrap();
        let a = sample_poisson_in_box(&mut RandomStream::new(3), 250.0, &unit).unwrap();
        let b = sample_poisson_in_box(&mut RandomStream::new(3), 250.0, &unit).unwrap();
        assert!(a.bit_identical(&b));
    }
}

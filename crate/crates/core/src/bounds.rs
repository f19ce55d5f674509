//! Closed-form constants from the runtime analysis: unit-ball volumes, the
//! lens area, the double-counting correction, contraction factors, the λ̄
//! thresholds, and the packing-density lower bound `c_d λ`.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::check_dim;

/// Volume of the unit ball in `d` dimensions, `π^{d/2} / Γ(d/2 + 1)`.
///
/// Evaluated by the recurrence `v_d = v_{d-2} · 2π / d` from `v_0 = 1`,
/// `v_1 = 2`, which is exact in the same sense as the gamma form.
pub fn unit_ball_volume(dim: usize) -> Result<f64> {
    check_dim(dim)?;
    let mut v = if dim.is_multiple_of(2) { 1.0 } else { 2.0 };
    let mut k = if dim.is_multiple_of(2) { 2 } else { 3 };
    while k <= dim {
        v *= 2.0 * PI / k as f64;
        k += 2;
    }
    Ok(v)
}

/// Area of the intersection of two unit disks whose centres are `rho` apart.
pub fn lens_area(rho: f64) -> Result<f64> {
    if !(0.0..=2.0).contains(&rho) {
        return Err(Error::invalid("rho", format!("{rho} not in [0, 2]")));
    }
    Ok(2.0 * (rho / 2.0).acos() - 0.5 * rho * (4.0 - rho * rho).sqrt())
}

/// Antiderivative of `ρ L(ρ)` as evaluated in closed form; vanishes at 0.
pub fn lens_moment_antiderivative(rho: f64) -> f64 {
    PI / 2.0 + (rho * rho - 1.0) * (rho / 2.0).acos() - (rho / 4.0 + rho.powi(3) / 8.0) * (4.0 - rho * rho).sqrt()
}

/// Same-disk double-counting correction per unit `λ²`: `8 − 6√3/π`.
pub fn correction_coefficient() -> f64 {
    8.0 - 6.0 * 3f64.sqrt() / PI
}

/// Crude 2-D contraction `32 λ²`.
pub fn contraction_factor_crude_2d(lambda: f64) -> f64 {
    32.0 * lambda * lambda
}

/// Expected bad-pair multiplier per iteration.
///
/// `d = 2`: `2λ²(8 + 6√3/π)` (crude `16λ²` per disk pair less the
/// correction). Other `d`: `2^{2d+1} λ²`.
pub fn contraction_factor(lambda: f64, dim: usize) -> Result<f64> {
    check_dim(dim)?;
    if lambda.is_nan() || lambda <= 0.0 {
        return Err(Error::invalid("lambda", format!("{lambda} must be positive")));
    }
    Ok(if dim == 2 {
        2.0 * lambda * lambda * (16.0 - correction_coefficient())
    } else {
        2f64.powi(2 * dim as i32 + 1) * lambda * lambda
    })
}

/// Intensity threshold below which the contraction factor is under one.
///
/// Crude: `2^{-(d+1/2)}`. Improved (only `d = 2`): `(16 + 12√3/π)^{-1/2}`.
pub fn lambda_bar(dim: usize, improved: bool) -> Result<f64> {
    check_dim(dim)?;
    if improved {
        if dim != 2 {
            return Err(Error::invalid(
                "improved",
                "the refined threshold exists only for d = 2",
            ));
        }
        Ok((16.0 + 12.0 * 3f64.sqrt() / PI).powf(-0.5))
    } else {
        Ok(2f64.powf(-(dim as f64 + 0.5)))
    }
}

/// Dimension argument for [`jjp_constant`], including the `d → ∞` limit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JjpDimension {
    Finite(usize),
    Infinite,
}

const JJP_TOL: f64 = 1e-10;

/// `c_d = inf_z max{e^{−z}, a z}` with `a = √2 exp(−√2 (3/4)^{d/2})`.
///
/// The two branches cross once; the crossing is found by bisection on
/// `[0, 5]` and the common value returned.
pub fn jjp_constant(dim: JjpDimension) -> Result<f64> {
    let slope = jjp_slope(dim)?;
    let gap = |z: f64| (-z).exp() - slope * z;
    let (mut lo, mut hi) = (0.0f64, 5.0f64);
    debug_assert!(gap(lo) > 0.0 && gap(hi) < 0.0);
    while hi - lo > JJP_TOL {
        let mid = 0.5 * (lo + hi);
        if gap(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let z = 0.5 * (lo + hi);
    Ok((-z).exp())
}

pub(crate) fn jjp_slope(dim: JjpDimension) -> Result<f64> {
    Ok(match dim {
        JjpDimension::Finite(d) => {
            if d == 0 {
                return Err(Error::UnsupportedDimension(d));
            }
            SQRT_2 * (-SQRT_2 * 0.75f64.powf(d as f64 / 2.0)).exp()
        }
        JjpDimension::Infinite => SQRT_2,
    })
}

/// `c_d λ`. The derivation assumes `λ ≤ 2^{-(d+1/2)}`; callers can check
/// [`within_crude_regime`] and warn.
pub fn packing_density_lower_bound(lambda: f64, dim: usize) -> Result<f64> {
    Ok(jjp_constant(JjpDimension::Finite(dim))? * lambda)
}

pub fn within_crude_regime(lambda: f64, dim: usize) -> Result<bool> {
    Ok(lambda <= lambda_bar(dim, false)?)
}

/// Every constant for a `(λ, d)` query.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub d: usize,
    pub lambda: f64,
    pub v_d: f64,
    pub lambda_bar_crude: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_bar_improved: Option<f64>,
    pub contraction: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contraction_crude: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub correction_coefficient: Option<f64>,
    pub c_d: f64,
    pub alpha_lower: f64,
    pub within_crude_regime: bool,
}

impl BoundsReport {
    pub fn new(dim: usize, lambda: f64) -> Result<Self> {
        check_dim(dim)?;
        let two_d = dim == 2;
        Ok(BoundsReport {
            d: dim,
            lambda,
            v_d: unit_ball_volume(dim)?,
            lambda_bar_crude: lambda_bar(dim, false)?,
            lambda_bar_improved: two_d.then(|| lambda_bar(2, true)).transpose()?,
            contraction: contraction_factor(lambda, dim)?,
            contraction_crude: two_d.then(|| contraction_factor_crude_2d(lambda)),
            correction_coefficient: two_d.then(correction_coefficient),
            c_d: jjp_constant(JjpDimension::Finite(dim))?,
            alpha_lower: packing_density_lower_bound(lambda, dim)?,
            within_crude_regime: within_crude_regime(lambda, dim)?,
        })
    }

    /// The threshold that applies: improved in two dimensions, crude otherwise.
    pub fn applicable_lambda_bar(&self) -> f64 {
        self.lambda_bar_improved.unwrap_or(self.lambda_bar_crude)
    }
}

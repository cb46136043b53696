//! Shot-noise-unit arithmetic and statistics of hard-clipped Gaussians.
//!
//! Amplitudes are in √N0 and variances in N0 everywhere inside the crate;
//! volts only appear through [`ShotNoiseCalibration`] at the I/O boundary.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::GaussHermite;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Voltage per √N0 of the homodyne output. N0 itself is fixed to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShotNoiseCalibration {
    volts_per_sqrt_n0: f64,
}

impl ShotNoiseCalibration {
    pub const N0: f64 = 1.0;

    pub fn new(volts_per_sqrt_n0: f64) -> Result<Self> {
        if !(volts_per_sqrt_n0.is_finite() && volts_per_sqrt_n0 > 0.0) {
            return Err(Error::invalid(
                "volts_per_sqrt_n0",
                format!("must be finite and > 0, got {volts_per_sqrt_n0}"),
            ));
        }
        Ok(Self { volts_per_sqrt_n0 })
    }

    /// Calibration such that `volts` corresponds to `snu` (both nonzero, same sign).
    pub fn from_anchor(volts: f64, snu: f64) -> Result<Self> {
        Self::new(volts / snu)
    }

    pub fn volts_per_sqrt_n0(&self) -> f64 {
        self.volts_per_sqrt_n0
    }
}

pub fn volts_to_snu(volts: f64, cal: &ShotNoiseCalibration) -> f64 {
    volts / cal.volts_per_sqrt_n0
}

pub fn snu_to_volts(snu: f64, cal: &ShotNoiseCalibration) -> f64 {
    snu * cal.volts_per_sqrt_n0
}

/// Linear range `[alpha1, alpha2]` of the detector, in √N0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorLimits {
    alpha1: f64,
    alpha2: f64,
}

impl DetectorLimits {
    /// Detector range; requires `alpha1 < 0 < alpha2`.
    pub fn new(alpha1: f64, alpha2: f64) -> Result<Self> {
        if !(alpha1 < 0.0 && alpha2 > 0.0) {
            return Err(Error::invalid(
                "limits",
                format!("detector range needs alpha1 < 0 < alpha2, got [{alpha1}, {alpha2}]"),
            ));
        }
        Ok(Self { alpha1, alpha2 })
    }

    /// Arbitrary clipping interval `lo < hi`; infinite ends are allowed.
    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) {
            return Err(Error::invalid(
                "limits",
                format!("clipping interval needs lo < hi, got [{lo}, {hi}]"),
            ));
        }
        Ok(Self { alpha1: lo, alpha2: hi })
    }

    pub fn unbounded() -> Self {
        Self {
            alpha1: f64::NEG_INFINITY,
            alpha2: f64::INFINITY,
        }
    }

    /// Symmetric `[-half_width, half_width]`, used to switch saturation off.
    pub fn wide(half_width: f64) -> Self {
        Self {
            alpha1: -half_width,
            alpha2: half_width,
        }
    }

    /// α1 = −2.5 V ↔ −106 √N0, α2 = +3.3 V on the same scale.
    pub fn reference_detector() -> Self {
        let cal = reference_calibration();
        Self {
            alpha1: volts_to_snu(-2.5, &cal),
            alpha2: volts_to_snu(3.3, &cal),
        }
    }

    pub fn alpha1(&self) -> f64 {
        self.alpha1
    }

    pub fn alpha2(&self) -> f64 {
        self.alpha2
    }
}

/// −2.5 V detection limit calibrated as −106 √N0.
pub fn reference_calibration() -> ShotNoiseCalibration {
    ShotNoiseCalibration {
        volts_per_sqrt_n0: 2.5 / 106.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianSpec {
    pub mean: f64,
    pub variance: f64,
}

impl GaussianSpec {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        if !mean.is_finite() {
            return Err(Error::invalid("mean", "must be finite"));
        }
        if !(variance.is_finite() && variance >= 0.0) {
            return Err(Error::invalid(
                "variance",
                format!("must be finite and >= 0, got {variance}"),
            ));
        }
        Ok(Self { mean, variance })
    }
}

pub fn clamp(x: f64, limits: &DetectorLimits) -> f64 {
    x.max(limits.alpha1).min(limits.alpha2)
}

pub(crate) fn std_normal_pdf(z: f64) -> f64 {
    if z.is_infinite() {
        0.0
    } else {
        INV_SQRT_2PI * (-0.5 * z * z).exp()
    }
}

/// Φ(z)
pub(crate) fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * std::f64::consts::FRAC_1_SQRT_2)
}

/// P(zl < Z < zh) for standard normal Z, accurate in both tails.
pub(crate) fn std_normal_interval(zl: f64, zh: f64) -> f64 {
    if zl >= zh {
        return 0.0;
    }
    if zl > 0.0 {
        std_normal_cdf(-zl) - std_normal_cdf(-zh)
    } else {
        std_normal_cdf(zh) - std_normal_cdf(zl)
    }
}

/// Mean, variance and in-range probability of `clamp(Y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClippedMoments {
    pub mean: f64,
    pub variance: f64,
    /// P(α1 < Y < α2)
    pub prob_inside: f64,
}

/// Exact moments of `clamp(Y)` for `Y ~ g`.
pub fn clipped_moments(g: &GaussianSpec, limits: &DetectorLimits) -> ClippedMoments {
    let (lo, hi) = (limits.alpha1, limits.alpha2);
    if g.variance <= 0.0 {
        let inside = g.mean > lo && g.mean < hi;
        return ClippedMoments {
            mean: clamp(g.mean, limits),
            variance: 0.0,
            prob_inside: if inside { 1.0 } else { 0.0 },
        };
    }
    let s = g.variance.sqrt();
    // Work relative to the clamped mean so far-saturated cases keep precision.
    let shift = clamp(g.mean, limits);
    let m = g.mean - shift;
    let (lo, hi) = (lo - shift, hi - shift);
    let zl = (lo - m) / s;
    let zh = (hi - m) / s;
    let p_lo = if lo.is_finite() { std_normal_cdf(zl) } else { 0.0 };
    let p_hi = if hi.is_finite() { std_normal_cdf(-zh) } else { 0.0 };
    let p_in = std_normal_interval(zl, zh);
    let (phi_l, phi_h) = (std_normal_pdf(zl), std_normal_pdf(zh));

    let e1_in = m * p_in + s * (phi_l - phi_h);
    let tail_l = if lo.is_finite() { (lo + m) * phi_l } else { 0.0 };
    let tail_h = if hi.is_finite() { (hi + m) * phi_h } else { 0.0 };
    let e2_in = (m * m + g.variance) * p_in + s * (tail_l - tail_h);

    let (lo_t1, lo_t2) = if lo.is_finite() {
        (lo * p_lo, lo * lo * p_lo)
    } else {
        (0.0, 0.0)
    };
    let (hi_t1, hi_t2) = if hi.is_finite() {
        (hi * p_hi, hi * hi * p_hi)
    } else {
        (0.0, 0.0)
    };
    let mean_rel = e1_in + lo_t1 + hi_t1;
    let second_rel = e2_in + lo_t2 + hi_t2;
    let variance = (second_rel - mean_rel * mean_rel).max(0.0);
    ClippedMoments {
        mean: shift + mean_rel,
        variance,
        prob_inside: p_in,
    }
}

fn clipped_mean(mean: f64, variance: f64, limits: &DetectorLimits) -> f64 {
    clipped_moments(&GaussianSpec { mean, variance }, limits).mean
}

/// Order and convergence threshold for [`clipped_covariance`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureConfig {
    pub order: usize,
    pub check_order: usize,
    /// Maximum discrepancy between the two orders, relative to `|a|·x_var`.
    pub tolerance: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            order: 128,
            check_order: 256,
            tolerance: 1e-9,
        }
    }
}

/// `Cov(X, clamp(a·X + c + N))` with `X ~ N(0, x_var)`, `N ~ N(0, n_var)` independent.
///
/// One-dimensional Gauss–Hermite over one of the two Gaussian inputs, with
/// the other integrated in closed form. The outer variable is whichever of
/// `a·X` and `N` has the smaller spread, so the inner closed form varies
/// slowly across the outer nodes. The result at `order` is cross-checked
/// at `check_order`.
pub fn clipped_covariance(
    a: f64,
    c: f64,
    x_var: f64,
    n_var: f64,
    limits: &DetectorLimits,
    quad: &QuadratureConfig,
) -> Result<f64> {
    if !(x_var.is_finite() && x_var > 0.0) {
        return Err(Error::invalid("x_var", format!("must be > 0, got {x_var}")));
    }
    if !(n_var.is_finite() && n_var >= 0.0) {
        return Err(Error::invalid("n_var", format!("must be >= 0, got {n_var}")));
    }
    if !(a.is_finite() && c.is_finite()) {
        return Err(Error::invalid("a/c", "must be finite"));
    }
    if a == 0.0 {
        return Ok(0.0);
    }
    if limits.alpha1 == f64::NEG_INFINITY && limits.alpha2 == f64::INFINITY {
        return Ok(a * x_var);
    }
    let signal_var = a * a * x_var;
    let eval = |rule: &GaussHermite| -> f64 {
        if signal_var <= n_var {
            let centre = clipped_mean(c, n_var, limits);
            rule.normal_expectation(x_var, |x| x * (clipped_mean(a * x + c, n_var, limits) - centre))
        } else {
            let s = signal_var.sqrt();
            let inner = |u: f64| {
                let zl = (limits.alpha1 - c - u) / s;
                let zh = (limits.alpha2 - c - u) / s;
                a * x_var * std_normal_interval(zl, zh)
            };
            if n_var == 0.0 {
                inner(0.0)
            } else {
                rule.normal_expectation(n_var, inner)
            }
        }
    };
    let low = eval(&*GaussHermite::cached(quad.order)?);
    let high = eval(&*GaussHermite::cached(quad.check_order)?);
    let discrepancy = (low - high).abs() / (a.abs() * x_var);
    if discrepancy > quad.tolerance {
        return Err(Error::QuadratureNonConvergence {
            order: quad.order,
            check_order: quad.check_order,
            discrepancy,
        });
    }
    Ok(high)
}

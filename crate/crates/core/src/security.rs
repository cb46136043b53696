//! Asymptotic secret key rate of GMCS with homodyne detection and reverse
//! reconciliation, under collective attacks, with a trusted detector.
//!
//! Notation (all in N0):
//!
//! ```text
//! V      = V_A + 1
//! χ_line = 1/T − 1 + ξ
//! χ_hom  = (1 − η + v_ele)/η
//! χ_tot  = χ_line + χ_hom/T
//!
//! I_AB = ½·log2((V + χ_tot)/(1 + χ_tot))
//!
//! A = V²(1 − 2T) + 2T + T²(V + χ_line)²
//! B = T²(V·χ_line + 1)²
//! C = [A·χ_hom + V√B + T(V + χ_line)] / [T(V + χ_tot)]
//! D = √B·(V + √B·χ_hom) / [T(V + χ_tot)]
//! λ1,2² = ½[A ± √(A² − 4B)]
//! λ3,4² = ½[C ± √(C² − 4D)]
//!
//! χ_BE = G(λ1) + G(λ2) − G(λ3) − G(λ4),  G(λ) = g((λ − 1)/2)
//! K    = β·I_AB − χ_BE
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Negative excess-noise estimates down to this level are accepted as zero.
pub const XI_TOLERANCE: f64 = 1e-9;
/// Floor below 1 tolerated on symplectic eigenvalues before reporting.
const EIGEN_TOLERANCE: f64 = 1e-9;

pub const DEFAULT_BETA: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecurityParams {
    pub v_a: f64,
    pub t: f64,
    pub xi: f64,
    pub eta: f64,
    pub v_ele: f64,
    pub beta: f64,
}

impl SecurityParams {
    /// Parameters as Alice and Bob would plug in their estimates.
    ///
    /// A negative ξ estimate is read as zero noise: the key-rate formulas are
    /// only defined for ξ ≥ 0 and the estimate is the honest parties' best
    /// knowledge.
    pub fn from_estimate(v_a: f64, t_sat: f64, xi_sat: f64, eta: f64, v_ele: f64, beta: f64) -> Self {
        Self {
            v_a,
            t: t_sat,
            xi: xi_sat.max(0.0),
            eta,
            v_ele,
            beta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.v_a.is_finite() && self.v_a >= 0.0) {
            return Err(Error::invalid("v_a", format!("must be >= 0, got {}", self.v_a)));
        }
        if !(self.t > 0.0 && self.t <= 1.0) {
            return Err(Error::invalid("t", format!("must be in (0, 1], got {}", self.t)));
        }
        if !(self.xi.is_finite() && self.xi >= -XI_TOLERANCE) {
            return Err(Error::invalid("xi", format!("must be >= 0, got {}", self.xi)));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::invalid("eta", format!("must be in (0, 1], got {}", self.eta)));
        }
        if !(self.v_ele.is_finite() && self.v_ele >= 0.0) {
            return Err(Error::invalid("v_ele", format!("must be >= 0, got {}", self.v_ele)));
        }
        if !(self.beta >= 0.0 && self.beta <= 1.0) {
            return Err(Error::invalid("beta", format!("must be in [0, 1], got {}", self.beta)));
        }
        Ok(())
    }

    fn xi(&self) -> f64 {
        self.xi.max(0.0)
    }

    fn noises(&self) -> (f64, f64, f64) {
        let chi_line = 1.0 / self.t - 1.0 + self.xi();
        let chi_hom = (1.0 - self.eta + self.v_ele) / self.eta;
        (chi_line, chi_hom, chi_line + chi_hom / self.t)
    }
}

/// `g(x) = (x+1)·log2(x+1) − x·log2(x)`, with `g(0) = 0`.
pub fn g(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    (x + 1.0) * (x + 1.0).log2() - x * x.log2()
}

fn g_of_eigen(lambda: f64) -> Result<f64> {
    if lambda < 1.0 - EIGEN_TOLERANCE || !lambda.is_finite() {
        return Err(Error::InvalidCovariance { value: lambda });
    }
    Ok(g((lambda - 1.0) / 2.0))
}

pub fn mutual_information(s: &SecurityParams) -> Result<f64> {
    s.validate()?;
    let v = s.v_a + 1.0;
    let (_, _, chi_tot) = s.noises();
    Ok(0.5 * ((v + chi_tot) / (1.0 + chi_tot)).log2())
}

/// Symplectic eigenvalues `[λ1, λ2, λ3, λ4]`.
pub fn symplectic_eigenvalues(s: &SecurityParams) -> Result<[f64; 4]> {
    s.validate()?;
    let t = s.t;
    let v = s.v_a + 1.0;
    let (chi_line, chi_hom, chi_tot) = s.noises();
    let a = v * v * (1.0 - 2.0 * t) + 2.0 * t + t * t * (v + chi_line).powi(2);
    let b = (t * (v * chi_line + 1.0)).powi(2);
    let sqrt_b = b.sqrt();
    let denom = t * (v + chi_tot);
    let c = (a * chi_hom + v * sqrt_b + t * (v + chi_line)) / denom;
    let d = sqrt_b * (v + sqrt_b * chi_hom) / denom;
    let pair = |sum: f64, prod: f64| {
        let disc = (sum * sum - 4.0 * prod).max(0.0).sqrt();
        (
            (0.5 * (sum + disc)).max(0.0).sqrt(),
            (0.5 * (sum - disc)).max(0.0).sqrt(),
        )
    };
    let (l1, l2) = pair(a, b);
    let (l3, l4) = pair(c, d);
    Ok([l1, l2, l3, l4])
}

/// Eve's information on Bob's data, χ_BE (bits/pulse).
pub fn holevo_bound(s: &SecurityParams) -> Result<f64> {
    let [l1, l2, l3, l4] = symplectic_eigenvalues(s)?;
    Ok(g_of_eigen(l1)? + g_of_eigen(l2)? - g_of_eigen(l3)? - g_of_eigen(l4)?)
}

/// `K = β·I_AB − χ_BE` (bits/pulse); negative values are returned as is.
pub fn key_rate(s: &SecurityParams) -> Result<f64> {
    Ok(s.beta * mutual_information(s)? - holevo_bound(s)?)
}

/// Excess noise at which the key rate crosses zero, to 1e-6 N0.
pub fn null_key_threshold(t: f64, v_a: f64, eta: f64, v_ele: f64, beta: f64) -> Result<f64> {
    const TOL: f64 = 1e-6;
    let k = |xi: f64| {
        key_rate(&SecurityParams {
            v_a,
            t,
            xi,
            eta,
            v_ele,
            beta,
        })
    };
    if k(0.0)? <= 0.0 {
        return Err(Error::NoPositiveKey(format!("K(ξ = 0) ≤ 0 at T = {t}, V_A = {v_a}")));
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while k(hi)? > 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::NoPositiveKey(format!("no sign change of K up to ξ = {hi}")));
        }
    }
    while hi - lo > TOL {
        let mid = 0.5 * (lo + hi);
        if k(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Bounds and tolerance of the V_A search.
pub const V_A_RANGE: (f64, f64) = (0.1, 100.0);
const V_A_TOL: f64 = 1e-3;
const V_A_SCAN: usize = 64;

/// Alice's modulation variance maximising K at excess noise `xi`.
///
/// A log-spaced scan picks the basin; golden-section search refines it.
pub fn optimal_v_a(t: f64, eta: f64, v_ele: f64, beta: f64, xi: f64) -> Result<f64> {
    let k = |v_a: f64| {
        key_rate(&SecurityParams {
            v_a,
            t,
            xi,
            eta,
            v_ele,
            beta,
        })
    };
    let (lo, hi) = V_A_RANGE;
    let ratio = (hi / lo).powf(1.0 / (V_A_SCAN - 1) as f64);
    let grid: Vec<f64> = (0..V_A_SCAN).map(|i| lo * ratio.powi(i as i32)).collect();
    let mut best = 0;
    let mut best_k = f64::NEG_INFINITY;
    for (i, &v) in grid.iter().enumerate() {
        let kv = k(v)?;
        if kv > best_k {
            best_k = kv;
            best = i;
        }
    }
    let mut a = grid[best.saturating_sub(1)];
    let mut b = grid[(best + 1).min(V_A_SCAN - 1)];
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let (mut f1, mut f2) = (k(x1)?, k(x2)?);
    while b - a > V_A_TOL {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = k(x2)?;
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = k(x1)?;
        }
    }
    let candidates = [(grid[best], best_k), (x1, f1), (x2, f2)];
    let (v_best, k_best) =
        candidates.into_iter().fold(
            (f64::NAN, f64::NEG_INFINITY),
            |acc, c| if c.1 > acc.1 { c } else { acc },
        );
    if k_best <= 0.0 {
        return Err(Error::NoPositiveKey(format!(
            "K ≤ 0 for every V_A in [{lo}, {hi}] at T = {t}, ξ = {xi}"
        )));
    }
    Ok(v_best)
}

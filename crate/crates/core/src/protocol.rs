//! GMCS signal path: Alice's Gaussian modulation, the lossy fiber, and Bob's
//! saturating balanced homodyne detector.
//!
//! Only the X quadrature is simulated. The resent displacement is split
//! evenly (Δ_X = Δ_P), so P has the same statistics and Bob's basis choice
//! carries no extra information for the quantities studied here.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SimRng;
use crate::snu::{clamp, DetectorLimits};

/// Default fiber attenuation (dB/km).
pub const DEFAULT_LOSS_DB_PER_KM: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams {
    /// Alice modulation variance V_A (N0).
    pub v_a: f64,
    /// Bob detection efficiency η_B.
    pub eta_b: f64,
    /// Electronic noise v_ele (N0).
    pub v_ele: f64,
    pub limits: DetectorLimits,
    /// Channel transmittance T.
    pub t: f64,
    /// Channel excess noise ξ (N0, input-referred) on the honest path.
    pub xi_channel: f64,
}

impl ProtocolParams {
    /// η_B = 0.55, v_ele = 0.01 N0, V_A = 19 N0 and the calibrated detector range.
    pub fn calibrated() -> Self {
        Self {
            v_a: 19.0,
            eta_b: 0.55,
            v_ele: 0.01,
            limits: DetectorLimits::reference_detector(),
            t: 1.0,
            xi_channel: 0.01,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.v_a.is_finite() && self.v_a > 0.0) {
            return Err(Error::invalid("v_a", format!("must be > 0, got {}", self.v_a)));
        }
        if !(self.eta_b > 0.0 && self.eta_b <= 1.0) {
            return Err(Error::invalid(
                "eta_b",
                format!("must be in (0, 1], got {}", self.eta_b),
            ));
        }
        if !(self.v_ele.is_finite() && self.v_ele >= 0.0) {
            return Err(Error::invalid("v_ele", format!("must be >= 0, got {}", self.v_ele)));
        }
        if !(self.t > 0.0 && self.t <= 1.0) {
            return Err(Error::invalid("t", format!("must be in (0, 1], got {}", self.t)));
        }
        if !(self.xi_channel.is_finite() && self.xi_channel >= 0.0) {
            return Err(Error::invalid(
                "xi_channel",
                format!("must be >= 0, got {}", self.xi_channel),
            ));
        }
        if !(self.limits.alpha1() < self.limits.alpha2()) {
            return Err(Error::invalid("limits", "alpha1 must be below alpha2"));
        }
        Ok(())
    }

    pub fn with_transmittance(mut self, t: f64) -> Self {
        self.t = t;
        self
    }

    pub fn with_limits(mut self, limits: DetectorLimits) -> Self {
        self.limits = limits;
        self
    }
}

/// Ordered quadrature samples (√N0) tagged with the stream they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBlock {
    pub values: Vec<f64>,
    pub seed: u64,
    pub block_index: u64,
}

impl SampleBlock {
    fn from_rng(values: Vec<f64>, rng: &SimRng) -> Self {
        Self {
            values,
            seed: rng.seed(),
            block_index: rng.block_index(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Population variance.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / self.values.len() as f64
    }
}

pub fn alice_modulate(n: usize, v_a: f64, rng: &mut SimRng) -> Result<SampleBlock> {
    if n == 0 {
        return Err(Error::invalid("n", "block length must be positive"));
    }
    if !(v_a.is_finite() && v_a >= 0.0) {
        return Err(Error::invalid("v_a", format!("must be >= 0, got {v_a}")));
    }
    let values = (0..n).map(|_| rng.gaussian(v_a)).collect();
    Ok(SampleBlock::from_rng(values, rng))
}

/// `T = 10^(−loss·d/10)`
pub fn distance_to_transmittance(distance_km: f64, loss_db_per_km: f64) -> Result<f64> {
    if !(distance_km.is_finite() && distance_km >= 0.0) {
        return Err(Error::invalid(
            "distance_km",
            format!("must be >= 0, got {distance_km}"),
        ));
    }
    if !(loss_db_per_km.is_finite() && loss_db_per_km > 0.0) {
        return Err(Error::invalid(
            "loss_db_per_km",
            format!("must be > 0, got {loss_db_per_km}"),
        ));
    }
    Ok(10f64.powf(-loss_db_per_km * distance_km / 10.0))
}

/// Detector output before saturation: `√η_B·x + √(1−η_B)·X_vac + X_ele`.
pub fn bob_detector_input(x_in: &SampleBlock, p: &ProtocolParams, rng: &mut SimRng) -> SampleBlock {
    let sqrt_eta = p.eta_b.sqrt();
    let vac_var = 1.0 - p.eta_b;
    let values = x_in
        .values
        .iter()
        .map(|&x| {
            let vac = rng.gaussian(vac_var);
            let ele = rng.gaussian(p.v_ele);
            sqrt_eta * x + vac + ele
        })
        .collect();
    SampleBlock::from_rng(values, rng)
}

/// Balanced homodyne with saturation as the last stage of the signal chain.
pub fn bob_homodyne(x_in: &SampleBlock, p: &ProtocolParams, rng: &mut SimRng) -> SampleBlock {
    let mut out = bob_detector_input(x_in, p, rng);
    out.values.iter_mut().for_each(|v| *v = clamp(*v, &p.limits));
    out
}

/// Honest path: Alice → fiber (T, ξ) → Bob. Returns `(x_a, x_b)`.
pub fn baseline_run(p: &ProtocolParams, n: usize, rng: &mut SimRng) -> Result<(SampleBlock, SampleBlock)> {
    p.validate()?;
    let x_a = alice_modulate(n, p.v_a, rng)?;
    // Alice's coherent-state vacuum, loss vacuum and excess noise: 1 + T·ξ at Bob's input.
    let sqrt_t = p.t.sqrt();
    let channel_noise = 1.0 + p.t * p.xi_channel;
    let received = SampleBlock::from_rng(
        x_a.values
            .iter()
            .map(|&x| sqrt_t * x + rng.gaussian(channel_noise))
            .collect(),
        rng,
    );
    let x_b = bob_homodyne(&received, p, rng);
    Ok((x_a, x_b))
}

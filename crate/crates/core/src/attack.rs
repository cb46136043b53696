//! Eve's intercept-resend pipeline and the two detector-saturation strategies.
//!
//! Eve heterodynes Alice's states, amplifies by √(G/2), displaces by Δ and
//! resends right in front of Bob. The displacement technique leaves residual
//! noise, modelled as an extra independent Gaussian variance at Bob's input:
//! quadratic in Δ for the coherent strategy and linear for the incoherent one.

use std::f64::consts::FRAC_1_SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocol::{alice_modulate, bob_homodyne, ProtocolParams, SampleBlock};
use crate::rng::SimRng;

/// Quadratic excess-noise coefficient fitted so that, with the phase term
/// removed, the coherent strategy first becomes feasible near 50 km.
pub const FITTED_QUAD_COEFF: f64 = 2.0e-4;

/// Gain from the squared residual fluctuation `(Δ·sin δφ)²` to excess noise
/// at Bob's input. `0.23 √N0` of fluctuation corresponds to about 5 N0 of
/// excess noise, so the gain is `5 / 0.23²`.
pub const PHASE_FLUCTUATION_GAIN: f64 = 5.0 / (0.23 * 0.23);

/// Linear excess-noise coefficient fitted so the incoherent strategy first
/// becomes feasible at 35 km.
pub const FITTED_LIN_COEFF: f64 = 0.0216;

/// Phase-drift and feedback-latency budget of the coherent strategy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoherentNoiseModel {
    /// rad/s
    pub drift_rate: f64,
    /// s
    pub latency: f64,
    /// N0 per N0 of Δ².
    pub quad_coeff: f64,
    /// Excess noise per unit of squared residual fluctuation.
    pub fluctuation_gain: f64,
}

impl Default for CoherentNoiseModel {
    fn default() -> Self {
        Self::calibrated()
    }
}

impl CoherentNoiseModel {
    /// 2π rad/s drift, 500 µs feedback latency, fitted quadratic term.
    pub fn calibrated() -> Self {
        Self {
            drift_rate: 2.0 * std::f64::consts::PI,
            latency: 500e-6,
            quad_coeff: FITTED_QUAD_COEFF,
            fluctuation_gain: PHASE_FLUCTUATION_GAIN,
        }
    }

    /// Ideal phase locking: only the quadratic term remains.
    pub fn without_phase_noise(mut self) -> Self {
        self.drift_rate = 0.0;
        self
    }

    pub fn noiseless() -> Self {
        Self {
            drift_rate: 0.0,
            latency: 0.0,
            quad_coeff: 0.0,
            fluctuation_gain: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("drift_rate", self.drift_rate),
            ("latency", self.latency),
            ("quad_coeff", self.quad_coeff),
            ("fluctuation_gain", self.fluctuation_gain),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(name, format!("must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// External-laser saturation seen through the unbalanced homodyne splitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IncoherentModel {
    /// N0 per √N0 of Δ.
    pub lin_coeff: f64,
    pub eta_b: f64,
    /// Local-oscillator intensity, same unit as the injected intensity.
    pub i_lo: f64,
    pub t_bs: f64,
}

/// Average injected power (µW) that drives Bob's output to the lower limit.
pub const SATURATING_POWER_UW: f64 = 5.55;

impl Default for IncoherentModel {
    fn default() -> Self {
        Self::calibrated()
    }
}

impl IncoherentModel {
    /// T_bs = 0.49, η_B = 0.55, intensities in µW with the LO scaled so that
    /// 5.55 µW of injected light gives |Δ| = 106 √N0.
    pub fn calibrated() -> Self {
        let eta_b = 0.55;
        let t_bs = 0.49;
        let per_uw = 106.0 / SATURATING_POWER_UW;
        let i_lo = eta_b * ((1.0 - 2.0 * t_bs) / per_uw).powi(2);
        Self {
            lin_coeff: FITTED_LIN_COEFF,
            eta_b,
            i_lo,
            t_bs,
        }
    }

    pub fn noiseless() -> Self {
        Self {
            lin_coeff: 0.0,
            ..Self::calibrated()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lin_coeff.is_finite() && self.lin_coeff >= 0.0) {
            return Err(Error::invalid(
                "lin_coeff",
                format!("must be >= 0, got {}", self.lin_coeff),
            ));
        }
        if !(self.eta_b > 0.0 && self.eta_b <= 1.0) {
            return Err(Error::invalid(
                "eta_b",
                format!("must be in (0, 1], got {}", self.eta_b),
            ));
        }
        if !(self.i_lo.is_finite() && self.i_lo > 0.0) {
            return Err(Error::invalid("i_lo", format!("must be > 0, got {}", self.i_lo)));
        }
        if !(0.0..=1.0).contains(&self.t_bs) {
            return Err(Error::invalid("t_bs", format!("must be in [0, 1], got {}", self.t_bs)));
        }
        Ok(())
    }
}

/// Saturation technique together with its residual-noise model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Strategy {
    Coherent(CoherentNoiseModel),
    Incoherent(IncoherentModel),
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Coherent(_) => "coherent",
            Strategy::Incoherent(_) => "incoherent",
        }
    }

    /// Extra variance (N0) injected at Bob's input for displacement `delta`.
    pub fn excess_noise(&self, delta: f64) -> f64 {
        let d = delta.abs();
        match self {
            Strategy::Coherent(m) => coherent_residual_noise(d, m).1,
            Strategy::Incoherent(m) => incoherent_excess_noise(d, m),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Strategy::Coherent(m) => m.validate(),
            Strategy::Incoherent(m) => m.validate(),
        }
    }
}

/// How the heterodyne penalty enters Eve's measured quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeterodyneConvention {
    /// `X_M = X_A + X_0 + X_0′`
    #[default]
    Methods,
    /// `X_M = (X_A + X_0 + X_0′)/√2`
    HalfAmplitude,
}

impl HeterodyneConvention {
    fn amplitude(self) -> f64 {
        match self {
            HeterodyneConvention::Methods => 1.0,
            HeterodyneConvention::HalfAmplitude => FRAC_1_SQRT_2,
        }
    }
}

/// Detector limit the displacement pushes towards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisplacementDirection {
    #[default]
    TowardAlpha1,
    TowardAlpha2,
}

impl DisplacementDirection {
    pub fn sign(self) -> f64 {
        match self {
            DisplacementDirection::TowardAlpha1 => -1.0,
            DisplacementDirection::TowardAlpha2 => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackParams {
    pub strategy: Strategy,
    /// Total displacement magnitude Δ (√N0); split evenly between X and P.
    pub delta: f64,
    pub gain: f64,
    /// Technical noise X_N added before amplification (N0).
    pub tech_noise: f64,
    #[serde(default)]
    pub direction: DisplacementDirection,
    #[serde(default)]
    pub heterodyne: HeterodyneConvention,
}

impl AttackParams {
    pub fn new(strategy: Strategy, delta: f64, gain: f64) -> Self {
        Self {
            strategy,
            delta,
            gain,
            tech_noise: 0.0,
            direction: DisplacementDirection::default(),
            heterodyne: HeterodyneConvention::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gain.is_finite() && self.gain >= 0.0) {
            return Err(Error::invalid("gain", format!("must be >= 0, got {}", self.gain)));
        }
        if !self.delta.is_finite() {
            return Err(Error::invalid("delta", "must be finite"));
        }
        if !(self.tech_noise.is_finite() && self.tech_noise >= 0.0) {
            return Err(Error::invalid(
                "tech_noise",
                format!("must be >= 0, got {}", self.tech_noise),
            ));
        }
        self.strategy.validate()
    }

    /// Signed X-quadrature displacement Δ_X = ±Δ/√2.
    pub fn delta_x(&self) -> f64 {
        self.direction.sign() * self.delta.abs() * FRAC_1_SQRT_2
    }

    pub fn strategy_noise(&self) -> f64 {
        self.strategy.excess_noise(self.delta)
    }
}

/// Bob's pre-clamp output as `a·X_A + c + N`, `N ~ N(0, noise_var)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearGaussianModel {
    pub slope: f64,
    pub offset: f64,
    pub signal_var: f64,
    pub noise_var: f64,
}

/// Closed-form pre-clamp statistics of [`attack_run`].
pub fn pipeline_model(p: &ProtocolParams, a: &AttackParams) -> LinearGaussianModel {
    let k = a.heterodyne.amplitude();
    let half_g = a.gain / 2.0;
    let eta = p.eta_b;
    let at_bob_input = half_g * (2.0 * k * k + a.tech_noise) + 1.0 + a.strategy_noise();
    LinearGaussianModel {
        slope: (eta * half_g).sqrt() * k,
        offset: eta.sqrt() * a.delta_x(),
        signal_var: p.v_a,
        noise_var: eta * at_bob_input + (1.0 - eta) + p.v_ele,
    }
}

/// Eve's heterodyne outcome on the X quadrature.
pub fn eve_heterodyne(x_a: &SampleBlock, convention: HeterodyneConvention, rng: &mut SimRng) -> SampleBlock {
    let k = convention.amplitude();
    let values = x_a
        .values
        .iter()
        .map(|&x| {
            let v0 = rng.normal();
            let v1 = rng.normal();
            k * (x + v0 + v1)
        })
        .collect();
    SampleBlock {
        values,
        seed: rng.seed(),
        block_index: rng.block_index(),
    }
}

/// `X_E = √(G/2)·(X_M + X_N) + Δ_X + X_0″`
pub fn eve_resend(x_m: &SampleBlock, a: &AttackParams, rng: &mut SimRng) -> Result<SampleBlock> {
    a.validate()?;
    let amp = (a.gain / 2.0).sqrt();
    let dx = a.delta_x();
    let values = x_m
        .values
        .iter()
        .map(|&x| {
            let tech = rng.gaussian(a.tech_noise);
            let prep = rng.normal();
            amp * (x + tech) + dx + prep
        })
        .collect();
    Ok(SampleBlock {
        values,
        seed: rng.seed(),
        block_index: rng.block_index(),
    })
}

/// Adds independent Gaussian noise of the given variance to every sample.
pub fn inject_noise(x: &mut SampleBlock, variance: f64, rng: &mut SimRng) {
    if variance > 0.0 {
        x.values.iter_mut().for_each(|v| *v += rng.gaussian(variance));
    }
}

/// `Δ = √(η_B/I_LO)·(1 − 2T_bs)·I`
pub fn displacement_from_intensity(i: f64, m: &IncoherentModel) -> Result<f64> {
    if !(m.i_lo.is_finite() && m.i_lo > 0.0) {
        return Err(Error::invalid("i_lo", format!("must be > 0, got {}", m.i_lo)));
    }
    if !(i.is_finite() && i >= 0.0) {
        return Err(Error::invalid("intensity", format!("must be >= 0, got {i}")));
    }
    Ok((m.eta_b / m.i_lo).sqrt() * (1.0 - 2.0 * m.t_bs) * i)
}

/// Residual phase error δφ = drift · latency (rad).
pub fn coherent_phase_error(m: &CoherentNoiseModel) -> f64 {
    m.drift_rate * m.latency
}

/// Returns `(fluctuation std, added variance)` for displacement `delta`.
pub fn coherent_residual_noise(delta: f64, m: &CoherentNoiseModel) -> (f64, f64) {
    let fluct = delta * coherent_phase_error(m).sin();
    let var = m.fluctuation_gain * fluct * fluct + m.quad_coeff * delta * delta;
    (fluct, var)
}

pub fn incoherent_excess_noise(delta: f64, m: &IncoherentModel) -> f64 {
    m.lin_coeff * delta
}

/// Full attacked link for one block. Returns `(x_a, x_b_sat)`.
pub fn attack_run(
    p: &ProtocolParams,
    a: &AttackParams,
    n: usize,
    rng: &mut SimRng,
) -> Result<(SampleBlock, SampleBlock)> {
    p.validate()?;
    a.validate()?;
    let x_a = alice_modulate(n, p.v_a, rng)?;
    let x_m = eve_heterodyne(&x_a, a.heterodyne, rng);
    let mut x_e = eve_resend(&x_m, a, rng)?;
    inject_noise(&mut x_e, a.strategy_noise(), rng);
    let x_b = bob_homodyne(&x_e, p, rng);
    Ok((x_a, x_b))
}

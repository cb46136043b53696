//! Experiment configuration file.
//!
//! TOML with one section per subsystem. Every field has a default, so an
//! empty file is a complete configuration; unknown keys are rejected and
//! every error names the offending field path.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::attack::{
    AttackParams, CoherentNoiseModel, DisplacementDirection, HeterodyneConvention, IncoherentModel, Strategy,
};
use crate::error::{Error, Result};
use crate::optimizer::{OptimizerConfig, SearchConfig, SuccessConditions};
use crate::protocol::{ProtocolParams, DEFAULT_LOSS_DB_PER_KM};
use crate::security::DEFAULT_BETA;
use crate::snu::{volts_to_snu, DetectorLimits, QuadratureConfig, ShotNoiseCalibration};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub protocol: ProtocolSection,
    pub detector: DetectorSection,
    pub attack: AttackSection,
    pub optimizer: OptimizerSection,
    pub monte_carlo: MonteCarloSection,
    pub run: RunSection,
    pub output: OutputSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            protocol: ProtocolSection::default(),
            detector: DetectorSection::default(),
            attack: AttackSection::default(),
            optimizer: OptimizerSection::default(),
            monte_carlo: MonteCarloSection::default(),
            run: RunSection::default(),
            output: OutputSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolSection {
    pub eta_b: f64,
    pub v_ele: f64,
    /// Excess noise of the honest channel (N0).
    pub xi_channel: f64,
    pub loss_db_per_km: f64,
    pub beta: f64,
}

impl Default for ProtocolSection {
    fn default() -> Self {
        let p = ProtocolParams::calibrated();
        Self {
            eta_b: p.eta_b,
            v_ele: p.v_ele,
            xi_channel: p.xi_channel,
            loss_db_per_km: DEFAULT_LOSS_DB_PER_KM,
            beta: DEFAULT_BETA,
        }
    }
}

/// Limits either directly in √N0 or in volts with a calibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha1_snu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha2_snu: Option<f64>,
    pub alpha1_volts: f64,
    pub alpha2_volts: f64,
    pub volts_per_sqrt_n0: f64,
}

impl Default for DetectorSection {
    fn default() -> Self {
        Self {
            alpha1_snu: None,
            alpha2_snu: None,
            alpha1_volts: -2.5,
            alpha2_volts: 3.3,
            volts_per_sqrt_n0: 2.5 / 106.0,
        }
    }
}

impl DetectorSection {
    pub fn limits(&self) -> Result<DetectorLimits> {
        let cal = ShotNoiseCalibration::new(self.volts_per_sqrt_n0)
            .map_err(|e| config_err("detector.volts_per_sqrt_n0", e))?;
        let a1 = self.alpha1_snu.unwrap_or_else(|| volts_to_snu(self.alpha1_volts, &cal));
        let a2 = self.alpha2_snu.unwrap_or_else(|| volts_to_snu(self.alpha2_volts, &cal));
        let field = if self.alpha1_snu.is_some() || self.alpha2_snu.is_some() {
            "detector.alpha1_snu"
        } else {
            "detector.alpha1_volts"
        };
        DetectorLimits::new(a1, a2).map_err(|e| config_err(field, e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyKind {
    Coherent,
    Incoherent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttackSection {
    pub strategy: StrategyKind,
    pub tech_noise: f64,
    pub direction: DisplacementDirection,
    pub heterodyne: HeterodyneConvention,
    pub coherent: CoherentNoiseModel,
    pub incoherent: IncoherentModel,
}

impl Default for AttackSection {
    fn default() -> Self {
        Self {
            strategy: StrategyKind::Incoherent,
            tech_noise: 0.0,
            direction: DisplacementDirection::default(),
            heterodyne: HeterodyneConvention::default(),
            coherent: CoherentNoiseModel::calibrated(),
            incoherent: IncoherentModel::calibrated(),
        }
    }
}

impl AttackSection {
    pub fn strategy(&self) -> Strategy {
        match self.strategy {
            StrategyKind::Coherent => Strategy::Coherent(self.coherent),
            StrategyKind::Incoherent => Strategy::Incoherent(self.incoherent),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerSection {
    pub success: SuccessConditions,
    pub search: SearchConfig,
    pub quadrature: QuadratureConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonteCarloSection {
    pub blocks: usize,
    pub block_size: usize,
}

impl Default for MonteCarloSection {
    fn default() -> Self {
        Self {
            blocks: 10,
            block_size: 10_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    /// Distances for `simulate` and `optimize`.
    pub distances_km: Vec<f64>,
    /// Fixed attack point for `simulate`; the optimizer picks it when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gain: Option<f64>,
    pub sweep_from_km: f64,
    pub sweep_to_km: f64,
    pub sweep_step_km: f64,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            distances_km: vec![50.0],
            delta: None,
            gain: None,
            sweep_from_km: 35.0,
            sweep_to_km: 100.0,
            sweep_step_km: 5.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
    #[default]
    Both,
}

impl OutputFormat {
    pub fn csv(self) -> bool {
        matches!(self, OutputFormat::Csv | OutputFormat::Both)
    }

    pub fn json(self) -> bool {
        matches!(self, OutputFormat::Json | OutputFormat::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: String,
    pub format: OutputFormat,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: "out".into(),
            format: OutputFormat::Both,
        }
    }
}

fn config_err(path: &str, e: impl std::fmt::Display) -> Error {
    Error::Config {
        path: path.into(),
        message: e.to_string(),
    }
}

impl ExperimentConfig {
    /// Parses and validates a TOML document.
    pub fn from_toml(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| config_err("<document>", e.to_string().trim_end()))?;
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            config_err(&path, e.into_inner().to_string().trim_end())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| config_err(&path.display().to_string(), e))?;
        Self::from_toml(&text)
    }

    /// Pins every calibrated constant to the built-in values, keeping the
    /// run, Monte Carlo and output settings.
    pub fn apply_calibrated_preset(&mut self) {
        let base = Self::default();
        self.protocol = base.protocol;
        self.detector = base.detector;
        self.attack.coherent = base.attack.coherent;
        self.attack.incoherent = base.attack.incoherent;
        self.attack.tech_noise = base.attack.tech_noise;
        self.attack.heterodyne = base.attack.heterodyne;
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// SHA-256 of the canonical TOML rendering. The output section only
    /// says where results go, so it is left out.
    pub fn sha256(&self) -> String {
        let canonical = Self {
            output: OutputSection::default(),
            ..self.clone()
        };
        hex::encode(Sha256::digest(canonical.to_toml().as_bytes()))
    }

    pub fn protocol_params(&self) -> Result<ProtocolParams> {
        let p = ProtocolParams {
            v_a: 1.0,
            eta_b: self.protocol.eta_b,
            v_ele: self.protocol.v_ele,
            limits: self.detector.limits()?,
            t: 1.0,
            xi_channel: self.protocol.xi_channel,
        };
        p.validate().map_err(|e| match e {
            Error::InvalidParameter { name, reason } => config_err(&format!("protocol.{name}"), reason),
            other => other,
        })?;
        Ok(p)
    }

    pub fn optimizer_config(&self) -> Result<OptimizerConfig> {
        Ok(OptimizerConfig {
            protocol: self.protocol_params()?,
            loss_db_per_km: self.protocol.loss_db_per_km,
            beta: self.protocol.beta,
            tech_noise: self.attack.tech_noise,
            direction: self.attack.direction,
            heterodyne: self.attack.heterodyne,
            search: self.optimizer.search,
            quadrature: self.optimizer.quadrature,
        })
    }

    pub fn attack_at(&self, delta: f64, gain: f64) -> AttackParams {
        AttackParams {
            strategy: self.attack.strategy(),
            delta,
            gain,
            tech_noise: self.attack.tech_noise,
            direction: self.attack.direction,
            heterodyne: self.attack.heterodyne,
        }
    }

    /// Enforces every physical constraint; errors carry the field path.
    pub fn validate(&self) -> Result<()> {
        self.protocol_params()?;
        let prefixed = |section: &str, r: Result<()>| {
            r.map_err(|e| match e {
                Error::InvalidParameter { name, reason } => config_err(&format!("{section}.{name}"), reason),
                other => other,
            })
        };
        prefixed("attack.coherent", self.attack.coherent.validate())?;
        prefixed("attack.incoherent", self.attack.incoherent.validate())?;
        if !(self.attack.tech_noise.is_finite() && self.attack.tech_noise >= 0.0) {
            return Err(config_err("attack.tech_noise", "must be >= 0"));
        }
        prefixed("optimizer.success", self.optimizer.success.validate())?;
        let opt = self.optimizer_config()?;
        opt.validate().map_err(|e| match e {
            Error::InvalidParameter { name, reason } => {
                let section = if name.starts_with("search") {
                    "optimizer"
                } else {
                    "protocol"
                };
                config_err(&format!("{section}.{name}"), reason)
            }
            other => other,
        })?;
        let q = &self.optimizer.quadrature;
        if q.order == 0 || q.check_order == 0 || !(q.tolerance > 0.0) {
            return Err(config_err(
                "optimizer.quadrature",
                "orders must be positive and tolerance > 0",
            ));
        }
        if self.monte_carlo.blocks < 2 {
            return Err(config_err("monte_carlo.blocks", "need at least 2 blocks"));
        }
        if self.monte_carlo.block_size == 0 {
            return Err(config_err("monte_carlo.block_size", "must be positive"));
        }
        for (i, d) in self.run.distances_km.iter().enumerate() {
            if !(d.is_finite() && *d >= 0.0) {
                return Err(config_err(
                    &format!("run.distances_km[{i}]"),
                    format!("must be >= 0, got {d}"),
                ));
            }
        }
        if let Some(g) = self.run.gain {
            if !(g.is_finite() && g > 0.0) {
                return Err(config_err("run.gain", format!("must be > 0, got {g}")));
            }
        }
        if let Some(d) = self.run.delta {
            if !(d.is_finite() && d >= 0.0) {
                return Err(config_err("run.delta", format!("must be >= 0, got {d}")));
            }
        }
        if self.run.delta.is_some() != self.run.gain.is_some() {
            return Err(config_err("run.delta", "delta and gain must be given together"));
        }
        validate_sweep(self.run.sweep_from_km, self.run.sweep_to_km, self.run.sweep_step_km)
    }
}

pub fn validate_sweep(from: f64, to: f64, step: f64) -> Result<()> {
    if !(from.is_finite() && from >= 0.0) {
        return Err(config_err("run.sweep_from_km", format!("must be >= 0, got {from}")));
    }
    if !(to.is_finite() && to >= from) {
        return Err(config_err(
            "run.sweep_to_km",
            format!("must be >= sweep_from_km, got {to}"),
        ));
    }
    if !(step.is_finite() && step > 0.0) {
        return Err(config_err("run.sweep_step_km", format!("must be > 0, got {step}")));
    }
    Ok(())
}

/// `from, from + step, …` up to `to` inclusive (with a small slack).
pub fn sweep_distances(from: f64, to: f64, step: f64) -> Vec<f64> {
    let n = ((to - from) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| from + step * i as f64).collect()
}

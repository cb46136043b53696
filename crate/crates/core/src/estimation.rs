//! Alice–Bob parameter estimation on attacked data.
//!
//! Transmittance and excess noise are inferred from the correlation and
//! Bob's variance as if the detector were linear. The shot-noise calibration
//! is assumed honest: Eve does not touch it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attack::{attack_run, pipeline_model, AttackParams};
use crate::error::{Error, Result};
use crate::protocol::{ProtocolParams, SampleBlock};
use crate::rng::{SimRng, CHUNK_SIZE};
use crate::snu::{clipped_covariance, clipped_moments, GaussianSpec, QuadratureConfig};

/// Mean and block-to-block spread of the estimated channel parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelEstimate {
    pub t_sat: f64,
    pub xi_sat: f64,
    /// `(t, ξ)` for each block, in block order.
    pub per_block: Vec<(f64, f64)>,
    /// Sample standard deviation across blocks.
    pub std_t: f64,
    pub std_xi: f64,
}

impl ChannelEstimate {
    /// Aggregates per-block estimates in the order given.
    pub fn from_blocks(per_block: Vec<(f64, f64)>) -> Result<Self> {
        if per_block.len() < 2 {
            return Err(Error::invalid("blocks", "need at least 2 blocks for a spread"));
        }
        let n = per_block.len() as f64;
        let mean_t = per_block.iter().map(|b| b.0).sum::<f64>() / n;
        let mean_xi = per_block.iter().map(|b| b.1).sum::<f64>() / n;
        let var_t = per_block.iter().map(|b| (b.0 - mean_t).powi(2)).sum::<f64>() / (n - 1.0);
        let var_xi = per_block.iter().map(|b| (b.1 - mean_xi).powi(2)).sum::<f64>() / (n - 1.0);
        Ok(Self {
            t_sat: mean_t,
            xi_sat: mean_xi,
            per_block,
            std_t: var_t.sqrt(),
            std_xi: var_xi.sqrt(),
        })
    }

    pub fn blocks(&self) -> usize {
        self.per_block.len()
    }

    /// Standard errors of the block means.
    pub fn standard_errors(&self) -> (f64, f64) {
        let k = (self.blocks() as f64).sqrt();
        (self.std_t / k, self.std_xi / k)
    }
}

/// `2·cov²/(G·η_B·V_A²)`
pub fn t_sat_from_covariance(cov: f64, g: f64, eta_b: f64, v_a: f64) -> Result<f64> {
    let denom = g * eta_b * v_a * v_a;
    if !(denom > 0.0) {
        return Err(Error::EstimatorUndefined(format!(
            "G·η_B·V_A² must be positive, got G={g}, η_B={eta_b}, V_A={v_a}"
        )));
    }
    Ok(2.0 * cov * cov / denom)
}

/// Transmittance estimate from paired blocks.
///
/// The covariance uses Alice's known zero mean; Bob's empirical mean is
/// removed because saturation shifts it far from zero.
pub fn estimate_t_sat(x_a: &SampleBlock, x_b: &SampleBlock, g: f64, eta_b: f64, v_a: f64) -> Result<f64> {
    if x_a.is_empty() || x_a.len() != x_b.len() {
        return Err(Error::EstimatorUndefined(format!(
            "blocks must be non-empty and of equal length, got {} and {}",
            x_a.len(),
            x_b.len()
        )));
    }
    let stats = Moments::from_slices(&x_a.values, &x_b.values);
    t_sat_from_covariance(stats.covariance(), g, eta_b, v_a)
}

/// `ξ = 2/(G·η_B·t)·(V_B − G·η_B·t·V_A/2 − 1 − v_ele)`
pub fn estimate_xi_sat(v_b_sat: f64, t_sat: f64, g: f64, eta_b: f64, v_a: f64, v_ele: f64) -> Result<f64> {
    let k = g * eta_b * t_sat;
    if !(t_sat > 0.0) || !(k > 0.0) {
        return Err(Error::EstimatorUndefined(format!(
            "excess noise needs T_sat > 0 and G·η_B > 0, got T_sat={t_sat}, G={g}, η_B={eta_b}"
        )));
    }
    Ok(2.0 / k * (v_b_sat - k * v_a / 2.0 - 1.0 - v_ele))
}

/// Running first and second moments of `(x_a, x_b)`; Chan-style merging.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: f64,
    mean_a: f64,
    mean_b: f64,
    m2_b: f64,
    /// Σ x_a·(x_b − mean_b); x_a is centred on its known zero mean.
    c_ab: f64,
}

impl Moments {
    fn from_slices(a: &[f64], b: &[f64]) -> Self {
        let n = b.len() as f64;
        let mean_b = b.iter().sum::<f64>() / n;
        let mean_a = a.iter().sum::<f64>() / n;
        let mut m2_b = 0.0;
        let mut c_ab = 0.0;
        for (&xa, &xb) in a.iter().zip(b) {
            let db = xb - mean_b;
            m2_b += db * db;
            c_ab += xa * db;
        }
        Self {
            n,
            mean_a,
            mean_b,
            m2_b,
            c_ab,
        }
    }

    fn merge(self, o: Self) -> Self {
        if self.n == 0.0 {
            return o;
        }
        let n = self.n + o.n;
        let db = o.mean_b - self.mean_b;
        let mean_b = self.mean_b + db * o.n / n;
        // Σ x_a(x_b − m) over each part, re-centred on the merged mean.
        let c_ab =
            self.c_ab + self.n * self.mean_a * (self.mean_b - mean_b) + o.c_ab + o.n * o.mean_a * (o.mean_b - mean_b);
        Self {
            n,
            mean_a: self.mean_a + (o.mean_a - self.mean_a) * o.n / n,
            mean_b,
            m2_b: self.m2_b + o.m2_b + db * db * self.n * o.n / n,
            c_ab,
        }
    }

    fn covariance(&self) -> f64 {
        self.c_ab / self.n
    }

    fn variance_b(&self) -> f64 {
        self.m2_b / self.n
    }
}

fn chunk_moments(
    p: &ProtocolParams,
    a: &AttackParams,
    len: usize,
    seed: u64,
    block: u64,
    chunk: u64,
) -> Result<Moments> {
    let mut rng = SimRng::for_chunk(seed, block, chunk);
    let (x_a, x_b) = attack_run(p, a, len, &mut rng)?;
    Ok(Moments::from_slices(&x_a.values, &x_b.values))
}

fn estimates_from_moments(m: &Moments, p: &ProtocolParams, a: &AttackParams) -> Result<(f64, f64)> {
    let t = t_sat_from_covariance(m.covariance(), a.gain, p.eta_b, p.v_a)?;
    let xi = estimate_xi_sat(m.variance_b(), t, a.gain, p.eta_b, p.v_a, p.v_ele)?;
    Ok((t, xi))
}

/// `(t, ξ)` of one block, generated in chunks of [`CHUNK_SIZE`] samples.
pub fn single_block_estimate(
    p: &ProtocolParams,
    a: &AttackParams,
    block_size: usize,
    seed: u64,
    block_index: u64,
) -> Result<(f64, f64)> {
    let chunks = chunk_plan(block_size)?;
    let mut m = Moments::default();
    for (c, len) in chunks {
        m = m.merge(chunk_moments(p, a, len, seed, block_index, c)?);
    }
    estimates_from_moments(&m, p, a)
}

fn chunk_plan(block_size: usize) -> Result<Vec<(u64, usize)>> {
    if block_size == 0 {
        return Err(Error::invalid("block_size", "must be positive"));
    }
    Ok((0..block_size.div_ceil(CHUNK_SIZE))
        .map(|c| (c as u64, CHUNK_SIZE.min(block_size - c * CHUNK_SIZE)))
        .collect())
}

/// Monte Carlo estimate over `blocks` independent blocks.
///
/// Work is spread over rayon by `(block, chunk)`; every chunk owns a stream
/// addressed by `(master_seed, block, chunk)` and partial moments are merged
/// in index order, so the result is bit-identical for any thread count.
pub fn block_estimates(
    p: &ProtocolParams,
    a: &AttackParams,
    blocks: usize,
    block_size: usize,
    master_seed: u64,
) -> Result<ChannelEstimate> {
    if blocks < 2 {
        return Err(Error::invalid("blocks", "need at least 2 blocks"));
    }
    p.validate()?;
    a.validate()?;
    let chunks = chunk_plan(block_size)?;
    let tasks: Vec<(u64, u64, usize)> = (0..blocks as u64)
        .flat_map(|b| chunks.iter().map(move |&(c, len)| (b, c, len)))
        .collect();
    let parts: Vec<Moments> = tasks
        .par_iter()
        .map(|&(b, c, len)| chunk_moments(p, a, len, master_seed, b, c))
        .collect::<Result<_>>()?;
    let per_block = parts
        .chunks(chunks.len())
        .map(|ms| {
            let m = ms.iter().fold(Moments::default(), |acc, &x| acc.merge(x));
            estimates_from_moments(&m, p, a)
        })
        .collect::<Result<Vec<_>>>()?;
    ChannelEstimate::from_blocks(per_block)
}

/// Deterministic large-sample limit of the estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticEstimate {
    pub t_sat: f64,
    pub xi_sat: f64,
    /// ⟨X_A X_B_sat⟩
    pub covariance: f64,
    /// V_B_sat
    pub v_b_sat: f64,
}

pub fn analytic_estimates(p: &ProtocolParams, a: &AttackParams) -> Result<AnalyticEstimate> {
    analytic_estimates_with(p, a, &QuadratureConfig::default())
}

pub fn analytic_estimates_with(
    p: &ProtocolParams,
    a: &AttackParams,
    quad: &QuadratureConfig,
) -> Result<AnalyticEstimate> {
    p.validate()?;
    a.validate()?;
    let m = pipeline_model(p, a);
    let covariance = clipped_covariance(m.slope, m.offset, m.signal_var, m.noise_var, &p.limits, quad)?;
    let total = GaussianSpec::new(m.offset, m.slope * m.slope * m.signal_var + m.noise_var)?;
    let v_b_sat = clipped_moments(&total, &p.limits).variance;
    let t_sat = t_sat_from_covariance(covariance, a.gain, p.eta_b, p.v_a)?;
    let xi_sat = estimate_xi_sat(v_b_sat, t_sat, a.gain, p.eta_b, p.v_a, p.v_ele)?;
    Ok(AnalyticEstimate {
        t_sat,
        xi_sat,
        covariance,
        v_b_sat,
    })
}

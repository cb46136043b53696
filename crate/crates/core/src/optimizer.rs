//! Attack-parameter search and feasibility boundaries.
//!
//! Eve wants Alice and Bob to see the true transmittance and an excess noise
//! below the null-key threshold while still extracting a positive key from
//! their point of view. The search runs on the analytic estimators: a coarse
//! (Δ, G) grid evaluated in parallel, then coordinate descent where Δ is
//! re-projected onto `T_sat = T` for every trial gain.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attack::{AttackParams, DisplacementDirection, HeterodyneConvention, Strategy};
use crate::error::{Error, Result};
use crate::estimation::{analytic_estimates_with, ChannelEstimate};
use crate::protocol::{distance_to_transmittance, ProtocolParams, DEFAULT_LOSS_DB_PER_KM};
use crate::security::{key_rate, null_key_threshold, optimal_v_a, SecurityParams, DEFAULT_BETA};
use crate::snu::QuadratureConfig;

/// Weight of the tie-break that prefers ξ_sat closest to zero among points
/// whose negative estimate is read as zero noise.
const NEGATIVE_XI_TIEBREAK: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SuccessConditions {
    pub require_t_match: bool,
    /// Relative tolerance on `T_sat = T`.
    pub t_tolerance: f64,
    pub require_xi_below_null: bool,
    pub require_positive_key: bool,
}

impl Default for SuccessConditions {
    fn default() -> Self {
        Self {
            require_t_match: true,
            t_tolerance: 0.01,
            require_xi_below_null: true,
            require_positive_key: true,
        }
    }
}

impl SuccessConditions {
    /// Drops the transmittance-match condition.
    pub fn relaxed() -> Self {
        Self {
            require_t_match: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_tolerance.is_finite() && self.t_tolerance > 0.0) {
            return Err(Error::invalid(
                "t_tolerance",
                format!("must be > 0, got {}", self.t_tolerance),
            ));
        }
        Ok(())
    }
}

/// Per-condition verdicts; `None` marks a disabled condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub feasible: bool,
    pub t_match: Option<bool>,
    pub xi_below_null: Option<bool>,
    pub positive_key: Option<bool>,
    pub reasons: Vec<String>,
}

pub fn success_check(
    t_sat: f64,
    xi_sat: f64,
    t_true: f64,
    xi_null: f64,
    k: f64,
    cond: &SuccessConditions,
) -> ConditionReport {
    let mut reasons = Vec::new();
    let t_match = cond.require_t_match.then(|| {
        let ok = ((t_sat - t_true) / t_true).abs() <= cond.t_tolerance;
        if !ok {
            reasons.push(format!("transmittance mismatch: T_sat = {t_sat:.6}, T = {t_true:.6}"));
        }
        ok
    });
    let xi_below_null = cond.require_xi_below_null.then(|| {
        let ok = xi_sat < xi_null;
        if !ok {
            reasons.push(format!("noise detected: ξ_sat = {xi_sat:.6} ≥ ξ_null = {xi_null:.6}"));
        }
        ok
    });
    let positive_key = cond.require_positive_key.then(|| {
        let ok = k > 0.0;
        if !ok {
            reasons.push(format!("no positive key: K = {k:.3e}"));
        }
        ok
    });
    let feasible = [t_match, xi_below_null, positive_key].iter().all(|c| c.unwrap_or(true));
    ConditionReport {
        feasible,
        t_match,
        xi_below_null,
        positive_key,
        reasons,
    }
}

/// [`success_check`] on a Monte Carlo estimate.
pub fn success_check_estimate(
    est: &ChannelEstimate,
    t_true: f64,
    xi_null: f64,
    k: f64,
    cond: &SuccessConditions,
) -> ConditionReport {
    success_check(est.t_sat, est.xi_sat, t_true, xi_null, k, cond)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchConfig {
    pub gain_min: f64,
    pub gain_max: f64,
    /// Δ grid spans `[0, delta_span·|α1|]`.
    pub delta_span: f64,
    pub delta_points: usize,
    pub gain_points: usize,
    /// Coordinate-descent tolerance on each variable.
    pub tolerance: f64,
    pub max_sweeps: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            gain_min: 0.05,
            gain_max: 8.0,
            delta_span: 3.0,
            delta_points: 61,
            gain_points: 41,
            tolerance: 1e-3,
            max_sweeps: 40,
        }
    }
}

/// Everything the optimizer needs besides the strategy and distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    /// Detector and modulation; `t` and `v_a` are set per distance.
    pub protocol: ProtocolParams,
    pub loss_db_per_km: f64,
    pub beta: f64,
    pub tech_noise: f64,
    pub direction: DisplacementDirection,
    pub heterodyne: HeterodyneConvention,
    pub search: SearchConfig,
    pub quadrature: QuadratureConfig,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            protocol: ProtocolParams::calibrated(),
            loss_db_per_km: DEFAULT_LOSS_DB_PER_KM,
            beta: DEFAULT_BETA,
            tech_noise: 0.0,
            direction: DisplacementDirection::default(),
            heterodyne: HeterodyneConvention::default(),
            search: SearchConfig::default(),
            quadrature: QuadratureConfig::default(),
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let s = &self.search;
        if !(s.gain_min > 0.0 && s.gain_min < s.gain_max && s.gain_max.is_finite()) {
            return Err(Error::invalid("search.gain", "need 0 < gain_min < gain_max"));
        }
        if !(s.delta_span.is_finite() && s.delta_span > 0.0) {
            return Err(Error::invalid("search.delta_span", "must be > 0"));
        }
        if s.delta_points < 2 || s.gain_points < 2 {
            return Err(Error::invalid("search.points", "grids need at least 2 points"));
        }
        if !(s.tolerance > 0.0) {
            return Err(Error::invalid("search.tolerance", "must be > 0"));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::invalid("beta", format!("must be in (0, 1], got {}", self.beta)));
        }
        if !(self.tech_noise.is_finite() && self.tech_noise >= 0.0) {
            return Err(Error::invalid("tech_noise", "must be >= 0"));
        }
        if !(self.loss_db_per_km.is_finite() && self.loss_db_per_km > 0.0) {
            return Err(Error::invalid("loss_db_per_km", "must be > 0"));
        }
        self.protocol.validate()
    }

    fn attack(&self, strategy: Strategy, delta: f64, gain: f64) -> AttackParams {
        AttackParams {
            strategy,
            delta,
            gain,
            tech_noise: self.tech_noise,
            direction: self.direction,
            heterodyne: self.heterodyne,
        }
    }

    fn delta_max(&self) -> f64 {
        self.search.delta_span * self.protocol.limits.alpha1().abs()
    }
}

/// Alice-side quantities at one distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    pub distance_km: f64,
    pub t: f64,
    pub v_a: f64,
    pub xi_null: f64,
    /// Key rate of the unattacked link at the configured channel noise.
    pub k_honest: f64,
}

pub fn link_budget(distance_km: f64, cfg: &OptimizerConfig) -> Result<LinkBudget> {
    let t = distance_to_transmittance(distance_km, cfg.loss_db_per_km)?;
    let p = &cfg.protocol;
    let v_a = optimal_v_a(t, p.eta_b, p.v_ele, cfg.beta, p.xi_channel)?;
    let xi_null = null_key_threshold(t, v_a, p.eta_b, p.v_ele, cfg.beta)?;
    let k_honest = key_rate(&SecurityParams {
        v_a,
        t,
        xi: p.xi_channel,
        eta: p.eta_b,
        v_ele: p.v_ele,
        beta: cfg.beta,
    })?;
    Ok(LinkBudget {
        distance_km,
        t,
        v_a,
        xi_null,
        k_honest,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackSolution {
    pub distance_km: f64,
    pub t: f64,
    pub v_a: f64,
    pub delta: f64,
    pub gain: f64,
    pub t_sat: f64,
    pub xi_sat: f64,
    pub xi_null: f64,
    /// Key rate Alice and Bob compute from their estimates.
    pub key_rate: f64,
    pub k_honest: f64,
    pub feasible: bool,
    pub report: ConditionReport,
}

/// Ordering key: feasibility first, then score.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Merit {
    feasible: bool,
    score: f64,
}

impl Merit {
    fn better_than(&self, o: &Merit) -> bool {
        (self.feasible && !o.feasible) || (self.feasible == o.feasible && self.score > o.score)
    }

    fn at_least(&self, o: &Merit) -> bool {
        !o.better_than(self)
    }
}

#[derive(Debug, Clone)]
struct Evaluation {
    delta: f64,
    gain: f64,
    t_sat: f64,
    xi_sat: f64,
    key_rate: f64,
    report: ConditionReport,
    merit: Merit,
}

struct Problem<'a> {
    cfg: &'a OptimizerConfig,
    strategy: Strategy,
    cond: SuccessConditions,
    link: LinkBudget,
    protocol: ProtocolParams,
}

impl Problem<'_> {
    fn t_sat(&self, delta: f64, gain: f64) -> f64 {
        let a = self.cfg.attack(self.strategy, delta, gain);
        analytic_estimates_with(&self.protocol, &a, &self.cfg.quadrature)
            .map(|e| e.t_sat)
            .unwrap_or(0.0)
    }

    fn evaluate(&self, delta: f64, gain: f64) -> Evaluation {
        let a = self.cfg.attack(self.strategy, delta, gain);
        let link = &self.link;
        let est = analytic_estimates_with(&self.protocol, &a, &self.cfg.quadrature);
        let (t_sat, xi_sat) = match est {
            Ok(e) => (e.t_sat, e.xi_sat),
            Err(_) => (0.0, f64::INFINITY),
        };
        let k = if t_sat > 0.0 && t_sat <= 1.0 && xi_sat.is_finite() {
            let s = SecurityParams::from_estimate(
                link.v_a,
                t_sat,
                xi_sat,
                self.protocol.eta_b,
                self.protocol.v_ele,
                self.cfg.beta,
            );
            key_rate(&s).unwrap_or(f64::NEG_INFINITY)
        } else {
            f64::NEG_INFINITY
        };
        let report = success_check(t_sat, xi_sat, link.t, link.xi_null, k, &self.cond);
        let merit = if report.feasible {
            Merit {
                feasible: true,
                score: k - NEGATIVE_XI_TIEBREAK * (-xi_sat).max(0.0),
            }
        } else {
            Merit {
                feasible: false,
                score: -self.violation(t_sat, xi_sat, k),
            }
        };
        Evaluation {
            delta,
            gain,
            t_sat,
            xi_sat,
            key_rate: k,
            report,
            merit,
        }
    }

    /// Sum of normalized constraint violations of the enabled conditions.
    fn violation(&self, t_sat: f64, xi_sat: f64, k: f64) -> f64 {
        let link = &self.link;
        let mut v = 0.0;
        if self.cond.require_t_match {
            v += (((t_sat - link.t) / link.t).abs() - self.cond.t_tolerance).max(0.0);
        }
        if self.cond.require_xi_below_null {
            let x = if xi_sat.is_finite() { xi_sat } else { 1e6 };
            v += ((x - link.xi_null) / link.xi_null).max(0.0);
        }
        if self.cond.require_positive_key {
            v += if k.is_finite() { (-k).max(0.0) } else { 1.0 };
        }
        v
    }

    /// Best point of the (Δ, G) grid. When `T_sat = T` is imposed, each grid
    /// gain also contributes its Δ projected onto that constraint, since a
    /// fixed Δ grid almost never lands inside the 1% band.
    fn coarse_grid(&self) -> Evaluation {
        let s = &self.cfg.search;
        let dmax = self.cfg.delta_max();
        let gains: Vec<f64> = (0..s.gain_points)
            .map(|j| s.gain_min + (s.gain_max - s.gain_min) * j as f64 / (s.gain_points - 1) as f64)
            .collect();
        let mut points: Vec<(Option<f64>, f64)> = gains
            .iter()
            .flat_map(|&g| (0..s.delta_points).map(move |i| (Some(dmax * i as f64 / (s.delta_points - 1) as f64), g)))
            .collect();
        if self.cond.require_t_match {
            points.extend(gains.iter().map(|&g| (None, g)));
        }
        let evals: Vec<Evaluation> = points
            .par_iter()
            .map(|&(d, g)| match d {
                Some(d) => self.evaluate(d, g),
                None => self.evaluate(self.project_delta(g, 0.0), g),
            })
            .collect();
        evals
            .into_iter()
            .reduce(|best, e| if e.merit.better_than(&best.merit) { e } else { best })
            .expect("grid is non-empty")
    }

    /// Δ with `T_sat(Δ, G) = T`, or `fallback` when no sign change exists.
    fn project_delta(&self, gain: f64, fallback: f64) -> f64 {
        let target = self.link.t;
        let (mut lo, mut hi) = (0.0, self.cfg.delta_max());
        let f_lo = self.t_sat(lo, gain) - target;
        let f_hi = self.t_sat(hi, gain) - target;
        if f_lo.signum() == f_hi.signum() {
            return fallback;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if (self.t_sat(mid, gain) - target).signum() == f_lo.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-10 * self.cfg.delta_max() {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    /// Best Δ for fixed G by 9-point pattern search with a halving window
    /// (used when `T_sat = T` is not imposed).
    fn search_delta(&self, gain: f64, start: f64, mut window: f64) -> Evaluation {
        let dmax = self.cfg.delta_max();
        let mut best = self.evaluate(start, gain);
        while window > self.cfg.search.tolerance {
            let centre = best.delta;
            for k in -4..=4 {
                let e = self.evaluate((centre + window * k as f64 / 4.0).clamp(0.0, dmax), gain);
                if e.merit.better_than(&best.merit) {
                    best = e;
                }
            }
            window /= 2.0;
        }
        best
    }

    fn refine(&self, start: Evaluation) -> Evaluation {
        let s = &self.cfg.search;
        let mut best = start.clone();
        let mut window_g = (s.gain_max - s.gain_min) / (s.gain_points - 1) as f64 * 2.0;
        let window_d = self.cfg.delta_max() / (s.delta_points - 1) as f64 * 2.0;
        for _ in 0..s.max_sweeps {
            let before = best.clone();
            // Δ-step.
            let cand = if self.cond.require_t_match {
                self.evaluate(self.project_delta(best.gain, best.delta), best.gain)
            } else {
                self.search_delta(best.gain, best.delta, window_d)
            };
            if cand.merit.better_than(&best.merit) {
                best = cand;
            }
            // G-step with Δ re-optimized per trial.
            let gains: Vec<f64> = (-4..=4)
                .map(|k| (best.gain + window_g * k as f64 / 4.0).clamp(s.gain_min, s.gain_max))
                .collect();
            let evals: Vec<Evaluation> = gains
                .par_iter()
                .map(|&g| {
                    if self.cond.require_t_match {
                        self.evaluate(self.project_delta(g, best.delta), g)
                    } else {
                        self.search_delta(g, best.delta, window_d)
                    }
                })
                .collect();
            for e in evals {
                if e.merit.better_than(&best.merit) {
                    best = e;
                }
            }
            let moved = (best.gain - before.gain).abs().max((best.delta - before.delta).abs());
            if moved <= s.tolerance && window_g <= s.tolerance {
                break;
            }
            if moved <= s.tolerance {
                window_g /= 2.0;
            }
        }
        best
    }
}

/// Best attack at one distance; infeasibility is reported in the result.
pub fn optimize_attack(
    distance_km: f64,
    strategy: Strategy,
    cond: &SuccessConditions,
    cfg: &OptimizerConfig,
) -> Result<AttackSolution> {
    cfg.validate()?;
    cond.validate()?;
    strategy.validate()?;
    let link = link_budget(distance_km, cfg)?;
    let protocol = ProtocolParams {
        v_a: link.v_a,
        t: link.t,
        ..cfg.protocol
    };
    let problem = Problem {
        cfg,
        strategy,
        cond: *cond,
        link,
        protocol,
    };
    let coarse = problem.coarse_grid();
    let refined = problem.refine(coarse.clone());
    let best = if refined.merit.at_least(&coarse.merit) {
        refined
    } else {
        coarse
    };
    Ok(AttackSolution {
        distance_km,
        t: link.t,
        v_a: link.v_a,
        delta: best.delta,
        gain: best.gain,
        t_sat: best.t_sat,
        xi_sat: best.xi_sat,
        xi_null: link.xi_null,
        key_rate: best.key_rate,
        k_honest: link.k_honest,
        feasible: best.report.feasible,
        report: best.report,
    })
}

/// Resolution of [`feasibility_boundary`] (km).
pub const BOUNDARY_RESOLUTION_KM: f64 = 0.5;

/// Shortest feasible distance in `[from_km, to_km]`, assuming feasibility is
/// monotone in distance.
pub fn feasibility_boundary(
    strategy: Strategy,
    cond: &SuccessConditions,
    cfg: &OptimizerConfig,
    from_km: f64,
    to_km: f64,
) -> Result<f64> {
    let feasible = |d: f64| optimize_attack(d, strategy, cond, cfg).map(|s| s.feasible);
    if !feasible(to_km)? {
        return Err(Error::NoFeasibleDistance { from_km, to_km });
    }
    if feasible(from_km)? {
        return Ok(from_km);
    }
    let (mut lo, mut hi) = (from_km, to_km);
    while hi - lo > BOUNDARY_RESOLUTION_KM {
        let mid = 0.5 * (lo + hi);
        if feasible(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

pub fn distance_sweep(
    strategy: Strategy,
    distances_km: &[f64],
    cond: &SuccessConditions,
    cfg: &OptimizerConfig,
) -> Result<Vec<AttackSolution>> {
    distances_km
        .iter()
        .map(|&d| optimize_attack(d, strategy, cond, cfg))
        .collect()
}

/// Smallest coefficient `c ∈ [0, hi]` for which `boundary(c)` reaches
/// `target_km`, with `boundary` nondecreasing in `c`.
fn fit_coefficient<F>(mut boundary: F, target_km: f64, hi: f64, rel_tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (mut lo, mut hi) = (0.0, hi);
    if boundary(hi)? < target_km {
        return Err(Error::invalid(
            "calibration",
            format!("upper coefficient {hi} does not push the boundary to {target_km} km"),
        ));
    }
    while hi - lo > rel_tol * hi {
        let mid = 0.5 * (lo + hi);
        if boundary(mid)? >= target_km {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

fn boundary_or_far(strategy: Strategy, cfg: &OptimizerConfig, to_km: f64) -> Result<f64> {
    match feasibility_boundary(strategy, &SuccessConditions::default(), cfg, 0.0, to_km) {
        Ok(d) => Ok(d),
        Err(Error::NoFeasibleDistance { .. }) => Ok(f64::INFINITY),
        Err(e) => Err(e),
    }
}

/// Linear incoherent noise coefficient placing the boundary at `target_km`.
pub fn calibrate_lin_coeff(base: crate::attack::IncoherentModel, cfg: &OptimizerConfig, target_km: f64) -> Result<f64> {
    fit_coefficient(
        |c| {
            let m = crate::attack::IncoherentModel { lin_coeff: c, ..base };
            boundary_or_far(Strategy::Incoherent(m), cfg, 100.0)
        },
        target_km,
        0.2,
        1e-3,
    )
}

/// Quadratic coherent noise coefficient (phase term off) placing the
/// boundary at `target_km`.
pub fn calibrate_quad_coeff(
    base: crate::attack::CoherentNoiseModel,
    cfg: &OptimizerConfig,
    target_km: f64,
) -> Result<f64> {
    fit_coefficient(
        |c| {
            let m = crate::attack::CoherentNoiseModel {
                quad_coeff: c,
                ..base.without_phase_noise()
            };
            boundary_or_far(Strategy::Coherent(m), cfg, 100.0)
        },
        target_km,
        0.01,
        1e-3,
    )
}

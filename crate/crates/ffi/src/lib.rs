//! C ABI over `cvqkd-saturation`.
//!
//! Conventions:
//! * every function returns a [`CvsatStatus`]; results go through out-pointers,
//!   which are written only on success;
//! * on failure a message is kept per thread and read with
//!   [`cvsat_last_error`];
//! * models are opaque handles created by `cvsat_model_*` constructors and
//!   released with [`cvsat_model_free`];
//! * panics never cross the boundary; they surface as [`CvsatStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use cvqkd_saturation::attack::{AttackParams, Strategy};
use cvqkd_saturation::config::{AttackSection, ExperimentConfig, StrategyKind};
use cvqkd_saturation::estimation::analytic_estimates_with;
use cvqkd_saturation::optimizer::{feasibility_boundary, optimize_attack, OptimizerConfig, SuccessConditions};
use cvqkd_saturation::protocol::ProtocolParams;
use cvqkd_saturation::rating::{self, Equipment, Expertise, FactorLevels, Knowledge, Severity, Window};
use cvqkd_saturation::security::{self, SecurityParams};
use cvqkd_saturation::snu::{self, DetectorLimits, GaussianSpec};
use cvqkd_saturation::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CvsatStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    NoPositiveKey = 4,
    NoFeasibleDistance = 5,
    Numerical = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CvsatStrategy {
    Coherent = 0,
    Incoherent = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CvsatExpertise {
    Laymen = 0,
    Proficient = 1,
    Expert = 2,
    MultipleExperts = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CvsatKnowledge {
    Public = 0,
    Restricted = 1,
    Sensitive = 2,
    Critical = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CvsatWindow {
    Unnecessary = 0,
    Easy = 1,
    Moderate = 2,
    Difficult = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CvsatEquipment {
    Standard = 0,
    Specialized = 1,
    Bespoke = 2,
    MultipleBespoke = 3,
    Quantum = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CvsatSeverity {
    Basic = 0,
    Moderate = 1,
    High = 2,
    BeyondHigh = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CvsatClippedMoments {
    pub mean: f64,
    pub variance: f64,
    pub prob_inside: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CvsatEstimate {
    pub t_sat: f64,
    pub xi_sat: f64,
    pub covariance: f64,
    pub v_b_sat: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CvsatSolution {
    pub distance_km: f64,
    pub t: f64,
    pub v_a: f64,
    pub delta: f64,
    pub gain: f64,
    pub t_sat: f64,
    pub xi_sat: f64,
    pub xi_null: f64,
    /// May be `-inf` when the estimates leave the key rate undefined.
    pub key_rate: f64,
    pub k_honest: f64,
    pub feasible: bool,
}

/// Opaque model: optimizer settings, strategy and success conditions.
pub struct CvsatModel {
    cfg: OptimizerConfig,
    strategy: Strategy,
    /// Strategy as configured, so phase noise can be switched back on.
    configured: Strategy,
    cond: SuccessConditions,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    let c = CString::new(text).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> CvsatStatus {
    match e {
        Error::InvalidParameter { .. } | Error::Rating(_) => CvsatStatus::InvalidArgument,
        Error::Config { .. } | Error::Io(_) => CvsatStatus::Config,
        Error::NoPositiveKey(_) => CvsatStatus::NoPositiveKey,
        Error::NoFeasibleDistance { .. } => CvsatStatus::NoFeasibleDistance,
        Error::QuadratureNonConvergence { .. } | Error::EstimatorUndefined(_) | Error::InvalidCovariance { .. } => {
            CvsatStatus::Numerical
        }
    }
}

/// Runs `f`, mapping errors and panics to status codes.
fn guard<F>(f: F) -> CvsatStatus
where
    F: FnOnce() -> Result<(), CvsatFailure>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CvsatStatus::Ok,
        Ok(Err(CvsatFailure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            CvsatStatus::Panic
        }
    }
}

struct CvsatFailure(CvsatStatus, String);

impl From<Error> for CvsatFailure {
    fn from(e: Error) -> Self {
        CvsatFailure(status_of(&e), e.to_string())
    }
}

fn invalid(name: &str, v: u32) -> CvsatFailure {
    CvsatFailure(CvsatStatus::InvalidArgument, format!("`{name}` has no level {v}"))
}

fn null(name: &str) -> CvsatFailure {
    CvsatFailure(CvsatStatus::NullPointer, format!("`{name}` is NULL"))
}

/// # Safety
/// `p` is NULL or valid for writes of `T`.
unsafe fn write_out<T>(p: *mut T, name: &str, value: T) -> Result<(), CvsatFailure> {
    if p.is_null() {
        return Err(null(name));
    }
    p.write(value);
    Ok(())
}

/// # Safety
/// `p` is NULL or points to a live model.
unsafe fn model_ref<'a>(p: *const CvsatModel) -> Result<&'a CvsatModel, CvsatFailure> {
    p.as_ref().ok_or_else(|| null("model"))
}

/// Message of the last failed call on this thread; empty if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cvsat_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cvsat_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Model with built-in defaults; `strategy` is a [`CvsatStrategy`] value.
///
/// # Safety
/// `out` must be valid for writes of one pointer.
#[no_mangle]
pub unsafe extern "C" fn cvsat_model_new(strategy: u32, out: *mut *mut CvsatModel) -> CvsatStatus {
    guard(|| {
        let cfg = ExperimentConfig {
            attack: AttackSection {
                strategy: match strategy {
                    s if s == CvsatStrategy::Coherent as u32 => StrategyKind::Coherent,
                    s if s == CvsatStrategy::Incoherent as u32 => StrategyKind::Incoherent,
                    s => return Err(invalid("strategy", s)),
                },
                ..Default::default()
            },
            ..Default::default()
        };
        let model = model_from_config(&cfg)?;
        write_out(out, "out", Box::into_raw(Box::new(model)))
    })
}

/// Model from a TOML experiment configuration.
///
/// # Safety
/// `toml` must be a NUL-terminated string; `out` valid for writes of one pointer.
#[no_mangle]
pub unsafe extern "C" fn cvsat_model_from_toml(toml: *const c_char, out: *mut *mut CvsatModel) -> CvsatStatus {
    guard(|| {
        if toml.is_null() {
            return Err(null("toml"));
        }
        let text = CStr::from_ptr(toml)
            .to_str()
            .map_err(|e| CvsatFailure(CvsatStatus::Config, format!("configuration is not UTF-8: {e}")))?;
        let cfg = ExperimentConfig::from_toml(text)?;
        let model = model_from_config(&cfg)?;
        write_out(out, "out", Box::into_raw(Box::new(model)))
    })
}

fn model_from_config(cfg: &ExperimentConfig) -> Result<CvsatModel, CvsatFailure> {
    Ok(CvsatModel {
        cfg: cfg.optimizer_config()?,
        strategy: cfg.attack.strategy(),
        configured: cfg.attack.strategy(),
        cond: cfg.optimizer.success,
    })
}

/// Releases a model; NULL is ignored.
///
/// # Safety
/// `model` is NULL or came from a `cvsat_model_*` constructor and was not freed.
#[no_mangle]
pub unsafe extern "C" fn cvsat_model_free(model: *mut CvsatModel) {
    if !model.is_null() {
        let _ = catch_unwind(AssertUnwindSafe(|| drop(Box::from_raw(model))));
    }
}

/// Switches the coherent strategy's residual phase noise off (`false`) or
/// back to the configured model (`true`). No effect on the incoherent strategy.
///
/// # Safety
/// `model` must point to a live model.
#[no_mangle]
pub unsafe extern "C" fn cvsat_model_set_phase_noise(model: *mut CvsatModel, enabled: bool) -> CvsatStatus {
    guard(|| {
        let m = model.as_mut().ok_or_else(|| null("model"))?;
        m.strategy = match m.configured {
            Strategy::Coherent(c) if !enabled => Strategy::Coherent(c.without_phase_noise()),
            s => s,
        };
        Ok(())
    })
}

/// Large-sample estimator limits at one attack point.
///
/// # Safety
/// `model` must point to a live model; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cvsat_analytic_estimates(
    model: *const CvsatModel,
    v_a: f64,
    t: f64,
    delta: f64,
    gain: f64,
    out: *mut CvsatEstimate,
) -> CvsatStatus {
    guard(|| {
        let m = model_ref(model)?;
        let p = ProtocolParams {
            v_a,
            t,
            ..m.cfg.protocol
        };
        p.validate()?;
        let a = AttackParams {
            strategy: m.strategy,
            delta,
            gain,
            tech_noise: m.cfg.tech_noise,
            direction: m.cfg.direction,
            heterodyne: m.cfg.heterodyne,
        };
        let e = analytic_estimates_with(&p, &a, &m.cfg.quadrature)?;
        write_out(
            out,
            "out",
            CvsatEstimate {
                t_sat: e.t_sat,
                xi_sat: e.xi_sat,
                covariance: e.covariance,
                v_b_sat: e.v_b_sat,
            },
        )
    })
}

/// Best attack at one distance. Infeasibility is reported through
/// `feasible`, not as an error.
///
/// # Safety
/// `model` must point to a live model; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cvsat_optimize_attack(
    model: *const CvsatModel,
    distance_km: f64,
    out: *mut CvsatSolution,
) -> CvsatStatus {
    guard(|| {
        let m = model_ref(model)?;
        let s = optimize_attack(distance_km, m.strategy, &m.cond, &m.cfg)?;
        write_out(
            out,
            "out",
            CvsatSolution {
                distance_km: s.distance_km,
                t: s.t,
                v_a: s.v_a,
                delta: s.delta,
                gain: s.gain,
                t_sat: s.t_sat,
                xi_sat: s.xi_sat,
                xi_null: s.xi_null,
                key_rate: s.key_rate,
                k_honest: s.k_honest,
                feasible: s.feasible,
            },
        )
    })
}

/// Shortest feasible distance in `[from_km, to_km]`.
///
/// # Safety
/// `model` must point to a live model; `out_km` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cvsat_feasibility_boundary(
    model: *const CvsatModel,
    from_km: f64,
    to_km: f64,
    out_km: *mut f64,
) -> CvsatStatus {
    guard(|| {
        let m = model_ref(model)?;
        let d = feasibility_boundary(m.strategy, &m.cond, &m.cfg, from_km, to_km)?;
        write_out(out_km, "out_km", d)
    })
}

/// Key rate in bits per pulse; negative values are returned as is.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cvsat_key_rate(
    v_a: f64,
    t: f64,
    xi: f64,
    eta: f64,
    v_ele: f64,
    beta: f64,
    out: *mut f64,
) -> CvsatStatus {
    guard(|| {
        let k = security::key_rate(&SecurityParams {
            v_a,
            t,
            xi,
            eta,
            v_ele,
            beta,
        })?;
        write_out(out, "out", k)
    })
}

/// Excess noise at which the key rate vanishes.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cvsat_null_key_threshold(
    t: f64,
    v_a: f64,
    eta: f64,
    v_ele: f64,
    beta: f64,
    out: *mut f64,
) -> CvsatStatus {
    guard(|| {
        let xi = security::null_key_threshold(t, v_a, eta, v_ele, beta)?;
        write_out(out, "out", xi)
    })
}

/// Moments of a Gaussian clamped to `[alpha1, alpha2]`; infinite ends are allowed.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cvsat_clipped_moments(
    mean: f64,
    variance: f64,
    alpha1: f64,
    alpha2: f64,
    out: *mut CvsatClippedMoments,
) -> CvsatStatus {
    guard(|| {
        let g = GaussianSpec::new(mean, variance)?;
        let limits = DetectorLimits::interval(alpha1, alpha2)?;
        let m = snu::clipped_moments(&g, &limits);
        write_out(
            out,
            "out",
            CvsatClippedMoments {
                mean: m.mean,
                variance: m.variance,
                prob_inside: m.prob_inside,
            },
        )
    })
}

/// Attack potential and severity. Levels are [`CvsatExpertise`],
/// [`CvsatKnowledge`], [`CvsatWindow`] and [`CvsatEquipment`] values.
/// `out_unbounded` is set when the rating
/// relies on quantum equipment, in which case the severity is the top band.
///
/// # Safety
/// All out-pointers must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cvsat_attack_potential(
    expertise: u32,
    knowledge: u32,
    window: u32,
    equipment: u32,
    out_potential: *mut u32,
    out_severity: *mut CvsatSeverity,
    out_unbounded: *mut bool,
) -> CvsatStatus {
    guard(|| {
        if out_potential.is_null() || out_severity.is_null() || out_unbounded.is_null() {
            return Err(null("out"));
        }
        let f = FactorLevels::new(
            level(Expertise::ALL, "expertise", expertise)?,
            level(Knowledge::ALL, "knowledge", knowledge)?,
            level(Window::ALL, "window", window)?,
            level(Equipment::ALL, "equipment", equipment)?,
        );
        let sheet = rating::RatingSheet::new("", f, "");
        out_potential.write(sheet.attack_potential);
        out_severity.write(severity_to_c(sheet.severity));
        out_unbounded.write(sheet.unbounded);
        Ok(())
    })
}

/// Severity band of an attack potential.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cvsat_severity(attack_potential: i64, out: *mut CvsatSeverity) -> CvsatStatus {
    guard(|| {
        let s = rating::severity(attack_potential)?;
        write_out(out, "out", severity_to_c(s))
    })
}

fn level<T: Copy>(all: &[T], name: &str, v: u32) -> Result<T, CvsatFailure> {
    all.get(v as usize).copied().ok_or_else(|| invalid(name, v))
}

fn severity_to_c(s: Severity) -> CvsatSeverity {
    match s {
        Severity::Basic => CvsatSeverity::Basic,
        Severity::Moderate => CvsatSeverity::Moderate,
        Severity::High => CvsatSeverity::High,
        Severity::BeyondHigh => CvsatSeverity::BeyondHigh,
    }
}

use std::ffi::{CStr, CString};
use std::ptr;

use cvsat_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(cvsat_last_error()) }
        .to_str()
        .unwrap()
        .to_owned()
}

fn model(strategy: CvsatStrategy) -> *mut CvsatModel {
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { cvsat_model_new(strategy as u32, &mut m) }, CvsatStatus::Ok);
    assert!(!m.is_null());
    m
}

#[test]
fn version_matches_the_crate() {
    let v = unsafe { CStr::from_ptr(cvsat_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn incoherent_attack_is_feasible_at_50_km() {
    let m = model(CvsatStrategy::Incoherent);
    let mut sol = CvsatSolution::default();
    assert_eq!(unsafe { cvsat_optimize_attack(m, 50.0, &mut sol) }, CvsatStatus::Ok);
    assert!(sol.feasible);
    assert!(sol.xi_sat < sol.xi_null && sol.key_rate > 0.0);

    let mut est = CvsatEstimate::default();
    let s = unsafe { cvsat_analytic_estimates(m, sol.v_a, sol.t, sol.delta, sol.gain, &mut est) };
    assert_eq!(s, CvsatStatus::Ok);
    assert_eq!((est.t_sat, est.xi_sat), (sol.t_sat, sol.xi_sat));
    unsafe { cvsat_model_free(m) };
}

#[test]
fn phase_noise_toggle_changes_the_coherent_outcome() {
    let m = model(CvsatStrategy::Coherent);
    let mut noisy = CvsatSolution::default();
    let mut clean = CvsatSolution::default();
    unsafe {
        assert_eq!(cvsat_optimize_attack(m, 70.0, &mut noisy), CvsatStatus::Ok);
        assert_eq!(cvsat_model_set_phase_noise(m, false), CvsatStatus::Ok);
        assert_eq!(cvsat_optimize_attack(m, 70.0, &mut clean), CvsatStatus::Ok);
        assert_eq!(cvsat_model_set_phase_noise(m, true), CvsatStatus::Ok);
        let mut again = CvsatSolution::default();
        assert_eq!(cvsat_optimize_attack(m, 70.0, &mut again), CvsatStatus::Ok);
        assert_eq!(again, noisy);
        cvsat_model_free(m);
    }
    assert!(!noisy.feasible);
    assert!(clean.feasible);
}

#[test]
fn key_rate_vanishes_at_the_null_threshold() {
    let (t, v_a, eta, v_ele, beta) = (0.1, 19.0, 0.6, 0.041, 0.95);
    let mut xi = 0.0;
    assert_eq!(
        unsafe { cvsat_null_key_threshold(t, v_a, eta, v_ele, beta, &mut xi) },
        CvsatStatus::Ok
    );
    let (mut below, mut above) = (0.0, 0.0);
    unsafe {
        assert_eq!(
            cvsat_key_rate(v_a, t, xi - 1e-4, eta, v_ele, beta, &mut below),
            CvsatStatus::Ok
        );
        assert_eq!(
            cvsat_key_rate(v_a, t, xi + 1e-4, eta, v_ele, beta, &mut above),
            CvsatStatus::Ok
        );
    }
    assert!(below > 0.0 && above < 0.0, "{below} {above}");
}

#[test]
fn clipped_moments_reduce_to_the_gaussian_without_limits() {
    let mut m = CvsatClippedMoments::default();
    let s = unsafe { cvsat_clipped_moments(1.5, 4.0, f64::NEG_INFINITY, f64::INFINITY, &mut m) };
    assert_eq!(s, CvsatStatus::Ok);
    assert_eq!(m.prob_inside, 1.0);
    assert!((m.mean - 1.5).abs() < 1e-12 && (m.variance - 4.0).abs() < 1e-12);
}

#[test]
fn rating_through_the_c_enums() {
    let (mut ap, mut sev, mut unbounded) = (0u32, CvsatSeverity::Basic, true);
    let s = unsafe {
        cvsat_attack_potential(
            CvsatExpertise::Proficient as u32,
            CvsatKnowledge::Restricted as u32,
            CvsatWindow::Moderate as u32,
            CvsatEquipment::Specialized as u32,
            &mut ap,
            &mut sev,
            &mut unbounded,
        )
    };
    assert_eq!(s, CvsatStatus::Ok);
    assert_eq!((ap, sev, unbounded), (14, CvsatSeverity::Moderate, false));

    let s = unsafe {
        cvsat_attack_potential(
            CvsatExpertise::Expert as u32,
            CvsatKnowledge::Public as u32,
            CvsatWindow::Easy as u32,
            CvsatEquipment::Quantum as u32,
            &mut ap,
            &mut sev,
            &mut unbounded,
        )
    };
    assert_eq!(s, CvsatStatus::Ok);
    assert!(unbounded);
    assert_eq!(sev, CvsatSeverity::BeyondHigh);

    let mut sev = CvsatSeverity::Basic;
    assert_eq!(unsafe { cvsat_severity(16, &mut sev) }, CvsatStatus::Ok);
    assert_eq!(sev, CvsatSeverity::High);
}

#[test]
fn errors_carry_codes_and_messages() {
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { cvsat_model_new(9, &mut m) }, CvsatStatus::InvalidArgument);
    assert!(m.is_null());
    assert!(last_error().contains("strategy"));

    assert_eq!(unsafe { cvsat_model_new(0, ptr::null_mut()) }, CvsatStatus::NullPointer);
    assert_eq!(
        unsafe { cvsat_model_from_toml(ptr::null(), &mut m) },
        CvsatStatus::NullPointer
    );

    let bad = CString::new("[protocol]\neta_b = 1.7\n").unwrap();
    assert_eq!(
        unsafe { cvsat_model_from_toml(bad.as_ptr(), &mut m) },
        CvsatStatus::Config
    );
    assert!(last_error().contains("protocol.eta_b"), "{}", last_error());

    let mut sev = CvsatSeverity::Basic;
    assert_eq!(unsafe { cvsat_severity(-1, &mut sev) }, CvsatStatus::InvalidArgument);

    let mut x = 0.0;
    assert_eq!(
        unsafe { cvsat_key_rate(19.0, 1.5, 0.0, 0.6, 0.041, 0.95, &mut x) },
        CvsatStatus::InvalidArgument
    );
    assert_eq!(x, 0.0, "out-pointer untouched on failure");

    let mut km = 0.0;
    let inc = model(CvsatStrategy::Incoherent);
    assert_eq!(
        unsafe { cvsat_feasibility_boundary(inc, 0.0, 10.0, &mut km) },
        CvsatStatus::NoFeasibleDistance
    );
    unsafe { cvsat_model_free(inc) };
    unsafe { cvsat_model_free(ptr::null_mut()) };
}

#[test]
fn toml_model_uses_the_configured_strategy() {
    let text = CString::new("[attack]\nstrategy = \"coherent\"\n[attack.coherent]\ndrift_rate = 0.0\n").unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { cvsat_model_from_toml(text.as_ptr(), &mut m) }, CvsatStatus::Ok);
    let mut sol = CvsatSolution::default();
    assert_eq!(unsafe { cvsat_optimize_attack(m, 70.0, &mut sol) }, CvsatStatus::Ok);
    assert!(sol.feasible);
    unsafe { cvsat_model_free(m) };
}

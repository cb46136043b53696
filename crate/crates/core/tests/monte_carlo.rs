//! Sampling-level checks of the signal chain at full block sizes.

use cvqkd_saturation::attack::{
    attack_run, eve_heterodyne, eve_resend, AttackParams, CoherentNoiseModel, HeterodyneConvention, Strategy,
};
use cvqkd_saturation::estimation::block_estimates;
use cvqkd_saturation::protocol::{alice_modulate, baseline_run, bob_homodyne, ProtocolParams, SampleBlock};
use cvqkd_saturation::rng::SimRng;
use cvqkd_saturation::snu::{clipped_covariance, clipped_moments, DetectorLimits, GaussianSpec, QuadratureConfig};

const N: usize = 10_000_000;

fn quiet(delta: f64, gain: f64) -> AttackParams {
    AttackParams::new(Strategy::Coherent(CoherentNoiseModel::noiseless()), delta, gain)
}

fn cov(x: &SampleBlock, y: &SampleBlock) -> (f64, f64) {
    let n = x.len() as f64;
    let (mx, my) = (x.mean(), y.mean());
    let (mut s, mut s2) = (0.0, 0.0);
    for (a, b) in x.values.iter().zip(&y.values) {
        let p = (a - mx) * (b - my);
        s += p;
        s2 += p * p;
    }
    let c = s / n;
    (c, ((s2 / n - c * c) / n).sqrt())
}

/// Standard error of a Gaussian sample variance.
fn gaussian_var_se(var: f64, n: usize) -> f64 {
    var * (2.0 / n as f64).sqrt()
}

#[test]
fn modulation_variance_concentrates() {
    let x = alice_modulate(N, 19.0, &mut SimRng::new(1, 0)).unwrap();
    assert!((x.variance() - 19.0).abs() <= 4.0 * gaussian_var_se(19.0, N));
    assert!(x.mean().abs() <= 4.0 * (19.0 / N as f64).sqrt());
}

#[test]
fn clipped_detector_matches_closed_form_moments() {
    let p = ProtocolParams::calibrated();
    let limits = DetectorLimits::new(-106.0, 140.0).unwrap();
    let p = ProtocolParams { limits, ..p };
    let mut rng = SimRng::new(2, 0);
    let input = SampleBlock {
        values: (0..N).map(|_| -90.0 + rng.gaussian(22.0)).collect(),
        seed: 2,
        block_index: 0,
    };
    let out = bob_homodyne(&input, &p, &mut rng);
    // Pre-clamp law: N(√η·(−90), η·22 + 1 − η + v_ele).
    let pre = GaussianSpec::new(p.eta_b.sqrt() * -90.0, p.eta_b * 22.0 + 1.0 - p.eta_b + p.v_ele).unwrap();
    let m = clipped_moments(&pre, &limits);
    let n = N as f64;
    assert!((out.mean() - m.mean).abs() <= 4.0 * (m.variance / n).sqrt());
    // Clipping makes the output lighter-tailed than Gaussian, so the
    // Gaussian variance standard error is conservative.
    assert!((out.variance() - m.variance).abs() <= 4.0 * gaussian_var_se(pre.variance, N));
}

#[test]
fn baseline_link_statistics() {
    let p = ProtocolParams {
        v_a: 19.0,
        t: 0.1,
        xi_channel: 0.05,
        limits: DetectorLimits::wide(1e9),
        ..ProtocolParams::calibrated()
    };
    let (x_a, x_b) = baseline_run(&p, N, &mut SimRng::new(3, 0)).unwrap();
    let v_b = p.eta_b * p.t * p.v_a + 1.0 + p.eta_b * p.t * p.xi_channel + p.v_ele;
    assert!((v_b - 2.05775).abs() < 1e-12);
    assert!((x_b.variance() - v_b).abs() <= 4.0 * gaussian_var_se(v_b, N));
    let (c, se) = cov(&x_a, &x_b);
    assert!((c - (p.eta_b * p.t).sqrt() * p.v_a).abs() <= 4.0 * se);
}

#[test]
fn heterodyne_and_resend_variances() {
    let mut rng = SimRng::new(4, 0);
    let x_a = alice_modulate(N, 19.0, &mut rng).unwrap();
    let x_m = eve_heterodyne(&x_a, HeterodyneConvention::Methods, &mut rng);
    assert!((x_m.variance() - 21.0).abs() <= 4.0 * gaussian_var_se(21.0, N));
    assert!(x_m.mean().abs() <= 4.0 * (21.0 / N as f64).sqrt());

    let a = quiet(30.0, 2.0);
    let x_e = eve_resend(&x_m, &a, &mut rng).unwrap();
    assert!((x_e.variance() - 22.0).abs() <= 4.0 * gaussian_var_se(22.0, N));
    assert!((x_e.mean() - a.delta_x()).abs() <= 4.0 * (22.0 / N as f64).sqrt());
}

#[test]
fn clipped_covariance_example_matches_sampling() {
    let limits = DetectorLimits::new(-106.0, 140.0).unwrap();
    let exact = clipped_covariance(1.0, -106.0, 19.0, 3.0, &limits, &QuadratureConfig::default()).unwrap();
    let mut rng = SimRng::new(5, 0);
    let x = SampleBlock {
        values: (0..N).map(|_| rng.gaussian(19.0)).collect(),
        seed: 5,
        block_index: 0,
    };
    let y = SampleBlock {
        values: x
            .values
            .iter()
            .map(|&v| (v - 106.0 + rng.gaussian(3.0)).clamp(-106.0, 140.0))
            .collect(),
        seed: 5,
        block_index: 0,
    };
    let (c, se) = cov(&x, &y);
    assert!((c - exact).abs() <= 3.0 * se, "{c} vs {exact} (se {se})");
}

#[test]
fn block_spread_shrinks_with_block_size() {
    let p = ProtocolParams::calibrated();
    let a = quiet(150.0, 1.5);
    // Averages over many blocks keep the ratio test stable.
    let small = block_estimates(&p, &a, 40, 250_000, 6).unwrap();
    let large = block_estimates(&p, &a, 40, 500_000, 7).unwrap();
    let ratio = small.std_t / large.std_t;
    // The sample std of 40 blocks has ~11% relative spread.
    assert!((ratio - 2f64.sqrt()).abs() < 0.45, "ratio {ratio}");
}

#[test]
fn displacement_toward_the_limit_collapses_bob_variance() {
    let p = ProtocolParams::calibrated();
    let mut variances = Vec::new();
    for delta in [0.0, 100.0, 140.0, 180.0, 400.0] {
        let (_, x_b) = attack_run(&p, &quiet(delta, 1.0), 200_000, &mut SimRng::new(8, 0)).unwrap();
        variances.push((x_b.mean(), x_b.variance()));
    }
    assert!(variances.windows(2).all(|w| w[1].0 < w[0].0 + 1e-9));
    assert!(variances[4].1 < 1e-12);
    assert!(variances[3].1 < variances[0].1);
}

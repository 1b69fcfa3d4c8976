use std::f64::consts::PI;

use dispersive_sinr::channel::{
    beta_for_rms, doppler_cov, exp_pdp, freq_corr, pdp_from_table, time_corr, vehb_pdp, PowerDelayProfile,
    RealizationSampler, TimeCorrModel,
};
use dispersive_sinr::numerics::bessel_j0;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn doppler_covariance_is_psd_with_trace_2n() {
    for (fd, n) in [(0.0, 16), (1e-3, 64), (0.02, 64), (0.3, 32)] {
        let two_n = 2 * n;
        let rt = time_corr(&TimeCorrModel::Jakes { fd_ts: fd }, two_n).unwrap();
        let rd = doppler_cov(&rt, two_n).unwrap();
        let trace: Complex64 = rd.diagonal().iter().sum();
        assert!(
            (trace.re - two_n as f64).abs() < 1e-9 && trace.im.abs() < 1e-9,
            "fd {fd}: {trace}"
        );
        let herm = (&rd - rd.adjoint()).norm();
        assert!(herm < 1e-10);
        let eig = nalgebra::SymmetricEigen::new(rd.clone()).eigenvalues;
        let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(min > -1e-9, "fd {fd}: min eigenvalue {min:e}");
    }
    // a static channel puts all its power at zero Doppler
    let rt = time_corr(&TimeCorrModel::Static, 16).unwrap();
    let rd = doppler_cov(&rt, 16).unwrap();
    assert!((rd[(0, 0)].re - 16.0).abs() < 1e-12);
    assert!(rd.iter().skip(1).all(|v| v.norm() < 1e-12));
}

#[test]
fn jakes_correlation_values() {
    let rt = time_corr(&TimeCorrModel::Jakes { fd_ts: 0.01 }, 200).unwrap();
    assert_eq!(rt.at(0), 1.0);
    assert_eq!(rt.at(-37), rt.at(37));
    // first zero of J0 at 2 pi fd n = 2.4048
    let n0 = 2.404825557695773 / (2.0 * PI * 0.01);
    assert!(rt.at(n0.floor() as isize) > 0.0 && rt.at(n0.ceil() as isize) < 0.0);
    assert!(time_corr(&TimeCorrModel::Jakes { fd_ts: -1.0 }, 4).is_err());
    assert!(time_corr(&TimeCorrModel::Custom(vec![1.0, 0.5]), 3).is_err());
    assert!(time_corr(&TimeCorrModel::Custom(vec![1.0, 0.9, -0.9]), 3).is_err());
}

/// The closed-form frequency correlation of an exponential profile
/// `rho_i = rho_0 beta^i`, `i < N`:
/// `rho_0 / sqrt(N) (1 - beta^N e^{j 2 pi dk}) / (1 - beta e^{j 2 pi dk / N})`.
fn exponential_closed_form(beta: f64, n: usize, dk: i64) -> Complex64 {
    let rho0 = (1.0 - beta) / (1.0 - beta.powi(n as i32));
    let num = Complex64::new(1.0, 0.0) - Complex64::from_polar(beta.powi(n as i32), 2.0 * PI * dk as f64);
    let den = Complex64::new(1.0, 0.0) - Complex64::from_polar(beta, 2.0 * PI * dk as f64 / n as f64);
    rho0 / (n as f64).sqrt() * num / den
}

#[test]
fn exponential_frequency_correlation_matches_closed_form() {
    // on the 2N grid, subcarrier spacing dk sits at lag 2 dk; the code's
    // convention is the conjugate of the closed form, scaled by sqrt(N)
    for (beta, n) in [(0.3, 32), (0.9, 64), (0.99, 128)] {
        let pdp = exp_pdp(beta, n, 1).unwrap();
        let rf = freq_corr(&pdp, n);
        for dk in 1..=16i64 {
            let expected = exponential_closed_form(beta, n, dk).conj() * (n as f64).sqrt();
            let got = rf[2 * dk as usize];
            let rel = (got - expected).norm() / expected.norm();
            assert!(rel < 1e-9, "beta {beta} N {n} dk {dk}: {rel:e}");
        }
        assert!((rf[0].re - 1.0).abs() < 1e-12);
    }
}

#[test]
fn frequency_correlation_is_hermitian_on_the_grid() {
    let pdp = exp_pdp(0.7, 9, 3).unwrap();
    let n = 32;
    let rf = freq_corr(&pdp, n);
    for d in 1..2 * n {
        assert!((rf[d] - rf[2 * n - d].conj()).norm() < 1e-12);
    }
}

#[test]
fn sampled_realizations_follow_target_statistics() {
    let n = 8;
    let pdp = exp_pdp(0.5, 4, 2).unwrap();
    let fd = 0.01;
    let span = 40;
    let rt = time_corr(&TimeCorrModel::Jakes { fd_ts: fd }, span).unwrap();
    let sampler = RealizationSampler::new(&pdp, &rt, span).unwrap();
    let rf = freq_corr(&pdp, n);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let draws = 100_000;
    let lags = [0usize, 5, 20, 39];
    let mut time_acc = vec![Complex64::new(0.0, 0.0); lags.len()];
    let mut freq_acc = vec![Complex64::new(0.0, 0.0); 2 * n];
    let mut tap_power = vec![0.0; pdp.delays().len()];
    for _ in 0..draws {
        let real = sampler.sample(&mut rng);
        for (p, g) in real.gains().iter().enumerate() {
            tap_power[p] += g[0].norm_sqr();
            for (acc, &lag) in time_acc.iter_mut().zip(&lags) {
                *acc += g[lag] * g[0].conj();
            }
        }
        let response = |d: usize| -> Complex64 {
            real.delays()
                .iter()
                .zip(real.gains())
                .map(|(&p, g)| g[0] * Complex64::from_polar(1.0, -PI * (p * d) as f64 / n as f64))
                .sum()
        };
        let h0 = response(0);
        for (d, acc) in freq_acc.iter_mut().enumerate() {
            *acc += response(d) * h0.conj();
        }
    }
    let scale = 1.0 / draws as f64;
    for (p, power) in tap_power.iter().enumerate() {
        let target = pdp.powers()[p];
        assert!((power * scale - target).abs() < 0.03 * target, "tap {p}");
    }
    for (acc, &lag) in time_acc.iter().zip(&lags) {
        let target = bessel_j0(2.0 * PI * fd * lag as f64).unwrap();
        assert!(
            (acc * scale - target).norm() < 0.03,
            "lag {lag}: {} vs {target}",
            acc * scale
        );
    }
    for (d, acc) in freq_acc.iter().enumerate() {
        assert!((acc * scale - rf[d]).norm() < 0.03, "R_f({d})");
    }
}

#[test]
fn vehicular_b_delay_spread() {
    let full = vehb_pdp(1.0).unwrap();
    let rms = full.rms_delay();
    assert!((61.1..=62.1).contains(&rms), "{rms}");
    let half = vehb_pdp(0.5).unwrap();
    assert!((half.rms_delay() / rms - 0.5).abs() < 0.02, "{}", half.rms_delay());
    assert_eq!(full.max_delay(), (20e-6 * 15.36e6f64).round() as usize);
}

#[test]
fn table_taps_share_bins() {
    // two taps 10 ns apart fall on the same sample at 15.36 MHz
    let pdp = pdp_from_table(&[(0.0, 0.0), (10.0, 0.0), (1000.0, -10.0)], 15.36e6).unwrap();
    assert_eq!(pdp.delays(), &[0, 15]);
    assert!((pdp.powers()[0] - 2.0 / 2.1).abs() < 1e-12);
}

#[test]
fn profile_validation() {
    assert!(PowerDelayProfile::new(vec![0, 1], vec![1.0]).is_err());
    assert!(PowerDelayProfile::new(vec![0, 0], vec![1.0, 1.0]).is_err());
    assert!(PowerDelayProfile::new(vec![0], vec![0.0]).is_err());
    assert!(exp_pdp(1.0, 4, 1).is_err());
    let p = PowerDelayProfile::new(vec![0, 3, 5], vec![0.0, 1.0, 1.0]).unwrap();
    assert_eq!(p.delays(), &[0, 2]);
    assert_eq!(beta_for_rms(0.0, 10, 1).unwrap(), 0.0);
    assert!(beta_for_rms(100.0, 10, 1).is_err());
}

proptest! {
    #[test]
    fn beta_for_rms_inverts_profile(frac in 0.01f64..0.9, stretch in 1usize..8) {
        // a uniform 60-tap profile spreads 17.3 taps rms
        let n_taps = 60;
        let target = frac * 17.3 * stretch as f64;
        let beta = beta_for_rms(target, n_taps, stretch).unwrap();
        let rms = exp_pdp(beta, n_taps, stretch).unwrap().rms_delay();
        prop_assert!((rms - target).abs() < 1e-6);
    }

    #[test]
    fn profiles_have_unit_power(powers in prop::collection::vec(0.01f64..10.0, 1..12)) {
        let delays: Vec<usize> = (0..powers.len()).map(|i| 3 * i).collect();
        let pdp = PowerDelayProfile::new(delays, powers).unwrap();
        prop_assert!((pdp.powers().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(pdp.rms_delay() <= pdp.max_delay() as f64 / 2.0 + 1e-9);
    }
}

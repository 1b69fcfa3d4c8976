use dispersive_sinr::channel::{exp_pdp, TimeCorrModel};
use dispersive_sinr::montecarlo::{estimate_error, simulate, QamOrder, SimSpec};
use dispersive_sinr::sinr::analyze;
use dispersive_sinr::waveform::{SystemConfig, WaveformKind};

fn cfg() -> SystemConfig {
    SystemConfig::new(16, 2, 2, 2, 3).unwrap()
}

#[test]
fn flat_static_cp_has_no_interference() {
    let spec = SimSpec::new(
        cfg(),
        WaveformKind::Cp,
        exp_pdp(0.0, 1, 1).unwrap(),
        TimeCorrModel::Static,
        4000,
        2,
    );
    let emp = simulate(&spec).unwrap();
    let se = estimate_error(&emp).unwrap();
    for i in 0..emp.subcarriers.len() {
        assert!(emp.p_ici[i] < 1e-20 && emp.p_isi[i] < 1e-20);
        // |h|^2 is exponential with unit mean, so the standard error is about 1/sqrt(n)
        assert!((se.s[i] * 4000f64.sqrt() - 1.0).abs() < 0.1);
        assert!((emp.p_s[i] - 1.0).abs() < 4.0 * se.s[i]);
    }
}

/// A quick version of the full agreement check: fast fading and a channel
/// longer than the guard, so every term is non-zero.
#[test]
fn small_system_agrees_with_analysis() {
    let pdp = exp_pdp(0.5, 6, 1).unwrap();
    let model = TimeCorrModel::Jakes { fd_ts: 0.02 };
    for kind in WaveformKind::ALL {
        let analytic = analyze(&cfg(), kind, &pdp, &model).unwrap();
        let emp = simulate(&SimSpec::new(cfg(), kind, pdp.clone(), model.clone(), 20_000, 11)).unwrap();
        let se = estimate_error(&emp).unwrap();
        assert_eq!(emp.subcarriers, analytic.subcarriers);
        for i in 0..emp.subcarriers.len() {
            for (name, a, m, s) in [
                ("signal", analytic.p_s[i], emp.p_s[i], se.s[i]),
                ("ici", analytic.p_ici[i], emp.p_ici[i], se.ici[i]),
                ("isi", analytic.p_isi[i], emp.p_isi[i], se.isi[i]),
            ] {
                assert!(a > 1e-6, "{kind} {name} should be non-zero");
                let z = (a - m).abs() / s;
                assert!(z < 4.0, "{kind} {name} subcarrier {}: z = {z:.2}", emp.subcarriers[i]);
            }
        }
    }
}

#[test]
fn standard_errors_shrink_with_sample_size() {
    let pdp = exp_pdp(0.5, 6, 1).unwrap();
    let model = TimeCorrModel::Jakes { fd_ts: 0.01 };
    let run = |n| {
        let emp = simulate(&SimSpec::new(cfg(), WaveformKind::Uf, pdp.clone(), model.clone(), n, 5)).unwrap();
        estimate_error(&emp).unwrap()
    };
    let (small, large) = (run(2000), run(8000));
    for (a, b) in small.isi.iter().zip(&large.isi) {
        assert!((b / a - 0.5).abs() < 0.1, "{}", b / a);
    }
}

#[test]
fn seeds_select_the_sample() {
    let pdp = exp_pdp(0.5, 4, 1).unwrap();
    let model = TimeCorrModel::Jakes { fd_ts: 1e-3 };
    let spec = SimSpec::new(cfg(), WaveformKind::Zp, pdp, model, 600, 9);
    let a = simulate(&spec).unwrap();
    let b = simulate(&SimSpec {
        workers: Some(3),
        ..spec.clone()
    })
    .unwrap();
    assert_eq!(a, b);
    let c = simulate(&SimSpec { seed: 10, ..spec }).unwrap();
    assert_ne!(a.p_s, c.p_s);
}

#[test]
fn constellation_does_not_change_mean_powers() {
    let pdp = exp_pdp(0.5, 6, 1).unwrap();
    let model = TimeCorrModel::Jakes { fd_ts: 0.02 };
    let analytic = analyze(&cfg(), WaveformKind::Cp, &pdp, &model).unwrap();
    let spec = SimSpec {
        qam: QamOrder::Qam16,
        ..SimSpec::new(cfg(), WaveformKind::Cp, pdp, model, 20_000, 4)
    };
    let emp = simulate(&spec).unwrap();
    let se = estimate_error(&emp).unwrap();
    for i in 0..emp.subcarriers.len() {
        assert!((analytic.p_ici[i] - emp.p_ici[i]).abs() < 4.0 * se.ici[i]);
        assert!((analytic.p_s[i] - emp.p_s[i]).abs() < 4.0 * se.s[i]);
    }
}

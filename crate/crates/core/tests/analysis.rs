use chansounder::analysis::{
    angular_spectrum, ci_fit, eirp, fading_rate, local_power_std, max_measurable_path_loss, omni_power, path_loss,
    spectrum_lobes, sum_dbm, LinkBudget, ABSENT_POWER_DBM,
};
use chansounder::channel::fspl;
use chansounder::scenario::{shipped_route, Pointing, ScenarioConfig};
use chansounder::sweep::{run_sweep, CorrelatorKind, DirectionalRecord, Sounder, SweepParams, SweepSet};
use chansounder::{Preset, SounderError};
use proptest::prelude::*;

fn sweep_set(best: &[Option<f64>]) -> SweepSet<f64> {
    let step = 360.0 / best.len() as f64;
    SweepSet {
        rx_id: "X".into(),
        rx_index: 0,
        tx_pointing: Pointing {
            az_deg: 0.0,
            el_deg: 0.0,
        },
        rx_elevation_deg: 0.0,
        step_deg: step,
        records: best
            .iter()
            .enumerate()
            .map(|(k, &b)| DirectionalRecord {
                rx_azimuth: k as f64 * step,
                pdps: Vec::new(),
                best_power_dbm: b,
            })
            .collect(),
    }
}

fn dbm_list() -> impl Strategy<Value = Vec<Option<f64>>> {
    prop::collection::vec(prop::option::weighted(0.8, -140.0f64..-20.0), 4..48)
}

proptest! {
    #[test]
    fn omni_power_is_permutation_invariant(best in dbm_list(), rot in 0usize..48) {
        prop_assume!(best.iter().any(Option::is_some));
        let mut shuffled = best.clone();
        shuffled.reverse();
        let r = rot % shuffled.len();
        shuffled.rotate_left(r);
        let a = omni_power(&sweep_set(&best)).unwrap();
        let b = omni_power(&sweep_set(&shuffled)).unwrap();
        prop_assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn omni_power_is_monotone(best in dbm_list(), k in 0usize..48, extra in 0.0f64..20.0) {
        prop_assume!(best.iter().any(Option::is_some));
        let k = k % best.len();
        let base = omni_power(&sweep_set(&best)).unwrap();
        let max = best.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(base >= max - 1e-12);
        let mut louder = best.clone();
        louder[k] = Some(louder[k].unwrap_or(-150.0) + extra);
        prop_assert!(omni_power(&sweep_set(&louder)).unwrap() >= base - 1e-12);
    }

    #[test]
    fn ci_fit_recovers_noiseless_exponents(
        ple in 1.5f64..5.0,
        distances in prop::collection::vec(1.5f64..500.0, 2..30),
    ) {
        prop_assume!(distances.iter().any(|&d| (d - distances[0]).abs() > 1e-3));
        let f = 73.5e9;
        let points: Vec<(f64, f64)> = distances
            .iter()
            .map(|&d| (d, fspl(1.0, f) + 10.0 * ple * d.log10()))
            .collect();
        let fit = ci_fit(&points, f).unwrap();
        prop_assert!((fit.ple - ple).abs() < 1e-9);
        prop_assert!(fit.sigma_db < 1e-9);
        prop_assert_eq!(fit.point_count, points.len());
        for &(d, pl) in &points {
            prop_assert!((fit.predict(d) - pl).abs() < 1e-7);
        }
    }

    #[test]
    fn fading_rate_scales_with_speed(
        drops in prop::collection::vec(-5.0f64..5.0, 2..20),
        spacing in 0.5f64..10.0,
        speed in 0.1f64..100.0,
    ) {
        let mut level = -40.0;
        let route: Vec<(f64, f64)> = drops
            .iter()
            .enumerate()
            .map(|(k, d)| {
                level += d;
                (k as f64 * spacing, level)
            })
            .collect();
        let r = fading_rate(&route, speed).unwrap();
        prop_assert!(r.db_per_m >= 0.0);
        prop_assert_eq!(r.db_per_s, r.db_per_m * speed);
        prop_assert!(r.end_m >= r.start_m);
    }

    #[test]
    fn spectrum_peak_survives_scaling(
        powers in prop::collection::vec(-120.0f64..-30.0, 8..40),
        offset in -30.0f64..30.0,
    ) {
        let spec: Vec<(f64, f64)> = powers.iter().enumerate().map(|(k, &p)| (k as f64, p)).collect();
        let shifted: Vec<(f64, f64)> = spec.iter().map(|&(a, p)| (a, p + offset)).collect();
        let argmax = |s: &[(f64, f64)]| {
            (0..s.len()).max_by(|&a, &b| s[a].1.total_cmp(&s[b].1).then(b.cmp(&a))).unwrap()
        };
        prop_assert_eq!(argmax(&spec), argmax(&shifted));
        prop_assert_eq!(spectrum_lobes(&spec, 3.0), spectrum_lobes(&shifted, 3.0));
        prop_assert!(spectrum_lobes(&spec, 0.0).contains(&argmax(&spec)));
    }

    #[test]
    fn local_std_is_shift_invariant(v in prop::collection::vec(-100.0f64..0.0, 2..20), c in -50.0f64..50.0) {
        let a = local_power_std(&v).unwrap();
        let b = local_power_std(&v.iter().map(|x| x + c).collect::<Vec<_>>()).unwrap();
        prop_assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn sums_and_budget_identities() {
    assert!((sum_dbm([-30.0, -30.0]).unwrap() - (-30.0 + 10.0 * 2f64.log10())).abs() < 1e-12);
    assert!(matches!(sum_dbm(Vec::<f64>::new()), Err(SounderError::NoSignal)));
    assert_eq!(path_loss(-60.0, 14.6, 27.0, 20.0), 121.6);
    assert_eq!(eirp(14.6, 27.0), 41.6);
    let lb = LinkBudget::reference();
    lb.validate().unwrap();
    let sum = lb.tx_power_dbm + lb.tx_gain_dbi + lb.rx_gain_dbi + lb.processing_gain_db + lb.averaging_gain_db
        - lb.noise_floor_dbm
        - lb.snr_threshold_db;
    assert_eq!(max_measurable_path_loss(&lb), sum);
}

#[test]
fn degenerate_inputs_are_reported() {
    assert!(matches!(
        ci_fit(&[(10.0, 100.0)], 73.5e9),
        Err(SounderError::InsufficientData(_))
    ));
    assert!(matches!(
        ci_fit(&[(10.0, 100.0), (10.0, 101.0)], 73.5e9),
        Err(SounderError::IllConditioned(_))
    ));
    assert!(matches!(
        ci_fit(&[(0.5, 100.0), (10.0, 101.0)], 73.5e9),
        Err(SounderError::InvalidParameter(_))
    ));
    assert!(matches!(
        local_power_std(&[1.0]),
        Err(SounderError::InsufficientData(_))
    ));
    assert!(matches!(
        fading_rate(&[(0.0, 1.0)], 1.0),
        Err(SounderError::InsufficientData(_))
    ));
    assert!(matches!(
        fading_rate(&[(1.0, 1.0), (1.0, 0.0)], 1.0),
        Err(SounderError::InvalidParameter(_))
    ));
}

const FREE_SPACE: &str = r#"
name = "free"
rx_elevation_deg = 0.0
rx_height_m = 1.5

[tx]
position = [0.0, 0.0]
height_m = 1.5
pointing = { az_deg = 90.0 }

[[rx]]
id = "A"
position = [30.0, 0.0]
condition = "los"
"#;

#[test]
fn single_los_path_loss_matches_free_space() {
    let sc = ScenarioConfig::from_toml_str(FREE_SPACE).unwrap();
    let sounder = Sounder::<f64>::new(Preset::Desk, CorrelatorKind::Fast).unwrap();
    for noise in [false, true] {
        let params = SweepParams {
            noise,
            sweeps: 2,
            ..Default::default()
        };
        let ss = run_sweep(&sounder, &sc, 0, &params).unwrap();
        let omni = omni_power(&ss).unwrap();
        let pl = path_loss(omni, sc.tx.power_dbm, sc.tx.antenna.gain_dbi, sc.rx_antenna.gain_dbi);
        let want = fspl(30.0, sc.carrier_hz);
        assert!((pl - want).abs() <= 1.0, "noise {noise}: {pl} vs {want}");
    }
}

#[test]
fn corner_site_shows_two_lobes() {
    let sc = shipped_route();
    let idx = sc.rx.iter().position(|s| s.id == "R06").unwrap();
    let sounder = Sounder::<f64>::new(Preset::Desk, CorrelatorKind::Fast).unwrap();
    let ss = run_sweep(&sounder, &sc, idx, &SweepParams::default()).unwrap();
    let spectrum = angular_spectrum(&ss);
    assert_eq!(spectrum.len(), 24);
    assert!(spectrum.windows(2).all(|w| w[0].0 < w[1].0));
    let lobes = spectrum_lobes(&spectrum, 10.0);
    assert_eq!(lobes.len(), 2, "{spectrum:?}");
    assert!(spectrum.iter().all(|r| r.1 >= ABSENT_POWER_DBM));
}

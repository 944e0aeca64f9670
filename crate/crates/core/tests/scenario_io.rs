use std::collections::BTreeMap;
use std::path::Path;

use chansounder::campaign::{config_hash, run_campaign_on, write_bundle, CampaignKind, CampaignSpec, ResultBundle};
use chansounder::io::{
    fit_report, parse_fit_report, read_pdp_csv, read_preamble, read_route_report, read_spectrum_csv, read_waveform,
    write_pdp_csv, write_waveform,
};
use chansounder::pdp::PowerDelayProfile;
use chansounder::pn::{generate_msequence, LfsrSpec};
use chansounder::scenario::{load_scenario, shipped_cluster, shipped_route, write_scenario, Condition, ScenarioConfig};
use chansounder::waveform::upsample_chips;
use chansounder::{ci_fit, emit_plot_data, ErrorClass, PlotKind, SounderError};
use proptest::prelude::*;

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path).unwrap();
    let head = r.headers().unwrap().iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(str::to_string).collect())
        .collect();
    (head, rows)
}

#[test]
fn shipped_route_layout() {
    let sc = shipped_route();
    assert_eq!(sc.rx.len(), 16);
    assert_eq!(sc.rx.iter().filter(|s| s.condition == Condition::Los).count(), 5);
    assert_eq!(sc.rx.iter().filter(|s| s.condition == Condition::Nlos).count(), 11);
    let pos: Vec<f64> = sc.rx.iter().map(|s| s.route_position_m.unwrap()).collect();
    assert!(pos.windows(2).all(|w| (w[1] - w[0] - 5.0).abs() < 1e-9));
    // line of sight comes first along the route
    assert!(sc.rx[..5].iter().all(|s| s.condition == Condition::Los));
}

#[test]
fn shipped_cluster_layout() {
    let sc = shipped_cluster();
    let groups = sc.groups();
    assert_eq!(groups.len(), 2);
    for (_, idx) in &groups {
        assert_eq!(idx.len(), 5);
        let cond = sc.rx[idx[0]].condition;
        assert!(idx.iter().all(|&i| sc.rx[i].condition == cond));
        for w in idx.windows(2) {
            let (a, b) = (sc.rx[w[0]].position, sc.rx[w[1]].position);
            let d = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
            // coordinates are written to the millimeter
            assert!((d - 5.0).abs() < 1e-3, "{d}");
        }
    }
}

#[test]
fn scenario_round_trips_through_files() {
    let dir = tempfile::tempdir().unwrap();
    for sc in [shipped_route(), shipped_cluster()] {
        let path = dir.path().join(format!("{}.toml", sc.name));
        write_scenario(&path, &sc).unwrap();
        assert_eq!(load_scenario(&path).unwrap(), sc);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn edited_scenarios_round_trip(
        power in -10.0f64..30.0,
        x in 5.0f64..200.0,
        y in -50.0f64..50.0,
        carrier in 1e9f64..100e9,
    ) {
        let mut sc = shipped_route();
        sc.tx.power_dbm = power;
        sc.rx[0].position = [x, y];
        sc.carrier_hz = carrier;
        let text = sc.to_toml_string().unwrap();
        prop_assert_eq!(ScenarioConfig::from_toml_str(&text).unwrap(), sc);
    }
}

#[test]
fn malformed_scenarios_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.toml");
    std::fs::write(&empty, "").unwrap();
    let err = load_scenario(&empty).unwrap_err();
    assert_eq!(err.class(), ErrorClass::Config, "{err}");

    let base = shipped_route().to_toml_string().unwrap();
    let unknown = base.replacen("name = ", "colour = \"red\"\nname = ", 1);
    assert!(ScenarioConfig::from_toml_str(&unknown).is_err());

    let mut dup = shipped_route();
    dup.rx[1].id = dup.rx[0].id.clone();
    assert!(dup.validate().is_err());

    let mut on_tx = shipped_route();
    on_tx.rx[0].position = on_tx.tx.position;
    on_tx.validate().unwrap();
    on_tx.rx_height_m = on_tx.tx.height_m;
    assert!(on_tx.validate().is_err());

    let missing = load_scenario(dir.path().join("absent.toml")).unwrap_err();
    assert_eq!(missing.class(), ErrorClass::Io);
}

#[test]
fn pdp_csv_round_trip_and_preamble() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.csv");
    let mut pdp = PowerDelayProfile::new(vec![1e-6, 0.0, 2e-9], 0.5e-9);
    pdp.noise_floor_dbm = Some(-95.0);
    write_pdp_csv(&path, &pdp).unwrap();
    let rows = read_pdp_csv(&path).unwrap();
    assert_eq!(rows.len(), 3);
    assert!((rows[0].1 - -60.0).abs() < 1e-9 && (rows[2].0 - 1.0).abs() < 1e-9);
    assert_eq!(rows[1].1, f64::NEG_INFINITY);
    let pre: BTreeMap<_, _> = read_preamble(&path).unwrap().into_iter().collect();
    assert_eq!(pre["noise_floor_dBm"], "-95");
    assert_eq!(pre["threshold_dBm"], "none");
    let (head, _) = csv_rows(&path);
    assert_eq!(head, ["excess_delay_ns", "power_dBm"]);
}

#[test]
fn waveform_round_trip_and_corruption() {
    let dir = tempfile::tempdir().unwrap();
    let pn = generate_msequence(&LfsrSpec::prbs7()).unwrap();
    let w = upsample_chips::<f64>(&pn, 1e6, 4, 3).unwrap();
    let path = dir.path().join("w.bin");
    write_waveform(&path, &w).unwrap();
    assert_eq!(read_waveform::<f64>(&path).unwrap(), w);
    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 8]).unwrap();
    assert_eq!(read_waveform::<f64>(&path).unwrap_err().class(), ErrorClass::Config);
    std::fs::write(&path, b"not a waveform").unwrap();
    assert!(read_waveform::<f64>(&path).is_err());
}

#[test]
fn fit_report_round_trip() {
    let fit = ci_fit(&[(10.0, 100.0), (40.0, 121.0), (80.0, 128.0)], 73.5e9).unwrap();
    let back = parse_fit_report(&fit_report(&fit)).unwrap();
    assert_eq!(back.point_count, fit.point_count);
    assert!((back.ple - fit.ple).abs() < 1e-12 && (back.sigma_db - fit.sigma_db).abs() < 1e-12);
    assert!(parse_fit_report("model = ci\n").is_err());
}

fn quick(kind: CampaignKind) -> CampaignSpec {
    CampaignSpec {
        sweeps: 1,
        ..CampaignSpec::new("unused.toml", kind)
    }
}

#[test]
fn route_bundle_products_parse_and_emit() {
    let sc = shipped_route();
    let spec = quick(CampaignKind::Route);
    let bundle = run_campaign_on(&spec, &sc).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let written = write_bundle(&bundle, dir.path(), true).unwrap();
    assert!(written.iter().all(|p| p.exists()));

    let (head, rows) = csv_rows(&dir.path().join("omni.csv"));
    assert_eq!(head, ["rx_id", "condition", "distance_m", "omni_dBm", "path_loss_dB"]);
    assert_eq!(rows.len(), 16);
    let route = read_route_report(&dir.path().join("route_report.csv")).unwrap();
    assert_eq!(route.len(), 16);
    assert_eq!(route.iter().filter(|r| r.los_flag == 1).count(), 5);
    let spectrum = read_spectrum_csv(&dir.path().join("spectra/R01.csv")).unwrap();
    assert_eq!(spectrum.len(), 24);
    let pdp_files = std::fs::read_dir(dir.path().join("pdps/R01")).unwrap().count();
    assert_eq!(pdp_files, 24);
    let fit = parse_fit_report(&std::fs::read_to_string(dir.path().join("fit_los.txt")).unwrap()).unwrap();
    assert_eq!(fit.point_count, 5);

    let loaded = ResultBundle::load(&dir.path().join("bundle.json")).unwrap();
    assert_eq!(loaded.manifest, bundle.manifest);
    assert_eq!(loaded.locations, bundle.locations);

    let plots = dir.path().join("plots");
    emit_plot_data(&loaded, PlotKind::Polar, &plots).unwrap();
    for site in ["R01", "R16"] {
        let (head, rows) = csv_rows(&plots.join(format!("polar_{site}.csv")));
        assert_eq!(head, ["azimuth_deg", "power_dB"]);
        assert_eq!(rows.len(), 24);
    }
    emit_plot_data(&loaded, PlotKind::PathLoss, &plots).unwrap();
    let (_, points) = csv_rows(&plots.join("pathloss_points.csv"));
    assert_eq!(points.len(), 16);
    let (_, line) = csv_rows(&plots.join("pathloss_fit.csv"));
    assert_eq!(line.len(), 100);
    emit_plot_data(&loaded, PlotKind::Route, &plots).unwrap();
    let (_, route) = csv_rows(&plots.join("route.csv"));
    let pos: Vec<f64> = route.iter().map(|r| r[0].parse().unwrap()).collect();
    assert_eq!(pos.len(), 16);
    assert!(pos.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn single_site_bundle_lacks_route_and_fit_products() {
    let sc = shipped_cluster();
    let spec = CampaignSpec {
        rx: Some(sc.rx[0].id.clone()),
        ..quick(CampaignKind::Single)
    };
    let bundle = run_campaign_on(&spec, &sc).unwrap();
    assert_eq!(bundle.locations.len(), 1);
    let dir = tempfile::tempdir().unwrap();
    for kind in [PlotKind::Route, PlotKind::PathLoss] {
        assert!(matches!(
            emit_plot_data(&bundle, kind, dir.path()),
            Err(SounderError::AbsentProduct(_))
        ));
    }
    assert_eq!(emit_plot_data(&bundle, PlotKind::Polar, dir.path()).unwrap().len(), 1);
}

#[test]
fn campaign_kind_requirements() {
    let cluster = shipped_cluster();
    let err = run_campaign_on(&quick(CampaignKind::Route), &cluster).unwrap_err();
    assert_eq!(err.class(), ErrorClass::Config, "{err}");
    let route = shipped_route();
    let err = run_campaign_on(&quick(CampaignKind::Cluster), &route).unwrap_err();
    assert_eq!(err.class(), ErrorClass::Config, "{err}");
    let spec = CampaignSpec {
        rx: Some("nope".into()),
        ..quick(CampaignKind::Single)
    };
    assert!(run_campaign_on(&spec, &route).is_err());
}

#[test]
fn manifest_hash_tracks_config_and_seed_only() {
    let sc = shipped_route();
    let spec = quick(CampaignKind::Route);
    let h = config_hash(&spec, &sc).unwrap();
    let relocated = CampaignSpec {
        scenario: "elsewhere.toml".into(),
        out_dir: Some("out".into()),
        ..spec.clone()
    };
    assert_eq!(config_hash(&relocated, &sc).unwrap(), h);
    assert_ne!(
        config_hash(
            &CampaignSpec {
                seed: 9,
                ..spec.clone()
            },
            &sc
        )
        .unwrap(),
        h
    );
    assert_ne!(
        config_hash(
            &CampaignSpec {
                step_deg: 30.0,
                ..spec.clone()
            },
            &sc
        )
        .unwrap(),
        h
    );
    let mut moved = sc.clone();
    moved.rx[3].position[0] += 0.5;
    assert_ne!(config_hash(&spec, &moved).unwrap(), h);
}

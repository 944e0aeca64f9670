use chansounder::correlator::DilatedCir;
use chansounder::pdp::{
    align_acquisitions, apply_drift, average_pdps, estimate_noise_floor, pdp_from_iq, threshold_level, threshold_pdp,
    with_noise_floor, DriftModel, PowerDelayProfile,
};
use chansounder::SounderError;
use proptest::prelude::*;

const STEP: f64 = 1e-9;

fn profile(power: Vec<f64>) -> PowerDelayProfile<f64> {
    PowerDelayProfile::new(power, STEP)
}

fn db(p: f64) -> f64 {
    10.0 * p.log10()
}

fn powers(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(1e-15f64..1e-3, len)
}

proptest! {
    #[test]
    fn threshold_keeps_exactly_the_samples_at_or_above_the_level(p in powers(100..400)) {
        let pdp = with_noise_floor(profile(p.clone())).unwrap();
        let out = threshold_pdp(&pdp).unwrap();
        let peak = p.iter().copied().fold(0.0, f64::max);
        let level = (db(peak) - 20.0).max(pdp.noise_floor_dbm.unwrap() + 5.0);
        prop_assert!((out.threshold_dbm.unwrap() - level).abs() < 1e-9);
        for (orig, kept) in p.iter().zip(&out.power) {
            if db(*orig) >= level {
                prop_assert_eq!(kept, orig);
            } else {
                prop_assert_eq!(*kept, 0.0);
            }
        }
        // the peak survives whenever it clears the noise rule
        if db(peak) >= pdp.noise_floor_dbm.unwrap() + 5.0 {
            prop_assert!(out.power.contains(&peak));
        }
    }

    #[test]
    fn threshold_level_is_the_larger_rule(peak in -150.0f64..0.0, floor in -180.0f64..-50.0) {
        let t = threshold_level(peak, floor);
        prop_assert!(t >= peak - 20.0 && t >= floor + 5.0);
        prop_assert!(t == peak - 20.0 || t == floor + 5.0);
    }

    #[test]
    fn averaging_is_the_linear_mean(a in powers(8..9), b in powers(8..9), c in powers(8..9)) {
        let avg = average_pdps(&[profile(a.clone()), profile(b.clone()), profile(c.clone())]).unwrap();
        for k in 0..8 {
            let want = (a[k] + b[k] + c[k]) / 3.0;
            prop_assert!((avg.power[k] - want).abs() <= 1e-12 * want);
        }
        let same = average_pdps(&[profile(a.clone()), profile(a.clone())]).unwrap();
        for (x, y) in same.power.iter().zip(&a) {
            prop_assert!((x - y).abs() <= 1e-15 * y);
        }
    }

    #[test]
    fn floor_tracks_scaling(p in powers(100..300), gain_db in -40.0f64..40.0) {
        let base = estimate_noise_floor(&profile(p.clone())).unwrap();
        let g = 10f64.powf(gain_db / 10.0);
        let scaled = estimate_noise_floor(&profile(p.iter().map(|v| v * g).collect())).unwrap();
        prop_assert!((scaled - base - gain_db).abs() < 1e-9);
    }

    #[test]
    fn floor_ignores_everything_before_the_tail(p in powers(200..300), spike in 1.0f64..1e6) {
        let mut q = p.clone();
        let tail = (q.len() as f64 * 0.1).ceil() as usize;
        let head = q.len() - tail;
        for v in &mut q[..head] {
            *v *= spike;
        }
        prop_assert_eq!(estimate_noise_floor(&profile(p)).unwrap(), estimate_noise_floor(&profile(q)).unwrap());
    }

    #[test]
    fn alignment_undoes_circular_shifts(
        p in powers(50..120),
        shifts in prop::collection::vec(-40isize..40, 1..6),
    ) {
        let mut p = p;
        let top = p.len() / 3;
        p[top] = 1.0;
        let base = profile(p);
        let mut acq = vec![base.clone()];
        acq.extend(shifts.iter().map(|&s| base.rotated(s)));
        let aligned = align_acquisitions(&acq);
        prop_assert!(!aligned.skipped);
        // equal peaks: the anchor may be any copy, but all land together
        let n = base.len() as isize;
        for prof in &aligned.profiles {
            prop_assert_eq!(&prof.power, &aligned.profiles[0].power);
        }
        prop_assert_eq!(&base.rotated(aligned.shifts[0]).power, &aligned.profiles[0].power);
        for (k, &s) in shifts.iter().enumerate() {
            prop_assert_eq!((aligned.shifts[k + 1] + s - aligned.shifts[0]).rem_euclid(n), 0);
        }
    }
}

#[test]
fn silent_profiles_are_left_alone() {
    let mut silent = profile(vec![1e-12; 120]);
    silent.noise_floor_dbm = Some(-90.0);
    let aligned = align_acquisitions(&[silent.clone(), silent.rotated(5)]);
    assert!(aligned.skipped);
    assert_eq!(aligned.shifts, vec![0, 0]);
}

#[test]
fn averaging_rejects_mismatched_axes_and_empty_input() {
    let a = profile(vec![1.0; 10]);
    let b = profile(vec![1.0; 11]);
    let c = PowerDelayProfile::new(vec![1.0; 10], 2.0 * STEP);
    assert!(matches!(
        average_pdps(&[a.clone(), b]),
        Err(SounderError::MismatchedAxes)
    ));
    assert!(matches!(average_pdps(&[a, c]), Err(SounderError::MismatchedAxes)));
    assert!(matches!(
        average_pdps::<f64>(&[]),
        Err(SounderError::InsufficientData(_))
    ));
}

#[test]
fn short_profiles_have_no_floor() {
    assert!(matches!(
        estimate_noise_floor(&profile(vec![1.0; 99])),
        Err(SounderError::InsufficientData(_))
    ));
    assert!(matches!(
        threshold_pdp(&profile(vec![1.0; 200])),
        Err(SounderError::InvalidParameter(_))
    ));
}

fn impulse_cir(at: usize) -> DilatedCir<f64> {
    let mut i = vec![0.0; 256];
    i[at] = 1.0;
    DilatedCir {
        i_channel: i,
        q_channel: vec![0.0; 256],
        sample_rate: 125e3,
        compressed_bandwidth: 62.5e3,
        slide_factor: 128.0,
        dilated_period: 256.0 / 125e3,
    }
}

#[test]
fn free_running_drift_walks_the_peak_and_alignment_recovers_it() {
    let cir = impulse_cir(40);
    let acq = vec![cir.clone(); 5];
    // one true-time sample per gap: 1 / (slide * fs)
    let per_gap = 1.0 / (128.0 * 125e3);
    let gap = 1.0;
    let dm = DriftModel::free_running(per_gap / gap, 10.0);
    let drifted = apply_drift(&acq, &dm, gap).unwrap();
    let profiles: Vec<_> = drifted.iter().map(pdp_from_iq).collect();
    let peaks: Vec<_> = profiles.iter().map(|p| p.peak_index().unwrap()).collect();
    assert_eq!(peaks, vec![40, 41, 42, 43, 44]);
    let aligned = align_acquisitions(&profiles);
    assert!(aligned
        .profiles
        .iter()
        .all(|p| p.peak_index() == Some(aligned.profiles[0].peak_index().unwrap())));

    let trained = apply_drift(&acq, &DriftModel::trained(), gap).unwrap();
    assert!(trained.iter().all(|c| *c == cir));
    assert!(apply_drift(&acq, &dm, -1.0).is_err());
}

#[test]
fn delay_axis_is_true_time() {
    let p = pdp_from_iq(&impulse_cir(3));
    assert!((p.delay_step - 1.0 / (128.0 * 125e3)).abs() < 1e-18);
    assert!((p.excess_delay(3) - 3.0 * p.delay_step).abs() < 1e-18);
}

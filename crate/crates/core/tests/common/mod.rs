//! Helpers shared by the integration tests.
#![allow(dead_code)]

use chansounder::channel::{apply_channel, Interaction, Isotropic, MultipathChannel, PathComponent};
use chansounder::correlator::{CorrelatorConfig, DilatedCir, Preset};
use chansounder::pn::{generate_msequence, ChipSequence};
use chansounder::waveform::{upsample_chips, SampledWaveform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn path(delay: f64, gain: f64, phase: f64) -> PathComponent<f64> {
    PathComponent {
        delay,
        gain,
        phase,
        aod_az: 0.0,
        aod_el: 0.0,
        aoa_az: 0.0,
        aoa_el: 0.0,
        interaction: Interaction::Direct,
    }
}

/// Desk-preset configuration, code, one code period and the full dilated
/// period of transmit samples.
pub struct Desk {
    pub cfg: CorrelatorConfig<f64>,
    pub pn: ChipSequence,
    pub period: SampledWaveform<f64>,
    pub dilated: SampledWaveform<f64>,
}

pub fn desk() -> Desk {
    let preset = Preset::Desk;
    let cfg = preset.config::<f64>();
    let pn = generate_msequence(&preset.lfsr()).unwrap();
    let period = upsample_chips(&pn, cfg.tx_chip_rate, preset.samples_per_chip(), 1).unwrap();
    let k = cfg.dilated_period_samples(period.sample_rate).unwrap() / period.len();
    let dilated = period.tile(k);
    Desk {
        cfg,
        pn,
        period,
        dilated,
    }
}

pub fn through(w: &SampledWaveform<f64>, ch: &MultipathChannel<f64>) -> SampledWaveform<f64> {
    apply_channel(w, ch, &Isotropic(0.0), &Isotropic(0.0), None).unwrap()
}

pub fn envelope_db(c: &DilatedCir<f64>) -> Vec<f64> {
    c.i_channel
        .iter()
        .zip(&c.q_channel)
        .map(|(i, q)| 10.0 * (i * i + q * q).log10())
        .collect()
}

/// Circular local maxima above `floor_db`.
pub fn local_peaks(env: &[f64], floor_db: f64) -> Vec<usize> {
    let n = env.len();
    (0..n)
        .filter(|&k| {
            let prev = env[(k + n - 1) % n];
            let next = env[(k + 1) % n];
            env[k] > floor_db && env[k] > prev && env[k] >= next
        })
        .collect()
}

pub fn circular_distance(a: usize, b: usize, n: usize) -> usize {
    let d = a.abs_diff(b) % n;
    d.min(n - d)
}

/// A random channel of 1 to 4 paths on whole-sample delays, at least
/// `min_sep_chips` apart, within `span_chips` of zero delay. Gains are
/// within 10 dB of the first path.
pub fn random_channel(seed: u64, chip: f64, fs: f64, span_chips: usize, min_sep_chips: f64) -> MultipathChannel<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = rng.random_range(1..=4);
    let mut delays: Vec<f64> = Vec::new();
    while delays.len() < count {
        let samples = rng.random_range(0..(span_chips as f64 * chip * fs) as usize);
        let d = samples as f64 / fs;
        if delays.iter().all(|&o| (o - d).abs() >= min_sep_chips * chip) {
            delays.push(d);
        }
    }
    let paths = delays
        .iter()
        .enumerate()
        .map(|(k, &d)| {
            let gain_db = if k == 0 { 0.0 } else { -rng.random_range(0.0..10.0) };
            path(
                d,
                10f64.powf(gain_db / 20.0),
                rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
            )
        })
        .collect();
    MultipathChannel::new(paths, 73.5e9)
}

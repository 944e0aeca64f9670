//! Simulated measurements: single acquisitions and azimuth sweeps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{
    add_awgn, apply_channel, synthesize_channel, AntennaPattern, AwgnSpec, BeamPattern, MultipathChannel,
};
use crate::correlator::{correlate_literal, CorrelatorConfig, DilatedCir, FastCorrelator, Preset};
use crate::error::{Result, SounderError};
use crate::pdp::{
    align_acquisitions, average_pdps, delay_cir, pdp_from_iq, threshold_pdp, with_noise_floor, DriftModel, PdpMeta,
    PowerDelayProfile,
};
use crate::pn::{generate_msequence, ChipSequence};
use crate::scalar::{db_to_power, Real};
use crate::scenario::{Pointing, ScenarioConfig};
use crate::waveform::{upsample_chips, SampledWaveform};

/// Profiles averaged into each recorded acquisition.
pub const DEFAULT_PDP_AVERAGES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrelatorKind {
    /// Cyclic correlation; noise from a dilated period of code repetitions
    /// is pre-averaged into one period.
    Fast,
    /// Sample-by-sample mixer over a full dilated period.
    Literal,
}

/// Mixes a 64-bit seed with a list of indices (SplitMix64 finalizer chain).
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    parts.iter().fold(mix(base), |acc, &p| mix(acc ^ mix(p)))
}

/// A configured transmitter/receiver pair.
pub struct Sounder<T: Real> {
    preset: Preset,
    kind: CorrelatorKind,
    cfg: CorrelatorConfig<T>,
    pn: ChipSequence,
    /// One code period at unit chip amplitude.
    period: SampledWaveform<T>,
    fast: FastCorrelator<T>,
    pulse_energy: T,
    pub pdp_averages: usize,
}

impl<T: Real> Sounder<T> {
    pub fn new(preset: Preset, kind: CorrelatorKind) -> Result<Self> {
        let cfg = preset.config::<T>();
        let pn = generate_msequence(&preset.lfsr())?;
        let period = upsample_chips(&pn, cfg.tx_chip_rate, preset.samples_per_chip(), 1)?;
        let fast = FastCorrelator::new(&cfg, &pn, period.sample_rate)?;
        let mut s = Self {
            preset,
            kind,
            cfg,
            pn,
            period,
            fast,
            pulse_energy: T::one(),
            pdp_averages: DEFAULT_PDP_AVERAGES,
        };
        s.pulse_energy = s.unit_pulse_energy()?;
        Ok(s)
    }

    pub fn preset(&self) -> Preset {
        self.preset
    }

    pub fn kind(&self) -> CorrelatorKind {
        self.kind
    }

    pub fn config(&self) -> &CorrelatorConfig<T> {
        &self.cfg
    }

    pub fn code(&self) -> &ChipSequence {
        &self.pn
    }

    pub fn sample_rate(&self) -> T {
        self.period.sample_rate
    }

    /// Summed profile power left by a noiseless unit path at zero delay.
    pub fn pulse_energy(&self) -> T {
        self.pulse_energy
    }

    fn unit_pulse_energy(&self) -> Result<T> {
        let cir = self.correlate(&self.transmit_waveform(T::one()))?;
        Ok(pdp_from_iq(&cir).power.iter().copied().sum())
    }

    fn periods_per_acquisition(&self) -> usize {
        self.fast.periods_per_dilated_period()
    }

    /// Transmit signal scaled to `amplitude` (sqrt mW), spanning what the
    /// selected correlator consumes.
    pub fn transmit_waveform(&self, amplitude: T) -> SampledWaveform<T> {
        let base = self
            .period
            .with_samples(self.period.samples.iter().map(|s| *s * amplitude).collect());
        match self.kind {
            CorrelatorKind::Fast => base,
            CorrelatorKind::Literal => base.tile(self.periods_per_acquisition()),
        }
    }

    pub fn correlate(&self, rx: &SampledWaveform<T>) -> Result<DilatedCir<T>> {
        match self.kind {
            CorrelatorKind::Fast => self.fast.correlate(rx),
            CorrelatorKind::Literal => correlate_literal(rx, &self.cfg, &self.pn),
        }
    }

    /// Input noise variance per sample for a density of `psd_dbm_hz`.
    pub fn noise_variance(&self, psd_dbm_hz: f64) -> f64 {
        AwgnSpec { psd_dbm_hz, seed: 0 }.variance(self.sample_rate().as_f64())
    }

    /// One raw capture of `clean` plus receiver noise.
    ///
    /// The literal path adds noise to the input samples and mixes. The fast
    /// path correlates the noiseless signal (`clean_cir`, computed once) and
    /// adds noise with the mixer's output statistics.
    fn capture(
        &self,
        clean: &SampledWaveform<T>,
        clean_cir: Option<&DilatedCir<T>>,
        variance: Option<f64>,
        seed: u64,
    ) -> Result<DilatedCir<T>> {
        match (self.kind, clean_cir) {
            (CorrelatorKind::Fast, Some(cir)) => {
                let mut cir = cir.clone();
                if let Some(v) = variance {
                    self.fast.add_receiver_noise(&mut cir, v, seed);
                }
                Ok(cir)
            }
            _ => {
                let mut rx = clean.clone();
                if let Some(v) = variance {
                    add_awgn(&mut rx.samples, v, seed);
                }
                self.correlate(&rx)
            }
        }
    }

    /// Averaged, floor-annotated, thresholded profile of one acquisition.
    ///
    /// `drift` is the true-time slip applied to every raw capture of the
    /// acquisition.
    pub fn measure(&self, request: &Measurement<'_, T>) -> Result<PowerDelayProfile<T>> {
        let amplitude = T::lit(db_to_power(request.tx_power_dbm).sqrt());
        let clean = apply_channel(
            &self.transmit_waveform(amplitude),
            request.channel,
            request.tx,
            request.rx,
            None,
        )?;
        let clean_cir = match self.kind {
            CorrelatorKind::Fast => Some(self.correlate(&clean)?),
            CorrelatorKind::Literal => None,
        };
        let variance = request.noise_psd_dbm_hz.map(|p| self.noise_variance(p));
        let averages = self.pdp_averages.max(1);
        let pdps = (0..averages)
            .map(|k| {
                let seed = derive_seed(request.seed, &[k as u64]);
                let cir = self.capture(&clean, clean_cir.as_ref(), variance, seed)?;
                let cir = delay_cir(&cir, request.drift);
                Ok(pdp_from_iq(&cir).with_pulse_energy(self.pulse_energy))
            })
            .collect::<Result<Vec<_>>>()?;
        let avg = with_noise_floor(average_pdps(&pdps)?)?;
        Ok(threshold_pdp(&avg)?.with_meta(request.meta.clone()))
    }

    /// Captures a bare noise record through the selected correlator.
    pub fn noise_capture(&self, psd_dbm_hz: f64, seed: u64) -> Result<DilatedCir<T>> {
        let silent = self.transmit_waveform(T::zero());
        let clean_cir = match self.kind {
            CorrelatorKind::Fast => Some(self.correlate(&silent)?),
            CorrelatorKind::Literal => None,
        };
        self.capture(&silent, clean_cir.as_ref(), Some(self.noise_variance(psd_dbm_hz)), seed)
    }
}

/// Inputs to [`Sounder::measure`].
pub struct Measurement<'a, T> {
    pub channel: &'a MultipathChannel<T>,
    pub tx: &'a dyn BeamPattern<T>,
    pub rx: &'a dyn BeamPattern<T>,
    pub tx_power_dbm: f64,
    pub noise_psd_dbm_hz: Option<f64>,
    pub seed: u64,
    pub drift: f64,
    pub meta: PdpMeta,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "az_deg")]
pub enum SweepStart {
    /// Start at the azimuth of strongest expected arrival, to 1 deg.
    Strongest,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepParams {
    pub step_deg: f64,
    pub sweeps: usize,
    pub seed: u64,
    /// Reuse one noise seed for every sweep at a given angle.
    pub same_seed_each_sweep: bool,
    pub start: SweepStart,
    pub drift: DriftModel,
    /// Seconds between consecutive acquisitions.
    pub acquisition_gap_s: f64,
    /// Remove drift by aligning each angle's sweeps on their strongest path.
    pub align: bool,
    /// Disable to run noiseless.
    pub noise: bool,
}

impl Default for SweepParams {
    fn default() -> Self {
        Self {
            step_deg: 15.0,
            sweeps: 5,
            seed: 0,
            same_seed_each_sweep: false,
            start: SweepStart::Strongest,
            drift: DriftModel::trained(),
            acquisition_gap_s: 0.0,
            align: true,
            noise: true,
        }
    }
}

impl SweepParams {
    /// Number of azimuths on the grid.
    pub fn angle_count(&self) -> Result<usize> {
        let n = 360.0 / self.step_deg;
        if !(self.step_deg > 0.0) || !n.is_finite() || (n - n.round()).abs() > 1e-9 {
            return Err(SounderError::InvalidStep(self.step_deg));
        }
        if self.sweeps == 0 {
            return Err(SounderError::InvalidParameter("sweeps must be >= 1".into()));
        }
        Ok(n.round() as usize)
    }
}

/// All sweeps at one RX azimuth.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionalRecord<T> {
    pub rx_azimuth: f64,
    pub pdps: Vec<PowerDelayProfile<T>>,
    /// Strongest total power over sweeps with signal, dBm.
    pub best_power_dbm: Option<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSet<T> {
    pub rx_id: String,
    pub rx_index: usize,
    pub tx_pointing: Pointing,
    pub rx_elevation_deg: f64,
    pub step_deg: f64,
    pub records: Vec<DirectionalRecord<T>>,
}

impl<T: Real> SweepSet<T> {
    pub fn pdp_count(&self) -> usize {
        self.records.iter().map(|r| r.pdps.len()).sum()
    }
}

/// Azimuth, to 1 deg, where the RX pattern collects the most incoherent
/// path power.
pub fn strongest_azimuth<T: Real>(ch: &MultipathChannel<T>, tx: &dyn BeamPattern<T>, rx: &AntennaPattern<T>) -> f64 {
    (0..360)
        .map(|az| {
            let pointed = rx.pointed(T::lit(az as f64), rx.pointing_el);
            let p: f64 = ch
                .paths
                .iter()
                .map(|p| {
                    let g = tx.gain_dbi(p.aod_az, p.aod_el) + pointed.gain_dbi(p.aoa_az, p.aoa_el);
                    (p.gain * p.gain).as_f64() * db_to_power(g.as_f64())
                })
                .sum();
            (az, p)
        })
        .fold(
            (0, f64::NEG_INFINITY),
            |best, cur| if cur.1 > best.1 { cur } else { best },
        )
        .0 as f64
}

/// Sweeps the RX horn through a full circle `sweeps` times.
///
/// Acquisitions run in parallel; their seeds depend only on
/// `(seed, rx_index, angle index, sweep)`, so results do not depend on
/// scheduling.
pub fn run_sweep<T: Real>(
    sounder: &Sounder<T>,
    sc: &ScenarioConfig,
    rx_index: usize,
    params: &SweepParams,
) -> Result<SweepSet<T>> {
    let n_angles = params.angle_count()?;
    let site = sc.rx_site(rx_index)?;
    let channel = synthesize_channel::<T>(sc, rx_index)?;
    let pointing = sc.tx_pointing_for(site);
    let tx = AntennaPattern::<T>::from_spec(&sc.tx.antenna)?.pointed(T::lit(pointing.az_deg), T::lit(pointing.el_deg));
    let rx_el = sc.rx_elevation_for(site);
    let rx_base = AntennaPattern::<T>::from_spec(&sc.rx_antenna)?.pointed(T::zero(), T::lit(rx_el));
    let start = match params.start {
        SweepStart::Strongest => strongest_azimuth(&channel, &tx, &rx_base),
        SweepStart::Fixed(az) => az,
    };
    let azimuths: Vec<f64> = (0..n_angles)
        .map(|k| crate::geometry::normalize_az(start + k as f64 * params.step_deg))
        .collect();
    let noise = params.noise.then(|| sc.noise.psd_dbm_hz());

    let jobs: Vec<(usize, usize)> = (0..params.sweeps)
        .flat_map(|s| (0..n_angles).map(move |a| (s, a)))
        .collect();
    let measured: Vec<PowerDelayProfile<T>> = jobs
        .par_iter()
        .map(|&(sweep, a)| {
            let az = azimuths[a];
            let rx = rx_base.pointed(T::lit(az), T::lit(rx_el));
            let sweep_key = if params.same_seed_each_sweep {
                0
            } else {
                sweep as u64 + 1
            };
            let order = (sweep * n_angles + a) as f64;
            let request = Measurement {
                channel: &channel,
                tx: &tx,
                rx: &rx,
                tx_power_dbm: sc.tx.power_dbm,
                noise_psd_dbm_hz: noise,
                seed: derive_seed(params.seed, &[rx_index as u64, a as u64, sweep_key]),
                drift: params.drift.slip(order * params.acquisition_gap_s),
                meta: PdpMeta {
                    angle_deg: Some(az),
                    location: Some(site.id.clone()),
                    sweep: Some(sweep),
                },
            };
            sounder
                .measure(&request)
                .map_err(|e| e.context(format!("RX {} az {az} sweep {sweep}", site.id)))
        })
        .collect::<Result<_>>()?;

    let mut per_angle: Vec<Vec<PowerDelayProfile<T>>> = vec![Vec::new(); n_angles];
    for ((_, a), pdp) in jobs.iter().zip(measured) {
        per_angle[*a].push(pdp);
    }
    let records = per_angle
        .into_iter()
        .zip(&azimuths)
        .map(|(pdps, &az)| {
            let pdps = if params.align && pdps.len() > 1 {
                align_acquisitions(&pdps).profiles
            } else {
                pdps
            };
            let best_power_dbm = pdps
                .iter()
                .filter(|p| p.has_signal())
                .filter_map(|p| p.total_power_dbm())
                .fold(None, |best: Option<T>, p| Some(best.map_or(p, |b| b.max(p))));
            DirectionalRecord {
                rx_azimuth: az,
                pdps,
                best_power_dbm,
            }
        })
        .collect();
    Ok(SweepSet {
        rx_id: site.id.clone(),
        rx_index,
        tx_pointing: pointing,
        rx_elevation_deg: rx_el,
        step_deg: params.step_deg,
        records,
    })
}

/// One acquisition with the RX horn on the strongest azimuth.
///
/// Returns the azimuth used and the averaged, thresholded profile.
pub fn measure_link<T: Real>(
    sounder: &Sounder<T>,
    sc: &ScenarioConfig,
    rx_index: usize,
    seed: u64,
    noise: bool,
) -> Result<(f64, PowerDelayProfile<T>)> {
    let site = sc.rx_site(rx_index)?;
    let channel = synthesize_channel::<T>(sc, rx_index)?;
    let pointing = sc.tx_pointing_for(site);
    let tx = AntennaPattern::<T>::from_spec(&sc.tx.antenna)?.pointed(T::lit(pointing.az_deg), T::lit(pointing.el_deg));
    let rx_el = sc.rx_elevation_for(site);
    let rx_base = AntennaPattern::<T>::from_spec(&sc.rx_antenna)?.pointed(T::zero(), T::lit(rx_el));
    let az = strongest_azimuth(&channel, &tx, &rx_base);
    let rx = rx_base.pointed(T::lit(az), T::lit(rx_el));
    let pdp = sounder.measure(&Measurement {
        channel: &channel,
        tx: &tx,
        rx: &rx,
        tx_power_dbm: sc.tx.power_dbm,
        noise_psd_dbm_hz: noise.then(|| sc.noise.psd_dbm_hz()),
        seed: derive_seed(seed, &[rx_index as u64]),
        drift: 0.0,
        meta: PdpMeta {
            angle_deg: Some(az),
            location: Some(site.id.clone()),
            sweep: None,
        },
    })?;
    Ok((az, pdp))
}

//! Power delay profiles: formation, averaging, noise floor, thresholding,
//! clock drift and drift removal.

use serde::{Deserialize, Serialize};

use crate::correlator::DilatedCir;
use crate::dsp::fractional_delay;
use crate::error::{Result, SounderError};
use crate::scalar::{power_to_db, Real};

/// Dynamic range kept below the strongest sample, dB.
pub const PEAK_RULE_DB: f64 = 20.0;
/// Minimum SNR over the noise floor for a sample to count, dB.
pub const SNR_RULE_DB: f64 = 5.0;
/// Trailing fraction of the delay axis used to estimate the floor.
pub const FLOOR_TAIL_FRACTION: f64 = 0.1;
/// Shortest profile accepted by [`estimate_noise_floor`].
pub const MIN_FLOOR_SAMPLES: usize = 100;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PdpMeta {
    pub angle_deg: Option<f64>,
    pub location: Option<String>,
    pub sweep: Option<usize>,
}

/// Received power (mW per sample) against true excess delay.
///
/// `pulse_energy` is the summed power a unit-amplitude path leaves in the
/// profile, so `sum(power) / pulse_energy` is received power in mW.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerDelayProfile<T> {
    pub power: Vec<T>,
    /// Delay axis spacing, seconds.
    pub delay_step: T,
    pub pulse_energy: T,
    pub noise_floor_dbm: Option<T>,
    pub threshold_dbm: Option<T>,
    pub meta: PdpMeta,
}

impl<T: Real> PowerDelayProfile<T> {
    pub fn new(power: Vec<T>, delay_step: T) -> Self {
        Self {
            power,
            delay_step,
            pulse_energy: T::one(),
            noise_floor_dbm: None,
            threshold_dbm: None,
            meta: PdpMeta::default(),
        }
    }

    pub fn len(&self) -> usize {
        self.power.len()
    }

    pub fn is_empty(&self) -> bool {
        self.power.is_empty()
    }

    pub fn excess_delay(&self, k: usize) -> T {
        T::from_usize_lossy(k) * self.delay_step
    }

    pub fn peak_index(&self) -> Option<usize> {
        self.power
            .iter()
            .enumerate()
            .filter(|(_, p)| p.is_finite())
            .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite"))
            .map(|(i, _)| i)
    }

    pub fn peak_power_dbm(&self) -> T {
        self.peak_index()
            .map(|i| power_to_db(self.power[i]))
            .unwrap_or(T::neg_infinity())
    }

    /// Calibrated received power in mW, or `None` if nothing is left.
    pub fn total_power_mw(&self) -> Option<T> {
        let sum: T = self.power.iter().copied().sum();
        (sum > T::zero()).then(|| sum / self.pulse_energy)
    }

    pub fn total_power_dbm(&self) -> Option<T> {
        self.total_power_mw().map(power_to_db)
    }

    /// Whether the peak clears the noise floor by the SNR rule. Profiles
    /// without an estimated floor count as detectable when non-zero.
    pub fn has_signal(&self) -> bool {
        let peak = self.peak_power_dbm();
        match self.noise_floor_dbm {
            Some(floor) => peak > floor + T::lit(SNR_RULE_DB),
            None => peak > T::neg_infinity(),
        }
    }

    pub fn with_meta(mut self, meta: PdpMeta) -> Self {
        self.meta = meta;
        self
    }

    pub fn with_pulse_energy(mut self, pulse_energy: T) -> Self {
        self.pulse_energy = pulse_energy;
        self
    }

    /// Circularly delays the profile by `shift` samples.
    pub fn rotated(&self, shift: isize) -> Self {
        let n = self.len() as isize;
        let mut out = self.clone();
        if n > 0 {
            for (k, v) in self.power.iter().enumerate() {
                out.power[(k as isize + shift).rem_euclid(n) as usize] = *v;
            }
        }
        out
    }
}

/// `|I|^2 + |Q|^2` on the de-dilated delay axis.
pub fn pdp_from_iq<T: Real>(cir: &DilatedCir<T>) -> PowerDelayProfile<T> {
    let power = cir
        .i_channel
        .iter()
        .zip(&cir.q_channel)
        .map(|(&i, &q)| i * i + q * q)
        .collect();
    PowerDelayProfile::new(power, T::one() / (cir.sample_rate * cir.slide_factor))
}

/// Element-wise linear mean. Calibration and metadata come from the first
/// profile; floor and threshold are cleared.
pub fn average_pdps<T: Real>(pdps: &[PowerDelayProfile<T>]) -> Result<PowerDelayProfile<T>> {
    let first = pdps
        .first()
        .ok_or_else(|| SounderError::InsufficientData("no profiles to average".into()))?;
    let tol = first.delay_step.abs() * T::lit(1e-9);
    if pdps
        .iter()
        .any(|p| p.len() != first.len() || (p.delay_step - first.delay_step).abs() > tol)
    {
        return Err(SounderError::MismatchedAxes);
    }
    let scale = T::one() / T::from_usize_lossy(pdps.len());
    let power = (0..first.len())
        .map(|k| pdps.iter().map(|p| p.power[k]).sum::<T>() * scale)
        .collect();
    Ok(PowerDelayProfile {
        power,
        noise_floor_dbm: None,
        threshold_dbm: None,
        ..first.clone()
    })
}

/// Median power of the trailing 10% of the delay axis, dBm. A silent tail
/// gives negative infinity.
pub fn estimate_noise_floor<T: Real>(pdp: &PowerDelayProfile<T>) -> Result<T> {
    if pdp.len() < MIN_FLOOR_SAMPLES {
        return Err(SounderError::InsufficientData(format!(
            "noise floor needs {MIN_FLOOR_SAMPLES} samples, profile has {}",
            pdp.len()
        )));
    }
    let tail = ((pdp.len() as f64) * FLOOR_TAIL_FRACTION).ceil() as usize;
    let mut vals: Vec<T> = pdp.power[pdp.len() - tail..].to_vec();
    vals.sort_by(|a, b| a.partial_cmp(b).expect("finite power"));
    let mid = vals.len() / 2;
    let median = if vals.len() % 2 == 1 {
        vals[mid]
    } else {
        (vals[mid - 1] + vals[mid]) / T::lit(2.0)
    };
    Ok(power_to_db(median))
}

/// Sets the noise floor from [`estimate_noise_floor`].
pub fn with_noise_floor<T: Real>(mut pdp: PowerDelayProfile<T>) -> Result<PowerDelayProfile<T>> {
    pdp.noise_floor_dbm = Some(estimate_noise_floor(&pdp)?);
    Ok(pdp)
}

/// `max(peak - 20 dB, floor + 5 dB)`.
pub fn threshold_level<T: Real>(peak_dbm: T, noise_floor_dbm: T) -> T {
    (peak_dbm - T::lit(PEAK_RULE_DB)).max(noise_floor_dbm + T::lit(SNR_RULE_DB))
}

/// Zeroes every sample below the threshold. Needs a noise floor.
pub fn threshold_pdp<T: Real>(pdp: &PowerDelayProfile<T>) -> Result<PowerDelayProfile<T>> {
    let floor = pdp
        .noise_floor_dbm
        .ok_or_else(|| SounderError::InvalidParameter("threshold needs an estimated noise floor".into()))?;
    let threshold = threshold_level(pdp.peak_power_dbm(), floor);
    let mut out = pdp.clone();
    for p in out.power.iter_mut() {
        if power_to_db(*p) < threshold {
            *p = T::zero();
        }
    }
    out.threshold_dbm = Some(threshold);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainingState {
    Trained,
    FreeRunning,
}

/// Frequency error between the TX and RX reference clocks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftModel {
    fractional_frequency_offset: f64,
    pub training_state: TrainingState,
    /// Seconds since the references were last disciplined together.
    pub time_since_sync: f64,
}

impl DriftModel {
    pub fn trained() -> Self {
        Self {
            fractional_frequency_offset: 0.0,
            training_state: TrainingState::Trained,
            time_since_sync: 0.0,
        }
    }

    pub fn free_running(fractional_frequency_offset: f64, time_since_sync: f64) -> Self {
        Self {
            fractional_frequency_offset,
            training_state: TrainingState::FreeRunning,
            time_since_sync,
        }
    }

    /// Zero while trained.
    pub fn fractional_frequency_offset(&self) -> f64 {
        match self.training_state {
            TrainingState::Trained => 0.0,
            TrainingState::FreeRunning => self.fractional_frequency_offset,
        }
    }

    /// True-time slip accumulated over `elapsed` seconds.
    pub fn slip(&self, elapsed: f64) -> f64 {
        elapsed * self.fractional_frequency_offset()
    }
}

/// Delays acquisition `k` by the slip accumulated over `k` gaps, mapped into
/// compressed time. Each acquisition is shifted as a whole.
pub fn apply_drift<T: Real>(
    acquisitions: &[DilatedCir<T>],
    dm: &DriftModel,
    inter_acquisition_gap: f64,
) -> Result<Vec<DilatedCir<T>>> {
    if !(inter_acquisition_gap >= 0.0) {
        return Err(SounderError::InvalidParameter(format!(
            "acquisition gap must be >= 0, got {inter_acquisition_gap}"
        )));
    }
    Ok(acquisitions
        .iter()
        .enumerate()
        .map(|(k, cir)| delay_cir(cir, dm.slip(k as f64 * inter_acquisition_gap)))
        .collect())
}

/// Delays a whole acquisition by `true_time` seconds of channel delay,
/// i.e. `true_time * slide_factor` of compressed time.
pub fn delay_cir<T: Real>(cir: &DilatedCir<T>, true_time: f64) -> DilatedCir<T> {
    let shift = true_time * (cir.slide_factor * cir.sample_rate).as_f64();
    if shift == 0.0 {
        return cir.clone();
    }
    let samples: Vec<_> = (0..cir.len()).map(|i| cir.sample(i)).collect();
    let moved = fractional_delay(&samples, T::lit(shift));
    let (i_channel, q_channel) = moved.into_iter().map(|c| (c.re, c.im)).unzip();
    DilatedCir {
        i_channel,
        q_channel,
        ..cir.clone()
    }
}

/// Result of [`align_acquisitions`].
#[derive(Debug, Clone, PartialEq)]
pub struct Alignment<T> {
    pub profiles: Vec<PowerDelayProfile<T>>,
    /// Integer sample shift applied to each profile.
    pub shifts: Vec<isize>,
    /// Set when no profile had a detectable signal.
    pub skipped: bool,
}

/// Shifts each profile so its strongest sample lands on the strongest
/// sample of the globally strongest profile. Profiles without signal are
/// left in place.
pub fn align_acquisitions<T: Real>(acquisitions: &[PowerDelayProfile<T>]) -> Alignment<T> {
    let unchanged = |skipped| Alignment {
        profiles: acquisitions.to_vec(),
        shifts: vec![0; acquisitions.len()],
        skipped,
    };
    let anchor = acquisitions.iter().filter(|p| p.has_signal()).max_by(|a, b| {
        a.peak_power_dbm()
            .partial_cmp(&b.peak_power_dbm())
            .expect("finite peaks")
    });
    let Some(anchor) = anchor else {
        if !acquisitions.is_empty() {
            log::warn!("alignment skipped: no acquisition has a detectable signal");
        }
        return unchanged(true);
    };
    let target = anchor.peak_index().expect("anchor has signal") as isize;
    let mut profiles = Vec::with_capacity(acquisitions.len());
    let mut shifts = Vec::with_capacity(acquisitions.len());
    for p in acquisitions {
        let shift = match (p.has_signal(), p.peak_index()) {
            (true, Some(k)) => {
                let n = p.len() as isize;
                let raw = target - k as isize;
                // shortest circular move
                let wrapped = raw.rem_euclid(n);
                if wrapped > n / 2 {
                    wrapped - n
                } else {
                    wrapped
                }
            }
            _ => 0,
        };
        profiles.push(p.rotated(shift));
        shifts.push(shift);
    }
    Alignment {
        profiles,
        shifts,
        skipped: false,
    }
}

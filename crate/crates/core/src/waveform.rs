//! Sampled complex-baseband transmit and receive waveforms.

use num_complex::Complex;

use crate::dsp::FirLowpass;
use crate::error::{Result, SounderError};
use crate::pn::ChipSequence;
use crate::scalar::Real;

/// Complex baseband samples with chip timing and a trigger mark.
///
/// `period_len` is the length of one code period in samples; the waveform
/// repeats with that period when it was produced by [`upsample_chips`].
#[derive(Debug, Clone, PartialEq)]
pub struct SampledWaveform<T> {
    pub samples: Vec<Complex<T>>,
    pub sample_rate: T,
    pub chip_rate: T,
    pub trigger_index: usize,
    pub period_len: usize,
}

impl<T: Real> SampledWaveform<T> {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Nearest integer to `sample_rate / chip_rate`.
    pub fn samples_per_chip(&self) -> usize {
        (self.sample_rate / self.chip_rate).round().to_usize().unwrap_or(0)
    }

    pub fn energy(&self) -> T {
        self.samples.iter().map(|s| s.norm_sqr()).sum()
    }

    /// Energy of the first `period_len` samples.
    pub fn energy_per_period(&self) -> T {
        self.samples[..self.period_len.min(self.len())]
            .iter()
            .map(|s| s.norm_sqr())
            .sum()
    }

    /// Same timing metadata, new sample buffer.
    pub fn with_samples(&self, samples: Vec<Complex<T>>) -> Self {
        Self {
            samples,
            sample_rate: self.sample_rate,
            chip_rate: self.chip_rate,
            trigger_index: self.trigger_index,
            period_len: self.period_len,
        }
    }

    /// Repeats the buffer `count` times.
    pub fn tile(&self, count: usize) -> Self {
        let mut samples = Vec::with_capacity(self.len() * count);
        for _ in 0..count {
            samples.extend_from_slice(&self.samples);
        }
        self.with_samples(samples)
    }
}

/// Zero-order-hold chip shaping at `samples_per_chip` samples per chip.
pub fn upsample_chips<T: Real>(
    seq: &ChipSequence,
    chip_rate: T,
    samples_per_chip: usize,
    periods: usize,
) -> Result<SampledWaveform<T>> {
    if samples_per_chip < 2 {
        return Err(SounderError::Aliasing { samples_per_chip });
    }
    if periods == 0 {
        return Err(SounderError::InvalidParameter(
            "waveform needs at least one period".into(),
        ));
    }
    if !(chip_rate > T::zero()) {
        return Err(SounderError::InvalidParameter(format!(
            "chip rate must be positive, got {chip_rate}"
        )));
    }
    let period_len = seq.len() * samples_per_chip;
    let mut samples = Vec::with_capacity(period_len * periods);
    for _ in 0..periods {
        for &c in seq.chips() {
            let v = Complex::new(T::from_i8(c).unwrap(), T::zero());
            samples.extend(std::iter::repeat_n(v, samples_per_chip));
        }
    }
    Ok(SampledWaveform {
        samples,
        sample_rate: chip_rate * T::from_usize_lossy(samples_per_chip),
        chip_rate,
        trigger_index: 0,
        period_len,
    })
}

/// Moves the trigger by `increments` steps of `increment_duration` seconds.
///
/// Each step must be a whole number of samples (within 1e-6 sample).
pub fn shift_trigger<T: Real>(
    w: &SampledWaveform<T>,
    increments: i64,
    increment_duration: T,
) -> Result<SampledWaveform<T>> {
    let per_step = (increment_duration * w.sample_rate).as_f64();
    let rounded = per_step.round();
    if (per_step - rounded).abs() > 1e-6 {
        return Err(SounderError::TriggerQuantization { samples: per_step });
    }
    let period = w.period_len.max(1) as i128;
    let shift = (increments as i128 * rounded as i128).rem_euclid(period);
    let trigger = (w.trigger_index as i128 + shift).rem_euclid(period) as usize;
    Ok(SampledWaveform {
        trigger_index: trigger,
        ..w.clone()
    })
}

/// Zero-phase lowpass of a periodic waveform.
///
/// The FIR is applied circularly and centered on its group delay, so sample
/// `n` of the output lines up with sample `n` of the input and the trigger
/// index stays valid.
pub fn lowpass<T: Real>(w: &SampledWaveform<T>, cutoff: T) -> Result<SampledWaveform<T>> {
    let filter = FirLowpass::design(cutoff, w.sample_rate)?;
    Ok(w.with_samples(filter.filter_circular(&w.samples)))
}

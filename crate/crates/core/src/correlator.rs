//! Sliding correlation receiver and its timing relations.
//!
//! The receiver multiplies the incoming signal by a local copy of the code
//! clocked slightly slower than the transmitter. The two codes slip past each
//! other by one chip every `1 / (f_tx - f_rx)` seconds, so a path delay `tau`
//! shows up in the lowpassed product at compressed time `tau * slide_factor`.
//!
//! Two implementations share one output format. [`correlate_literal`] runs
//! the mixer and lowpass filter sample by sample over a whole dilated period.
//! [`correlate_fast`] computes the cyclic cross-correlation of the received
//! code period with the transmit template and maps its lag axis onto the
//! compressed timebase.

use std::ops::ControlFlow;
use std::sync::Arc;

use num_complex::Complex;
use num_traits::{FromPrimitive, Num};
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::dsp::FirLowpass;
use crate::error::{Result, SounderError};
use crate::pn::{ChipSequence, LfsrSpec};
use crate::scalar::Real;
use crate::waveform::SampledWaveform;

/// Compressed-domain samples per chip-equivalent of dilated time.
pub const OUTPUT_SAMPLES_PER_CHIP: usize = 16;

/// `f_tx / (f_tx - f_rx)`. Works for any numeric type, including exact
/// rationals.
pub fn slide_factor<N: Num + Copy>(tx_chip_rate: N, rx_chip_rate: N) -> Result<N> {
    let offset = tx_chip_rate - rx_chip_rate;
    if offset.is_zero() {
        return Err(SounderError::ZeroOffset);
    }
    Ok(tx_chip_rate / offset)
}

/// `code_length / (f_tx - f_rx)`, seconds.
pub fn dilated_period<N: Num + Copy>(code_length: N, tx_chip_rate: N, rx_chip_rate: N) -> Result<N> {
    let offset = tx_chip_rate - rx_chip_rate;
    if offset.is_zero() {
        return Err(SounderError::ZeroOffset);
    }
    Ok(code_length / offset)
}

/// `10 log10(slide_factor)`, dB.
pub fn processing_gain<T: Real>(slide_factor: T) -> T {
    T::lit(10.0) * slide_factor.log10()
}

/// Chip rate produced by dividing a synthesizer clock.
pub fn rx_chip_rate_from_divider<N: Num + Copy + FromPrimitive>(synth_freq: N, divider: u32) -> Result<N> {
    if divider == 0 {
        return Err(SounderError::InvalidParameter("divider must be >= 1".into()));
    }
    Ok(synth_freq / N::from_u32(divider).expect("divider representable"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelatorConfig<T> {
    pub tx_chip_rate: T,
    pub rx_chip_rate: T,
    pub code_length: usize,
    pub lpf_cutoff: T,
}

impl<T: Real> CorrelatorConfig<T> {
    /// Requires `0 < f_rx < f_tx` and a cutoff of at least twice the offset.
    pub fn new(tx_chip_rate: T, rx_chip_rate: T, code_length: usize, lpf_cutoff: T) -> Result<Self> {
        if tx_chip_rate == rx_chip_rate {
            return Err(SounderError::ZeroOffset);
        }
        if !(rx_chip_rate > T::zero() && rx_chip_rate < tx_chip_rate) {
            return Err(SounderError::InvalidCorrelator(format!(
                "need 0 < rx chip rate ({rx_chip_rate}) < tx chip rate ({tx_chip_rate})"
            )));
        }
        if code_length < 2 {
            return Err(SounderError::InvalidCorrelator("code length must be >= 2".into()));
        }
        let offset = tx_chip_rate - rx_chip_rate;
        if lpf_cutoff < T::lit(2.0) * offset {
            return Err(SounderError::InvalidCorrelator(format!(
                "lowpass cutoff {lpf_cutoff} Hz below twice the chip-rate offset {offset} Hz"
            )));
        }
        Ok(Self {
            tx_chip_rate,
            rx_chip_rate,
            code_length,
            lpf_cutoff,
        })
    }

    /// Cutoff defaults to four compressed bandwidths.
    pub fn with_default_cutoff(tx_chip_rate: T, rx_chip_rate: T, code_length: usize) -> Result<Self> {
        let offset = tx_chip_rate - rx_chip_rate;
        Self::new(tx_chip_rate, rx_chip_rate, code_length, T::lit(4.0) * offset)
    }

    pub fn chip_rate_offset(&self) -> T {
        self.tx_chip_rate - self.rx_chip_rate
    }

    pub fn slide_factor(&self) -> T {
        self.tx_chip_rate / self.chip_rate_offset()
    }

    pub fn dilated_period(&self) -> T {
        T::from_usize_lossy(self.code_length) / self.chip_rate_offset()
    }

    pub fn processing_gain_db(&self) -> T {
        processing_gain(self.slide_factor())
    }

    /// Bandwidth of the dilated response, `f_tx / slide_factor`, Hz.
    pub fn compressed_bandwidth(&self) -> T {
        self.chip_rate_offset()
    }

    /// Compressed-domain output sample rate, Hz.
    pub fn output_rate(&self) -> T {
        T::from_usize_lossy(OUTPUT_SAMPLES_PER_CHIP) * self.chip_rate_offset()
    }

    /// Output samples per dilated period.
    pub fn output_len(&self) -> usize {
        self.code_length * OUTPUT_SAMPLES_PER_CHIP
    }

    /// Input samples per output sample at `sample_rate`.
    pub fn decimation(&self, sample_rate: T) -> Result<usize> {
        whole(sample_rate / self.output_rate(), "sample rate / output rate")
    }

    /// Input samples per transmitted chip at `sample_rate`.
    pub fn samples_per_chip(&self, sample_rate: T) -> Result<usize> {
        whole(sample_rate / self.tx_chip_rate, "sample rate / chip rate")
    }

    /// Samples spanning one dilated period at `sample_rate`.
    pub fn dilated_period_samples(&self, sample_rate: T) -> Result<usize> {
        Ok(self.decimation(sample_rate)? * self.output_len())
    }
}

fn whole<T: Real>(x: T, what: &str) -> Result<usize> {
    let v = x.as_f64();
    let r = v.round();
    if r < 1.0 || (v - r).abs() > 1e-6 * r.max(1.0) {
        return Err(SounderError::InvalidCorrelator(format!(
            "{what} = {v} is not a whole number"
        )));
    }
    Ok(r as usize)
}

/// Named system configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// 2047-chip code at 500 Mcps against 499.9375 Mcps, 2 GS/s.
    Full,
    /// 127-chip code at 1 Mcps against 0.9921875 Mcps, 4 MS/s.
    Desk,
}

impl Preset {
    pub fn lfsr(self) -> LfsrSpec {
        match self {
            Preset::Full => LfsrSpec::prbs11(),
            Preset::Desk => LfsrSpec::prbs7(),
        }
    }

    pub fn samples_per_chip(self) -> usize {
        4
    }

    pub fn config<T: Real>(self) -> CorrelatorConfig<T> {
        let (tx, rx, n) = match self {
            Preset::Full => (500e6, 1999.75e6 / 4.0, 2047),
            Preset::Desk => (1e6, 0.9921875e6, 127),
        };
        CorrelatorConfig::with_default_cutoff(T::lit(tx), T::lit(rx), n).expect("valid preset")
    }

    pub fn sample_rate<T: Real>(self) -> T {
        self.config::<T>().tx_chip_rate * T::from_usize_lossy(self.samples_per_chip())
    }
}

impl std::str::FromStr for Preset {
    type Err = SounderError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Preset::Full),
            "desk" => Ok(Preset::Desk),
            other => Err(SounderError::InvalidParameter(format!(
                "unknown preset {other:?} (expected full or desk)"
            ))),
        }
    }
}

/// One dilated period of correlator output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DilatedCir<T> {
    pub i_channel: Vec<T>,
    pub q_channel: Vec<T>,
    /// Compressed-domain sample rate, Hz.
    pub sample_rate: T,
    pub compressed_bandwidth: T,
    pub slide_factor: T,
    /// Seconds.
    pub dilated_period: T,
}

impl<T: Real> DilatedCir<T> {
    pub fn len(&self) -> usize {
        self.i_channel.len()
    }

    pub fn is_empty(&self) -> bool {
        self.i_channel.is_empty()
    }

    pub fn sample(&self, k: usize) -> Complex<T> {
        Complex::new(self.i_channel[k], self.q_channel[k])
    }

    pub fn compressed_time(&self, k: usize) -> T {
        T::from_usize_lossy(k) / self.sample_rate
    }

    /// True-time delay of output sample `k`.
    pub fn excess_delay(&self, k: usize) -> T {
        self.compressed_time(k) / self.slide_factor
    }

    fn from_complex(cfg: &CorrelatorConfig<T>, samples: Vec<Complex<T>>) -> Self {
        let (i_channel, q_channel) = samples.into_iter().map(|c| (c.re, c.im)).unzip();
        Self {
            i_channel,
            q_channel,
            sample_rate: cfg.output_rate(),
            compressed_bandwidth: cfg.compressed_bandwidth(),
            slide_factor: cfg.slide_factor(),
            dilated_period: cfg.dilated_period(),
        }
    }
}

/// Progress of a long literal correlation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Progress {
    pub done: usize,
    pub total: usize,
}

fn check_inputs<T: Real>(rx: &SampledWaveform<T>, cfg: &CorrelatorConfig<T>, pn: &ChipSequence) -> Result<()> {
    if pn.len() != cfg.code_length {
        return Err(SounderError::InvalidCorrelator(format!(
            "code has {} chips, configuration expects {}",
            pn.len(),
            cfg.code_length
        )));
    }
    if rx.sample_rate < T::lit(2.0) * cfg.tx_chip_rate {
        return Err(SounderError::InvalidCorrelator(format!(
            "sample rate {} below twice the chip rate {}",
            rx.sample_rate, cfg.tx_chip_rate
        )));
    }
    Ok(())
}

/// Mixer plus lowpass over one dilated period, evaluated at the decimated
/// output instants.
pub fn correlate_literal<T: Real>(
    rx: &SampledWaveform<T>,
    cfg: &CorrelatorConfig<T>,
    pn: &ChipSequence,
) -> Result<DilatedCir<T>> {
    correlate_literal_with_progress(rx, cfg, pn, |_| ControlFlow::Continue(()))
}

/// [`correlate_literal`] reporting progress between blocks of output
/// samples. Returning `Break` stops the run with [`SounderError::Cancelled`].
pub fn correlate_literal_with_progress<T: Real>(
    rx: &SampledWaveform<T>,
    cfg: &CorrelatorConfig<T>,
    pn: &ChipSequence,
    mut progress: impl FnMut(Progress) -> ControlFlow<()>,
) -> Result<DilatedCir<T>> {
    check_inputs(rx, cfg, pn)?;
    let fs = rx.sample_rate;
    let period = cfg.dilated_period_samples(fs)?;
    if rx.len() < period {
        return Err(SounderError::InsufficientInput {
            needed: period,
            got: rx.len(),
        });
    }
    let decim = cfg.decimation(fs)?;
    let filter = FirLowpass::design(cfg.lpf_cutoff, fs)?;
    let taps = filter.taps();
    let center = filter.group_delay();
    let n_code = pn.len();
    let chips: Vec<T> = (0..n_code).map(|k| pn.chip(k)).collect();
    let local_step = (cfg.rx_chip_rate / fs).as_f64();
    let len = rx.len();
    let trig = rx.trigger_index;

    // product sample n of the dilated period, n in [0, period)
    let product = |n: usize| -> Complex<T> {
        let chip = (((n as f64) + 0.5) * local_step).floor() as usize % n_code;
        rx.samples[(trig + n) % len] * chips[chip]
    };

    let pad = period * (taps.len() / period + 1);
    let total = cfg.output_len();
    let mut out = Vec::with_capacity(total);
    const BLOCK: usize = 64;
    let mut start = 0;
    while start < total {
        let end = (start + BLOCK).min(total);
        let block: Vec<Complex<T>> = (start..end)
            .into_par_iter()
            .map(|m| {
                let base = m * decim + center + pad;
                let mut acc = Complex::new(T::zero(), T::zero());
                for (k, &h) in taps.iter().enumerate() {
                    acc = acc + product((base - k) % period) * h;
                }
                acc
            })
            .collect();
        out.extend(block);
        start = end;
        if progress(Progress { done: start, total }).is_break() {
            return Err(SounderError::Cancelled);
        }
    }
    Ok(DilatedCir::from_complex(cfg, out))
}

/// Cross-correlation of one averaged code period against the transmit
/// template, resampled onto the compressed timebase and lowpassed there.
///
/// Whole code periods following the trigger are averaged before
/// correlating, up to one dilated period's worth.
pub fn correlate_fast<T: Real>(
    rx: &SampledWaveform<T>,
    cfg: &CorrelatorConfig<T>,
    pn: &ChipSequence,
) -> Result<DilatedCir<T>> {
    FastCorrelator::new(cfg, pn, rx.sample_rate)?.correlate(rx)
}

/// [`correlate_fast`] with the template spectrum, filter response and FFT
/// plans computed once for repeated use at one sample rate.
pub struct FastCorrelator<T: Real> {
    cfg: CorrelatorConfig<T>,
    sample_rate: T,
    period: usize,
    max_periods: usize,
    template_conj: Vec<Complex<T>>,
    filter_response: Vec<Complex<T>>,
    fft_period: Arc<dyn Fft<T>>,
    ifft_period: Arc<dyn Fft<T>>,
    fft_out: Arc<dyn Fft<T>>,
    ifft_out: Arc<dyn Fft<T>>,
}

impl<T: Real> FastCorrelator<T> {
    pub fn new(cfg: &CorrelatorConfig<T>, pn: &ChipSequence, sample_rate: T) -> Result<Self> {
        let probe = SampledWaveform {
            samples: Vec::new(),
            sample_rate,
            chip_rate: cfg.tx_chip_rate,
            trigger_index: 0,
            period_len: 0,
        };
        check_inputs(&probe, cfg, pn)?;
        let spc = cfg.samples_per_chip(sample_rate)?;
        let period = pn.len() * spc;
        let max_periods = (cfg.dilated_period_samples(sample_rate)? / period).max(1);
        let m_len = cfg.output_len();
        let mut planner = FftPlanner::<T>::new();
        let fft_period = planner.plan_fft_forward(period);
        let ifft_period = planner.plan_fft_inverse(period);
        let fft_out = planner.plan_fft_forward(m_len);
        let ifft_out = planner.plan_fft_inverse(m_len);

        // 1/P for the correlation sum and 1/P for the inverse transform
        let scale = T::one() / T::from_usize_lossy(period * period);
        let mut template_conj: Vec<Complex<T>> =
            (0..period).map(|j| Complex::new(pn.chip(j / spc), T::zero())).collect();
        fft_period.process(&mut template_conj);
        template_conj.iter_mut().for_each(|v| *v = v.conj() * scale);

        let filter = FirLowpass::design(cfg.lpf_cutoff, cfg.output_rate())?;
        let mut kernel = vec![Complex::new(T::zero(), T::zero()); m_len];
        let center = filter.group_delay() as isize;
        for (k, &h) in filter.taps().iter().enumerate() {
            let idx = (k as isize - center).rem_euclid(m_len as isize) as usize;
            kernel[idx].re = kernel[idx].re + h;
        }
        fft_out.process(&mut kernel);
        let inv_m = T::one() / T::from_usize_lossy(m_len);
        kernel.iter_mut().for_each(|v| *v = *v * inv_m);

        Ok(Self {
            cfg: *cfg,
            sample_rate,
            period,
            max_periods,
            template_conj,
            filter_response: kernel,
            fft_period,
            ifft_period,
            fft_out,
            ifft_out,
        })
    }

    /// Code periods averaged when the input holds a full dilated period.
    pub fn periods_per_dilated_period(&self) -> usize {
        self.max_periods
    }

    /// Adds the output of the sliding mixer driven by white input noise of
    /// `input_variance` per sample.
    ///
    /// Multiplying white Gaussian noise by a +-1 code leaves it white, so the
    /// mixer output noise is white at density `input_variance / fs` shaped by
    /// the lowpass filter. It is synthesized here directly at the output
    /// rate with the same filter.
    pub fn add_receiver_noise(&self, cir: &mut DilatedCir<T>, input_variance: f64, seed: u64) {
        let m_len = cir.len();
        if input_variance <= 0.0 || m_len != self.cfg.output_len() {
            return;
        }
        let v = input_variance * (self.cfg.output_rate() / self.sample_rate).as_f64();
        let mut noise = vec![Complex::new(T::zero(), T::zero()); m_len];
        crate::channel::add_awgn(&mut noise, v, seed);
        self.fft_out.process(&mut noise);
        for (n, h) in noise.iter_mut().zip(&self.filter_response) {
            *n = *n * *h;
        }
        self.ifft_out.process(&mut noise);
        for (k, n) in noise.into_iter().enumerate() {
            cir.i_channel[k] = cir.i_channel[k] + n.re;
            cir.q_channel[k] = cir.q_channel[k] + n.im;
        }
    }

    pub fn correlate(&self, rx: &SampledWaveform<T>) -> Result<DilatedCir<T>> {
        if (rx.sample_rate - self.sample_rate).abs() > self.sample_rate * T::lit(1e-12) {
            return Err(SounderError::InvalidCorrelator(format!(
                "correlator built for {} Hz, input at {} Hz",
                self.sample_rate, rx.sample_rate
            )));
        }
        let p = self.period;
        if rx.len() < p {
            return Err(SounderError::InsufficientInput {
                needed: p,
                got: rx.len(),
            });
        }
        let periods = (rx.len() / p).min(self.max_periods);
        let len = rx.len();
        let trig = rx.trigger_index;
        let mut buf = vec![Complex::new(T::zero(), T::zero()); p];
        for k in 0..periods {
            for (j, f) in buf.iter_mut().enumerate() {
                *f = *f + rx.samples[(trig + k * p + j) % len];
            }
        }
        let inv_k = T::one() / T::from_usize_lossy(periods);
        self.fft_period.process(&mut buf);
        for (v, t) in buf.iter_mut().zip(&self.template_conj) {
            *v = *v * *t * inv_k;
        }
        self.ifft_period.process(&mut buf);

        let m_len = self.cfg.output_len();
        let step = T::from_usize_lossy(p) / T::from_usize_lossy(m_len);
        let mut out: Vec<Complex<T>> = (0..m_len)
            .map(|m| {
                let lag = T::from_usize_lossy(m) * step;
                let i0 = lag.floor();
                let frac = lag - i0;
                let i0 = i0.to_usize().unwrap_or(0) % p;
                buf[i0] * (T::one() - frac) + buf[(i0 + 1) % p] * frac
            })
            .collect();
        self.fft_out.process(&mut out);
        for (v, h) in out.iter_mut().zip(&self.filter_response) {
            *v = *v * *h;
        }
        self.ifft_out.process(&mut out);
        Ok(DilatedCir::from_complex(&self.cfg, out))
    }
}

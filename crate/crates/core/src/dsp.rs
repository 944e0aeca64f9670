//! Filter design and FFT helpers shared by the waveform and correlator code.

use num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Result, SounderError};
use crate::scalar::Real;

/// Stopband attenuation the Kaiser design targets, dB.
pub const STOPBAND_ATTENUATION_DB: f64 = 60.0;

/// Linear-phase windowed-sinc lowpass with an odd tap count.
///
/// `cutoff` is the -6 dB point. The transition band is centered on it and is
/// `min(cutoff, nyquist - cutoff)` wide, so the stopband edge never exceeds
/// 1.5x the cutoff.
#[derive(Debug, Clone, PartialEq)]
pub struct FirLowpass<T> {
    taps: Vec<T>,
    cutoff: T,
    sample_rate: T,
}

impl<T: Real> FirLowpass<T> {
    pub fn design(cutoff: T, sample_rate: T) -> Result<Self> {
        let fc = cutoff.as_f64();
        let fs = sample_rate.as_f64();
        let nyquist = fs / 2.0;
        if !(fc > 0.0 && fc < nyquist) || !fs.is_finite() {
            return Err(SounderError::CutoffOutOfRange { cutoff: fc, nyquist });
        }
        let transition = fc.min(nyquist - fc);
        let dw = 2.0 * std::f64::consts::PI * transition / fs;
        let a = STOPBAND_ATTENUATION_DB;
        let beta = 0.1102 * (a - 8.7);
        let mut len = ((a - 7.95) / (2.285 * dw)).ceil() as usize + 1;
        if len.is_multiple_of(2) {
            len += 1;
        }
        let center = (len - 1) as f64 / 2.0;
        let norm = 2.0 * fc / fs;
        let i0_beta = bessel_i0(beta);
        let mut taps: Vec<f64> = (0..len)
            .map(|k| {
                let x = k as f64 - center;
                let r = if center > 0.0 { x / center } else { 0.0 };
                let window = bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / i0_beta;
                norm * sinc(norm * x) * window
            })
            .collect();
        let dc: f64 = taps.iter().sum();
        taps.iter_mut().for_each(|t| *t /= dc);
        Ok(Self {
            taps: taps.into_iter().map(T::lit).collect(),
            cutoff,
            sample_rate,
        })
    }

    pub fn taps(&self) -> &[T] {
        &self.taps
    }

    pub fn cutoff(&self) -> T {
        self.cutoff
    }

    pub fn sample_rate(&self) -> T {
        self.sample_rate
    }

    pub fn group_delay(&self) -> usize {
        (self.taps.len() - 1) / 2
    }

    /// Equivalent noise bandwidth for complex white noise, Hz (two-sided).
    pub fn noise_bandwidth(&self) -> T {
        self.sample_rate * self.taps.iter().map(|&h| h * h).sum::<T>()
    }

    /// Magnitude response at `freq` in dB relative to DC.
    pub fn response_db(&self, freq: T) -> T {
        let w = T::lit(2.0) * T::PI() * freq / self.sample_rate;
        let center = T::from_usize_lossy(self.group_delay());
        let (mut re, mut im) = (T::zero(), T::zero());
        for (k, &h) in self.taps.iter().enumerate() {
            let phase = w * (T::from_usize_lossy(k) - center);
            re = re + h * phase.cos();
            im = im - h * phase.sin();
        }
        T::lit(10.0) * (re * re + im * im).log10()
    }

    /// Zero-phase circular filtering of a periodic signal.
    pub fn filter_circular(&self, x: &[Complex<T>]) -> Vec<Complex<T>> {
        circular_convolve_centered(x, &self.taps, self.group_delay())
    }
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Modified Bessel function of the first kind, order zero.
pub fn bessel_i0(x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..500 {
        term *= (half / k as f64).powi(2);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// `y[n] = sum_k h[k] x[(n + center - k) mod N]`, evaluated with FFTs.
///
/// Filters longer than the signal wrap around, which is the right behavior
/// for a periodic input.
pub fn circular_convolve_centered<T: Real>(x: &[Complex<T>], taps: &[T], center: usize) -> Vec<Complex<T>> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let mut kernel = vec![Complex::new(T::zero(), T::zero()); n];
    for (k, &h) in taps.iter().enumerate() {
        let idx = (k as isize - center as isize).rem_euclid(n as isize) as usize;
        kernel[idx].re = kernel[idx].re + h;
    }
    let mut planner = FftPlanner::<T>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut xs = x.to_vec();
    fwd.process(&mut xs);
    fwd.process(&mut kernel);
    for (a, b) in xs.iter_mut().zip(&kernel) {
        *a = *a * *b;
    }
    inv.process(&mut xs);
    let scale = T::one() / T::from_usize_lossy(n);
    xs.iter_mut().for_each(|v| *v = *v * scale);
    xs
}

/// Cyclic cross-correlation `r[l] = sum_n a[n] * conj(b[(n - l) mod N])`.
pub fn cyclic_xcorr<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> Vec<Complex<T>> {
    assert_eq!(a.len(), b.len(), "cyclic_xcorr needs equal lengths");
    let n = a.len();
    let mut planner = FftPlanner::<T>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut fa = a.to_vec();
    let mut fb = b.to_vec();
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x = *x * y.conj();
    }
    inv.process(&mut fa);
    let scale = T::one() / T::from_usize_lossy(n);
    fa.iter_mut().for_each(|v| *v = *v * scale);
    fa
}

/// Circularly delays `x` by a fractional number of samples (band-limited
/// interpolation via a linear phase ramp).
pub fn fractional_delay<T: Real>(x: &[Complex<T>], delay_samples: T) -> Vec<Complex<T>> {
    let n = x.len();
    if n == 0 || delay_samples == T::zero() {
        return x.to_vec();
    }
    let mut planner = FftPlanner::<T>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut xs = x.to_vec();
    fwd.process(&mut xs);
    let nf = T::from_usize_lossy(n);
    for (k, v) in xs.iter_mut().enumerate() {
        // signed frequency index; the Nyquist bin of even lengths is split
        // evenly so real inputs stay real
        let kk = if k <= n / 2 {
            k as isize
        } else {
            k as isize - n as isize
        };
        let phase = -T::lit(2.0) * T::PI() * T::from_isize(kk).unwrap() * delay_samples / nf;
        let rot = if n.is_multiple_of(2) && k == n / 2 {
            Complex::new(phase.cos(), T::zero())
        } else {
            Complex::new(phase.cos(), phase.sin())
        };
        *v = *v * rot * (T::one() / nf);
    }
    inv.process(&mut xs);
    xs
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bessel_matches_tabulated_values() {
        assert!((bessel_i0(0.0) - 1.0).abs() < 1e-15);
        assert!((bessel_i0(1.0) - 1.266_065_877_752_008_4).abs() < 1e-12);
        assert!((bessel_i0(5.0) - 27.239_871_823_604_44).abs() < 1e-9);
    }

    #[test]
    fn design_meets_ripple_and_stopband() {
        for (fc, fs) in [(0.1, 1.0), (600e6, 2e9), (31_250.0, 4e6), (0.4, 1.0)] {
            let f = FirLowpass::<f64>::design(fc, fs).unwrap();
            assert_eq!(f.taps().len() % 2, 1);
            let tw = fc.min(fs / 2.0 - fc);
            for i in 0..=20 {
                let p = (fc - tw / 2.0) * i as f64 / 20.0;
                assert!(f.response_db(p).abs() < 0.5, "passband at {p}");
            }
            for i in 0..=20 {
                let s = fc + tw / 2.0 + (fs / 2.0 - fc - tw / 2.0) * i as f64 / 20.0;
                assert!(f.response_db(s) < -40.0, "stopband at {s}: {}", f.response_db(s));
            }
        }
    }

    #[test]
    fn cutoff_range_checked() {
        assert!(FirLowpass::<f64>::design(0.0, 1.0).is_err());
        assert!(FirLowpass::<f64>::design(0.5, 1.0).is_err());
        assert!(FirLowpass::<f32>::design(0.2, 1.0).is_ok());
    }

    #[test]
    fn circular_convolution_matches_direct_sum() {
        let x: Vec<Complex<f64>> = (0..11)
            .map(|k| Complex::new((k as f64).sin(), (k as f64 * 0.3).cos()))
            .collect();
        let h = [0.25, 0.5, 0.125, 0.125, 0.3];
        let y = circular_convolve_centered(&x, &h, 2);
        for n in 0..x.len() {
            let mut acc = Complex::new(0.0, 0.0);
            for (k, &hk) in h.iter().enumerate() {
                acc += x[(n + 2 + x.len() - k) % x.len()] * hk;
            }
            assert!((acc - y[n]).norm() < 1e-12);
        }
    }

    #[test]
    fn xcorr_finds_shift() {
        let a: Vec<Complex<f64>> = (0..16).map(|k| Complex::new(((k * 7) % 5) as f64, 0.0)).collect();
        let shifted: Vec<_> = (0..16).map(|n| a[(n + 16 - 3) % 16]).collect();
        let r = cyclic_xcorr(&shifted, &a);
        let best = (0..16).max_by(|&i, &j| r[i].re.partial_cmp(&r[j].re).unwrap()).unwrap();
        assert_eq!(best, 3);
    }

    #[test]
    fn integer_fractional_delay_is_a_rotation() {
        let x: Vec<Complex<f64>> = (0..12).map(|k| Complex::new(k as f64, -(k as f64))).collect();
        let y = fractional_delay(&x, 5.0);
        for n in 0..12 {
            assert!((y[n] - x[(n + 12 - 5) % 12]).norm() < 1e-9);
        }
    }
}

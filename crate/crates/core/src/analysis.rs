//! Reductions over completed sweeps: omnidirectional power, path loss,
//! close-in model fits, local statistics, fading rate and link budget.

use serde::{Deserialize, Serialize};

use crate::channel::fspl;
use crate::error::{Result, SounderError};
use crate::scalar::{db_to_power, power_to_db, Real, THERMAL_NOISE_DBM_HZ};
use crate::sweep::SweepSet;

/// Power written for angles without a detectable signal, dBm.
pub const ABSENT_POWER_DBM: f64 = -200.0;

/// Close-in model reference distance, meters.
pub const CI_REFERENCE_DISTANCE_M: f64 = 1.0;

/// Linear sum of per-angle best powers, dBm.
pub fn omni_power<T: Real>(ss: &SweepSet<T>) -> Result<T> {
    sum_dbm(ss.records.iter().filter_map(|r| r.best_power_dbm))
}

/// Linear power sum of dBm values; empty input has no power.
pub fn sum_dbm<T: Real>(values: impl IntoIterator<Item = T>) -> Result<T> {
    let mut any = false;
    let mut total = T::zero();
    for v in values {
        any = true;
        total = total + db_to_power(v);
    }
    if !any {
        return Err(SounderError::NoSignal);
    }
    Ok(power_to_db(total))
}

/// Isotropic path loss with the antenna gains removed, dB.
pub fn path_loss<T: Real>(omni_dbm: T, tx_power_dbm: T, tx_gain_dbi: T, rx_gain_dbi: T) -> T {
    tx_power_dbm + tx_gain_dbi + rx_gain_dbi - omni_dbm
}

pub fn eirp<T: Real>(tx_power_dbm: T, tx_gain_dbi: T) -> T {
    tx_power_dbm + tx_gain_dbi
}

/// Fitted close-in path loss model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CiFit {
    pub ple: f64,
    pub sigma_db: f64,
    pub d0_m: f64,
    pub frequency_hz: f64,
    pub point_count: usize,
}

impl CiFit {
    /// Model path loss at `distance_m`, dB.
    pub fn predict(&self, distance_m: f64) -> f64 {
        fspl(self.d0_m, self.frequency_hz) + 10.0 * self.ple * (distance_m / self.d0_m).log10()
    }
}

/// Least-squares exponent of `PL(d) = FSPL(1 m) + 10 n log10(d)`.
/// `sigma_db` is the RMS residual about the fitted line.
pub fn ci_fit<T: Real>(points: &[(T, T)], frequency_hz: T) -> Result<CiFit> {
    if points.len() < 2 {
        return Err(SounderError::InsufficientData(format!(
            "close-in fit needs at least 2 points, got {}",
            points.len()
        )));
    }
    let f = frequency_hz.as_f64();
    let anchor = fspl(CI_REFERENCE_DISTANCE_M, f);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for &(d, pl) in points {
        let d = d.as_f64();
        if !(d > CI_REFERENCE_DISTANCE_M) {
            return Err(SounderError::InvalidParameter(format!(
                "distance {d} m not beyond the 1 m reference"
            )));
        }
        let x = 10.0 * d.log10();
        sxy += (pl.as_f64() - anchor) * x;
        sxx += x * x;
    }
    let first = points[0].0;
    if points.iter().all(|p| p.0 == first) {
        return Err(SounderError::IllConditioned("all points share one distance".into()));
    }
    let ple = sxy / sxx;
    let ss: f64 = points
        .iter()
        .map(|&(d, pl)| {
            let r = pl.as_f64() - anchor - ple * 10.0 * d.as_f64().log10();
            r * r
        })
        .sum();
    Ok(CiFit {
        ple,
        sigma_db: (ss / points.len() as f64).sqrt(),
        d0_m: CI_REFERENCE_DISTANCE_M,
        frequency_hz: f,
        point_count: points.len(),
    })
}

/// Sample standard deviation (n - 1 denominator) of dB values.
pub fn local_power_std<T: Real>(powers_dbm: &[T]) -> Result<T> {
    if powers_dbm.len() < 2 {
        return Err(SounderError::InsufficientData(
            "standard deviation needs at least 2 values".into(),
        ));
    }
    let n = T::from_usize_lossy(powers_dbm.len());
    let mean = powers_dbm.iter().copied().sum::<T>() / n;
    let ss: T = powers_dbm.iter().map(|&p| (p - mean) * (p - mean)).sum();
    Ok((ss / (n - T::one())).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FadingRate {
    pub db_per_m: f64,
    pub db_per_s: f64,
    /// Route positions bounding the steepest falling run, meters.
    pub start_m: f64,
    pub end_m: f64,
}

/// Average loss rate over the falling run with the largest total drop.
///
/// Positions must increase strictly. A route that never falls gives zero.
pub fn fading_rate<T: Real>(route: &[(T, T)], speed_mps: T) -> Result<FadingRate> {
    if route.len() < 2 {
        return Err(SounderError::InsufficientData(
            "fading rate needs at least 2 route points".into(),
        ));
    }
    if route.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(SounderError::InvalidParameter(
            "route positions must increase strictly".into(),
        ));
    }
    let mut best: Option<(usize, usize, f64)> = None;
    let mut start = 0;
    for k in 1..=route.len() {
        let falling = k < route.len() && route[k].1 < route[k - 1].1;
        if !falling {
            if k - 1 > start {
                let drop = (route[start].1 - route[k - 1].1).as_f64();
                if best.is_none_or(|b| drop > b.2) {
                    best = Some((start, k - 1, drop));
                }
            }
            start = k;
        }
    }
    let speed = speed_mps.as_f64();
    Ok(match best {
        Some((a, b, drop)) => {
            let run = (route[b].0 - route[a].0).as_f64();
            let db_per_m = drop / run;
            FadingRate {
                db_per_m,
                db_per_s: db_per_m * speed,
                start_m: route[a].0.as_f64(),
                end_m: route[b].0.as_f64(),
            }
        }
        None => FadingRate {
            db_per_m: 0.0,
            db_per_s: 0.0,
            start_m: route[0].0.as_f64(),
            end_m: route[0].0.as_f64(),
        },
    })
}

/// Noise-variance improvement from averaging `n` independent profiles, dB.
pub fn averaging_gain_db(n: usize) -> f64 {
    10.0 * (n as f64).sqrt().log10()
}

/// Thermal floor with a noise figure over `bandwidth_hz`, dBm.
pub fn noise_floor_dbm(noise_figure_db: f64, bandwidth_hz: f64) -> f64 {
    THERMAL_NOISE_DBM_HZ + noise_figure_db + 10.0 * bandwidth_hz.log10()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    pub tx_power_dbm: f64,
    pub tx_gain_dbi: f64,
    pub rx_gain_dbi: f64,
    pub processing_gain_db: f64,
    pub averaging_gain_db: f64,
    pub noise_floor_dbm: f64,
    pub snr_threshold_db: f64,
}

impl LinkBudget {
    /// 14.6 dBm into two 27 dBi horns, slide factor 8000, 20 averages, 5 dB
    /// noise figure over a 62.5 kHz compressed bandwidth, 5 dB SNR.
    pub fn reference() -> Self {
        Self {
            tx_power_dbm: 14.6,
            tx_gain_dbi: 27.0,
            rx_gain_dbi: 27.0,
            processing_gain_db: crate::correlator::processing_gain(8000.0),
            averaging_gain_db: averaging_gain_db(20),
            noise_floor_dbm: noise_floor_dbm(5.0, 62.5e3),
            snr_threshold_db: 5.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let v = [
            self.tx_power_dbm,
            self.tx_gain_dbi,
            self.rx_gain_dbi,
            self.processing_gain_db,
            self.averaging_gain_db,
            self.noise_floor_dbm,
            self.snr_threshold_db,
        ];
        if v.iter().all(|x| x.is_finite()) {
            Ok(())
        } else {
            Err(SounderError::InvalidParameter(
                "link budget terms must be finite".into(),
            ))
        }
    }
}

/// Largest path loss that still leaves the SNR threshold, dB.
pub fn max_measurable_path_loss(lb: &LinkBudget) -> f64 {
    lb.tx_power_dbm + lb.tx_gain_dbi + lb.rx_gain_dbi + lb.processing_gain_db + lb.averaging_gain_db
        - (lb.noise_floor_dbm + lb.snr_threshold_db)
}

/// `(azimuth, best power)` per grid angle, absent angles at
/// [`ABSENT_POWER_DBM`], ordered by azimuth.
pub fn angular_spectrum<T: Real>(ss: &SweepSet<T>) -> Vec<(f64, f64)> {
    let mut rows: Vec<(f64, f64)> = ss
        .records
        .iter()
        .map(|r| {
            (
                r.rx_azimuth,
                r.best_power_dbm.map(|p| p.as_f64()).unwrap_or(ABSENT_POWER_DBM),
            )
        })
        .collect();
    rows.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite azimuth"));
    rows
}

/// Indices of circular spectrum peaks whose prominence is at least
/// `min_prominence_db`, ignoring sentinel rows.
///
/// Prominence is the drop from a peak to the highest saddle separating it
/// from any higher peak (or to the global minimum for the highest peak).
/// Equal peaks are ranked by index.
pub fn spectrum_lobes(spectrum: &[(f64, f64)], min_prominence_db: f64) -> Vec<usize> {
    let n = spectrum.len();
    let p: Vec<f64> = spectrum.iter().map(|r| r.1).collect();
    let higher = |j: usize, i: usize| p[j] > p[i] || (p[j] == p[i] && j < i);
    let floor = p.iter().copied().fold(f64::INFINITY, f64::min);
    (0..n)
        .filter(|&i| p[i] > ABSENT_POWER_DBM)
        .filter(|&i| {
            if n < 3 {
                return (0..n).all(|j| j == i || !higher(j, i));
            }
            let prev = p[(i + n - 1) % n];
            let next = p[(i + 1) % n];
            if !(p[i] > prev && p[i] >= next) {
                return false;
            }
            // lowest point on the way to a higher peak, each direction
            let walk = |step: usize| -> Option<f64> {
                let mut low = p[i];
                for k in 1..n {
                    let j = (i + k * step) % n;
                    if higher(j, i) {
                        return Some(low);
                    }
                    low = low.min(p[j]);
                }
                None
            };
            let saddle = match (walk(1), walk(n - 1)) {
                (Some(a), Some(b)) => a.max(b),
                (Some(a), None) | (None, Some(a)) => a,
                (None, None) => floor,
            };
            p[i] - saddle >= min_prominence_db
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lobes_by_prominence() {
        let spec: Vec<(f64, f64)> = [-60.0, -40.0, -61.0, -59.5, -60.0, -50.0, -70.0, -200.0]
            .iter()
            .enumerate()
            .map(|(k, &p)| (45.0 * k as f64, p))
            .collect();
        assert_eq!(spectrum_lobes(&spec, 0.0), vec![1, 3, 5]);
        assert_eq!(spectrum_lobes(&spec, 6.0), vec![1, 5]);
        assert_eq!(spectrum_lobes(&spec, 15.0), vec![1]);
        let absent = vec![(0.0, ABSENT_POWER_DBM); 4];
        assert!(spectrum_lobes(&absent, 0.0).is_empty());
    }

    #[test]
    fn power_sums() {
        assert!((sum_dbm([-70.0_f64]).unwrap() + 70.0).abs() < 1e-12);
        assert!((sum_dbm([-70.0_f64, -70.0]).unwrap() + 66.9897).abs() < 1e-4);
        assert!(matches!(sum_dbm(Vec::<f64>::new()), Err(SounderError::NoSignal)));
    }

    #[test]
    fn path_loss_arithmetic() {
        assert!((path_loss(-40.0, 14.6, 27.0, 20.0) - 101.6_f64).abs() < 1e-12);
        assert_eq!(path_loss(10.0, 10.0, 0.0, 0.0), 0.0_f64);
        assert_eq!(eirp(14.6, 27.0), 41.6_f64);
    }

    #[test]
    fn ci_free_space_and_errors() {
        let f = 73.5e9;
        let pts: Vec<(f64, f64)> = [2.0, 5.0, 30.0].iter().map(|&d| (d, fspl(d, f))).collect();
        let fit = ci_fit(&pts, f).unwrap();
        assert!((fit.ple - 2.0).abs() < 1e-12 && fit.sigma_db < 1e-9);
        assert!(matches!(
            ci_fit(&[(10.0, 100.0), (10.0, 101.0)], f),
            Err(SounderError::IllConditioned(_))
        ));
        assert!(ci_fit(&[(10.0, 100.0)], f).is_err());
        assert!(ci_fit(&[(0.5, 60.0), (10.0, 100.0)], f).is_err());
        assert!((fit.predict(10.0) - fspl(10.0, f)).abs() < 1e-9);
    }

    #[test]
    fn std_values() {
        assert_eq!(local_power_std(&[-70.0, -70.0, -70.0]).unwrap(), 0.0);
        assert!((local_power_std(&[-70.0_f64, -72.0]).unwrap() - 2f64.sqrt()).abs() < 1e-12);
        assert!(local_power_std(&[1.0]).is_err());
    }

    #[test]
    fn fading_rates() {
        let route = [(0.0, -60.0), (10.0, -60.0), (20.0, -72.5), (30.0, -85.0), (40.0, -84.0)];
        let r = fading_rate(&route, 35.0).unwrap();
        assert_eq!(r.db_per_m, 1.25);
        assert_eq!(r.db_per_s, 43.75);
        assert_eq!((r.start_m, r.end_m), (10.0, 30.0));
        let flat = fading_rate(&[(0.0, -60.0), (5.0, -60.0)], 35.0).unwrap();
        assert_eq!(flat.db_per_m, 0.0);
        assert!(fading_rate(&[(5.0, -60.0), (5.0, -61.0)], 1.0).is_err());
    }

    #[test]
    fn budget_linearity() {
        let lb = LinkBudget {
            tx_power_dbm: 10.0,
            tx_gain_dbi: 0.0,
            rx_gain_dbi: 0.0,
            processing_gain_db: 0.0,
            averaging_gain_db: 0.0,
            noise_floor_dbm: -100.0,
            snr_threshold_db: 0.0,
        };
        assert_eq!(max_measurable_path_loss(&lb), 110.0);
        let hotter = LinkBudget {
            tx_power_dbm: 20.0,
            ..lb
        };
        assert_eq!(max_measurable_path_loss(&hotter), 120.0);
        assert!((averaging_gain_db(20) - 6.505).abs() < 1e-3);
    }
}

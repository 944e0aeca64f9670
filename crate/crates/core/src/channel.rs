//! Multipath channel construction and application.
//!
//! Paths come from a small deterministic ray model: the direct ray when no
//! building blocks it, one image-method specular ray per reflector, and one
//! knife-edge ray per wedge when the direct ray is blocked.

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SounderError};
use crate::geometry::{self, Point};
use crate::scalar::{db_to_amplitude, db_to_power, Real, SPEED_OF_LIGHT};
use crate::scenario::{AntennaSpec, ScenarioConfig};
use crate::waveform::SampledWaveform;

/// Depth of the sidelobe floor below boresight, dB.
pub const SIDELOBE_DEPTH_DB: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interaction {
    Direct,
    Reflection,
    Diffraction,
}

impl Interaction {
    /// Phase added by the interaction, radians.
    pub fn phase(self) -> f64 {
        match self {
            Interaction::Direct => 0.0,
            Interaction::Reflection => std::f64::consts::PI,
            Interaction::Diffraction => -std::f64::consts::FRAC_PI_4,
        }
    }
}

/// One propagation path. `gain` is a linear amplitude including spreading
/// and interaction losses; `phase` includes the carrier phase of the delay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathComponent<T> {
    pub delay: T,
    pub gain: T,
    pub phase: T,
    pub aod_az: T,
    pub aod_el: T,
    pub aoa_az: T,
    pub aoa_el: T,
    pub interaction: Interaction,
}

impl<T: Real> PathComponent<T> {
    pub fn loss_db(&self) -> T {
        -T::lit(20.0) * self.gain.log10()
    }
}

/// Paths sorted by delay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultipathChannel<T> {
    pub paths: Vec<PathComponent<T>>,
    pub carrier_frequency: T,
}

impl<T: Real> MultipathChannel<T> {
    pub fn new(mut paths: Vec<PathComponent<T>>, carrier_frequency: T) -> Self {
        paths.sort_by(|a, b| a.delay.partial_cmp(&b.delay).expect("finite delays"));
        Self {
            paths,
            carrier_frequency,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    /// Scales every path amplitude by `factor`.
    pub fn scaled(&self, factor: T) -> Self {
        let mut out = self.clone();
        out.paths.iter_mut().for_each(|p| p.gain = p.gain * factor);
        out
    }
}

/// Directional gain model, in dBi, as a function of compass azimuth and
/// elevation.
pub trait BeamPattern<T>: Send + Sync {
    fn gain_dbi(&self, az: T, el: T) -> T;
}

/// Gaussian mainlobe over a flat sidelobe floor.
///
/// Offsets of half a beamwidth in one axis cost exactly 3 dB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AntennaPattern<T> {
    pub boresight_gain: T,
    pub hpbw_az: T,
    pub hpbw_el: T,
    pub pointing_az: T,
    pub pointing_el: T,
}

impl<T: Real> AntennaPattern<T> {
    pub fn new(boresight_gain: T, hpbw_az: T, hpbw_el: T) -> Result<Self> {
        let max = T::lit(180.0);
        for h in [hpbw_az, hpbw_el] {
            if !(h > T::zero() && h < max) {
                return Err(SounderError::InvalidParameter(format!(
                    "beamwidth {h} deg outside (0, 180)"
                )));
            }
        }
        Ok(Self {
            boresight_gain,
            hpbw_az,
            hpbw_el,
            pointing_az: T::zero(),
            pointing_el: T::zero(),
        })
    }

    pub fn from_spec(spec: &AntennaSpec) -> Result<Self> {
        Self::new(
            T::lit(spec.gain_dbi),
            T::lit(spec.hpbw_az_deg),
            T::lit(spec.hpbw_el_deg),
        )
    }

    /// 27 dBi, 7 deg horn.
    pub fn tx_horn() -> Self {
        Self::from_spec(&AntennaSpec::TX_HORN).expect("valid preset")
    }

    /// 20 dBi, 15 deg horn.
    pub fn rx_horn() -> Self {
        Self::from_spec(&AntennaSpec::RX_HORN).expect("valid preset")
    }

    pub fn pointed(mut self, az: T, el: T) -> Self {
        self.pointing_az = az;
        self.pointing_el = el;
        self
    }

    pub fn sidelobe_level(&self) -> T {
        self.boresight_gain - T::lit(SIDELOBE_DEPTH_DB)
    }
}

impl<T: Real> BeamPattern<T> for AntennaPattern<T> {
    fn gain_dbi(&self, az: T, el: T) -> T {
        pattern_gain(self, az, el)
    }
}

/// Equal gain in every direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Isotropic<T>(pub T);

impl<T: Real> BeamPattern<T> for Isotropic<T> {
    fn gain_dbi(&self, _az: T, _el: T) -> T {
        self.0
    }
}

/// Free-space path loss, dB.
pub fn fspl<T: Real>(distance_m: T, freq_hz: T) -> T {
    let c = T::lit(SPEED_OF_LIGHT);
    T::lit(20.0) * (T::lit(4.0) * T::PI() * distance_m * freq_hz / c).log10()
}

pub fn pattern_gain<T: Real>(p: &AntennaPattern<T>, az: T, el: T) -> T {
    let daz = T::lit(geometry::az_difference(az.as_f64(), p.pointing_az.as_f64()));
    let del = el - p.pointing_el;
    let rolloff = T::lit(12.0) * ((daz / p.hpbw_az).powi(2) + (del / p.hpbw_el).powi(2));
    (p.boresight_gain - rolloff).max(p.sidelobe_level())
}

/// Fresnel-Kirchhoff parameter for an edge `clearance` meters into the path,
/// `d1` and `d2` meters from the ends.
pub fn fresnel_parameter<T: Real>(clearance: T, d1: T, d2: T, wavelength: T) -> T {
    clearance * (T::lit(2.0) * (d1 + d2) / (wavelength * d1 * d2)).sqrt()
}

/// Single knife-edge diffraction loss in dB (positive), piecewise
/// approximation of the Fresnel integral.
pub fn knife_edge_loss<T: Real>(nu: T) -> T {
    let l = |x: f64| -20.0 * x.log10();
    let v = nu.as_f64();
    let db = if v <= -1.0 {
        0.0
    } else if v <= 0.0 {
        l(0.5 - 0.62 * v)
    } else if v <= 1.0 {
        l(0.5 * (-0.95 * v).exp())
    } else if v <= 2.4 {
        l(0.4 - (0.1184 - (0.38 - 0.1 * v).powi(2)).sqrt())
    } else {
        l(0.225 / v)
    };
    T::lit(db)
}

struct Site {
    tx: Point,
    rx: Point,
    tx_h: f64,
    rx_h: f64,
}

impl Site {
    fn blocked(&self, sc: &ScenarioConfig, a: Point, b: Point) -> bool {
        sc.environment
            .buildings
            .iter()
            .any(|bld| geometry::segment_crosses_polygon(a, b, &bld.vertices))
    }

    /// Path over a horizontal route of `run` meters through `first`/`last`
    /// turning points.
    fn path<T: Real>(
        &self,
        fc: f64,
        run: f64,
        first: Point,
        last: Point,
        extra_loss_db: f64,
        interaction: Interaction,
    ) -> PathComponent<T> {
        let dz = self.rx_h - self.tx_h;
        let length = run.hypot(dz);
        let delay = length / SPEED_OF_LIGHT;
        let loss = fspl(length, fc) + extra_loss_db;
        let phase = interaction.phase() - 2.0 * std::f64::consts::PI * (fc * delay).fract();
        let wrapped = (phase + std::f64::consts::PI).rem_euclid(2.0 * std::f64::consts::PI) - std::f64::consts::PI;
        PathComponent {
            delay: T::lit(delay),
            gain: T::lit(db_to_amplitude(-loss)),
            phase: T::lit(wrapped),
            aod_az: T::lit(geometry::bearing_deg(self.tx, first)),
            aod_el: T::lit(geometry::elevation_deg(dz, run)),
            aoa_az: T::lit(geometry::bearing_deg(self.rx, last)),
            aoa_el: T::lit(geometry::elevation_deg(-dz, run)),
            interaction,
        }
    }
}

/// Builds the ray set between the TX and site `rx_index`.
///
/// An empty channel (every ray blocked) is returned with a warning rather
/// than an error.
pub fn synthesize_channel<T: Real>(sc: &ScenarioConfig, rx_index: usize) -> Result<MultipathChannel<T>> {
    let rx_site = sc.rx_site(rx_index)?;
    let site = Site {
        tx: sc.tx.position,
        rx: rx_site.position,
        tx_h: sc.tx.height_m,
        rx_h: sc.rx_height_m,
    };
    let fc = sc.carrier_hz;
    let wavelength = SPEED_OF_LIGHT / fc;
    let mut paths = Vec::new();

    let direct_blocked = site.blocked(sc, site.tx, site.rx);
    if !direct_blocked {
        let run = geometry::dist(site.tx, site.rx);
        paths.push(site.path(fc, run, site.rx, site.tx, 0.0, Interaction::Direct));
    }

    for refl in &sc.environment.reflectors {
        let (a, b) = (refl.start, refl.end);
        let s_tx = geometry::side(site.tx, a, b);
        if s_tx == 0.0 || s_tx != geometry::side(site.rx, a, b) {
            continue;
        }
        let image = geometry::reflect_point(site.tx, a, b);
        let Some((t, u)) = geometry::line_intersection(image, site.rx, a, b) else {
            continue;
        };
        if !(t > 0.0 && t < 1.0 && u > 0.0 && u < 1.0) {
            continue;
        }
        let hit = geometry::lerp(image, site.rx, t);
        if site.blocked(sc, site.tx, hit) || site.blocked(sc, hit, site.rx) {
            continue;
        }
        let run = geometry::dist(image, site.rx);
        paths.push(site.path(fc, run, hit, hit, refl.loss_db, Interaction::Reflection));
    }

    if direct_blocked {
        for wedge in &sc.environment.wedges {
            let w = wedge.position;
            if site.blocked(sc, site.tx, w) || site.blocked(sc, w, site.rx) {
                continue;
            }
            let d1 = geometry::dist(site.tx, w);
            let d2 = geometry::dist(w, site.rx);
            if d1 <= 0.0 || d2 <= 0.0 {
                continue;
            }
            let clearance = geometry::distance_to_line(w, site.tx, site.rx);
            let nu = fresnel_parameter(clearance, d1, d2, wavelength);
            let loss = knife_edge_loss(nu);
            paths.push(site.path(fc, d1 + d2, w, w, loss, Interaction::Diffraction));
        }
    }

    if paths.is_empty() {
        log::warn!("no propagation path reaches RX {}", rx_site.id);
    }
    Ok(MultipathChannel::new(paths, T::lit(fc)))
}

/// Complex white Gaussian noise at a stated density over the full sampled
/// bandwidth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AwgnSpec {
    pub psd_dbm_hz: f64,
    pub seed: u64,
}

impl AwgnSpec {
    /// Noise power per complex sample at `sample_rate`, mW.
    pub fn variance(&self, sample_rate: f64) -> f64 {
        db_to_power(self.psd_dbm_hz) * sample_rate
    }
}

/// Adds circular complex Gaussian noise of total variance `variance` per
/// sample, drawn from a ChaCha8 stream seeded with `seed`.
pub fn add_awgn<T: Real>(samples: &mut [Complex<T>], variance: f64, seed: u64) {
    if variance <= 0.0 {
        return;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigma = (variance / 2.0).sqrt();
    for s in samples.iter_mut() {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        *s = *s + Complex::new(T::lit(sigma * re), T::lit(sigma * im));
    }
}

/// Coefficient and integer sample delay of every path at `sample_rate`.
pub fn path_taps<T: Real>(
    ch: &MultipathChannel<T>,
    tx: &dyn BeamPattern<T>,
    rx: &dyn BeamPattern<T>,
    sample_rate: T,
) -> Vec<(usize, Complex<T>)> {
    ch.paths
        .iter()
        .map(|p| {
            let lag = (p.delay * sample_rate).round().to_usize().unwrap_or(usize::MAX);
            let g_db = tx.gain_dbi(p.aod_az, p.aod_el) + rx.gain_dbi(p.aoa_az, p.aoa_el);
            let amp = p.gain * db_to_amplitude(g_db);
            (lag, Complex::from_polar(amp, p.phase))
        })
        .collect()
}

/// Passes `w` through the channel seen by the two patterns and adds noise.
///
/// Delays round to the nearest sample and wrap circularly within the buffer,
/// which must hold whole code periods; the path phase carries the carrier
/// term of the exact delay.
pub fn apply_channel<T: Real>(
    w: &SampledWaveform<T>,
    ch: &MultipathChannel<T>,
    tx: &dyn BeamPattern<T>,
    rx: &dyn BeamPattern<T>,
    noise: Option<AwgnSpec>,
) -> Result<SampledWaveform<T>> {
    let n = w.len();
    let taps = path_taps(ch, tx, rx, w.sample_rate);
    let mut out = vec![Complex::new(T::zero(), T::zero()); n];
    for &(lag, coef) in &taps {
        if lag >= w.period_len {
            return Err(SounderError::DelayAmbiguity {
                delay_samples: lag,
                period_samples: w.period_len,
            });
        }
        let lag = lag % n.max(1);
        for (i, o) in out.iter_mut().enumerate() {
            *o = *o + coef * w.samples[(i + n - lag) % n];
        }
    }
    if let Some(spec) = noise {
        add_awgn(&mut out, spec.variance(w.sample_rate.as_f64()), spec.seed);
    }
    Ok(w.with_samples(out))
}

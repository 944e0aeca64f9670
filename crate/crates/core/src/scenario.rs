//! Scenario description: site geometry, antennas, receiver sites and noise.
//!
//! Scenarios are TOML documents. Unknown keys are rejected and omitted keys
//! take the defaults below. Positions are 2D `[x, y]` in meters (x east,
//! y north); heights are carried separately. Azimuths are compass bearings in
//! degrees (0 = north, clockwise); elevations are degrees above horizontal.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SounderError};

pub const DEFAULT_CARRIER_HZ: f64 = 73.5e9;
pub const DEFAULT_TX_HEIGHT_M: f64 = 4.0;
pub const DEFAULT_RX_HEIGHT_M: f64 = 1.5;
pub const DEFAULT_TX_POWER_DBM: f64 = 14.6;
pub const DEFAULT_NOISE_FIGURE_DB: f64 = 5.0;

/// Boresight gain and half-power beamwidths of a horn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AntennaSpec {
    pub gain_dbi: f64,
    pub hpbw_az_deg: f64,
    pub hpbw_el_deg: f64,
}

impl AntennaSpec {
    pub const TX_HORN: Self = Self {
        gain_dbi: 27.0,
        hpbw_az_deg: 7.0,
        hpbw_el_deg: 7.0,
    };
    pub const RX_HORN: Self = Self {
        gain_dbi: 20.0,
        hpbw_az_deg: 15.0,
        hpbw_el_deg: 15.0,
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pointing {
    pub az_deg: f64,
    #[serde(default)]
    pub el_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TxConfig {
    pub position: [f64; 2],
    #[serde(default = "default_tx_height")]
    pub height_m: f64,
    #[serde(default = "default_tx_power")]
    pub power_dbm: f64,
    pub pointing: Pointing,
    #[serde(default = "default_tx_antenna")]
    pub antenna: AntennaSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    Los,
    Nlos,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Condition::Los => "LOS",
            Condition::Nlos => "NLOS",
        })
    }
}

/// One receiver location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RxSite {
    pub id: String,
    pub position: [f64; 2],
    pub condition: Condition,
    /// Cluster name; sites sharing a group are analysed together.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    /// Distance along the measurement route, meters.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub route_position_m: Option<f64>,
    /// Overrides the scenario TX pointing for this site.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tx_pointing: Option<Pointing>,
    /// Overrides the scenario RX elevation for this site.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rx_elevation_deg: Option<f64>,
}

/// Opaque footprint; blocks any ray crossing its outline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Building {
    #[serde(default)]
    pub name: String,
    pub vertices: Vec<[f64; 2]>,
}

/// Vertical specular wall segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Reflector {
    #[serde(default)]
    pub name: String,
    pub start: [f64; 2],
    pub end: [f64; 2],
    pub loss_db: f64,
}

/// Vertical diffracting edge, such as a building corner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Wedge {
    #[serde(default)]
    pub name: String,
    pub position: [f64; 2],
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Environment {
    #[serde(default)]
    pub buildings: Vec<Building>,
    #[serde(default)]
    pub reflectors: Vec<Reflector>,
    #[serde(default)]
    pub wedges: Vec<Wedge>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default = "default_thermal")]
    pub thermal_psd_dbm_hz: f64,
    #[serde(default = "default_nf")]
    pub noise_figure_db: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            thermal_psd_dbm_hz: default_thermal(),
            noise_figure_db: default_nf(),
        }
    }
}

impl NoiseConfig {
    /// Input-referred noise density, dBm/Hz.
    pub fn psd_dbm_hz(&self) -> f64 {
        self.thermal_psd_dbm_hz + self.noise_figure_db
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    #[serde(default = "default_carrier")]
    pub carrier_hz: f64,
    pub tx: TxConfig,
    #[serde(default = "default_rx_height")]
    pub rx_height_m: f64,
    #[serde(default)]
    pub rx_elevation_deg: f64,
    #[serde(default = "default_rx_antenna")]
    pub rx_antenna: AntennaSpec,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub environment: Environment,
    #[serde(default)]
    pub rx: Vec<RxSite>,
}

fn default_carrier() -> f64 {
    DEFAULT_CARRIER_HZ
}
fn default_tx_height() -> f64 {
    DEFAULT_TX_HEIGHT_M
}
fn default_rx_height() -> f64 {
    DEFAULT_RX_HEIGHT_M
}
fn default_tx_power() -> f64 {
    DEFAULT_TX_POWER_DBM
}
fn default_tx_antenna() -> AntennaSpec {
    AntennaSpec::TX_HORN
}
fn default_rx_antenna() -> AntennaSpec {
    AntennaSpec::RX_HORN
}
fn default_thermal() -> f64 {
    crate::scalar::THERMAL_NOISE_DBM_HZ
}
fn default_nf() -> f64 {
    DEFAULT_NOISE_FIGURE_DB
}

impl ScenarioConfig {
    pub fn rx_site(&self, index: usize) -> Result<&RxSite> {
        self.rx.get(index).ok_or_else(|| {
            SounderError::InvalidParameter(format!("RX index {index} out of range ({} sites)", self.rx.len()))
        })
    }

    pub fn tx_pointing_for(&self, site: &RxSite) -> Pointing {
        site.tx_pointing.unwrap_or(self.tx.pointing)
    }

    pub fn rx_elevation_for(&self, site: &RxSite) -> f64 {
        site.rx_elevation_deg.unwrap_or(self.rx_elevation_deg)
    }

    /// 3D T-R separation for site `index`, meters.
    pub fn separation_m(&self, index: usize) -> Result<f64> {
        let site = self.rx_site(index)?;
        let dx = site.position[0] - self.tx.position[0];
        let dy = site.position[1] - self.tx.position[1];
        let dz = self.rx_height_m - self.tx.height_m;
        Ok((dx * dx + dy * dy + dz * dz).sqrt())
    }

    /// Site indices grouped by `group` (sites without one share the empty
    /// name), in first-appearance order.
    pub fn groups(&self) -> Vec<(String, Vec<usize>)> {
        let mut out: Vec<(String, Vec<usize>)> = Vec::new();
        for (i, site) in self.rx.iter().enumerate() {
            let g = site.group.clone().unwrap_or_default();
            match out.iter_mut().find(|(name, _)| *name == g) {
                Some((_, v)) => v.push(i),
                None => out.push((g, vec![i])),
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |path: &str, message: String| {
            Err(SounderError::Config {
                path: path.to_string(),
                message,
            })
        };
        if !(self.carrier_hz.is_finite() && self.carrier_hz > 0.0) {
            return bad("carrier_hz", format!("must be positive, got {}", self.carrier_hz));
        }
        if !(self.tx.height_m > 0.0) {
            return bad("tx.height_m", format!("must be positive, got {}", self.tx.height_m));
        }
        if !(self.rx_height_m > 0.0) {
            return bad("rx_height_m", format!("must be positive, got {}", self.rx_height_m));
        }
        check_antenna("tx.antenna", &self.tx.antenna)?;
        check_antenna("rx_antenna", &self.rx_antenna)?;
        let finite = [
            self.tx.position[0],
            self.tx.position[1],
            self.tx.power_dbm,
            self.tx.pointing.az_deg,
            self.tx.pointing.el_deg,
            self.rx_elevation_deg,
            self.noise.thermal_psd_dbm_hz,
            self.noise.noise_figure_db,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return bad("tx", "non-finite value".into());
        }
        for (i, site) in self.rx.iter().enumerate() {
            let path = format!("rx[{i}]");
            if site.id.is_empty() {
                return bad(&path, "id must not be empty".into());
            }
            if self.rx[..i].iter().any(|s| s.id == site.id) {
                return bad(&path, format!("duplicate id {:?}", site.id));
            }
            if site.position.iter().any(|v| !v.is_finite()) {
                return bad(&path, "non-finite position".into());
            }
            let same_spot = site.position == self.tx.position && (self.rx_height_m - self.tx.height_m).abs() < 1e-12;
            if same_spot {
                return bad(&path, "RX coincides with TX".into());
            }
        }
        for (i, b) in self.environment.buildings.iter().enumerate() {
            if b.vertices.len() < 3 {
                return bad(
                    &format!("environment.buildings[{i}]"),
                    "needs at least 3 vertices".into(),
                );
            }
        }
        for (i, r) in self.environment.reflectors.iter().enumerate() {
            let path = format!("environment.reflectors[{i}]");
            if r.start == r.end {
                return bad(&path, "zero-length reflector".into());
            }
            if !(r.loss_db >= 0.0) {
                return bad(&path, format!("loss_db must be >= 0, got {}", r.loss_db));
            }
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| SounderError::Config {
            path: "<scenario>".into(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| SounderError::Config {
            path: "<scenario>".into(),
            message: e.to_string(),
        })
    }
}

fn check_antenna(path: &str, a: &AntennaSpec) -> Result<()> {
    for (name, v) in [("hpbw_az_deg", a.hpbw_az_deg), ("hpbw_el_deg", a.hpbw_el_deg)] {
        if !(v > 0.0 && v < 180.0) {
            return Err(SounderError::Config {
                path: format!("{path}.{name}"),
                message: format!("must lie in (0, 180), got {v}"),
            });
        }
    }
    if !a.gain_dbi.is_finite() {
        return Err(SounderError::Config {
            path: format!("{path}.gain_dbi"),
            message: "must be finite".into(),
        });
    }
    Ok(())
}

/// Reads and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| SounderError::io(path, e))?;
    ScenarioConfig::from_toml_str(&text).map_err(|e| match e {
        SounderError::Config { path: p, message } if p == "<scenario>" => SounderError::Config {
            path: path.display().to_string(),
            message,
        },
        SounderError::Config { path: p, message } => SounderError::Config {
            path: format!("{}: {p}", path.display()),
            message,
        },
        other => other,
    })
}

pub fn write_scenario(path: impl AsRef<Path>, cfg: &ScenarioConfig) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, cfg.to_toml_string()?).map_err(|e| SounderError::io(path, e))
}

/// The shipped route scenario: sixteen sites walking from a street into an
/// adjoining canyon, five with line of sight and eleven behind a corner.
pub fn shipped_route() -> ScenarioConfig {
    ScenarioConfig::from_toml_str(include_str!("../scenarios/route.toml")).expect("shipped route scenario is valid")
}

/// The shipped cluster scenario: two groups of five sites at 5 m spacing.
pub fn shipped_cluster() -> ScenarioConfig {
    ScenarioConfig::from_toml_str(include_str!("../scenarios/cluster.toml")).expect("shipped cluster scenario is valid")
}

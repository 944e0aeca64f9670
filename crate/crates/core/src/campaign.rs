//! Measurement campaigns over every RX site of a scenario, and the bundle
//! of analysis products they leave on disk.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{
    angular_spectrum, ci_fit, fading_rate, local_power_std, omni_power, path_loss, CiFit, FadingRate,
};
use crate::correlator::Preset;
use crate::error::{Result, SounderError};
use crate::io::{self, RouteRow};
use crate::scenario::{load_scenario, Condition, ScenarioConfig};
use crate::sweep::{run_sweep, CorrelatorKind, Sounder, SweepParams, SweepSet};

/// Receiver speed used to turn a spatial fading rate into a temporal one.
pub const DEFAULT_SPEED_MPS: f64 = 35.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CampaignKind {
    /// Ordered sites along a path; yields a route report and fading rate.
    Route,
    /// Grouped sites; yields per-group power spread.
    Cluster,
    /// One site.
    Single,
}

impl std::str::FromStr for CampaignKind {
    type Err = SounderError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "route" => Ok(Self::Route),
            "cluster" => Ok(Self::Cluster),
            "single" => Ok(Self::Single),
            other => Err(SounderError::InvalidParameter(format!(
                "unknown campaign kind {other:?} (expected route, cluster or single)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignSpec {
    pub scenario: PathBuf,
    pub kind: CampaignKind,
    pub step_deg: f64,
    pub sweeps: usize,
    pub preset: Preset,
    pub correlator: CorrelatorKind,
    /// Where to write products; `None` keeps everything in memory.
    pub out_dir: Option<PathBuf>,
    pub seed: u64,
    /// Site id for [`CampaignKind::Single`]; the first site when absent.
    pub rx: Option<String>,
    pub speed_mps: f64,
    /// Also write every averaged PDP as CSV.
    pub write_pdps: bool,
}

impl CampaignSpec {
    pub fn new(scenario: impl Into<PathBuf>, kind: CampaignKind) -> Self {
        Self {
            scenario: scenario.into(),
            kind,
            step_deg: 15.0,
            sweeps: 5,
            preset: Preset::Desk,
            correlator: CorrelatorKind::Fast,
            out_dir: None,
            seed: 0,
            rx: None,
            speed_mps: DEFAULT_SPEED_MPS,
            write_pdps: false,
        }
    }

    pub fn sweep_params(&self) -> SweepParams {
        SweepParams {
            step_deg: self.step_deg,
            sweeps: self.sweeps,
            seed: self.seed,
            ..SweepParams::default()
        }
    }
}

/// Everything needed to reproduce a bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    /// SHA-256 over the scenario contents and every spec field that
    /// affects results (paths excluded).
    pub config_hash: String,
    pub seed: u64,
    pub crate_version: String,
    pub scenario_name: String,
    pub kind: CampaignKind,
    pub preset: Preset,
    pub correlator: CorrelatorKind,
    pub step_deg: f64,
    pub sweeps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationResult {
    pub rx_id: String,
    pub condition: Condition,
    pub group: Option<String>,
    pub route_position_m: Option<f64>,
    pub distance_m: f64,
    /// `None` when no angle had a detectable signal.
    pub omni_dbm: Option<f64>,
    pub path_loss_db: Option<f64>,
    /// `(azimuth, best power)` per grid angle, sentinel for absent angles.
    pub spectrum: Vec<(f64, f64)>,
    pub pdp_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionFit {
    pub condition: Condition,
    pub fit: CiFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSpread {
    pub group: String,
    pub condition: Option<Condition>,
    pub sites: usize,
    pub std_db: f64,
}

/// Analysis products of a campaign. Raw sweeps stay in memory only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultBundle {
    pub manifest: RunManifest,
    pub locations: Vec<LocationResult>,
    /// Route campaigns only, ordered by position.
    pub route: Option<Vec<RouteRow>>,
    pub fits: Vec<ConditionFit>,
    pub fading: Option<FadingRate>,
    pub group_spreads: Vec<GroupSpread>,
    #[serde(skip)]
    pub sweeps: Vec<SweepSet<f64>>,
}

impl ResultBundle {
    pub fn fit_for(&self, condition: Condition) -> Option<&CiFit> {
        self.fits.iter().find(|f| f.condition == condition).map(|f| &f.fit)
    }

    /// Canonical JSON form; identical runs give identical bytes.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| SounderError::io(path, e))?;
        Self::from_json(&text)
    }
}

#[derive(Serialize)]
struct HashInput<'a> {
    scenario: &'a ScenarioConfig,
    kind: CampaignKind,
    step_deg: f64,
    sweeps: usize,
    preset: Preset,
    correlator: CorrelatorKind,
    seed: u64,
    rx: &'a Option<String>,
    speed_mps: f64,
    version: &'static str,
}

/// Hex SHA-256 identifying a spec applied to a scenario.
pub fn config_hash(spec: &CampaignSpec, scenario: &ScenarioConfig) -> Result<String> {
    let input = HashInput {
        scenario,
        kind: spec.kind,
        step_deg: spec.step_deg,
        sweeps: spec.sweeps,
        preset: spec.preset,
        correlator: spec.correlator,
        seed: spec.seed,
        rx: &spec.rx,
        speed_mps: spec.speed_mps,
        version: env!("CARGO_PKG_VERSION"),
    };
    let digest = Sha256::digest(serde_json::to_vec(&input)?);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

/// Loads `spec.scenario` and runs the campaign.
pub fn run_campaign(spec: &CampaignSpec) -> Result<ResultBundle> {
    let sc = load_scenario(&spec.scenario)?;
    run_campaign_on(spec, &sc)
}

fn site_indices(spec: &CampaignSpec, sc: &ScenarioConfig) -> Result<Vec<usize>> {
    let bad = |message: String| SounderError::Config {
        path: spec.scenario.display().to_string(),
        message,
    };
    match spec.kind {
        CampaignKind::Single => match &spec.rx {
            None => Ok(vec![0]),
            Some(id) => sc
                .rx
                .iter()
                .position(|s| &s.id == id)
                .map(|i| vec![i])
                .ok_or_else(|| bad(format!("no RX site with id {id:?}"))),
        },
        CampaignKind::Route => {
            if sc.rx.len() < 2 {
                return Err(bad("route campaign needs at least 2 RX sites".into()));
            }
            let mut idx: Vec<(f64, usize)> = Vec::with_capacity(sc.rx.len());
            for (i, s) in sc.rx.iter().enumerate() {
                let pos = s
                    .route_position_m
                    .ok_or_else(|| bad(format!("route site {} lacks route_position_m", s.id)))?;
                idx.push((pos, i));
            }
            idx.sort_by(|a, b| a.0.total_cmp(&b.0));
            if idx.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(bad("route positions must be distinct".into()));
            }
            Ok(idx.into_iter().map(|(_, i)| i).collect())
        }
        CampaignKind::Cluster => {
            if let Some(s) = sc.rx.iter().find(|s| s.group.is_none()) {
                return Err(bad(format!("cluster site {} has no group", s.id)));
            }
            let groups = sc.groups();
            if let Some((g, _)) = groups.iter().find(|(_, m)| m.len() < 2) {
                return Err(bad(format!("cluster group {g:?} needs at least 2 sites")));
            }
            Ok(groups.into_iter().flat_map(|(_, m)| m).collect())
        }
    }
}

/// Runs the campaign against an already loaded scenario.
pub fn run_campaign_on(spec: &CampaignSpec, sc: &ScenarioConfig) -> Result<ResultBundle> {
    sc.validate()?;
    let params = spec.sweep_params();
    params.angle_count()?;
    let indices = site_indices(spec, sc)?;
    let sounder = Sounder::<f64>::new(spec.preset, spec.correlator)?;

    let sweeps: Vec<SweepSet<f64>> = indices
        .par_iter()
        .map(|&i| {
            let ss = run_sweep(&sounder, sc, i, &params)?;
            log::info!("RX {} done ({} profiles)", ss.rx_id, ss.pdp_count());
            Ok(ss)
        })
        .collect::<Result<_>>()?;

    let tx_gain = sc.tx.antenna.gain_dbi;
    let rx_gain = sc.rx_antenna.gain_dbi;
    let mut locations = Vec::with_capacity(sweeps.len());
    for ss in &sweeps {
        let site = &sc.rx[ss.rx_index];
        let omni = match omni_power(ss) {
            Ok(p) => Some(p),
            Err(SounderError::NoSignal) => {
                log::warn!("RX {}: no angle had a detectable signal", site.id);
                None
            }
            Err(e) => return Err(e.context(format!("RX {}", site.id))),
        };
        locations.push(LocationResult {
            rx_id: site.id.clone(),
            condition: site.condition,
            group: site.group.clone(),
            route_position_m: site.route_position_m,
            distance_m: sc.separation_m(ss.rx_index)?,
            omni_dbm: omni,
            path_loss_db: omni.map(|p| path_loss(p, sc.tx.power_dbm, tx_gain, rx_gain)),
            spectrum: angular_spectrum(ss),
            pdp_count: ss.pdp_count(),
        });
    }

    let mut fits = Vec::new();
    for condition in [Condition::Los, Condition::Nlos] {
        let pts: Vec<(f64, f64)> = locations
            .iter()
            .filter(|l| l.condition == condition)
            .filter_map(|l| l.path_loss_db.map(|pl| (l.distance_m, pl)))
            .collect();
        if pts.len() < 2 {
            continue;
        }
        match ci_fit(&pts, sc.carrier_hz) {
            Ok(fit) => fits.push(ConditionFit { condition, fit }),
            Err(e @ SounderError::IllConditioned(_)) => log::warn!("{condition} fit skipped: {e}"),
            Err(e) => return Err(e.context(format!("{condition} fit"))),
        }
    }

    let (route, fading) = if spec.kind == CampaignKind::Route {
        let rows: Vec<RouteRow> = locations
            .iter()
            .filter_map(|l| {
                Some(RouteRow {
                    position_m: l.route_position_m?,
                    distance_m: l.distance_m,
                    omni_dbm: l.omni_dbm?,
                    path_loss_db: l.path_loss_db?,
                    los_flag: u8::from(l.condition == Condition::Los),
                })
            })
            .collect();
        let track: Vec<(f64, f64)> = rows.iter().map(|r| (r.position_m, r.omni_dbm)).collect();
        let fading = fading_rate(&track, spec.speed_mps).map_err(|e| e.context("route fading rate"))?;
        (Some(rows), Some(fading))
    } else {
        (None, None)
    };

    let mut group_spreads = Vec::new();
    if spec.kind == CampaignKind::Cluster {
        for (group, members) in sc.groups() {
            let sites: Vec<&LocationResult> = locations
                .iter()
                .filter(|l| l.group.as_deref() == Some(group.as_str()))
                .collect();
            let powers: Vec<f64> = sites.iter().filter_map(|l| l.omni_dbm).collect();
            let std_db = local_power_std(&powers).map_err(|e| e.context(format!("group {group}")))?;
            let first = sites[0].condition;
            let condition = sites.iter().all(|l| l.condition == first).then_some(first);
            group_spreads.push(GroupSpread {
                group,
                condition,
                sites: members.len(),
                std_db,
            });
        }
    }

    let bundle = ResultBundle {
        manifest: RunManifest {
            config_hash: config_hash(spec, sc)?,
            seed: spec.seed,
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            scenario_name: sc.name.clone(),
            kind: spec.kind,
            preset: spec.preset,
            correlator: spec.correlator,
            step_deg: spec.step_deg,
            sweeps: spec.sweeps,
        },
        locations,
        route,
        fits,
        fading,
        group_spreads,
        sweeps,
    };
    if let Some(dir) = &spec.out_dir {
        write_bundle(&bundle, dir, spec.write_pdps)?;
    }
    Ok(bundle)
}

fn file_safe(id: &str) -> String {
    id.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Writes `bundle.json`, `manifest.json`, `omni.csv`, fit reports, the
/// route report, per-site spectra and optionally every PDP.
pub fn write_bundle(bundle: &ResultBundle, dir: &Path, write_pdps: bool) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let text = |path: PathBuf, body: String, written: &mut Vec<PathBuf>| -> Result<()> {
        io::create(&path)?;
        std::fs::write(&path, body).map_err(|e| SounderError::io(&path, e))?;
        written.push(path);
        Ok(())
    };
    text(dir.join("bundle.json"), bundle.to_json()? + "\n", &mut written)?;
    text(
        dir.join("manifest.json"),
        serde_json::to_string_pretty(&bundle.manifest)? + "\n",
        &mut written,
    )?;

    let mut omni = String::from("rx_id,condition,distance_m,omni_dBm,path_loss_dB\n");
    for l in &bundle.locations {
        let f = |v: Option<f64>| v.map_or_else(|| "nan".to_string(), |v| v.to_string());
        omni.push_str(&format!(
            "{},{},{},{},{}\n",
            l.rx_id,
            l.condition,
            l.distance_m,
            f(l.omni_dbm),
            f(l.path_loss_db)
        ));
    }
    text(dir.join("omni.csv"), omni, &mut written)?;

    for f in &bundle.fits {
        let path = dir.join(format!("fit_{}.txt", f.condition.to_string().to_lowercase()));
        io::write_fit_report(&path, &f.fit)?;
        written.push(path);
    }
    if let Some(rows) = &bundle.route {
        let path = dir.join("route_report.csv");
        io::write_route_report(&path, rows)?;
        written.push(path);
    }
    for l in &bundle.locations {
        let path = dir.join("spectra").join(format!("{}.csv", file_safe(&l.rx_id)));
        io::write_spectrum_csv(&path, &l.rx_id, &l.spectrum)?;
        written.push(path);
    }
    if write_pdps {
        for ss in &bundle.sweeps {
            let site_dir = dir.join("pdps").join(file_safe(&ss.rx_id));
            for (a, rec) in ss.records.iter().enumerate() {
                for (s, pdp) in rec.pdps.iter().enumerate() {
                    let path = site_dir.join(format!("a{a:03}_s{s}.csv"));
                    io::write_pdp_csv(&path, pdp)?;
                    written.push(path);
                }
            }
        }
    }
    Ok(written)
}

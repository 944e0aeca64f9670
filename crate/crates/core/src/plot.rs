//! Plot-ready CSV tables derived from a [`ResultBundle`].

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::campaign::ResultBundle;
use crate::error::{Result, SounderError};

/// Samples of each fitted line in the path-loss table.
pub const FIT_LINE_POINTS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlotKind {
    /// `pathloss_points.csv` and `pathloss_fit.csv`.
    PathLoss,
    /// `polar_<rx>.csv` per site.
    Polar,
    /// `route.csv`.
    Route,
}

impl std::str::FromStr for PlotKind {
    type Err = SounderError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pathloss" => Ok(Self::PathLoss),
            "polar" => Ok(Self::Polar),
            "route" => Ok(Self::Route),
            other => Err(SounderError::InvalidParameter(format!(
                "unknown plot kind {other:?} (expected pathloss, polar or route)"
            ))),
        }
    }
}

fn write(dir: &Path, name: &str, body: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| SounderError::io(dir, e))?;
    let path = dir.join(name);
    std::fs::write(&path, body).map_err(|e| SounderError::io(&path, e))?;
    Ok(path)
}

/// `count` log-spaced values from `lo` to `hi` inclusive.
pub fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (a, b) = (lo.log10(), hi.log10());
    (0..count)
        .map(|k| {
            let t = if count > 1 { k as f64 / (count - 1) as f64 } else { 0.0 };
            10f64.powf(a + t * (b - a))
        })
        .collect()
}

/// Writes the tables for `kind` into `dir` and returns their paths.
pub fn emit_plot_data(bundle: &ResultBundle, kind: PlotKind, dir: &Path) -> Result<Vec<PathBuf>> {
    match kind {
        PlotKind::PathLoss => {
            if bundle.fits.is_empty() {
                return Err(SounderError::AbsentProduct("path loss fit".into()));
            }
            let mut points = String::from("condition,distance_m,log10_distance,path_loss_dB,fit_dB\n");
            let mut line = String::from("condition,distance_m,log10_distance,fit_dB\n");
            for cf in &bundle.fits {
                let sites: Vec<(f64, f64)> = bundle
                    .locations
                    .iter()
                    .filter(|l| l.condition == cf.condition)
                    .filter_map(|l| l.path_loss_db.map(|pl| (l.distance_m, pl)))
                    .collect();
                for &(d, pl) in &sites {
                    let _ = writeln!(points, "{},{d},{},{pl},{}", cf.condition, d.log10(), cf.fit.predict(d));
                }
                let lo = sites.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
                let hi = sites.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
                for d in log_spaced(lo, hi, FIT_LINE_POINTS) {
                    let _ = writeln!(line, "{},{d},{},{}", cf.condition, d.log10(), cf.fit.predict(d));
                }
            }
            Ok(vec![
                write(dir, "pathloss_points.csv", &points)?,
                write(dir, "pathloss_fit.csv", &line)?,
            ])
        }
        PlotKind::Polar => {
            if bundle.locations.is_empty() {
                return Err(SounderError::AbsentProduct("angular spectrum".into()));
            }
            bundle
                .locations
                .iter()
                .map(|l| {
                    let mut body = String::from("azimuth_deg,power_dB\n");
                    for (az, p) in &l.spectrum {
                        let _ = writeln!(body, "{az},{p}");
                    }
                    let name: String = l
                        .rx_id
                        .chars()
                        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
                        .collect();
                    write(dir, &format!("polar_{name}.csv"), &body)
                })
                .collect()
        }
        PlotKind::Route => {
            let rows = bundle
                .route
                .as_ref()
                .ok_or_else(|| SounderError::AbsentProduct("route report".into()))?;
            let mut sorted = rows.clone();
            sorted.sort_by(|a, b| a.position_m.total_cmp(&b.position_m));
            let mut body = String::from("position_m,omni_dBm\n");
            for r in &sorted {
                let _ = writeln!(body, "{},{}", r.position_m, r.omni_dbm);
            }
            Ok(vec![write(dir, "route.csv", &body)?])
        }
    }
}

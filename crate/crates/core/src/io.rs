//! File formats: CSV tables with `# key: value` preambles, a binary
//! waveform container and a plain-text fit report.
//!
//! Every CSV written here has a single header row followed by numeric rows;
//! readers skip lines starting with `#`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex;

use crate::analysis::CiFit;
use crate::correlator::DilatedCir;
use crate::error::{Result, SounderError};
use crate::pdp::PowerDelayProfile;
use crate::scalar::{power_to_db, Real};
use crate::waveform::SampledWaveform;

/// First eight bytes of a waveform file.
pub const WAVEFORM_MAGIC: &[u8; 8] = b"CSWAVE01";

pub(crate) fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| SounderError::io(dir, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| SounderError::io(path, e))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| SounderError::io(path, e))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| SounderError::io(path, e))
}

fn preamble(w: &mut impl Write, rows: &[(&str, String)]) -> std::io::Result<()> {
    for (k, v) in rows {
        writeln!(w, "# {k}: {v}")?;
    }
    Ok(())
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(|| "none".to_string(), |v| v.to_string())
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

fn csv_reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(r)
}

/// `# key: value` lines at the top of a commented CSV.
pub fn read_preamble(path: &Path) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for line in open(path)?.lines() {
        let line = line.map_err(|e| SounderError::io(path, e))?;
        let Some(rest) = line.strip_prefix("# ") else { break };
        if let Some((k, v)) = rest.split_once(": ") {
            out.push((k.to_string(), v.to_string()));
        }
    }
    Ok(out)
}

/// Columns `excess_delay_ns, power_dBm`; zeroed samples are written as
/// `-inf`.
pub fn write_pdp_csv<T: Real>(path: &Path, pdp: &PowerDelayProfile<T>) -> Result<()> {
    let mut w = create(path)?;
    preamble(
        &mut w,
        &[
            ("noise_floor_dBm", opt(pdp.noise_floor_dbm)),
            ("threshold_dBm", opt(pdp.threshold_dbm)),
            ("angle_deg", opt(pdp.meta.angle_deg)),
            ("location", opt(pdp.meta.location.as_deref())),
            ("sweep", opt(pdp.meta.sweep)),
            ("pulse_energy", pdp.pulse_energy.to_string()),
        ],
    )
    .map_err(|e| SounderError::io(path, e))?;
    let mut c = csv_writer(&mut w);
    c.write_record(["excess_delay_ns", "power_dBm"])?;
    for (k, &p) in pdp.power.iter().enumerate() {
        let ns = pdp.excess_delay(k).as_f64() * 1e9;
        c.write_record([ns.to_string(), power_to_db(p).as_f64().to_string()])?;
    }
    c.flush().map_err(|e| SounderError::io(path, e))?;
    drop(c);
    finish(w, path)
}

/// `(excess_delay_ns, power_dBm)` rows of a PDP CSV.
pub fn read_pdp_csv(path: &Path) -> Result<Vec<(f64, f64)>> {
    read_pairs(path, ["excess_delay_ns", "power_dBm"])
}

/// Columns `compressed_time_s, i, q`, with the correlator timing in the
/// preamble.
pub fn write_cir_csv<T: Real>(path: &Path, cir: &DilatedCir<T>) -> Result<()> {
    let mut w = create(path)?;
    preamble(
        &mut w,
        &[
            ("slide_factor", cir.slide_factor.to_string()),
            ("sample_rate_hz", cir.sample_rate.to_string()),
            ("compressed_bandwidth_hz", cir.compressed_bandwidth.to_string()),
            ("dilated_period_s", cir.dilated_period.to_string()),
        ],
    )
    .map_err(|e| SounderError::io(path, e))?;
    let mut c = csv_writer(&mut w);
    c.write_record(["compressed_time_s", "i", "q"])?;
    for k in 0..cir.len() {
        c.write_record([
            cir.compressed_time(k).to_string(),
            cir.i_channel[k].to_string(),
            cir.q_channel[k].to_string(),
        ])?;
    }
    c.flush().map_err(|e| SounderError::io(path, e))?;
    drop(c);
    finish(w, path)
}

/// Columns `azimuth_deg, power_dBm`.
pub fn write_spectrum_csv(path: &Path, rx_id: &str, spectrum: &[(f64, f64)]) -> Result<()> {
    let mut w = create(path)?;
    preamble(&mut w, &[("location", rx_id.to_string())]).map_err(|e| SounderError::io(path, e))?;
    let mut c = csv_writer(&mut w);
    c.write_record(["azimuth_deg", "power_dBm"])?;
    for (az, p) in spectrum {
        c.write_record([az.to_string(), p.to_string()])?;
    }
    c.flush().map_err(|e| SounderError::io(path, e))?;
    drop(c);
    finish(w, path)
}

pub fn read_spectrum_csv(path: &Path) -> Result<Vec<(f64, f64)>> {
    read_pairs(path, ["azimuth_deg", "power_dBm"])
}

/// One row of the route report.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RouteRow {
    pub position_m: f64,
    pub distance_m: f64,
    #[serde(rename = "omni_dBm")]
    pub omni_dbm: f64,
    #[serde(rename = "path_loss_dB")]
    pub path_loss_db: f64,
    /// 1 for line of sight, 0 otherwise.
    pub los_flag: u8,
}

/// Columns `position_m, distance_m, omni_dBm, path_loss_dB, los_flag`.
pub fn write_route_report(path: &Path, rows: &[RouteRow]) -> Result<()> {
    let mut w = create(path)?;
    let mut c = csv_writer(&mut w);
    for r in rows {
        c.serialize(r)?;
    }
    c.flush().map_err(|e| SounderError::io(path, e))?;
    drop(c);
    finish(w, path)
}

pub fn read_route_report(path: &Path) -> Result<Vec<RouteRow>> {
    csv_reader(open(path)?)
        .deserialize()
        .map(|r| r.map_err(SounderError::from))
        .collect()
}

/// Reads `(distance_m, path_loss_dB)` points from a two-column CSV with
/// that header.
pub fn read_path_loss_points(path: &Path) -> Result<Vec<(f64, f64)>> {
    read_pairs(path, ["distance_m", "path_loss_dB"])
}

fn read_pairs(path: &Path, columns: [&str; 2]) -> Result<Vec<(f64, f64)>> {
    let mut r = csv_reader(open(path)?);
    let headers = r.headers()?.clone();
    let idx = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| SounderError::Config {
                path: path.display().to_string(),
                message: format!("missing column `{name}`"),
            })
    };
    let (a, b) = (idx(columns[0])?, idx(columns[1])?);
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let field = |i: usize| -> Result<f64> {
            rec.get(i)
                .unwrap_or("")
                .trim()
                .parse()
                .map_err(|_| SounderError::Config {
                    path: path.display().to_string(),
                    message: format!("row {}: `{}` is not a number", line + 1, rec.get(i).unwrap_or("")),
                })
        };
        out.push((field(a)?, field(b)?));
    }
    Ok(out)
}

/// Plain `key = value` text.
pub fn fit_report(fit: &CiFit) -> String {
    format!(
        "model = close-in\nple = {}\nsigma_dB = {}\npoint_count = {}\nfrequency_Hz = {}\nd0_m = {}\n",
        fit.ple, fit.sigma_db, fit.point_count, fit.frequency_hz, fit.d0_m
    )
}

pub fn write_fit_report(path: &Path, fit: &CiFit) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(fit_report(fit).as_bytes())
        .map_err(|e| SounderError::io(path, e))?;
    finish(w, path)
}

/// Parses [`fit_report`] output.
pub fn parse_fit_report(text: &str) -> Result<CiFit> {
    let get = |key: &str| -> Result<&str> {
        text.lines()
            .filter_map(|l| l.split_once('='))
            .find(|(k, _)| k.trim() == key)
            .map(|(_, v)| v.trim())
            .ok_or_else(|| SounderError::InvalidParameter(format!("fit report lacks `{key}`")))
    };
    let num = |key: &str| -> Result<f64> {
        get(key)?
            .parse()
            .map_err(|_| SounderError::InvalidParameter(format!("fit report `{key}` is not a number")))
    };
    Ok(CiFit {
        ple: num("ple")?,
        sigma_db: num("sigma_dB")?,
        d0_m: num("d0_m")?,
        frequency_hz: num("frequency_Hz")?,
        point_count: num("point_count")? as usize,
    })
}

/// Binary layout, all little-endian: magic, `sample_rate` f64, `chip_rate`
/// f64, `trigger_index` u64, `period_len` u64, sample count u64, then
/// interleaved re/im f64 pairs.
pub fn write_waveform<T: Real>(path: &Path, w: &SampledWaveform<T>) -> Result<()> {
    let mut out = create(path)?;
    let mut buf = Vec::with_capacity(48 + 16 * w.len());
    buf.extend_from_slice(WAVEFORM_MAGIC);
    buf.extend_from_slice(&w.sample_rate.as_f64().to_le_bytes());
    buf.extend_from_slice(&w.chip_rate.as_f64().to_le_bytes());
    buf.extend_from_slice(&(w.trigger_index as u64).to_le_bytes());
    buf.extend_from_slice(&(w.period_len as u64).to_le_bytes());
    buf.extend_from_slice(&(w.len() as u64).to_le_bytes());
    for s in &w.samples {
        buf.extend_from_slice(&s.re.as_f64().to_le_bytes());
        buf.extend_from_slice(&s.im.as_f64().to_le_bytes());
    }
    out.write_all(&buf).map_err(|e| SounderError::io(path, e))?;
    finish(out, path)
}

pub fn read_waveform<T: Real>(path: &Path) -> Result<SampledWaveform<T>> {
    let mut bytes = Vec::new();
    open(path)?
        .read_to_end(&mut bytes)
        .map_err(|e| SounderError::io(path, e))?;
    let bad = |m: &str| SounderError::Config {
        path: path.display().to_string(),
        message: m.to_string(),
    };
    if bytes.len() < 48 || &bytes[..8] != WAVEFORM_MAGIC {
        return Err(bad("not a waveform file"));
    }
    let word = |i: usize| -> [u8; 8] { bytes[8 + 8 * i..16 + 8 * i].try_into().unwrap() };
    let sample_rate = f64::from_le_bytes(word(0));
    let chip_rate = f64::from_le_bytes(word(1));
    let trigger_index = u64::from_le_bytes(word(2)) as usize;
    let period_len = u64::from_le_bytes(word(3)) as usize;
    let count = u64::from_le_bytes(word(4)) as usize;
    let body = &bytes[48..];
    if body.len() != count.checked_mul(16).ok_or_else(|| bad("sample count overflows"))? {
        return Err(bad("sample count does not match file length"));
    }
    let samples = body
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().unwrap());
            let im = f64::from_le_bytes(c[8..].try_into().unwrap());
            Complex::new(T::lit(re), T::lit(im))
        })
        .collect();
    Ok(SampledWaveform {
        samples,
        sample_rate: T::lit(sample_rate),
        chip_rate: T::lit(chip_rate),
        trigger_index,
        period_len,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pdp::PdpMeta;

    #[test]
    fn pdp_csv_has_header_and_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        let mut pdp = PowerDelayProfile::new(vec![1e-6_f64, 0.0, 1e-8], 1e-9);
        pdp.noise_floor_dbm = Some(-80.0);
        pdp.threshold_dbm = Some(-75.0);
        pdp.meta = PdpMeta {
            angle_deg: Some(30.0),
            location: Some("R01".into()),
            sweep: Some(2),
        };
        write_pdp_csv(&path, &pdp).unwrap();
        let pre = read_preamble(&path).unwrap();
        assert!(pre.contains(&("location".into(), "R01".into())));
        assert!(pre.contains(&("noise_floor_dBm".into(), "-80".into())));
        let rows = read_pdp_csv(&path).unwrap();
        assert_eq!(rows.len(), 3);
        assert!((rows[0].1 + 60.0).abs() < 1e-9);
        assert_eq!(rows[1].1, f64::NEG_INFINITY);
        assert!((rows[2].0 - 2.0).abs() < 1e-9);
    }

    #[test]
    fn waveform_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.bin");
        let w = SampledWaveform {
            samples: vec![Complex::new(1.5_f64, -0.25), Complex::new(-1.0, 2.0)],
            sample_rate: 2e9,
            chip_rate: 5e8,
            trigger_index: 1,
            period_len: 2,
        };
        write_waveform(&path, &w).unwrap();
        assert_eq!(std::fs::metadata(&path).unwrap().len(), 48 + 32);
        assert_eq!(read_waveform::<f64>(&path).unwrap(), w);
        std::fs::write(&path, b"garbage").unwrap();
        assert!(read_waveform::<f64>(&path).is_err());
    }

    #[test]
    fn fit_report_round_trip() {
        let fit = CiFit {
            ple: 2.53,
            sigma_db: 1.25,
            d0_m: 1.0,
            frequency_hz: 73.5e9,
            point_count: 5,
        };
        assert_eq!(parse_fit_report(&fit_report(&fit)).unwrap(), fit);
    }

    #[test]
    fn route_report_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let rows = vec![RouteRow {
            position_m: 0.0,
            distance_m: 30.0,
            omni_dbm: -50.5,
            path_loss_db: 111.1,
            los_flag: 1,
        }];
        write_route_report(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("position_m,distance_m,omni_dBm,path_loss_dB,los_flag\n"));
        assert_eq!(read_route_report(&path).unwrap(), rows);
    }

    #[test]
    fn missing_column_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        std::fs::write(&path, "a,b\n1,2\n").unwrap();
        let err = read_path_loss_points(&path).unwrap_err();
        assert!(err.to_string().contains("distance_m"));
    }
}

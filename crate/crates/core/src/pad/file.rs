//! Calibration files: a JSON document with the baseline statistics and an
//! "RCAL" sidecar holding the chirp-averaged coupling profile (magic `RCAL`,
//! u32 LE header length, JSON header, then `f32` LE interleaved I/Q ordered
//! channel -> range bin).

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{PadCalibration, PadError, Room};
use crate::container::{check_version, read_f32s, read_header, write_f32s, write_header, FormatError, FORMAT_VERSION};
use crate::dsp::CouplingCalibration;
use crate::radar::ChirpConfig;

pub const RCAL_MAGIC: [u8; 4] = *b"RCAL";

#[derive(Debug, Serialize, Deserialize)]
struct CalibrationJson {
    room: Room,
    baseline_mean: f64,
    baseline_std: f64,
    kappa: f64,
    horizon_frames: usize,
    /// Sidecar file name, relative to the JSON file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    coupling_profile: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RcalHeader {
    config: ChirpConfig,
    num_channels: usize,
    range_bins: usize,
    format_version: u32,
}

pub fn write_rcal<W: Write>(w: &mut W, cal: &CouplingCalibration) -> Result<(), FormatError> {
    let c = &cal.config;
    if cal.mean.len() != c.num_channels * c.range_bins() {
        return Err(FormatError::PayloadSize {
            expected: c.num_channels * c.range_bins(),
            found: cal.mean.len(),
        });
    }
    let header = RcalHeader {
        config: c.clone(),
        num_channels: c.num_channels,
        range_bins: c.range_bins(),
        format_version: FORMAT_VERSION,
    };
    write_header(w, RCAL_MAGIC, &header)?;
    write_f32s(w, cal.mean.iter().flat_map(|z| [z.re as f32, z.im as f32]))?;
    Ok(())
}

pub fn read_rcal<R: Read>(r: &mut R) -> Result<CouplingCalibration, FormatError> {
    let h: RcalHeader = read_header(r, RCAL_MAGIC)?;
    check_version(h.format_version)?;
    h.config
        .validate()
        .map_err(|e| FormatError::Invalid(e.to_string()))?;
    if h.num_channels != h.config.num_channels || h.range_bins != h.config.range_bins() {
        return Err(FormatError::Invalid("header dimensions disagree with config".into()));
    }
    let values = read_f32s(r, 2 * h.num_channels * h.range_bins)?;
    Ok(CouplingCalibration {
        config: h.config,
        mean: values
            .chunks_exact(2)
            .map(|p| Complex64::new(p[0] as f64, p[1] as f64))
            .collect(),
    })
}

fn sidecar_path(json: &Path) -> PathBuf {
    json.with_extension("rcal")
}

/// Writes `path` (JSON) and, when a coupling profile is present, its
/// `.rcal` sidecar next to it.
pub fn save_calibration(path: &Path, cal: &PadCalibration) -> Result<(), PadError> {
    let mut doc = CalibrationJson {
        room: cal.room,
        baseline_mean: cal.baseline_mean,
        baseline_std: cal.baseline_std,
        kappa: cal.kappa,
        horizon_frames: cal.horizon_frames,
        coupling_profile: None,
    };
    if let Some(coupling) = &cal.coupling {
        let side = sidecar_path(path);
        let mut w = BufWriter::new(File::create(&side).map_err(FormatError::from)?);
        write_rcal(&mut w, coupling)?;
        w.flush().map_err(FormatError::from)?;
        doc.coupling_profile = side.file_name().map(|n| n.to_string_lossy().into_owned());
    }
    let json = serde_json::to_vec_pretty(&doc).map_err(FormatError::from)?;
    fs::write(path, json).map_err(FormatError::from)?;
    Ok(())
}

pub fn load_calibration(path: &Path) -> Result<PadCalibration, PadError> {
    let bytes = fs::read(path).map_err(FormatError::from)?;
    let doc: CalibrationJson = serde_json::from_slice(&bytes).map_err(FormatError::from)?;
    if !(doc.baseline_mean >= 0.0 && doc.baseline_std >= 0.0 && doc.kappa > 0.0 && doc.horizon_frames > 0) {
        return Err(FormatError::Invalid("calibration values out of range".into()).into());
    }
    let coupling = match &doc.coupling_profile {
        Some(name) => {
            let side = path.parent().unwrap_or(Path::new(".")).join(name);
            let mut r = BufReader::new(File::open(side).map_err(FormatError::from)?);
            Some(read_rcal(&mut r)?)
        }
        None => None,
    };
    Ok(PadCalibration {
        room: doc.room,
        baseline_mean: doc.baseline_mean,
        baseline_std: doc.baseline_std,
        kappa: doc.kappa,
        horizon_frames: doc.horizon_frames,
        coupling,
    })
}

//! "JTF0" spectrogram files: magic `JTF0`, `u32` LE header length, JSON
//! header, then `f32` LE values column by column.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::stft::{JtfSpectrogram, DOPPLER_BINS};
use crate::container::{self, FormatError, FORMAT_VERSION};
use crate::radar::Activity;

pub const JTF0_MAGIC: [u8; 4] = *b"JTF0";

#[derive(Debug, Serialize, Deserialize)]
struct Jtf0Header {
    num_columns: usize,
    bins: usize,
    column_period_ms: f64,
    v_max: f64,
    start_time_ms: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<Activity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    subject_id: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    session_id: Option<u32>,
    format_version: u32,
}

pub fn write_spectrogram<W: Write>(w: &mut W, spec: &JtfSpectrogram) -> Result<(), FormatError> {
    let header = Jtf0Header {
        num_columns: spec.num_columns(),
        bins: DOPPLER_BINS,
        column_period_ms: spec.column_period_s * 1000.0,
        v_max: spec.max_velocity_mps,
        start_time_ms: spec.start_time_ms,
        label: spec.label,
        subject_id: spec.subject_id,
        session_id: spec.session_id,
        format_version: FORMAT_VERSION,
    };
    container::write_header(w, JTF0_MAGIC, &header)?;
    container::write_f32s(w, spec.data.iter().copied())?;
    Ok(())
}

pub fn read_spectrogram<R: Read>(r: &mut R) -> Result<JtfSpectrogram, FormatError> {
    let h: Jtf0Header = container::read_header(r, JTF0_MAGIC)?;
    container::check_version(h.format_version)?;
    if h.bins != DOPPLER_BINS {
        return Err(FormatError::Invalid(format!("expected {DOPPLER_BINS} bins, header has {}", h.bins)));
    }
    let data = container::read_f32s(r, h.num_columns * DOPPLER_BINS)?;
    if data.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(FormatError::Invalid("spectrogram values must be finite and >= 0".into()));
    }
    Ok(JtfSpectrogram {
        column_period_s: h.column_period_ms / 1000.0,
        start_time_ms: h.start_time_ms,
        max_velocity_mps: h.v_max,
        data,
        label: h.label,
        subject_id: h.subject_id,
        session_id: h.session_id,
    })
}

pub fn save_spectrogram(path: &Path, spec: &JtfSpectrogram) -> Result<(), FormatError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_spectrogram(&mut w, spec)?;
    w.flush()?;
    Ok(())
}

pub fn load_spectrogram(path: &Path) -> Result<JtfSpectrogram, FormatError> {
    read_spectrogram(&mut BufReader::new(File::open(path)?))
}

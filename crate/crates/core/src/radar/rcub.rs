//! "RCUB" radar cube files: magic `RCUB`, `u32` LE header length, JSON
//! header, then `f32` LE interleaved I/Q ordered frame -> chirp -> channel ->
//! sample.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex32;
use serde::{Deserialize, Serialize};

use super::config::ChirpConfig;
use super::synth::RadarCube;
use crate::container::{self, FormatError, FORMAT_VERSION};

pub const RCUB_MAGIC: [u8; 4] = *b"RCUB";

#[derive(Debug, Serialize, Deserialize)]
struct RcubHeader {
    f0_hz: f64,
    slope_hz_per_s: f64,
    bandwidth_hz: f64,
    fs_hz: f64,
    samples_per_chirp: usize,
    chirps_per_frame: usize,
    num_channels: usize,
    num_frames: usize,
    frame_period_s: f64,
    chirp_period_s: f64,
    start_time_ms: i64,
    #[serde(default)]
    noise_floor: f64,
    #[serde(default)]
    phase_noise_std_rad: f64,
    #[serde(default)]
    channel_mismatch_rad: f64,
    format_version: u32,
}

pub fn write_cube<W: Write>(w: &mut W, cube: &RadarCube) -> Result<(), FormatError> {
    let c = &cube.config;
    let header = RcubHeader {
        f0_hz: c.f0_hz,
        slope_hz_per_s: c.slope_hz_per_s,
        bandwidth_hz: c.bandwidth_hz,
        fs_hz: c.fs_hz,
        samples_per_chirp: c.samples_per_chirp,
        chirps_per_frame: c.chirps_per_frame,
        num_channels: c.num_channels,
        num_frames: cube.num_frames,
        frame_period_s: c.frame_period_s,
        chirp_period_s: c.chirp_period_s,
        start_time_ms: cube.start_time_ms,
        noise_floor: c.noise_floor,
        phase_noise_std_rad: c.phase_noise_std_rad,
        channel_mismatch_rad: c.channel_mismatch_rad,
        format_version: FORMAT_VERSION,
    };
    if cube.data.len() != cube.expected_len() {
        return Err(FormatError::PayloadSize {
            expected: cube.expected_len(),
            found: cube.data.len(),
        });
    }
    container::write_header(w, RCUB_MAGIC, &header)?;
    container::write_f32s(w, cube.data.iter().flat_map(|z| [z.re, z.im]))?;
    Ok(())
}

pub fn read_cube<R: Read>(r: &mut R) -> Result<RadarCube, FormatError> {
    let h: RcubHeader = container::read_header(r, RCUB_MAGIC)?;
    container::check_version(h.format_version)?;
    let config = ChirpConfig {
        f0_hz: h.f0_hz,
        slope_hz_per_s: h.slope_hz_per_s,
        bandwidth_hz: h.bandwidth_hz,
        fs_hz: h.fs_hz,
        samples_per_chirp: h.samples_per_chirp,
        chirps_per_frame: h.chirps_per_frame,
        chirp_period_s: h.chirp_period_s,
        frame_period_s: h.frame_period_s,
        num_channels: h.num_channels,
        noise_floor: h.noise_floor,
        phase_noise_std_rad: h.phase_noise_std_rad,
        channel_mismatch_rad: h.channel_mismatch_rad,
    };
    config
        .validate()
        .map_err(|e| FormatError::Invalid(e.to_string()))?;
    let count = h.num_frames * h.chirps_per_frame * h.num_channels * h.samples_per_chirp;
    let values = container::read_f32s(r, count * 2)?;
    let data = values
        .chunks_exact(2)
        .map(|p| Complex32::new(p[0], p[1]))
        .collect();
    Ok(RadarCube {
        config,
        num_frames: h.num_frames,
        start_time_ms: h.start_time_ms,
        data,
    })
}

pub fn save_cube(path: &Path, cube: &RadarCube) -> Result<(), FormatError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_cube(&mut w, cube)?;
    w.flush()?;
    Ok(())
}

pub fn load_cube(path: &Path) -> Result<RadarCube, FormatError> {
    read_cube(&mut BufReader::new(File::open(path)?))
}

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::DspError;
use crate::radar::{ChirpConfig, RadarCube};

/// Positive-frequency range spectra, indexed chirp -> channel -> range bin.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeProfile {
    pub config: ChirpConfig,
    pub num_chirps: usize,
    pub start_time_ms: i64,
    pub data: Vec<Complex64>,
}

impl RangeProfile {
    pub fn zeros(config: ChirpConfig, num_chirps: usize, start_time_ms: i64) -> Self {
        let len = num_chirps * config.num_channels * config.range_bins();
        Self {
            config,
            num_chirps,
            start_time_ms,
            data: vec![Complex64::new(0.0, 0.0); len],
        }
    }

    pub fn range_bins(&self) -> usize {
        self.config.range_bins()
    }

    pub fn num_channels(&self) -> usize {
        self.config.num_channels
    }

    fn stride(&self) -> usize {
        self.config.num_channels * self.config.range_bins()
    }

    /// All channels and bins of one chirp.
    pub fn chirp(&self, chirp: usize) -> &[Complex64] {
        let n = self.stride();
        &self.data[chirp * n..(chirp + 1) * n]
    }

    pub fn at(&self, chirp: usize, channel: usize, bin: usize) -> Complex64 {
        self.data[chirp * self.stride() + channel * self.range_bins() + bin]
    }

    /// Total energy `sum |x|^2` over every chirp, channel and bin.
    pub fn energy(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Per-bin energy summed over chirps and channels.
    pub fn bin_energy(&self) -> Vec<f64> {
        let bins = self.range_bins();
        let mut out = vec![0.0; bins];
        for (i, z) in self.data.iter().enumerate() {
            out[i % bins] += z.norm_sqr();
        }
        out
    }

    /// Concatenates profiles that share a config, in slow-time order.
    pub fn concat(parts: &[RangeProfile]) -> Result<RangeProfile, DspError> {
        let first = parts.first().ok_or(DspError::TooFewChirps { found: 0 })?;
        let mut out = RangeProfile {
            config: first.config.clone(),
            num_chirps: 0,
            start_time_ms: first.start_time_ms,
            data: Vec::new(),
        };
        for p in parts {
            if !p.config.same_geometry(&out.config) {
                return Err(DspError::ConfigMismatch);
            }
            out.num_chirps += p.num_chirps;
            out.data.extend_from_slice(&p.data);
        }
        Ok(out)
    }
}

/// Reusable fast-time FFT for one waveform.
pub struct RangeProcessor {
    config: ChirpConfig,
    fft: Arc<dyn Fft<f64>>,
    buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl RangeProcessor {
    pub fn new(config: &ChirpConfig) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(config.samples_per_chirp);
        let scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        Self {
            config: config.clone(),
            buf: vec![Complex64::new(0.0, 0.0); config.samples_per_chirp],
            fft,
            scratch,
        }
    }

    pub fn process(&mut self, cube: &RadarCube) -> Result<RangeProfile, DspError> {
        if !cube.config.same_geometry(&self.config) {
            return Err(DspError::ConfigMismatch);
        }
        if cube.data.len() != cube.expected_len() {
            return Err(DspError::ShapeMismatch {
                expected: cube.expected_len(),
                found: cube.data.len(),
            });
        }
        let c = &cube.config;
        let chirps = cube.num_frames * c.chirps_per_frame;
        let bins = c.range_bins();
        let mut profile = RangeProfile::zeros(c.clone(), chirps, cube.start_time_ms);
        for (src, dst) in cube
            .data
            .chunks_exact(c.samples_per_chirp)
            .zip(profile.data.chunks_exact_mut(bins))
        {
            for (b, s) in self.buf.iter_mut().zip(src) {
                *b = Complex64::new(s.re as f64, s.im as f64);
            }
            self.fft.process_with_scratch(&mut self.buf, &mut self.scratch);
            dst.copy_from_slice(&self.buf[..bins]);
        }
        Ok(profile)
    }
}

/// FFT over fast time, keeping bins `[0, samples_per_chirp / 2)`.
pub fn range_fft(cube: &RadarCube) -> Result<RangeProfile, DspError> {
    RangeProcessor::new(&cube.config).process(cube)
}

/// Chirp-averaged complex range profile of an empty room: the static leakage
/// between transmit and receive antennas plus fixed reflections.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingCalibration {
    pub config: ChirpConfig,
    /// Indexed channel -> bin.
    pub mean: Vec<Complex64>,
}

impl CouplingCalibration {
    pub fn zeros(config: &ChirpConfig) -> Self {
        Self {
            config: config.clone(),
            mean: vec![Complex64::new(0.0, 0.0); config.num_channels * config.range_bins()],
        }
    }

    /// Averages every chirp of the given empty-room profiles.
    pub fn from_profiles<'a>(profiles: impl IntoIterator<Item = &'a RangeProfile>) -> Result<Self, DspError> {
        let mut iter = profiles.into_iter().peekable();
        let first = iter.peek().ok_or(DspError::TooFewChirps { found: 0 })?;
        let mut cal = Self::zeros(&first.config);
        let mut count = 0usize;
        for p in iter {
            if !p.config.same_geometry(&cal.config) {
                return Err(DspError::ConfigMismatch);
            }
            for chirp in 0..p.num_chirps {
                for (acc, z) in cal.mean.iter_mut().zip(p.chirp(chirp)) {
                    *acc += z;
                }
            }
            count += p.num_chirps;
        }
        if count == 0 {
            return Err(DspError::TooFewChirps { found: 0 });
        }
        let scale = 1.0 / count as f64;
        cal.mean.iter_mut().for_each(|z| *z *= scale);
        Ok(cal)
    }
}

/// Subtracts the calibration's chirp-averaged value from every chirp.
pub fn mutual_coupling_reduction(
    profile: &RangeProfile,
    calibration: &CouplingCalibration,
) -> Result<RangeProfile, DspError> {
    let mut out = profile.clone();
    mutual_coupling_reduction_in_place(&mut out, calibration)?;
    Ok(out)
}

pub fn mutual_coupling_reduction_in_place(
    profile: &mut RangeProfile,
    calibration: &CouplingCalibration,
) -> Result<(), DspError> {
    if !profile.config.same_geometry(&calibration.config) || calibration.mean.len() != profile.stride() {
        return Err(DspError::ConfigMismatch);
    }
    let n = profile.stride();
    for chirp in profile.data.chunks_exact_mut(n) {
        for (z, m) in chirp.iter_mut().zip(&calibration.mean) {
            *z -= m;
        }
    }
    Ok(())
}

/// Removes stationary reflectors by subtracting, for every channel and range
/// bin, the slow-time mean over each frame-sized block of chirps.
pub fn clutter_removal(profile: &RangeProfile) -> Result<RangeProfile, DspError> {
    let mut out = profile.clone();
    clutter_removal_in_place(&mut out)?;
    Ok(out)
}

pub fn clutter_removal_in_place(profile: &mut RangeProfile) -> Result<(), DspError> {
    let block = profile.config.chirps_per_frame;
    let n = profile.stride();
    let mut mean = vec![Complex64::new(0.0, 0.0); n];
    let mut start = 0;
    while start < profile.num_chirps {
        let end = (start + block).min(profile.num_chirps);
        let len = end - start;
        if len < 2 {
            return Err(DspError::TooFewChirps { found: len });
        }
        mean.iter_mut().for_each(|m| *m = Complex64::new(0.0, 0.0));
        let rows = &mut profile.data[start * n..end * n];
        for chirp in rows.chunks_exact(n) {
            for (m, z) in mean.iter_mut().zip(chirp) {
                *m += z;
            }
        }
        let scale = 1.0 / len as f64;
        mean.iter_mut().for_each(|m| *m *= scale);
        for chirp in rows.chunks_exact_mut(n) {
            for (z, m) in chirp.iter_mut().zip(&mean) {
                *z -= m;
            }
        }
        start = end;
    }
    if profile.num_chirps == 0 {
        return Err(DspError::TooFewChirps { found: 0 });
    }
    Ok(())
}

/// One complex sample per chirp at the chirp cadence.
#[derive(Debug, Clone, PartialEq)]
pub struct SlowTimeSeries {
    pub samples: Vec<Complex64>,
    pub chirp_period_s: f64,
    pub start_time_ms: i64,
}

/// Sums every channel and range bin of each chirp.
pub fn coherent_accumulate(profile: &RangeProfile) -> SlowTimeSeries {
    let n = profile.stride();
    let samples = if n == 0 {
        vec![Complex64::new(0.0, 0.0); profile.num_chirps]
    } else {
        profile
            .data
            .chunks_exact(n)
            .map(|chirp| chirp.iter().sum())
            .collect()
    };
    SlowTimeSeries {
        samples,
        chirp_period_s: profile.config.chirp_period_s,
        start_time_ms: profile.start_time_ms,
    }
}

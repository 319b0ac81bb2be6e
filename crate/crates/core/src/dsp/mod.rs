//! Radar cube to micro-Doppler spectrogram: range FFT, mutual-coupling
//! reduction, stationary clutter removal, coherent accumulation over channels
//! and range bins, then a short-time Fourier transform over slow time.

pub mod jtf0;
mod range;
mod stft;
mod windows;

use thiserror::Error;

pub use range::{
    clutter_removal, clutter_removal_in_place, coherent_accumulate, mutual_coupling_reduction,
    mutual_coupling_reduction_in_place, range_fft, CouplingCalibration, RangeProcessor, RangeProfile,
    SlowTimeSeries,
};
pub use stft::{hamming, stft, JtfSpectrogram, StftStream, DOPPLER_BINS, HOP, WINDOW_LEN, ZERO_DOPPLER_BIN};
pub use windows::{frame_windows, window_starts, GruInputWindow, DEFAULT_STRIDE, TIME_STEPS};

use crate::radar::{derive_params, ChirpConfig, RadarCube};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DspError {
    #[error("cube holds {found} samples, config implies {expected}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("calibration or input recorded with a different radar config")]
    ConfigMismatch,
    #[error("clutter removal needs at least 2 chirps per block, found {found}")]
    TooFewChirps { found: usize },
    #[error("series of {found} samples is shorter than the {needed}-sample window")]
    TooShort { found: usize, needed: usize },
}

/// Spectrogram of a coupling-reduced profile:
/// `stft(coherent_accumulate(clutter_removal(profile)))`.
pub fn compute_jtf(profile: &RangeProfile) -> Result<JtfSpectrogram, DspError> {
    let cleaned = clutter_removal(profile)?;
    let series = coherent_accumulate(&cleaned);
    stft(&series, derive_params(&profile.config).max_velocity_mps)
}

/// Output of one frame through [`JtfPipeline`].
pub struct FrameOutput {
    /// Clutter-removed range profile of the frame.
    pub profile: RangeProfile,
    /// Columns completed by this frame.
    pub new_columns: usize,
}

/// Frame-at-a-time processing chain. Because clutter removal works on
/// frame-sized blocks, feeding frames one by one produces exactly the
/// spectrogram [`compute_jtf`] produces on the concatenated profile.
pub struct JtfPipeline {
    range: RangeProcessor,
    coupling: Option<CouplingCalibration>,
    stft: StftStream,
    spectrogram: JtfSpectrogram,
    started: bool,
    origin_ms: i64,
    dropped_columns: usize,
}

impl JtfPipeline {
    pub fn new(config: &ChirpConfig, coupling: Option<CouplingCalibration>) -> Self {
        let derived = derive_params(config);
        Self {
            range: RangeProcessor::new(config),
            coupling,
            stft: StftStream::new(),
            spectrogram: JtfSpectrogram::empty(HOP as f64 * config.chirp_period_s, 0, derived.max_velocity_mps),
            started: false,
            origin_ms: 0,
            dropped_columns: 0,
        }
    }

    pub fn push_frame(&mut self, cube: &RadarCube) -> Result<FrameOutput, DspError> {
        let mut profile = self.range.process(cube)?;
        if let Some(cal) = &self.coupling {
            mutual_coupling_reduction_in_place(&mut profile, cal)?;
        }
        clutter_removal_in_place(&mut profile)?;
        if !self.started {
            self.spectrogram.start_time_ms = cube.start_time_ms;
            self.origin_ms = cube.start_time_ms;
            self.started = true;
        }
        let series = coherent_accumulate(&profile);
        let new_columns = self.stft.push(&series.samples, &mut self.spectrogram.data);
        Ok(FrameOutput { profile, new_columns })
    }

    /// Columns produced since the stream started, including dropped ones.
    pub fn total_columns(&self) -> usize {
        self.dropped_columns + self.spectrogram.num_columns()
    }

    pub fn spectrogram(&self) -> &JtfSpectrogram {
        &self.spectrogram
    }

    pub fn into_spectrogram(self) -> JtfSpectrogram {
        self.spectrogram
    }

    /// Drops all but the newest `keep` columns, advancing the start time to
    /// match. Bounds memory on long-running streams.
    pub fn retain_last_columns(&mut self, keep: usize) {
        let n = self.spectrogram.num_columns();
        if n > keep {
            let drop = n - keep;
            self.dropped_columns += drop;
            self.spectrogram.start_time_ms = self.origin_ms
                + (self.dropped_columns as f64 * self.spectrogram.column_period_s * 1000.0).round() as i64;
            self.spectrogram.data.drain(..drop * DOPPLER_BINS);
        }
    }
}

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::range::SlowTimeSeries;
use super::DspError;
use crate::radar::Activity;

/// Hamming window length in slow-time samples.
pub const WINDOW_LEN: usize = 128;
/// Hop between consecutive spectrogram columns.
pub const HOP: usize = 64;
/// Zero-padded FFT size; also the number of Doppler bins per column.
pub const DOPPLER_BINS: usize = 256;
/// Index of the zero-Doppler bin after centering.
pub const ZERO_DOPPLER_BIN: usize = DOPPLER_BINS / 2;

/// Symmetric Hamming window `0.54 - 0.46 cos(2 pi n / (M - 1))`.
pub fn hamming(len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    (0..len)
        .map(|n| 0.54 - 0.46 * (2.0 * PI * n as f64 / (len - 1) as f64).cos())
        .collect()
}

/// Joint time-frequency spectrogram: |STFT|^2 columns of 256 Doppler bins,
/// stored column after column. Bin 128 is zero Doppler; lower bins are
/// approaching, higher bins receding.
#[derive(Debug, Clone, PartialEq)]
pub struct JtfSpectrogram {
    pub column_period_s: f64,
    pub start_time_ms: i64,
    pub max_velocity_mps: f64,
    pub data: Vec<f32>,
    pub label: Option<Activity>,
    pub subject_id: Option<u32>,
    pub session_id: Option<u32>,
}

impl JtfSpectrogram {
    pub fn empty(column_period_s: f64, start_time_ms: i64, max_velocity_mps: f64) -> Self {
        Self {
            column_period_s,
            start_time_ms,
            max_velocity_mps,
            data: Vec::new(),
            label: None,
            subject_id: None,
            session_id: None,
        }
    }

    pub fn num_columns(&self) -> usize {
        self.data.len() / DOPPLER_BINS
    }

    pub fn column(&self, index: usize) -> &[f32] {
        &self.data[index * DOPPLER_BINS..(index + 1) * DOPPLER_BINS]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(DOPPLER_BINS)
    }

    /// Timestamp of the first slow-time sample of column `index`.
    pub fn column_time_ms(&self, index: usize) -> i64 {
        self.start_time_ms + (index as f64 * self.column_period_s * 1000.0).round() as i64
    }

    /// Velocity at the center of Doppler bin `bin`.
    pub fn bin_velocity(&self, bin: usize) -> f64 {
        (bin as f64 - ZERO_DOPPLER_BIN as f64) * 2.0 * self.max_velocity_mps / DOPPLER_BINS as f64
    }
}

/// Streaming STFT: accepts slow-time samples in arbitrary chunks and emits a
/// column every [`HOP`] samples once a full window is buffered.
pub struct StftStream {
    fft: Arc<dyn Fft<f64>>,
    window: Vec<f64>,
    pending: Vec<Complex64>,
    buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl Default for StftStream {
    fn default() -> Self {
        Self::new()
    }
}

impl StftStream {
    pub fn new() -> Self {
        let fft = FftPlanner::new().plan_fft_forward(DOPPLER_BINS);
        let scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        Self {
            fft,
            window: hamming(WINDOW_LEN),
            pending: Vec::with_capacity(4 * WINDOW_LEN),
            buf: vec![Complex64::new(0.0, 0.0); DOPPLER_BINS],
            scratch,
        }
    }

    /// Appends samples and pushes every completed column onto `out`. Returns
    /// the number of new columns.
    pub fn push(&mut self, samples: &[Complex64], out: &mut Vec<f32>) -> usize {
        self.pending.extend_from_slice(samples);
        let mut produced = 0;
        let mut offset = 0;
        while self.pending.len() - offset >= WINDOW_LEN {
            let seg = &self.pending[offset..offset + WINDOW_LEN];
            for (i, b) in self.buf.iter_mut().enumerate() {
                *b = if i < WINDOW_LEN {
                    seg[i] * self.window[i]
                } else {
                    Complex64::new(0.0, 0.0)
                };
            }
            self.fft.process_with_scratch(&mut self.buf, &mut self.scratch);
            out.extend(
                (0..DOPPLER_BINS).map(|k| self.buf[(k + ZERO_DOPPLER_BIN) % DOPPLER_BINS].norm_sqr() as f32),
            );
            offset += HOP;
            produced += 1;
        }
        self.pending.drain(..offset);
        produced
    }
}

/// Spectrogram of a slow-time series: 128-sample Hamming window, hop 64,
/// zero-padded 256-point FFT, magnitude squared, zero Doppler centered.
pub fn stft(series: &SlowTimeSeries, max_velocity_mps: f64) -> Result<JtfSpectrogram, DspError> {
    if series.samples.len() < WINDOW_LEN {
        return Err(DspError::TooShort {
            found: series.samples.len(),
            needed: WINDOW_LEN,
        });
    }
    let mut spec = JtfSpectrogram::empty(HOP as f64 * series.chirp_period_s, series.start_time_ms, max_velocity_mps);
    StftStream::new().push(&series.samples, &mut spec.data);
    Ok(spec)
}

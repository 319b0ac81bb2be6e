use std::num::NonZeroUsize;

use super::stft::{JtfSpectrogram, DOPPLER_BINS};
use crate::radar::Activity;

/// Time steps per classifier input (50 x 24.5 ms ~ 1.25 s).
pub const TIME_STEPS: usize = 50;
/// Default hop between consecutive windows, in spectrogram columns.
pub const DEFAULT_STRIDE: usize = 10;

/// One classifier input: 50 consecutive spectrogram columns, row-major by
/// time step.
#[derive(Debug, Clone, PartialEq)]
pub struct GruInputWindow {
    pub data: Vec<f32>,
    pub start_time_ms: i64,
    pub label: Option<Activity>,
    pub subject_id: Option<u32>,
    pub session_id: Option<u32>,
}

impl GruInputWindow {
    pub fn from_columns(columns: &[f32], start_time_ms: i64) -> Self {
        assert_eq!(columns.len(), TIME_STEPS * DOPPLER_BINS, "window must hold 50 x 256 values");
        Self {
            data: columns.to_vec(),
            start_time_ms,
            label: None,
            subject_id: None,
            session_id: None,
        }
    }

    pub fn step(&self, t: usize) -> &[f32] {
        &self.data[t * DOPPLER_BINS..(t + 1) * DOPPLER_BINS]
    }
}

/// First column of every window over `num_columns` columns.
pub fn window_starts(num_columns: usize, stride: NonZeroUsize) -> impl Iterator<Item = usize> {
    let count = if num_columns < TIME_STEPS {
        0
    } else {
        (num_columns - TIME_STEPS) / stride.get() + 1
    };
    (0..count).map(move |i| i * stride.get())
}

/// Slices the spectrogram into overlapping 50-column windows in time order.
pub fn frame_windows(spec: &JtfSpectrogram, stride: NonZeroUsize) -> Vec<GruInputWindow> {
    window_starts(spec.num_columns(), stride)
        .map(|start| {
            let data = &spec.data[start * DOPPLER_BINS..(start + TIME_STEPS) * DOPPLER_BINS];
            GruInputWindow {
                data: data.to_vec(),
                start_time_ms: spec.column_time_ms(start),
                label: spec.label,
                subject_id: spec.subject_id,
                session_id: spec.session_id,
            }
        })
        .collect()
}

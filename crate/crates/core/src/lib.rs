//! Radar-based in-home activity recognition.
//!
//! The crate covers the whole offline and per-room processing path:
//!
//! - [`radar`]: FMCW returns of scripted human activities,
//! - [`dsp`]: range FFT through to micro-Doppler spectrograms,
//! - [`gru`]: a stacked GRU classifier with its training loop,
//! - [`pad`]: per-room presence/absence detection,
//! - [`status`]: room routing, the event log and daily reports,
//! - [`dataset`]: labeled synthetic corpora and evaluation splits.

pub mod container;
pub mod dataset;
pub mod dsp;
pub mod gru;
pub mod pad;
pub mod radar;
pub mod status;

//! Presence/absence detection per room: residual energy of the
//! clutter-removed range profile over a decision horizon, compared against
//! a calibrated empty-room baseline and smoothed by majority vote.

mod file;

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::container::FormatError;
use crate::dsp::{clutter_removal, CouplingCalibration, DspError, RangeProfile};

pub use file::{load_calibration, read_rcal, save_calibration, write_rcal, RCAL_MAGIC};

/// Monitored rooms, one radar each.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Room {
    Bedroom,
    #[serde(rename = "livingroom")]
    LivingRoom,
    Washroom,
}

impl Room {
    pub const ALL: [Room; 3] = [Room::Bedroom, Room::LivingRoom, Room::Washroom];

    pub fn name(self) -> &'static str {
        match self {
            Room::Bedroom => "bedroom",
            Room::LivingRoom => "livingroom",
            Room::Washroom => "washroom",
        }
    }

    /// Wire code: 0 bedroom, 1 living room, 2 washroom.
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Room> {
        Self::ALL.get(code as usize).copied()
    }
}

impl fmt::Display for Room {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Room {
    type Err = PadError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s
            .trim()
            .to_ascii_lowercase()
            .chars()
            .filter(|c| !matches!(c, '_' | '-' | ' '))
            .collect();
        Self::ALL
            .iter()
            .copied()
            .find(|r| r.name() == norm)
            .ok_or_else(|| PadError::UnknownRoom(s.to_string()))
    }
}

#[derive(Debug, Error)]
pub enum PadError {
    #[error("no empty-room baseline for {0}")]
    NotCalibrated(Room),
    #[error("calibration needs at least {needed} frames, got {found}")]
    TooFewFrames { found: usize, needed: usize },
    #[error("unknown room {0:?}")]
    UnknownRoom(String),
    #[error("invalid detector config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Format(#[from] FormatError),
}

/// Detector thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PadConfig {
    /// Occupied when horizon energy exceeds `kappa` times the empty baseline.
    pub kappa: f64,
    pub horizon_frames: usize,
    /// Number of most recent horizons in the vote.
    pub vote_window: usize,
    /// Occupied votes needed within the window.
    pub vote_quorum: usize,
}

impl Default for PadConfig {
    fn default() -> Self {
        Self {
            kappa: 3.0,
            horizon_frames: 10,
            vote_window: 5,
            vote_quorum: 3,
        }
    }
}

impl PadConfig {
    pub fn validate(&self) -> Result<(), PadError> {
        if !(self.kappa > 0.0) || self.horizon_frames == 0 || self.vote_quorum == 0 || self.vote_quorum > self.vote_window
        {
            return Err(PadError::InvalidConfig(format!("{self:?}")));
        }
        Ok(())
    }
}

/// Empty-room statistics for one room.
#[derive(Debug, Clone, PartialEq)]
pub struct PadCalibration {
    pub room: Room,
    /// Mean residual energy of one empty horizon.
    pub baseline_mean: f64,
    pub baseline_std: f64,
    pub kappa: f64,
    pub horizon_frames: usize,
    /// Chirp-averaged empty-room profile for mutual-coupling reduction.
    pub coupling: Option<CouplingCalibration>,
}

impl PadCalibration {
    /// Energy threshold for a profile spanning `chirps` chirps. The baseline
    /// is scaled by length, so partial horizons can be judged too.
    pub fn threshold(&self, kappa: f64, chirps: usize, chirps_per_frame: usize) -> f64 {
        let horizon_chirps = (self.horizon_frames * chirps_per_frame) as f64;
        kappa * self.baseline_mean * chirps as f64 / horizon_chirps
    }
}

/// Result for one horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PresenceDecision {
    pub room: Room,
    pub occupied: bool,
    /// Residual energy `sum |x|^2` over the horizon.
    pub energy: f64,
    pub timestamp_ms: i64,
}

/// Decides one horizon. `recent` holds the raw (pre-vote) flags of the
/// preceding horizons, oldest first; missing history counts as vacant.
/// Returns the smoothed decision and this horizon's raw flag.
pub fn detect_presence(
    room: Room,
    profile: &RangeProfile,
    config: &PadConfig,
    calibration: Option<&PadCalibration>,
    recent: &[bool],
) -> Result<(PresenceDecision, bool), PadError> {
    let cal = calibration.ok_or(PadError::NotCalibrated(room))?;
    let energy = profile.energy();
    let raw = energy > cal.threshold(config.kappa, profile.num_chirps, profile.config.chirps_per_frame);
    let window = config.vote_window.saturating_sub(1);
    let prior = recent.iter().rev().take(window).filter(|&&v| v).count();
    let occupied = prior + usize::from(raw) >= config.vote_quorum;
    Ok((
        PresenceDecision {
            room,
            occupied,
            energy,
            timestamp_ms: profile.start_time_ms,
        },
        raw,
    ))
}

/// Residual energy of each full horizon in a raw (not yet clutter-removed)
/// profile. A trailing partial horizon is ignored.
pub fn horizon_energies(profile: &RangeProfile, horizon_frames: usize) -> Result<Vec<f64>, PadError> {
    let chunk = horizon_frames * profile.config.chirps_per_frame;
    let stride = profile.config.num_channels * profile.config.range_bins();
    let mut out = Vec::new();
    let mut start = 0;
    while start + chunk <= profile.num_chirps {
        let mut part = RangeProfile::zeros(profile.config.clone(), chunk, profile.start_time_ms);
        part.data
            .copy_from_slice(&profile.data[start * stride..(start + chunk) * stride]);
        out.push(clutter_removal(&part)?.energy());
        start += chunk;
    }
    Ok(out)
}

/// Builds the empty-room baseline from raw range profiles (before clutter
/// removal). Needs at least one full horizon, and never fewer than 10 frames.
pub fn calibrate_empty(
    room: Room,
    profiles: &[RangeProfile],
    config: &PadConfig,
) -> Result<PadCalibration, PadError> {
    config.validate()?;
    let first = profiles.first().ok_or(PadError::TooFewFrames {
        found: 0,
        needed: config.horizon_frames.max(10),
    })?;
    let joined = RangeProfile::concat(profiles)?;
    let n = first.config.chirps_per_frame;
    let frames = joined.num_chirps / n;
    let needed = config.horizon_frames.max(10);
    if frames < needed {
        return Err(PadError::TooFewFrames { found: frames, needed });
    }
    let energies = horizon_energies(&joined, config.horizon_frames)?;
    let mean = energies.iter().sum::<f64>() / energies.len() as f64;
    let var = energies.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / energies.len() as f64;
    let coupling = CouplingCalibration::from_profiles(profiles)?;
    Ok(PadCalibration {
        room,
        baseline_mean: mean,
        baseline_std: var.sqrt(),
        kappa: config.kappa,
        horizon_frames: config.horizon_frames,
        coupling: Some(coupling),
    })
}

/// Stateful per-room detector: buffers clutter-removed frames into
/// horizons and applies the vote.
#[derive(Debug, Clone)]
pub struct PresenceDetector {
    room: Room,
    config: PadConfig,
    calibration: Option<PadCalibration>,
    history: VecDeque<bool>,
    pending: Vec<RangeProfile>,
}

impl PresenceDetector {
    pub fn new(room: Room, config: PadConfig, calibration: Option<PadCalibration>) -> Result<Self, PadError> {
        config.validate()?;
        Ok(Self {
            room,
            config,
            calibration,
            history: VecDeque::with_capacity(config.vote_window),
            pending: Vec::with_capacity(config.horizon_frames),
        })
    }

    pub fn room(&self) -> Room {
        self.room
    }

    pub fn config(&self) -> &PadConfig {
        &self.config
    }

    pub fn calibration(&self) -> Option<&PadCalibration> {
        self.calibration.as_ref()
    }

    /// Decides a whole clutter-removed horizon.
    pub fn decide(&mut self, profile: &RangeProfile) -> Result<PresenceDecision, PadError> {
        let recent: Vec<bool> = self.history.iter().copied().collect();
        let (decision, raw) = detect_presence(self.room, profile, &self.config, self.calibration.as_ref(), &recent)?;
        if self.history.len() + 1 >= self.config.vote_window.max(1) {
            self.history.pop_front();
        }
        self.history.push_back(raw);
        Ok(decision)
    }

    /// Adds one clutter-removed frame; returns a decision when it completes
    /// a horizon.
    pub fn push_frame(&mut self, frame: RangeProfile) -> Result<Option<PresenceDecision>, PadError> {
        if self.calibration.is_none() {
            return Err(PadError::NotCalibrated(self.room));
        }
        self.pending.push(frame);
        if self.pending.len() < self.config.horizon_frames {
            return Ok(None);
        }
        let horizon = RangeProfile::concat(&self.pending)?;
        self.pending.clear();
        self.decide(&horizon).map(Some)
    }
}

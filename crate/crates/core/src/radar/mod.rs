//! FMCW radar returns for scripted scenes of point scatterers.

mod config;
pub mod rcub;
mod scene;
mod synth;

use thiserror::Error;

pub use config::{derive_params, ChirpConfig, DerivedParams, SPEED_OF_LIGHT};
pub use scene::{
    generate_motion, generate_motion_for, generate_motion_named, Activity, BodyPart, BodyPath, Kinematics,
    MotionScript, Oscillation, Scatterer, SubjectProfile,
};
pub use synth::{simulate, steering_phase, synthesize_chirp, ChannelMismatch, RadarCube, Simulator};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RadarError {
    #[error("invalid chirp config: {0}")]
    InvalidConfig(String),
    #[error("unknown activity {0:?}")]
    UnknownActivity(String),
    #[error("duration {0} s does not cover a frame")]
    InvalidDuration(f64),
    #[error("scatterer at {range_m:.3} m is outside (0, {max_range_m:.3}) m")]
    RangeOutOfBound { range_m: f64, max_range_m: f64 },
    #[error("radial velocity {velocity_mps:.3} m/s exceeds unambiguous limit {max_velocity_mps:.3} m/s")]
    VelocityAmbiguous { velocity_mps: f64, max_velocity_mps: f64 },
}

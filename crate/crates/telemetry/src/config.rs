//! Per-process JSON configuration. Any top-level key can be overridden by
//! an environment variable named after it in upper snake case
//! (`model_path` -> `MODEL_PATH`). Override values are parsed as JSON when
//! possible, otherwise taken as strings; list keys also accept
//! comma-separated values.

use std::path::{Path, PathBuf};

use radaract_core::pad::Room;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid config: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TelemetryConfig {
    pub rooms: Vec<Room>,
    /// Ingest listener of the service.
    pub bind: String,
    /// Report query listener of the service.
    pub report_bind: String,
    /// Service address edges connect to.
    pub connect: String,
    pub model_path: PathBuf,
    pub store_path: PathBuf,
    /// Directory holding `<room>.json` calibrations for edges.
    pub calibration_dir: PathBuf,
    pub kappa: f64,
    /// Spectrogram columns between consecutive jtf_window messages.
    pub stride: usize,
    /// Status intervals longer than this are reported as unknown.
    pub max_gap_ms: i64,
    /// Event-time length of one decision horizon; the newest event is
    /// assumed to hold this long in reports.
    pub horizon_ms: i64,
    /// Multiplier from sensor time to event timestamps (replays of a
    /// compressed day use values above 1).
    pub time_scale: f64,
}

impl Default for TelemetryConfig {
    fn default() -> Self {
        Self {
            rooms: Room::ALL.to_vec(),
            bind: "127.0.0.1:7400".into(),
            report_bind: "127.0.0.1:7401".into(),
            connect: "127.0.0.1:7400".into(),
            model_path: "model.grum".into(),
            store_path: "events.jsonl".into(),
            calibration_dir: "calibration".into(),
            kappa: 3.0,
            stride: 10,
            max_gap_ms: 5000,
            horizon_ms: 980,
            time_scale: 1.0,
        }
    }
}

impl TelemetryConfig {
    /// Reads `path` (or starts from defaults) and applies the process
    /// environment.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        Self::load_with_env(path, |k| std::env::var(k).ok())
    }

    pub fn load_with_env(path: Option<&Path>, env: impl Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
        let mut value = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Io {
                    path: p.to_path_buf(),
                    source,
                })?;
                serde_json::from_str(&text)?
            }
            None => Value::Object(Default::default()),
        };
        let defaults = serde_json::to_value(Self::default())?;
        let (Value::Object(map), Value::Object(defaults)) = (&mut value, defaults) else {
            return Err(ConfigError::Invalid("top level must be an object".into()));
        };
        for (key, default) in &defaults {
            let Some(raw) = env(&key.to_uppercase()) else {
                continue;
            };
            let parsed = match serde_json::from_str::<Value>(&raw) {
                Ok(v) if !default.is_string() || v.is_string() => v,
                _ if default.is_array() => Value::Array(raw.split(',').map(|s| Value::String(s.trim().into())).collect()),
                _ => Value::String(raw),
            };
            map.insert(key.clone(), parsed);
        }
        let cfg: Self = serde_json::from_value(value)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.kappa > 0.0) || self.stride == 0 || self.max_gap_ms <= 0 || self.horizon_ms <= 0 || !(self.time_scale > 0.0) {
            return Err(ConfigError::Invalid(
                "kappa, stride, max_gap_ms, horizon_ms and time_scale must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn calibration_path(&self, room: Room) -> PathBuf {
        self.calibration_dir.join(format!("{}.json", room.name()))
    }
}

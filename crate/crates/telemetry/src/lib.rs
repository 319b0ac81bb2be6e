//! Edge/aggregator split over the AIGM framing protocol.

pub mod config;
pub mod edge;
pub mod scenario;
pub mod service;
pub mod wire;

pub use config::{ConfigError, TelemetryConfig};
pub use edge::{edge_run, Backoff, EdgeOptions, EdgeStats, FrameSource};
pub use scenario::{empty_room_calibration, DayScript, DaySegment, ScheduleSource};
pub use service::{query_report, report_for, serve, ReportResponse, ServiceError, ServiceHandle, ServiceOptions};
pub use wire::{MsgType, WireError, WireMessage};

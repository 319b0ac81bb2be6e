//! Room routing, living-room activity dispatch, the durable event log and
//! daily reports.

mod report;
mod store;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::pad::{PresenceDecision, Room};
use crate::radar::Activity;

pub use report::{accumulate_report, current_status, day_bounds_ms, CurrentStatus, DailyReport, ReportOptions};
pub use store::EventStore;

/// Version written into every event line and report.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum StatusError {
    #[error("no presence decision for {0}")]
    MissingDecision(Room),
    #[error("living room occupied but no activity label available")]
    MissingLabel,
    #[error("unknown activity index {0}")]
    UnknownActivity(usize),
    #[error("event {index} is earlier than its predecessor")]
    UnsortedEvents { index: usize },
    #[error("event at {found} ms does not follow the last stored event at {last} ms")]
    OutOfOrder { last: i64, found: i64 },
    #[error("invalid event: {0}")]
    InvalidEvent(String),
    #[error("event log line {line}: {source}")]
    Corrupt { line: usize, source: serde_json::Error },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    InBed,
    InWashroom,
    OutOfHome,
    Empty,
    Sedentary,
    Washing,
    Vacuuming,
    InPlaceMovement,
    Walking,
}

impl Status {
    pub const ALL: [Status; 9] = [
        Status::InBed,
        Status::InWashroom,
        Status::OutOfHome,
        Status::Empty,
        Status::Sedentary,
        Status::Washing,
        Status::Vacuuming,
        Status::InPlaceMovement,
        Status::Walking,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Status::InBed => "in_bed",
            Status::InWashroom => "in_washroom",
            Status::OutOfHome => "out_of_home",
            Status::Empty => "empty",
            Status::Sedentary => "sedentary",
            Status::Washing => "washing",
            Status::Vacuuming => "vacuuming",
            Status::InPlaceMovement => "in_place_movement",
            Status::Walking => "walking",
        }
    }

    /// Room an event with this status must carry; `None` is "out of home".
    pub fn room(self) -> Option<Room> {
        match self {
            Status::InBed => Some(Room::Bedroom),
            Status::InWashroom => Some(Room::Washroom),
            Status::OutOfHome => None,
            _ => Some(Room::LivingRoom),
        }
    }

    /// The living-room class this status came from, if any.
    pub fn activity(self) -> Option<Activity> {
        Activity::ALL.into_iter().find(|&a| map_class_to_status(a) == self)
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Status {
    type Err = StatusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|st| st.name() == s.trim())
            .ok_or_else(|| StatusError::InvalidEvent(format!("unknown status {s:?}")))
    }
}

/// Living-room classifier output to status; a bijection onto the six
/// living-room statuses.
pub fn map_class_to_status(label: Activity) -> Status {
    match label {
        Activity::Empty => Status::Empty,
        Activity::Sedentary => Status::Sedentary,
        Activity::Washing => Status::Washing,
        Activity::Vacuuming => Status::Vacuuming,
        Activity::InPlaceMovement => Status::InPlaceMovement,
        Activity::Walking => Status::Walking,
    }
}

/// Same as [`map_class_to_status`] for a raw class index.
pub fn map_class_index(index: usize) -> Result<Status, StatusError> {
    Activity::from_index(index)
        .map(map_class_to_status)
        .map_err(|_| StatusError::UnknownActivity(index))
}

/// Stand-in for gait analysis on walking events: when the walk started and
/// how many windows it has lasted so far.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GaitRecord {
    pub start_ms: i64,
    pub stop_ms: i64,
    pub windows: u32,
}

/// One line of the event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomEvent {
    #[serde(default = "schema_version")]
    pub v: u32,
    pub ts_ms: i64,
    #[serde(with = "room_or_none")]
    pub room: Option<Room>,
    pub status: Status,
    pub confidence: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gait: Option<GaitRecord>,
}

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

impl RoomEvent {
    /// Event whose room follows from the status.
    pub fn new(ts_ms: i64, status: Status, confidence: f64) -> Self {
        Self {
            v: SCHEMA_VERSION,
            ts_ms,
            room: status.room(),
            status,
            confidence,
            gait: None,
        }
    }

    pub fn validate(&self) -> Result<(), StatusError> {
        if self.room != self.status.room() {
            return Err(StatusError::InvalidEvent(format!(
                "status {} cannot occur in room {:?}",
                self.status, self.room
            )));
        }
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(StatusError::InvalidEvent(format!("confidence {} outside [0, 1]", self.confidence)));
        }
        Ok(())
    }
}

mod room_or_none {
    use super::*;

    pub fn serialize<S: Serializer>(room: &Option<Room>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(room.map(Room::name).unwrap_or("none"))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Room>, D::Error> {
        let s = String::deserialize(d)?;
        if s == "none" {
            return Ok(None);
        }
        s.parse().map(Some).map_err(serde::de::Error::custom)
    }
}

/// Routes one set of per-room decisions to an event. Precedence on
/// multi-occupancy is washroom, then bedroom, then living room. The event
/// carries the latest decision timestamp.
pub fn route_rooms(
    decisions: &[PresenceDecision],
    living_room_label: Option<(Activity, f64)>,
) -> Result<RoomEvent, StatusError> {
    let find = |room: Room| {
        decisions
            .iter()
            .find(|d| d.room == room)
            .ok_or(StatusError::MissingDecision(room))
    };
    let bed = find(Room::Bedroom)?;
    let living = find(Room::LivingRoom)?;
    let wash = find(Room::Washroom)?;
    let ts = bed.timestamp_ms.max(living.timestamp_ms).max(wash.timestamp_ms);
    let occupied = [bed.occupied, living.occupied, wash.occupied];
    if occupied.iter().filter(|&&o| o).count() > 1 {
        log::warn!("multi-room occupancy at {ts} ms (bed, living, wash) = {occupied:?}");
    }
    let event = if wash.occupied {
        RoomEvent::new(ts, Status::InWashroom, 1.0)
    } else if bed.occupied {
        RoomEvent::new(ts, Status::InBed, 1.0)
    } else if living.occupied {
        let (label, conf) = living_room_label.ok_or(StatusError::MissingLabel)?;
        RoomEvent::new(ts, map_class_to_status(label), conf.clamp(0.0, 1.0))
    } else {
        RoomEvent::new(ts, Status::OutOfHome, 1.0)
    };
    Ok(event)
}

/// Holds back a value until it has been seen `required` times in a row.
#[derive(Debug, Clone)]
pub struct Debouncer<T> {
    required: usize,
    candidate: Option<(T, usize)>,
    stable: Option<T>,
}

impl<T: Copy + PartialEq> Debouncer<T> {
    pub fn new(required: usize) -> Self {
        Self {
            required: required.max(1),
            candidate: None,
            stable: None,
        }
    }

    /// Feeds one observation and returns the current stable value.
    pub fn push(&mut self, value: T) -> Option<T> {
        let count = match self.candidate {
            Some((v, n)) if v == value => n + 1,
            _ => 1,
        };
        self.candidate = Some((value, count));
        if count >= self.required {
            self.stable = Some(value);
        }
        self.stable
    }

    pub fn stable(&self) -> Option<T> {
        self.stable
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decisions(bed: bool, living: bool, wash: bool) -> Vec<PresenceDecision> {
        [(Room::Bedroom, bed), (Room::LivingRoom, living), (Room::Washroom, wash)]
            .into_iter()
            .map(|(room, occupied)| PresenceDecision {
                room,
                occupied,
                energy: 0.0,
                timestamp_ms: 1000,
            })
            .collect()
    }

    #[test]
    fn routing_examples() {
        let e = route_rooms(&decisions(true, false, false), None).unwrap();
        assert_eq!((e.status, e.room), (Status::InBed, Some(Room::Bedroom)));
        let e = route_rooms(&decisions(false, false, false), None).unwrap();
        assert_eq!((e.status, e.room), (Status::OutOfHome, None));
        let e = route_rooms(&decisions(false, true, false), Some((Activity::Walking, 0.9))).unwrap();
        assert_eq!((e.status, e.room, e.confidence), (Status::Walking, Some(Room::LivingRoom), 0.9));
        e.validate().unwrap();
    }

    #[test]
    fn precedence_and_errors() {
        let e = route_rooms(&decisions(true, true, true), Some((Activity::Sedentary, 0.5))).unwrap();
        assert_eq!(e.status, Status::InWashroom);
        let e = route_rooms(&decisions(true, true, false), Some((Activity::Sedentary, 0.5))).unwrap();
        assert_eq!(e.status, Status::InBed);
        let mut d = decisions(false, false, false);
        d.remove(2);
        assert!(matches!(route_rooms(&d, None), Err(StatusError::MissingDecision(Room::Washroom))));
        assert!(matches!(
            route_rooms(&decisions(false, true, false), None),
            Err(StatusError::MissingLabel)
        ));
    }

    #[test]
    fn class_mapping_is_bijective() {
        for a in Activity::ALL {
            let s = map_class_to_status(a);
            assert_eq!(s.activity(), Some(a));
            assert_eq!(s.name(), a.name());
            assert_eq!(s.room(), Some(Room::LivingRoom));
        }
        assert_eq!(map_class_index(0).unwrap(), Status::Empty);
        assert_eq!(map_class_index(5).unwrap(), Status::Walking);
        assert!(matches!(map_class_index(6), Err(StatusError::UnknownActivity(6))));
    }

    #[test]
    fn event_json_shape() {
        let e = RoomEvent::new(5, Status::OutOfHome, 1.0);
        let j = serde_json::to_string(&e).unwrap();
        assert_eq!(j, r#"{"v":1,"ts_ms":5,"room":"none","status":"out_of_home","confidence":1.0}"#);
        let back: RoomEvent = serde_json::from_str(&j).unwrap();
        assert_eq!(back, e);
        let mut bad = RoomEvent::new(5, Status::InBed, 1.0);
        bad.room = Some(Room::Washroom);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn debouncer_needs_two_in_a_row() {
        let mut d = Debouncer::new(2);
        assert_eq!(d.push(1), None);
        assert_eq!(d.push(1), Some(1));
        assert_eq!(d.push(2), Some(1));
        assert_eq!(d.push(1), Some(1));
        assert_eq!(d.push(2), Some(1));
        assert_eq!(d.push(2), Some(2));
    }
}

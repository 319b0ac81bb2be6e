use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{RoomEvent, Status, StatusError, SCHEMA_VERSION};

const MS_PER_MINUTE: f64 = 60_000.0;

/// How event intervals are turned into durations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ReportOptions {
    /// An interval longer than this counts as unknown time.
    pub max_gap_ms: Option<i64>,
    /// Where the last event's interval ends. Defaults to the end of the day.
    pub end_ms: Option<i64>,
}

/// Per-day totals. Minutes are exact: integer milliseconds divided by 60000.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyReport {
    pub v: u32,
    pub date: String,
    pub sleep_minutes: f64,
    pub washroom_visits: u32,
    pub washroom_minutes: f64,
    pub out_of_home_minutes: f64,
    pub sedentary_minutes: f64,
    /// Washing, vacuuming and in-place movement.
    pub active_minutes: f64,
    pub walking_minutes: f64,
    pub unknown_minutes: f64,
    pub per_status_minutes: BTreeMap<String, f64>,
    pub per_status_ms: BTreeMap<String, i64>,
    pub unknown_ms: i64,
    pub current_status: String,
}

impl DailyReport {
    pub fn status_ms(&self, status: Status) -> i64 {
        self.per_status_ms.get(status.name()).copied().unwrap_or(0)
    }
}

/// Latest status and how long ago it was reported.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurrentStatus {
    pub status: Option<Status>,
    pub age_ms: Option<i64>,
}

/// `[start, end)` of a UTC calendar day in epoch milliseconds.
pub fn day_bounds_ms(date: NaiveDate) -> (i64, i64) {
    let start = date.and_hms_opt(0, 0, 0).unwrap().and_utc().timestamp_millis();
    (start, start + 86_400_000)
}

fn check_sorted(events: &[RoomEvent]) -> Result<(), StatusError> {
    match events.windows(2).position(|w| w[1].ts_ms < w[0].ts_ms) {
        Some(i) => Err(StatusError::UnsortedEvents { index: i + 1 }),
        None => Ok(()),
    }
}

/// Sums status durations over `date`. Each event's status holds until the
/// next event; the last holds until `options.end_ms` or the end of the day.
/// Intervals longer than `options.max_gap_ms` are unknown, as is time before
/// the first event. A washroom visit is an in-washroom interval starting in
/// the day whose preceding interval was something else (or unknown).
pub fn accumulate_report(events: &[RoomEvent], date: NaiveDate, options: &ReportOptions) -> Result<DailyReport, StatusError> {
    check_sorted(events)?;
    let (ds, de) = day_bounds_ms(date);
    let mut per_status: BTreeMap<Status, i64> = BTreeMap::new();
    let mut visits = 0u32;
    let mut prev: Option<Status> = None;
    for (i, e) in events.iter().enumerate() {
        let start = e.ts_ms;
        let end = match events.get(i + 1) {
            Some(next) => next.ts_ms,
            None => options.end_ms.unwrap_or(de).max(start),
        };
        if end == start {
            continue;
        }
        let status = match options.max_gap_ms {
            Some(g) if end - start > g => None,
            _ => Some(e.status),
        };
        if status == Some(Status::InWashroom) && prev != status && (ds..de).contains(&start) {
            visits += 1;
        }
        prev = status;
        let overlap = end.min(de) - start.max(ds);
        if let (Some(s), true) = (status, overlap > 0) {
            *per_status.entry(s).or_default() += overlap;
        }
    }
    let known: i64 = per_status.values().sum();
    let unknown_ms = (de - ds) - known;
    let ms = |s: Status| per_status.get(&s).copied().unwrap_or(0);
    let minutes = |v: i64| v as f64 / MS_PER_MINUTE;
    let current = events
        .iter()
        .rev()
        .find(|e| e.ts_ms < de)
        .map(|e| e.status.name())
        .unwrap_or("unknown");
    Ok(DailyReport {
        v: SCHEMA_VERSION,
        date: date.format("%Y-%m-%d").to_string(),
        sleep_minutes: minutes(ms(Status::InBed)),
        washroom_visits: visits,
        washroom_minutes: minutes(ms(Status::InWashroom)),
        out_of_home_minutes: minutes(ms(Status::OutOfHome)),
        sedentary_minutes: minutes(ms(Status::Sedentary)),
        active_minutes: minutes(ms(Status::Washing) + ms(Status::Vacuuming) + ms(Status::InPlaceMovement)),
        walking_minutes: minutes(ms(Status::Walking)),
        unknown_minutes: minutes(unknown_ms),
        per_status_minutes: per_status.iter().map(|(s, &v)| (s.name().to_string(), minutes(v))).collect(),
        per_status_ms: per_status.iter().map(|(s, &v)| (s.name().to_string(), v)).collect(),
        unknown_ms,
        current_status: current.to_string(),
    })
}

/// Status of the last event and its age at `now_ms`.
pub fn current_status(events: &[RoomEvent], now_ms: i64) -> CurrentStatus {
    match events.last() {
        Some(e) => CurrentStatus {
            status: Some(e.status),
            age_ms: Some(now_ms - e.ts_ms),
        },
        None => CurrentStatus {
            status: None,
            age_ms: None,
        },
    }
}

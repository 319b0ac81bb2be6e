use std::collections::BTreeMap;

use chrono::NaiveDate;
use radaract_core::status::{accumulate_report, day_bounds_ms, ReportOptions, RoomEvent, Status};
use radaract_telemetry::wire::{read_message, WireError, WireMessage};
use radaract_telemetry::MsgType;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Checks, Context, Outcome};

/// Frame layout written out by hand: magic, version, type, room, reserved,
/// u64 LE timestamp, u32 LE payload length, payload.
fn frame(version: u8, kind: u8, room: u8, ts: u64, payload: &[u8]) -> Vec<u8> {
    let mut b = b"AIGM".to_vec();
    b.extend_from_slice(&[version, kind, room, 0]);
    b.extend_from_slice(&ts.to_le_bytes());
    b.extend_from_slice(&(payload.len() as u32).to_le_bytes());
    b.extend_from_slice(payload);
    b
}

fn random_frame(rng: &mut ChaCha8Rng) -> (u8, u8, u64, Vec<u8>) {
    let kind = rng.random_range(1u8..=4);
    let room = rng.random_range(0u8..3);
    let ts: u64 = rng.random();
    let payload = match kind {
        1 => vec![rng.random_range(0u8..2)],
        2 => (0..51_200).map(|_| rng.random()).collect(),
        3 => vec![rng.random_range(0u8..9), rng.random_range(0u8..=100)],
        _ => Vec::new(),
    };
    (kind, room, ts, payload)
}

fn class_of(r: &Result<WireMessage, WireError>) -> String {
    match r {
        Ok(_) => "ok".into(),
        Err(e) => format!("{e:?}").split(['(', ' ', '{']).next().unwrap_or("").to_string(),
    }
}

pub fn wire_protocol(_: &mut Context) -> Outcome {
    let mut checks = Checks::default();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut bad = 0;
    for _ in 0..1000 {
        let (kind, room, ts, payload) = random_frame(&mut rng);
        let bytes = frame(1, kind, room, ts, &payload);
        let ok = match WireMessage::decode(&bytes) {
            Ok(m) => {
                m.msg_type as u8 == kind
                    && m.room.code() == room
                    && m.timestamp_ms == ts
                    && m.payload == payload
                    && m.encode().ok().as_deref() == Some(&bytes[..])
                    && match m.msg_type {
                        MsgType::Presence => m.occupied().is_ok(),
                        MsgType::StatusResult => m.status().is_ok(),
                        MsgType::JtfWindow => m.jtf_values().map(|v| v.len() == 50 * 256).unwrap_or(false),
                        MsgType::Heartbeat => true,
                    }
            }
            Err(_) => false,
        };
        bad += usize::from(!ok);
    }
    checks.check(bad == 0, format!("1000 random frames round-trip ({bad} mismatches)"));

    let presence = frame(1, 1, 0, 42, &[1]);
    let with = |i: usize, v: u8| {
        let mut b = presence.clone();
        b[i] = v;
        b
    };
    let mut long = with(16, 2);
    long.push(0);
    let cases: Vec<(&str, Vec<u8>, &str)> = vec![
        ("magic XXXX", [b"XXXX".as_slice(), &presence[4..]].concat(), "BadMagic"),
        ("version 2", with(4, 2), "UnsupportedVersion"),
        ("type 0x7F", with(5, 0x7F), "UnknownType"),
        ("room 3", with(6, 3), "UnknownRoom"),
        ("declared length 2 for presence", long, "LengthMismatch"),
        ("truncated payload", presence[..20].to_vec(), "LengthMismatch"),
        ("truncated header", presence[..11].to_vec(), "LengthMismatch"),
    ];
    let mut wrong = Vec::new();
    for (name, bytes, expected) in &cases {
        let got = class_of(&WireMessage::decode(bytes));
        if got != *expected {
            wrong.push(format!("{name}: {got}"));
        }
    }
    let flag = WireMessage::decode(&frame(1, 1, 0, 0, &[7])).map_err(|e| e.to_string())?;
    if !matches!(flag.occupied(), Err(WireError::InvalidPayload(_))) {
        wrong.push("presence flag 7 accepted".into());
    }
    let code = WireMessage::decode(&frame(1, 3, 0, 0, &[9, 50])).map_err(|e| e.to_string())?;
    if !matches!(code.status(), Err(WireError::InvalidPayload(_))) {
        wrong.push("status code 9 accepted".into());
    }
    let rt = tokio::runtime::Builder::new_current_thread().build().map_err(|e| e.to_string())?;
    let closed = rt.block_on(async { read_message(&mut &[][..]).await });
    if !matches!(closed, Err(WireError::Closed)) {
        wrong.push(format!("empty stream: {}", class_of(&closed)));
    }
    checks.check(wrong.is_empty(), format!("{} malformed-frame classes {wrong:?}", cases.len() + 3));

    let golden: [u8; 20] = [0x41, 0x49, 0x47, 0x4D, 0x01, 0x04, 0x01, 0x00, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0];
    let hb = WireMessage::heartbeat(radaract_core::pad::Room::LivingRoom, 0).encode().map_err(|e| e.to_string())?;
    checks.check(hb == golden, "heartbeat golden bytes");
    checks.finish()
}

const SEC: i64 = 1000;

fn day() -> NaiveDate {
    NaiveDate::from_ymd_opt(2025, 1, 15).unwrap()
}

fn random_stream(rng: &mut ChaCha8Rng) -> (Vec<RoomEvent>, ReportOptions) {
    let (ds, _) = day_bounds_ms(day());
    let n = rng.random_range(0..80);
    let mut t = ds + rng.random_range(-4 * 3600..20 * 3600) * SEC;
    let mut events = Vec::with_capacity(n);
    for _ in 0..n {
        let s = Status::ALL[rng.random_range(0..Status::ALL.len())];
        events.push(RoomEvent::new(t, s, rng.random_range(0.0..=1.0)));
        t += rng.random_range(1..2400) * SEC;
    }
    let opts = ReportOptions {
        max_gap_ms: rng.random_bool(0.7).then(|| rng.random_range(30..3600) * SEC),
        end_ms: events
            .last()
            .filter(|_| rng.random_bool(0.7))
            .map(|e| e.ts_ms + rng.random_range(0..3600) * SEC),
    };
    (events, opts)
}

/// Labels every second on its own and counts entries into the washroom that
/// happen inside the day.
fn sweep(events: &[RoomEvent], opts: &ReportOptions) -> (BTreeMap<Status, i64>, u32) {
    let (ds, de) = day_bounds_ms(day());
    let mut totals = BTreeMap::new();
    let mut visits = 0;
    let mut prev = None;
    let mut t = events.first().map_or(ds, |e| e.ts_ms.min(ds));
    let mut i = 0;
    while t < de {
        while i + 1 < events.len() && events[i + 1].ts_ms <= t {
            i += 1;
        }
        let status = events.get(i).filter(|e| e.ts_ms <= t).and_then(|e| {
            let end = match events.get(i + 1) {
                Some(n) => n.ts_ms,
                None => opts.end_ms.unwrap_or(de).max(e.ts_ms),
            };
            let too_long = opts.max_gap_ms.is_some_and(|g| end - e.ts_ms > g);
            (t < end && !too_long).then_some(e.status)
        });
        if t >= ds {
            if let Some(s) = status {
                *totals.entry(s).or_insert(0) += SEC;
                if s == Status::InWashroom && prev != Some(s) {
                    visits += 1;
                }
            }
        }
        prev = status;
        t += SEC;
    }
    (totals, visits)
}

pub fn report_oracle(_: &mut Context) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut mismatches = Vec::new();
    let mut events_total = 0;
    for stream in 0..100 {
        let (events, opts) = random_stream(&mut rng);
        events_total += events.len();
        let r = accumulate_report(&events, day(), &opts).map_err(|e| e.to_string())?;
        let (totals, visits) = sweep(&events, &opts);
        let same = Status::ALL
            .iter()
            .all(|&s| r.status_ms(s) == totals.get(&s).copied().unwrap_or(0))
            && r.washroom_visits == visits
            && r.unknown_ms == 86_400_000 - totals.values().sum::<i64>();
        if !same {
            mismatches.push(stream);
        }
    }
    let mut checks = Checks::default();
    checks.check(
        mismatches.is_empty(),
        format!("100 streams ({events_total} events) equal the per-second sweep, mismatches {mismatches:?}"),
    );
    checks.finish()
}

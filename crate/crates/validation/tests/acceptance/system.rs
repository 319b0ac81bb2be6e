use std::collections::BTreeSet;
use std::path::PathBuf;
use std::time::Duration;

use chrono::NaiveDate;
use radaract_core::gru::grum::{load_model, save_model};
use radaract_core::gru::GruModel;
use radaract_core::pad::{PadConfig, Room};
use radaract_core::radar::{ChirpConfig, SubjectProfile};
use radaract_core::status::{day_bounds_ms, EventStore, RoomEvent, Status};
use radaract_telemetry::{edge_run, empty_room_calibration, query_report, serve, DayScript, EdgeOptions, ServiceOptions};

use crate::{Checks, Context, Outcome};

const TIME_SCALE: f64 = 60.0;
/// Wall-clock seconds after which the service is stopped and restarted.
const RESTART_AFTER_S: u64 = 55;
const OUTAGE_S: u64 = 3;

fn model_file() -> Option<PathBuf> {
    std::env::var_os("ACCEPTANCE_MODEL").map(PathBuf::from)
}

/// Keeps the classifier between separate runs when `ACCEPTANCE_MODEL` names
/// a file.
pub fn remember_model(model: &GruModel<f32>) {
    if let Some(path) = model_file() {
        if let Err(e) = save_model(&path, model) {
            eprintln!("could not save {}: {e}", path.display());
        }
    }
}

fn classifier(ctx: &Context) -> Result<GruModel<f32>, String> {
    if let Some(m) = &ctx.model {
        return Ok(m.clone());
    }
    match model_file() {
        Some(path) if path.exists() => load_model(&path).map_err(|e| e.to_string()),
        _ => Err("no classifier: run criterion 5 first or set ACCEPTANCE_MODEL".into()),
    }
}

pub fn scripted_day(ctx: &mut Context) -> Outcome {
    let model = classifier(ctx)?;
    let dir = ctx.scratch().join("system");
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let rt = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(2)
        .enable_all()
        .build()
        .map_err(|e| e.to_string())?;
    rt.block_on(run_day(model, dir))
}

async fn run_day(model: GruModel<f32>, dir: PathBuf) -> Outcome {
    let e = |e: &dyn std::fmt::Display| e.to_string();
    let date = NaiveDate::from_ymd_opt(2025, 3, 10).unwrap();
    let start_ms = day_bounds_ms(date).0 + 6 * 3_600_000;
    let day = DayScript::two_hour_day(start_ms);
    let config = ChirpConfig::compact();
    let pad = PadConfig::default();
    let horizon_ms = (pad.horizon_frames as f64 * config.frame_period_s * 1000.0 * TIME_SCALE).round() as i64;

    let store_path = dir.join("events.jsonl");
    let mut opts = ServiceOptions {
        bind: "127.0.0.1:0".into(),
        report_bind: "127.0.0.1:0".into(),
        store_path: store_path.clone(),
        rooms: Room::ALL.to_vec(),
        max_gap_ms: 5 * horizon_ms,
        hold_last_ms: horizon_ms,
    };
    let service = serve(opts.clone(), model.clone()).await.map_err(|x| e(&x))?;
    opts.bind = service.ingest_addr.to_string();
    opts.report_bind = service.report_addr.to_string();

    let mut edges = Vec::new();
    for room in Room::ALL {
        let cal = empty_room_calibration(room, &config, &pad, 100, 700 + room.code() as u64).map_err(|x| e(&x))?;
        let source = day
            .room_source(room, &config, TIME_SCALE, 42, SubjectProfile::for_subject(0))
            .map_err(|x| e(&x))?;
        let mut eo = EdgeOptions::new(room, opts.bind.clone(), cal);
        eo.time_scale = TIME_SCALE;
        eo.pace = Some(1.0);
        edges.push(tokio::spawn(edge_run(eo, Box::new(source))));
    }

    tokio::time::sleep(Duration::from_secs(RESTART_AFTER_S)).await;
    let before_restart = service.events();
    service.shutdown().await;
    tokio::time::sleep(Duration::from_secs(OUTAGE_S)).await;
    let service = serve(opts.clone(), model).await.map_err(|x| e(&x))?;

    let mut acked = BTreeSet::new();
    let mut dropped = 0;
    for h in edges {
        let stats = h.await.map_err(|x| e(&x))?.map_err(|x| e(&x))?;
        dropped += stats.dropped;
        acked.extend(stats.acks.iter().map(|a| a.timestamp_ms as i64));
    }
    let response = query_report(&opts.report_bind, date).await.map_err(|x| e(&x))?;
    let live = service.events();
    service.shutdown().await;
    let stored = EventStore::open(&store_path).map_err(|x| e(&x))?.events().to_vec();

    let mut checks = Checks::default();
    let kept: BTreeSet<i64> = stored.iter().map(|ev| ev.ts_ms).collect();
    let lost = acked.iter().filter(|ts| !kept.contains(ts)).count();
    checks.check(
        lost == 0 && stored.starts_with(&before_restart) && stored == live,
        format!(
            "restart after {} events: {} acked, {lost} lost, {} stored, {dropped} dropped at the edge",
            before_restart.len(),
            acked.len(),
            stored.len()
        ),
    );

    let report = &response.report;
    let truth = day.truth_ms();
    let first = day.segments.first().map(|s| s.status);
    let last = day.segments.last().map(|s| s.status);
    let mut off = Vec::new();
    let mut all_ok = true;
    for s in Status::ALL {
        let boundaries = day.transitions(s) + usize::from(first == Some(s)) + usize::from(last == Some(s));
        let tolerance = 2 * horizon_ms * boundaries as i64;
        let want = truth.get(&s).copied().unwrap_or(0);
        let got = report.status_ms(s);
        let ok = (got - want).abs() <= tolerance;
        if !ok || want > 0 || got > 0 {
            off.push(format!(
                "{}{} {:.1}/{:.1} min (tol {:.1})",
                if ok { "" } else { "FAILED " },
                s.name(),
                got as f64 / 60_000.0,
                want as f64 / 60_000.0,
                tolerance as f64 / 60_000.0
            ));
        }
        all_ok &= ok;
    }
    checks.check(all_ok, format!("status minutes reported/scripted: {}", off.join(", ")));
    let far = far_mismatches(&day, &stored, start_ms, 2 * horizon_ms);
    checks.note(format!("mislabelled stretches more than 2 horizons after a boundary: {far:?}"));
    checks.check(
        report.washroom_visits == day.washroom_visits(),
        format!("washroom visits {} of {}", report.washroom_visits, day.washroom_visits()),
    );
    checks.finish()
}

/// Seconds whose reported status differs from the script and that lie more
/// than `reach` from every scripted boundary, grouped into stretches.
fn far_mismatches(day: &DayScript, events: &[RoomEvent], start_ms: i64, reach: i64) -> Vec<String> {
    let mut bounds = vec![start_ms];
    let mut truth = Vec::new();
    for seg in &day.segments {
        let end = bounds.last().copied().unwrap_or(start_ms) + (seg.minutes * 60_000.0).round() as i64;
        truth.push((end, seg.status));
        bounds.push(end);
    }
    let end_ms = start_ms + day.total_ms();
    let mut out = Vec::new();
    let mut stretch: Option<(i64, i64, String)> = None;
    let (mut e, mut seg) = (0, 0);
    let mut t = start_ms;
    while t < end_ms {
        while e < events.len() && events[e].ts_ms <= t {
            e += 1;
        }
        while truth[seg].0 <= t {
            seg += 1;
        }
        let got = e.checked_sub(1).map(|i| events[i].status);
        let near = bounds.iter().any(|&b| (t - b).abs() <= reach);
        if got != Some(truth[seg].1) && !near {
            let label = format!("{} as {}", truth[seg].1.name(), got.map_or("nothing", |s| s.name()));
            match &mut stretch {
                Some((_, last, l)) if *last == t - 1000 && *l == label => *last = t,
                _ => {
                    out.extend(stretch.take().map(|(a, b, l)| describe(a, b, &l, start_ms)));
                    stretch = Some((t, t, label));
                }
            }
        }
        t += 1000;
    }
    out.extend(stretch.map(|(a, b, l)| describe(a, b, &l, start_ms)));
    out
}

fn describe(a: i64, b: i64, label: &str, start_ms: i64) -> String {
    format!("{label} {:.1}-{:.1} min", (a - start_ms) as f64 / 60_000.0, (b + 1000 - start_ms) as f64 / 60_000.0)
}

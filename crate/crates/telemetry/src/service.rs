//! Aggregator: accepts edge connections, classifies living-room windows,
//! routes per-room decisions into events through a single log writer and
//! answers report queries on a second port.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use chrono::NaiveDate;
use radaract_core::gru::GruModel;
use radaract_core::pad::{PresenceDecision, Room};
use radaract_core::radar::Activity;
use radaract_core::status::{
    accumulate_report, route_rooms, DailyReport, EventStore, ReportOptions, RoomEvent, StatusError,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::{mpsc, oneshot, watch};
use tokio::task::JoinSet;

use crate::wire::{read_message, write_message, MsgType, WireError, WireMessage};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("model does not take jtf windows: {0}")]
    Model(String),
    #[error(transparent)]
    Status(#[from] StatusError),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("service stopped")]
    Stopped,
}

#[derive(Debug, Clone)]
pub struct ServiceOptions {
    pub bind: String,
    pub report_bind: String,
    pub store_path: PathBuf,
    /// Rooms that must report a horizon before it is routed. Rooms not
    /// listed count as vacant.
    pub rooms: Vec<Room>,
    pub max_gap_ms: i64,
    /// How long the newest event is assumed to hold when reporting.
    pub hold_last_ms: i64,
}

/// Report query response: the report plus a flag for days without data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportResponse {
    #[serde(flatten)]
    pub report: DailyReport,
    pub no_data: bool,
}

#[derive(Debug, Deserialize)]
struct ReportRequest {
    op: String,
    date: String,
}

enum Command {
    Label {
        class: Activity,
        confidence: f64,
    },
    Presence {
        decision: PresenceDecision,
        reply: oneshot::Sender<Result<Option<RoomEvent>, StatusError>>,
    },
}

/// Prediction votes collected for the living room since its last horizon.
#[derive(Default)]
struct LabelVotes {
    votes: Vec<(Activity, f64)>,
    current: Option<(Activity, f64)>,
}

impl LabelVotes {
    /// Closes a horizon: the majority class (latest wins ties) and its
    /// mean confidence. An empty horizon keeps the previous label.
    fn close(&mut self) -> Option<(Activity, f64)> {
        if !self.votes.is_empty() {
            let mut counts: HashMap<Activity, (usize, f64, usize)> = HashMap::new();
            for (i, &(c, p)) in self.votes.iter().enumerate() {
                let e = counts.entry(c).or_insert((0, 0.0, 0));
                e.0 += 1;
                e.1 += p;
                e.2 = i;
            }
            let (&class, &(n, sum, _)) = counts.iter().max_by_key(|(_, &(n, _, last))| (n, last)).unwrap();
            self.current = Some((class, sum / n as f64));
            self.votes.clear();
        }
        self.current
    }
}

struct Router {
    store: EventStore,
    shared: Arc<RwLock<Vec<RoomEvent>>>,
    rooms: Vec<Room>,
    latest: HashMap<Room, PresenceDecision>,
    labels: LabelVotes,
}

impl Router {
    fn presence(&mut self, d: PresenceDecision) -> Result<Option<RoomEvent>, StatusError> {
        if d.room == Room::LivingRoom {
            self.labels.close();
        }
        self.latest.insert(d.room, d);
        let last = self.store.last_ts().unwrap_or(i64::MIN);
        let mut decisions = Vec::with_capacity(3);
        for room in Room::ALL {
            match self.latest.get(&room) {
                Some(d) if d.timestamp_ms > last => decisions.push(d.clone()),
                Some(_) | None if self.rooms.contains(&room) => return Ok(None),
                _ => decisions.push(PresenceDecision {
                    room,
                    occupied: false,
                    energy: 0.0,
                    timestamp_ms: last.saturating_add(1),
                }),
            }
        }
        let event = match route_rooms(&decisions, self.labels.current) {
            Ok(e) => e,
            Err(StatusError::MissingLabel) => {
                log::warn!("living room occupied before any window was classified; horizon skipped");
                return Ok(None);
            }
            Err(e) => return Err(e),
        };
        self.store.append(event.clone())?;
        self.shared.write().unwrap().push(event.clone());
        Ok(Some(event))
    }
}

async fn writer_task(mut router: Router, mut rx: mpsc::Receiver<Command>) {
    while let Some(cmd) = rx.recv().await {
        match cmd {
            Command::Label { class, confidence } => router.labels.votes.push((class, confidence)),
            Command::Presence { decision, reply } => {
                let r = router.presence(decision);
                if let Err(e) = &r {
                    log::error!("event not stored: {e}");
                }
                let _ = reply.send(r);
            }
        }
    }
}

/// Running service. Dropping it does not stop the tasks; call
/// [`ServiceHandle::shutdown`].
pub struct ServiceHandle {
    pub ingest_addr: SocketAddr,
    pub report_addr: SocketAddr,
    events: Arc<RwLock<Vec<RoomEvent>>>,
    stop: watch::Sender<bool>,
    tasks: JoinSet<()>,
}

impl ServiceHandle {
    /// Snapshot of every stored event.
    pub fn events(&self) -> Vec<RoomEvent> {
        self.events.read().unwrap().clone()
    }

    /// Closes listeners and connections and waits for the writer so the log
    /// is released.
    pub async fn shutdown(mut self) {
        let _ = self.stop.send(true);
        while self.tasks.join_next().await.is_some() {}
    }

    /// Runs until a task exits (listener failure) or `stop` resolves.
    pub async fn run_until(self, stop: impl std::future::Future<Output = ()>) {
        tokio::pin!(stop);
        let mut this = self;
        tokio::select! {
            _ = &mut stop => {}
            _ = this.tasks.join_next() => log::error!("service task exited"),
        }
        this.shutdown().await;
    }
}

/// Binds both listeners, opens the log and spawns the service tasks.
pub async fn serve(opts: ServiceOptions, model: GruModel<f32>) -> Result<ServiceHandle, ServiceError> {
    let spec = &model.spec;
    if spec.input_dim != radaract_core::dsp::DOPPLER_BINS || spec.time_steps != radaract_core::dsp::TIME_STEPS {
        return Err(ServiceError::Model(format!("{}x{} input", spec.time_steps, spec.input_dim)));
    }
    let store = EventStore::open(&opts.store_path)?;
    let events = Arc::new(RwLock::new(store.events().to_vec()));
    let ingest = TcpListener::bind(&opts.bind).await?;
    let report = TcpListener::bind(&opts.report_bind).await?;
    let ingest_addr = ingest.local_addr()?;
    let report_addr = report.local_addr()?;
    log::info!("ingest on {ingest_addr}, reports on {report_addr}, {} stored events", store.len());

    let (stop, stop_rx) = watch::channel(false);
    let (tx, rx) = mpsc::channel(1024);
    let router = Router {
        store,
        shared: events.clone(),
        rooms: opts.rooms.clone(),
        latest: HashMap::new(),
        labels: LabelVotes::default(),
    };
    let mut tasks = JoinSet::new();
    tasks.spawn(writer_task(router, rx));
    tasks.spawn(accept_ingest(ingest, tx, Arc::new(model), stop_rx.clone()));
    let report_opts = ReportOptions {
        max_gap_ms: Some(opts.max_gap_ms),
        end_ms: None,
    };
    tasks.spawn(accept_reports(report, events.clone(), report_opts, opts.hold_last_ms, stop_rx));
    Ok(ServiceHandle {
        ingest_addr,
        report_addr,
        events,
        stop,
        tasks,
    })
}

async fn accept_ingest(
    listener: TcpListener,
    tx: mpsc::Sender<Command>,
    model: Arc<GruModel<f32>>,
    mut stop: watch::Receiver<bool>,
) {
    let mut conns = JoinSet::new();
    loop {
        tokio::select! {
            _ = stop.changed() => break,
            Some(_) = conns.join_next(), if !conns.is_empty() => {}
            r = listener.accept() => match r {
                Ok((sock, peer)) => {
                    let (tx, model, mut stop) = (tx.clone(), model.clone(), stop.clone());
                    conns.spawn(async move {
                        tokio::select! {
                            r = handle_edge(sock, tx, model) => match r {
                                Ok(()) | Err(WireError::Closed) => log::info!("{peer} disconnected"),
                                Err(e) => log::warn!("closing {peer}: {e}"),
                            },
                            _ = stop.changed() => {}
                        }
                    });
                }
                Err(e) => log::warn!("accept failed: {e}"),
            },
        }
    }
    conns.shutdown().await;
}

async fn handle_edge(sock: TcpStream, tx: mpsc::Sender<Command>, model: Arc<GruModel<f32>>) -> Result<(), WireError> {
    sock.set_nodelay(true)?;
    let (r, mut w) = sock.into_split();
    let mut r = tokio::io::BufReader::new(r);
    loop {
        let msg = read_message(&mut r).await?;
        match msg.msg_type {
            MsgType::Heartbeat | MsgType::StatusResult => {}
            MsgType::JtfWindow => {
                if msg.room != Room::LivingRoom {
                    log::warn!("ignoring jtf_window from {}", msg.room);
                    continue;
                }
                let values = msg.jtf_values()?;
                let m = model.clone();
                let (class, confidence) = tokio::task::spawn_blocking(move || m.forward_raw(&values).map(|(p, _)| p))
                    .await
                    .map_err(|e| WireError::InvalidPayload(e.to_string()))?
                    .map(|p| {
                        let (i, v) = p.iter().enumerate().fold((0, f32::MIN), |b, (i, &v)| if v > b.1 { (i, v) } else { b });
                        (i, v as f64)
                    })
                    .map_err(|e| WireError::InvalidPayload(e.to_string()))?;
                let Some(class) = model.class_name(class).and_then(|n| n.parse::<Activity>().ok()) else {
                    log::warn!("model class {class} is not an activity");
                    continue;
                };
                if tx.send(Command::Label { class, confidence }).await.is_err() {
                    return Err(WireError::Closed);
                }
            }
            MsgType::Presence => {
                let decision = PresenceDecision {
                    room: msg.room,
                    occupied: msg.occupied()?,
                    energy: 0.0,
                    timestamp_ms: msg.timestamp_ms as i64,
                };
                let (reply, done) = oneshot::channel();
                if tx.send(Command::Presence { decision, reply }).await.is_err() {
                    return Err(WireError::Closed);
                }
                // The acknowledgement goes out only after the append is synced.
                if let Ok(Ok(Some(ev))) = done.await {
                    let ack = WireMessage::status_result(msg.room, ev.ts_ms as u64, ev.status, ev.confidence);
                    write_message(&mut w, &ack).await?;
                }
            }
        }
    }
}

/// Report for `date` over a consistent snapshot of the log.
pub fn report_for(events: &[RoomEvent], date: NaiveDate, opts: ReportOptions, hold_last_ms: i64) -> Result<ReportResponse, StatusError> {
    let opts = ReportOptions {
        end_ms: opts.end_ms.or(events.last().map(|e| e.ts_ms + hold_last_ms)),
        ..opts
    };
    let report = accumulate_report(events, date, &opts)?;
    let no_data = report.per_status_ms.is_empty();
    Ok(ReportResponse { report, no_data })
}

async fn accept_reports(
    listener: TcpListener,
    events: Arc<RwLock<Vec<RoomEvent>>>,
    opts: ReportOptions,
    hold_last_ms: i64,
    mut stop: watch::Receiver<bool>,
) {
    let mut conns = JoinSet::new();
    loop {
        tokio::select! {
            _ = stop.changed() => break,
            Some(_) = conns.join_next(), if !conns.is_empty() => {}
            r = listener.accept() => match r {
                Ok((sock, _)) => {
                    let events = events.clone();
                    conns.spawn(async move {
                        if let Err(e) = handle_reports(sock, events, opts, hold_last_ms).await {
                            log::warn!("report connection: {e}");
                        }
                    });
                }
                Err(e) => log::warn!("accept failed: {e}"),
            },
        }
    }
    conns.shutdown().await;
}

async fn handle_reports(
    sock: TcpStream,
    events: Arc<RwLock<Vec<RoomEvent>>>,
    opts: ReportOptions,
    hold_last_ms: i64,
) -> std::io::Result<()> {
    let (r, mut w) = sock.into_split();
    let mut lines = BufReader::new(r).lines();
    while let Some(line) = lines.next_line().await? {
        if line.trim().is_empty() {
            continue;
        }
        let reply = match answer(&line, &events, opts, hold_last_ms) {
            Ok(r) => serde_json::to_string(&r).unwrap(),
            Err(msg) => serde_json::json!({ "error": msg }).to_string(),
        };
        w.write_all(reply.as_bytes()).await?;
        w.write_all(b"\n").await?;
    }
    Ok(())
}

fn answer(line: &str, events: &RwLock<Vec<RoomEvent>>, opts: ReportOptions, hold_last_ms: i64) -> Result<ReportResponse, String> {
    let req: ReportRequest = serde_json::from_str(line).map_err(|e| e.to_string())?;
    if req.op != "report" {
        return Err(format!("unknown op {:?}", req.op));
    }
    let date = NaiveDate::parse_from_str(&req.date, "%Y-%m-%d").map_err(|e| format!("bad date: {e}"))?;
    let events = events.read().unwrap();
    report_for(&events, date, opts, hold_last_ms).map_err(|e| e.to_string())
}

/// Client side of the report port.
pub async fn query_report(addr: &str, date: NaiveDate) -> Result<ReportResponse, ServiceError> {
    let sock = TcpStream::connect(addr).await?;
    let (r, mut w) = sock.into_split();
    let req = serde_json::json!({ "op": "report", "date": date.format("%Y-%m-%d").to_string() });
    w.write_all(format!("{req}\n").as_bytes()).await?;
    let mut lines = BufReader::new(r).lines();
    let line = lines.next_line().await?.ok_or(ServiceError::Stopped)?;
    let value: serde_json::Value = serde_json::from_str(&line).map_err(std::io::Error::other)?;
    if let Some(err) = value.get("error") {
        return Err(ServiceError::Io(std::io::Error::other(err.to_string())));
    }
    serde_json::from_value(value).map_err(|e| ServiceError::Io(std::io::Error::other(e)))
}

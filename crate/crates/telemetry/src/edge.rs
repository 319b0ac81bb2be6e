//! Edge node: DSP and presence detection per horizon, streaming decisions
//! and living-room windows to the service.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use radaract_core::dsp::{JtfPipeline, DOPPLER_BINS, TIME_STEPS};
use radaract_core::pad::{PadCalibration, PadConfig, PadError, PresenceDetector, Room};
use radaract_core::radar::{RadarCube, RadarError};
use tokio::io::AsyncWriteExt;
use tokio::net::TcpStream;
use tokio::sync::mpsc;

use crate::wire::{read_message, MsgType, WireMessage};

/// Anything that yields one-frame radar cubes in time order.
pub trait FrameSource: Send {
    fn next_frame(&mut self) -> Option<Result<RadarCube, RadarError>>;
}

impl<I> FrameSource for I
where
    I: Iterator<Item = Result<RadarCube, RadarError>> + Send,
{
    fn next_frame(&mut self) -> Option<Result<RadarCube, RadarError>> {
        self.next()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Backoff {
    pub base: Duration,
    pub cap: Duration,
}

impl Default for Backoff {
    fn default() -> Self {
        Self {
            base: Duration::from_secs(1),
            cap: Duration::from_secs(60),
        }
    }
}

impl Backoff {
    /// Delay before reconnect attempt `attempt` (0-based).
    pub fn delay(&self, attempt: u32) -> Duration {
        self.base.saturating_mul(1u32 << attempt.min(16)).min(self.cap)
    }
}

#[derive(Debug, Clone)]
pub struct EdgeOptions {
    pub room: Room,
    pub connect: String,
    pub pad: PadConfig,
    pub calibration: PadCalibration,
    /// Columns between jtf_window messages.
    pub stride: usize,
    /// Multiplier from sensor time to message timestamps, measured from the
    /// first frame.
    pub time_scale: f64,
    /// Sensor-time interval between heartbeats.
    pub heartbeat_ms: i64,
    /// Play frames at `pace` times sensor speed; `None` runs flat out.
    pub pace: Option<f64>,
    pub backoff: Backoff,
    pub buffer_limit: usize,
    /// How long to keep trying to deliver the backlog once the source ends.
    pub flush_timeout: Duration,
}

impl EdgeOptions {
    pub fn new(room: Room, connect: impl Into<String>, calibration: PadCalibration) -> Self {
        Self {
            room,
            connect: connect.into(),
            pad: PadConfig {
                kappa: calibration.kappa,
                horizon_frames: calibration.horizon_frames,
                ..PadConfig::default()
            },
            calibration,
            stride: 10,
            time_scale: 1.0,
            heartbeat_ms: 5000,
            pace: None,
            backoff: Backoff::default(),
            buffer_limit: 512,
            flush_timeout: Duration::from_secs(120),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EdgeStats {
    pub frames: usize,
    pub presence_sent: usize,
    pub windows_sent: usize,
    pub heartbeats_sent: usize,
    /// Messages evicted from a full backlog.
    pub dropped: usize,
    /// Messages still queued when the flush timeout ran out.
    pub undelivered: usize,
    pub connects: usize,
    /// Status results the service returned for stored events.
    pub acks: Vec<WireMessage>,
}

fn stamp(origin_ms: Option<i64>, scale: f64, sensor_ms: i64) -> u64 {
    let origin = origin_ms.unwrap_or(sensor_ms);
    (origin as f64 + (sensor_ms - origin) as f64 * scale).round().max(0.0) as u64
}

/// Produces the messages for a frame stream. Runs on a blocking thread.
struct EdgePipeline {
    opts: EdgeOptions,
    pipe: Option<JtfPipeline>,
    detector: PresenceDetector,
    origin_ms: Option<i64>,
    occupied: bool,
    next_col: usize,
    last_heartbeat: Option<i64>,
}

impl EdgePipeline {
    fn new(opts: EdgeOptions) -> Result<Self, PadError> {
        let detector = PresenceDetector::new(opts.room, opts.pad, Some(opts.calibration.clone()))?;
        Ok(Self {
            opts,
            pipe: None,
            detector,
            origin_ms: None,
            occupied: false,
            next_col: 0,
            last_heartbeat: None,
        })
    }

    fn stamp(&self, sensor_ms: i64) -> u64 {
        stamp(self.origin_ms, self.opts.time_scale, sensor_ms)
    }

    fn frame(&mut self, cube: &RadarCube, out: &mut Vec<WireMessage>) -> Result<(), String> {
        if self.origin_ms.is_none() {
            self.origin_ms = Some(cube.start_time_ms);
        }
        let room = self.opts.room;
        let t = cube.start_time_ms;
        if self.last_heartbeat.is_none_or(|h| t - h >= self.opts.heartbeat_ms) {
            out.push(WireMessage::heartbeat(room, self.stamp(t)));
            self.last_heartbeat = Some(t);
        }
        let coupling = &self.opts.calibration.coupling;
        let pipe = self.pipe.get_or_insert_with(|| JtfPipeline::new(&cube.config, coupling.clone()));
        let fo = pipe.push_frame(cube).map_err(|e| e.to_string())?;
        // Windows go out for the occupancy decided at the last horizon.
        let total = pipe.total_columns();
        while self.next_col + TIME_STEPS <= total {
            if room == Room::LivingRoom && self.occupied {
                let spec = pipe.spectrogram();
                let rel = self.next_col - (total - spec.num_columns());
                let values = &spec.data[rel * DOPPLER_BINS..(rel + TIME_STEPS) * DOPPLER_BINS];
                let ts = stamp(self.origin_ms, self.opts.time_scale, spec.column_time_ms(rel));
                out.push(WireMessage::jtf_window(room, ts, values));
            }
            self.next_col += self.opts.stride;
        }
        let keep = (total.saturating_sub(self.next_col)).max(TIME_STEPS);
        pipe.retain_last_columns(keep);
        if let Some(d) = self.detector.push_frame(fo.profile).map_err(|e| e.to_string())? {
            self.occupied = d.occupied;
            out.push(WireMessage::presence(room, self.stamp(d.timestamp_ms), d.occupied));
        }
        Ok(())
    }
}

/// Runs the edge until `source` is exhausted and the backlog is delivered
/// (or the flush timeout passes). Frame errors are logged and skipped.
pub async fn edge_run(opts: EdgeOptions, mut source: Box<dyn FrameSource>) -> Result<EdgeStats, PadError> {
    let mut pipeline = EdgePipeline::new(opts.clone())?;
    let (tx, rx) = mpsc::unbounded_channel::<WireMessage>();
    let pace = opts.pace;
    let producer = tokio::task::spawn_blocking(move || {
        let started = Instant::now();
        let mut first: Option<i64> = None;
        let mut frames = 0usize;
        let mut out = Vec::new();
        while let Some(next) = source.next_frame() {
            let cube = match next {
                Ok(c) => c,
                Err(e) => {
                    log::error!("frame source: {e}");
                    continue;
                }
            };
            if let Some(speed) = pace {
                // Sensor time must not run ahead of the wall clock.
                let t0 = *first.get_or_insert(cube.start_time_ms);
                let due = Duration::from_secs_f64(((cube.start_time_ms - t0) as f64 / 1000.0 / speed).max(0.0));
                if let Some(wait) = due.checked_sub(started.elapsed()) {
                    std::thread::sleep(wait);
                }
            }
            frames += 1;
            if let Err(e) = pipeline.frame(&cube, &mut out) {
                log::error!("{}: frame {frames}: {e}", pipeline.opts.room);
            }
            for m in out.drain(..) {
                if tx.send(m).is_err() {
                    return frames;
                }
            }
        }
        frames
    });
    let mut stats = sender(&opts, rx).await;
    stats.frames = producer.await.unwrap_or(0);
    Ok(stats)
}

struct Link {
    write: tokio::net::tcp::OwnedWriteHalf,
    alive: Arc<AtomicBool>,
    reader: tokio::task::JoinHandle<Vec<WireMessage>>,
}

async fn connect(addr: &str) -> std::io::Result<Link> {
    let sock = TcpStream::connect(addr).await?;
    sock.set_nodelay(true)?;
    let (mut r, write) = sock.into_split();
    let alive = Arc::new(AtomicBool::new(true));
    let flag = alive.clone();
    let reader = tokio::spawn(async move {
        let mut acks = Vec::new();
        while let Ok(m) = read_message(&mut r).await {
            if m.msg_type == MsgType::StatusResult {
                acks.push(m);
            }
        }
        flag.store(false, Ordering::SeqCst);
        acks
    });
    Ok(Link { write, alive, reader })
}

async fn close(link: Link, stats: &mut EdgeStats) {
    let Link { mut write, reader, .. } = link;
    let _ = write.shutdown().await;
    drop(write);
    // The service closes its side once it has answered everything.
    match tokio::time::timeout(Duration::from_secs(5), reader).await {
        Ok(Ok(acks)) => stats.acks.extend(acks),
        _ => log::warn!("acknowledgements not drained"),
    }
}

/// Delivers messages in order over a reconnecting connection, keeping at
/// most `buffer_limit` undelivered messages (oldest evicted first).
async fn sender(opts: &EdgeOptions, mut rx: mpsc::UnboundedReceiver<WireMessage>) -> EdgeStats {
    let mut stats = EdgeStats::default();
    let mut queue: VecDeque<WireMessage> = VecDeque::new();
    let mut link: Option<Link> = None;
    let mut attempt = 0u32;
    let mut open = true;
    let mut flush_deadline: Option<tokio::time::Instant> = None;
    let enqueue = |queue: &mut VecDeque<WireMessage>, m: WireMessage, stats: &mut EdgeStats| {
        if queue.len() >= opts.buffer_limit {
            queue.pop_front();
            stats.dropped += 1;
        }
        queue.push_back(m);
    };
    loop {
        while let Ok(m) = rx.try_recv() {
            enqueue(&mut queue, m, &mut stats);
        }
        if open && rx.is_closed() && rx.is_empty() {
            open = false;
        }
        if !open && queue.is_empty() {
            break;
        }
        if !open {
            let deadline = *flush_deadline.get_or_insert_with(|| tokio::time::Instant::now() + opts.flush_timeout);
            if tokio::time::Instant::now() >= deadline {
                stats.undelivered = queue.len();
                log::warn!("{}: giving up on {} undelivered messages", opts.room, queue.len());
                break;
            }
        }
        if link.as_ref().is_some_and(|l| !l.alive.load(Ordering::SeqCst)) {
            log::warn!("{}: service closed the connection", opts.room);
            close(link.take().unwrap(), &mut stats).await;
        }
        let Some(l) = link.as_mut() else {
            match connect(&opts.connect).await {
                Ok(l) => {
                    link = Some(l);
                    attempt = 0;
                    stats.connects += 1;
                    log::info!("{}: connected to {}", opts.room, opts.connect);
                }
                Err(e) => {
                    let wait = opts.backoff.delay(attempt);
                    attempt += 1;
                    log::warn!("{}: connect failed ({e}); retrying in {wait:?}", opts.room);
                    let sleep = tokio::time::sleep(wait);
                    tokio::pin!(sleep);
                    loop {
                        tokio::select! {
                            _ = &mut sleep => break,
                            m = rx.recv(), if open => match m {
                                Some(m) => enqueue(&mut queue, m, &mut stats),
                                None => open = false,
                            },
                        }
                    }
                }
            }
            continue;
        };
        let Some(front) = queue.front() else {
            match rx.recv().await {
                Some(m) => enqueue(&mut queue, m, &mut stats),
                None => open = false,
            }
            continue;
        };
        let bytes = front.encode().expect("edge builds valid messages");
        match l.write.write_all(&bytes).await {
            Ok(()) => {
                let m = queue.pop_front().unwrap();
                match m.msg_type {
                    MsgType::Presence => stats.presence_sent += 1,
                    MsgType::JtfWindow => stats.windows_sent += 1,
                    MsgType::Heartbeat => stats.heartbeats_sent += 1,
                    MsgType::StatusResult => {}
                }
            }
            Err(e) => {
                log::warn!("{}: send failed: {e}", opts.room);
                close(link.take().unwrap(), &mut stats).await;
            }
        }
    }
    if let Some(l) = link {
        close(l, &mut stats).await;
    }
    stats
}

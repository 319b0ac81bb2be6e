use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::NaiveDate;
use radaract_core::container::FORMAT_VERSION;
use radaract_core::dataset::{generate_corpus, read_manifest, split, CorpusSpec, ManifestEntry, Split, SplitSets, WindowCorpus};
use radaract_core::dsp::{jtf0, range_fft, JtfPipeline};
use radaract_core::gru::grum::{load_model, save_model};
use radaract_core::gru::{evaluate, train, GruModel, ModelSpec, Normalization, TrainConfig};
use radaract_core::pad::{calibrate_empty, load_calibration, save_calibration, PadConfig, Room};
use radaract_core::radar::{derive_params, generate_motion_for, rcub, Activity, ChirpConfig, Simulator, SubjectProfile};
use radaract_core::status::EventStore;
use radaract_telemetry::{edge_run, query_report, report_for, serve, DayScript, EdgeOptions, FrameSource, ServiceOptions, TelemetryConfig};
use serde::Serialize;
use serde_json::json;

use crate::error::CliError;
use crate::*;

const BUNDLED_AWR1443: &str = include_str!("../configs/ti_awr1443.json");

pub fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Simulate(a) => simulate(a),
        Command::Process(a) => process(a),
        Command::Dataset(a) => dataset(a),
        Command::Train(a) => train_cmd(a),
        Command::Eval(a) => eval_cmd(a),
        Command::Serve(a) => serve_cmd(a),
        Command::Edge(a) => edge_cmd(a),
        Command::Report(a) => report_cmd(a),
        Command::Params(a) => params(a),
    }
}

fn read_chirp_config(path: &Path) -> Result<ChirpConfig, CliError> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound && path.file_name() == Some("ti_awr1443.json".as_ref()) => {
            BUNDLED_AWR1443.to_string()
        }
        Err(e) => return Err(CliError::Io(format!("{}: {e}", path.display()))),
    };
    let config: ChirpConfig = serde_json::from_str(&text).map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))?;
    config.validate()?;
    Ok(config)
}

fn chirp_config(a: &RadarArgs) -> Result<ChirpConfig, CliError> {
    match (&a.config, a.preset) {
        (Some(p), _) => read_chirp_config(p),
        (None, Preset::Awr1443) => Ok(ChirpConfig::awr1443()),
        (None, Preset::Compact) => Ok(ChirpConfig::compact()),
    }
}

fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match path {
        Some(p) => fs::write(p, text).map_err(|e| CliError::Io(format!("{}: {e}", p.display()))),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn parse_room(s: &str) -> Result<Room, CliError> {
    s.parse().map_err(|_| CliError::usage(format!("unknown room {s:?} (bedroom, livingroom, washroom)")))
}

fn parse_activity(s: &str) -> Result<Activity, CliError> {
    s.parse().map_err(|_| CliError::usage(format!("unknown activity {s:?}")))
}

fn params(a: ParamsArgs) -> Result<(), CliError> {
    let config = chirp_config(&a.radar)?;
    let p = derive_params(&config);
    let mut v = serde_json::to_value(p)?;
    v["format_version"] = json!(FORMAT_VERSION);
    write_json(a.out.as_deref(), &v)
}

fn simulate(a: SimulateArgs) -> Result<(), CliError> {
    let config = chirp_config(&a.radar)?;
    let activity = parse_activity(&a.activity)?;
    let subject = a.subject.map(SubjectProfile::for_subject).unwrap_or_default();
    let script = generate_motion_for(activity, a.duration, a.seed, &subject)?;
    let frames = config.frames_in(a.duration);
    if frames == 0 {
        return Err(CliError::invalid(format!("duration {} s is shorter than one frame", a.duration)));
    }
    let cube = Simulator::new(&config, &script, a.seed)?.run(frames)?;
    rcub::save_cube(&a.out, &cube)?;
    eprintln!("{} frames of {activity} -> {}", frames, a.out.display());
    Ok(())
}

fn process(a: ProcessArgs) -> Result<(), CliError> {
    let cube = rcub::load_cube(&a.input)?;
    if let Some(room) = &a.calibrate {
        let room = parse_room(room)?;
        let pad = PadConfig {
            kappa: a.kappa,
            horizon_frames: a.horizon_frames,
            ..PadConfig::default()
        };
        let profiles = (0..cube.num_frames)
            .map(|f| {
                let mut one = radaract_core::radar::RadarCube::zeros(cube.config.clone(), 1, cube.start_time_ms);
                one.data.copy_from_slice(cube.frame_data(f));
                range_fft(&one)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let cal = calibrate_empty(room, &profiles, &pad)?;
        save_calibration(&a.out, &cal)?;
        eprintln!("{room}: baseline {:.4e} +/- {:.2e}", cal.baseline_mean, cal.baseline_std);
        return Ok(());
    }
    let coupling = match &a.calibration {
        Some(p) => load_calibration(p)?.coupling,
        None => None,
    };
    let mut pipe = JtfPipeline::new(&cube.config, coupling);
    let n = cube.config.chirps_per_frame * cube.config.num_channels * cube.config.samples_per_chirp;
    let period_ms = cube.config.frame_period_s * 1000.0;
    for f in 0..cube.num_frames {
        let start = cube.start_time_ms + (f as f64 * period_ms).round() as i64;
        let mut one = radaract_core::radar::RadarCube::zeros(cube.config.clone(), 1, start);
        one.data.copy_from_slice(&cube.data[f * n..(f + 1) * n]);
        pipe.push_frame(&one)?;
    }
    let spec = pipe.into_spectrogram();
    if spec.num_columns() == 0 {
        return Err(CliError::invalid("recording too short for one spectrogram column"));
    }
    jtf0::save_spectrogram(&a.out, &spec)?;
    eprintln!("{} columns -> {}", spec.num_columns(), a.out.display());
    Ok(())
}

fn class_list(set: ClassSet) -> Vec<Activity> {
    match set {
        ClassSet::Six => Activity::ALL.to_vec(),
        ClassSet::Four => vec![Activity::Empty, Activity::Sedentary, Activity::InPlaceMovement, Activity::Walking],
    }
}

fn dataset(a: DatasetArgs) -> Result<(), CliError> {
    let mut spec = CorpusSpec::new(&class_list(a.classes), a.subjects, a.sessions, a.minutes_per_class);
    spec.seed = a.seed;
    spec.stride = a.stride;
    spec.segment_s = a.segment_seconds;
    if let Some(p) = &a.config {
        spec.config = read_chirp_config(p)?;
    }
    let t = Instant::now();
    let entries = generate_corpus(&spec, &a.out)?;
    write_json(Some(&a.out.join("corpus.json")), &json!({ "format_version": FORMAT_VERSION, "spec": spec }))?;
    eprintln!("{} windows in {:.1} s -> {}", entries.len(), t.elapsed().as_secs_f64(), a.out.display());
    Ok(())
}

fn resolve_split(a: &SplitArgs, entries: &[ManifestEntry]) -> Result<(Split, SplitSets), CliError> {
    let sp = match a.split {
        SplitKind::SessionIndependent => Split::SessionIndependent {
            test_session: a.test_session.unwrap_or_else(|| entries.iter().map(|e| e.session).max().unwrap_or(0)),
        },
        SplitKind::UnseenSubject => Split::UnseenSubject {
            test_subject: a.test_subject.unwrap_or_else(|| entries.iter().map(|e| e.subject).max().unwrap_or(0)),
        },
    };
    let sets = split(entries, sp);
    if sets.train.is_empty() || sets.test.is_empty() {
        return Err(CliError::invalid(format!("{sp:?} leaves an empty train or test set")));
    }
    Ok((sp, sets))
}

/// Class names in canonical order, restricted to those in the corpus.
fn corpus_classes(entries: &[ManifestEntry]) -> Vec<Activity> {
    Activity::ALL.into_iter().filter(|a| entries.iter().any(|e| e.label == *a)).collect()
}

fn load_split(a: &SplitArgs) -> Result<(Vec<ManifestEntry>, Split, SplitSets), CliError> {
    let entries = read_manifest(&a.data.join("manifest.jsonl"))?;
    if entries.is_empty() {
        return Err(CliError::invalid("manifest has no windows"));
    }
    let (sp, sets) = resolve_split(a, &entries)?;
    Ok((entries, sp, sets))
}

fn split_name(sp: Split) -> serde_json::Value {
    match sp {
        Split::SessionIndependent { test_session } => json!({ "kind": "session-independent", "test_session": test_session }),
        Split::UnseenSubject { test_subject } => json!({ "kind": "unseen-subject", "test_subject": test_subject }),
    }
}

fn train_cmd(a: TrainArgs) -> Result<(), CliError> {
    let (entries, sp, sets) = load_split(&a.split)?;
    let classes = corpus_classes(&entries);
    let mut spec = if a.full { ModelSpec::full() } else { ModelSpec::reduced(a.layers, a.hidden, &classes) };
    if a.full {
        spec.class_names = classes.iter().map(|c| c.name().to_string()).collect();
        if let Some(last) = spec.fc_dims.last_mut() {
            *last = classes.len();
        }
    }
    let norm = match a.normalization {
        NormArg::Peak => Normalization::Peak,
        NormArg::LogPeak => Normalization::LogPeak,
        NormArg::None => Normalization::None,
    };
    let names = spec.class_names.clone();
    let mut model: GruModel<f32> = GruModel::new(spec, norm, a.seed)?;
    let train_set = WindowCorpus::load(&a.split.data, &sets.train, &names)?;
    let val_set = if sets.validation.is_empty() {
        None
    } else {
        Some(WindowCorpus::load(&a.split.data, &sets.validation, &names)?)
    };
    let test_set = WindowCorpus::load(&a.split.data, &sets.test, &names)?;
    let cfg = TrainConfig {
        learning_rate: a.learning_rate,
        batch_size: a.batch_size,
        epochs: a.epochs,
        seed: a.seed,
        grad_clip: a.grad_clip,
        patience: a.patience.or(TrainConfig::default().patience),
        ..TrainConfig::default()
    };
    let t = Instant::now();
    let history = train(&mut model, &train_set, val_set.as_ref().map(|v| v as _), &cfg)?;
    let seconds = t.elapsed().as_secs_f64();
    save_model(&a.out, &model)?;
    let test = evaluate(&model, &test_set, 256)?;
    eprintln!("test accuracy {:.4} after {} epochs ({seconds:.1} s)", test.accuracy, history.epochs.len());
    write_json(
        Some(&a.metrics),
        &json!({
            "format_version": FORMAT_VERSION,
            "split": split_name(sp),
            "train_windows": sets.train.len(),
            "validation_windows": sets.validation.len(),
            "test_windows": sets.test.len(),
            "train_seconds": seconds,
            "config": cfg,
            "history": history,
            "test": test,
        }),
    )
}

fn eval_cmd(a: EvalArgs) -> Result<(), CliError> {
    let model: GruModel<f32> = load_model(&a.model)?;
    let (_, sp, sets) = load_split(&a.split)?;
    let test_set = WindowCorpus::load(&a.split.data, &sets.test, &model.spec.class_names)?;
    let ev = evaluate(&model, &test_set, 256)?;
    eprintln!("accuracy {:.4} on {} windows", ev.accuracy, ev.samples);
    let mut v = serde_json::to_value(&ev)?;
    v["format_version"] = json!(FORMAT_VERSION);
    v["split"] = split_name(sp);
    write_json(Some(&a.out), &v)
}

fn telemetry_config(a: &ServiceConfigArgs) -> Result<TelemetryConfig, CliError> {
    Ok(TelemetryConfig::load(a.config.as_deref())?)
}

fn runtime() -> Result<tokio::runtime::Runtime, CliError> {
    Ok(tokio::runtime::Runtime::new()?)
}

fn serve_cmd(a: ServeArgs) -> Result<(), CliError> {
    let mut cfg = telemetry_config(&a.cfg)?;
    if let Some(v) = a.bind {
        cfg.bind = v;
    }
    if let Some(v) = a.report_bind {
        cfg.report_bind = v;
    }
    if let Some(v) = a.model {
        cfg.model_path = v;
    }
    if let Some(v) = a.store {
        cfg.store_path = v;
    }
    let model: GruModel<f32> = load_model(&cfg.model_path)?;
    let opts = ServiceOptions {
        bind: cfg.bind.clone(),
        report_bind: cfg.report_bind.clone(),
        store_path: cfg.store_path.clone(),
        rooms: cfg.rooms.clone(),
        max_gap_ms: cfg.max_gap_ms,
        hold_last_ms: cfg.horizon_ms,
    };
    runtime()?.block_on(async move {
        let handle = serve(opts, model).await?;
        eprintln!("ingest {} | reports {}", handle.ingest_addr, handle.report_addr);
        handle
            .run_until(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await;
        Ok(())
    })
}

fn edge_cmd(a: EdgeArgs) -> Result<(), CliError> {
    let cfg = telemetry_config(&a.cfg)?;
    let room = parse_room(&a.room)?;
    let cal_path: PathBuf = a.calibration.clone().unwrap_or_else(|| cfg.calibration_path(room));
    let calibration = load_calibration(&cal_path)?;
    let mut opts = EdgeOptions::new(room, a.connect.clone().unwrap_or(cfg.connect.clone()), calibration);
    opts.pad.kappa = cfg.kappa;
    opts.stride = cfg.stride;
    opts.time_scale = cfg.time_scale;
    opts.pace = a.pace;
    let source: Box<dyn FrameSource> = if let Some(input) = &a.input {
        let cube = rcub::load_cube(input)?;
        let n = cube.config.chirps_per_frame * cube.config.num_channels * cube.config.samples_per_chirp;
        let period_ms = cube.config.frame_period_s * 1000.0;
        Box::new((0..cube.num_frames).map(move |f| {
            let start = cube.start_time_ms + (f as f64 * period_ms).round() as i64;
            let mut one = radaract_core::radar::RadarCube::zeros(cube.config.clone(), 1, start);
            one.data.copy_from_slice(&cube.data[f * n..(f + 1) * n]);
            Ok(one)
        }))
    } else if let Some(path) = &a.scenario {
        let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let day: DayScript = serde_json::from_str(&text)?;
        let config = chirp_config(&a.radar)?;
        Box::new(day.room_source(room, &config, cfg.time_scale, a.seed, SubjectProfile::default())?)
    } else if let (Some(act), Some(duration)) = (&a.activity, a.duration) {
        let config = chirp_config(&a.radar)?;
        let script = generate_motion_for(parse_activity(act)?, duration, a.seed, &SubjectProfile::default())?;
        let sim = Simulator::new(&config, &script, a.seed)?;
        let frames = config.frames_in(duration);
        Box::new((0..frames).map(move |f| sim.frame(f)))
    } else {
        return Err(CliError::usage("edge needs --input, --scenario or --activity with --duration"));
    };
    let stats = runtime()?.block_on(edge_run(opts, source))?;
    eprintln!(
        "{room}: {} frames, {} presence, {} windows, {} heartbeats, {} acks, {} dropped, {} undelivered",
        stats.frames,
        stats.presence_sent,
        stats.windows_sent,
        stats.heartbeats_sent,
        stats.acks.len(),
        stats.dropped,
        stats.undelivered
    );
    Ok(())
}

fn report_cmd(a: ReportArgs) -> Result<(), CliError> {
    let cfg = telemetry_config(&a.cfg)?;
    let date = NaiveDate::parse_from_str(&a.date, "%Y-%m-%d").map_err(|e| CliError::usage(format!("--date: {e}")))?;
    let response = if let Some(addr) = &a.connect {
        runtime()?.block_on(query_report(addr, date))?
    } else {
        let path = a.store.clone().unwrap_or(cfg.store_path.clone());
        if !path.exists() {
            return Err(CliError::Io(format!("{}: no such event log", path.display())));
        }
        let store = EventStore::open(&path)?;
        let opts = radaract_core::status::ReportOptions {
            max_gap_ms: Some(cfg.max_gap_ms),
            end_ms: None,
        };
        report_for(store.events(), date, opts, cfg.horizon_ms)?
    };
    write_json(a.out.as_deref(), &response)
}

//! Labeled synthetic corpora: per (class, subject, session) recordings
//! rendered through the DSP chain to JTF0 files, a JSON-lines manifest with
//! one line per classifier window, and the evaluation splits.

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::container::{FormatError, FORMAT_VERSION};
use crate::dsp::{jtf0, window_starts, DspError, JtfPipeline, JtfSpectrogram, DOPPLER_BINS, TIME_STEPS};
use crate::gru::WindowSource;
use crate::radar::{generate_motion_for, Activity, ChirpConfig, RadarError, Simulator, SubjectProfile};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("invalid corpus spec: {0}")]
    InvalidSpec(String),
    #[error("manifest line {line}: {source}")]
    Manifest { line: usize, source: serde_json::Error },
    #[error("{path}: window at column {start} exceeds {columns} columns")]
    WindowOutOfRange { path: String, start: usize, columns: usize },
    #[error("label {0} is not a class of the model")]
    UnknownClass(String),
    #[error(transparent)]
    Radar(#[from] RadarError),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// What to generate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub classes: Vec<Activity>,
    pub subjects: u32,
    pub sessions: u32,
    /// Minimum recorded minutes per class, spread evenly over all
    /// subject/session pairs and rounded up to whole segments.
    pub minutes_per_class: f64,
    /// Length of one independently scripted recording.
    pub segment_s: f64,
    /// Hop between manifest windows, in spectrogram columns.
    pub stride: usize,
    pub seed: u64,
    pub config: ChirpConfig,
}

impl CorpusSpec {
    pub fn new(classes: &[Activity], subjects: u32, sessions: u32, minutes_per_class: f64) -> Self {
        Self {
            classes: classes.to_vec(),
            subjects,
            sessions,
            minutes_per_class,
            segment_s: 12.0,
            stride: 10,
            seed: 0,
            config: ChirpConfig::compact(),
        }
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let bad = |m: &str| Err(DatasetError::InvalidSpec(m.into()));
        if self.classes.is_empty() {
            return bad("no classes");
        }
        if self.subjects == 0 || self.sessions == 0 {
            return bad("need at least one subject and one session");
        }
        if !(self.minutes_per_class > 0.0) || !(self.segment_s > 0.0) || self.stride == 0 {
            return bad("durations and stride must be positive");
        }
        // A segment must hold at least one window.
        let columns = self.segment_columns();
        if columns < TIME_STEPS {
            return bad("segment too short for one 50-column window");
        }
        self.config.validate().map_err(|e| DatasetError::InvalidSpec(e.to_string()))
    }

    /// Seconds recorded for each (class, subject, session).
    pub fn seconds_per_recording(&self) -> f64 {
        self.minutes_per_class * 60.0 / (self.subjects * self.sessions) as f64
    }

    pub fn segments_per_recording(&self) -> usize {
        (self.seconds_per_recording() / self.segment_s).ceil().max(1.0) as usize
    }

    fn segment_columns(&self) -> usize {
        let frames = self.config.frames_in(self.segment_s.min(self.seconds_per_recording()));
        let chirps = frames * self.config.chirps_per_frame;
        if chirps < crate::dsp::WINDOW_LEN {
            0
        } else {
            (chirps - crate::dsp::WINDOW_LEN) / crate::dsp::HOP + 1
        }
    }
}

/// Motion-script seed. Subjects occupy disjoint high-bit ranges; sessions
/// and segments are offsets inside them.
pub fn script_seed(base: u64, subject: u32, session: u32, class: Activity, segment: usize) -> u64 {
    base.wrapping_add((subject as u64) << 40)
        .wrapping_add((session as u64) << 28)
        .wrapping_add((class.index() as u64) << 20)
        .wrapping_add(segment as u64)
}

/// One classifier window.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// JTF0 file, relative to the manifest's directory.
    pub path: String,
    pub start_col: usize,
    pub label: Activity,
    pub subject: u32,
    pub session: u32,
    pub format_version: u32,
}

/// Renders the corpus under `out_dir` (JTF0 files in `jtf/`, plus
/// `manifest.jsonl`) and returns the manifest entries.
pub fn generate_corpus(spec: &CorpusSpec, out_dir: &Path) -> Result<Vec<ManifestEntry>, DatasetError> {
    spec.validate()?;
    let jtf_dir = out_dir.join("jtf");
    fs::create_dir_all(&jtf_dir)?;
    let stride = NonZeroUsize::new(spec.stride).unwrap();
    let per_recording = spec.seconds_per_recording();
    let segments = spec.segments_per_recording();
    let mut entries = Vec::new();
    for subject in 0..spec.subjects {
        let profile = SubjectProfile::for_subject(subject);
        for session in 0..spec.sessions {
            for &class in &spec.classes {
                for seg in 0..segments {
                    let duration = spec.segment_s.min(per_recording);
                    let seed = script_seed(spec.seed, subject, session, class, seg);
                    let mut jtf = render_segment(&spec.config, class, duration, seed, &profile)?;
                    jtf.label = Some(class);
                    jtf.subject_id = Some(subject);
                    jtf.session_id = Some(session);
                    let name = format!("{}_s{subject}_k{session}_{seg:03}.jtf0", class.name());
                    jtf0::save_spectrogram(&jtf_dir.join(&name), &jtf)?;
                    for start in window_starts(jtf.num_columns(), stride) {
                        entries.push(ManifestEntry {
                            path: format!("jtf/{name}"),
                            start_col: start,
                            label: class,
                            subject,
                            session,
                            format_version: FORMAT_VERSION,
                        });
                    }
                }
            }
        }
        log::info!("subject {subject}: {} windows so far", entries.len());
    }
    write_manifest(&out_dir.join("manifest.jsonl"), &entries)?;
    Ok(entries)
}

/// Simulates one recording and returns its spectrogram.
pub fn render_segment(
    config: &ChirpConfig,
    class: Activity,
    duration_s: f64,
    seed: u64,
    subject: &SubjectProfile,
) -> Result<JtfSpectrogram, DatasetError> {
    let script = generate_motion_for(class, duration_s, seed, subject)?;
    let sim = Simulator::new(config, &script, seed ^ 0x51_4D00)?;
    let mut pipe = JtfPipeline::new(config, None);
    let frames = config.frames_in(duration_s);
    if frames == 0 {
        return Err(RadarError::InvalidDuration(duration_s).into());
    }
    for f in 0..frames {
        pipe.push_frame(&sim.frame(f)?)?;
    }
    Ok(pipe.into_spectrogram())
}

pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<(), DatasetError> {
    let mut w = BufWriter::new(File::create(path)?);
    for e in entries {
        serde_json::to_writer(&mut w, e).map_err(|source| DatasetError::Manifest { line: 0, source })?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>, DatasetError> {
    let r = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let e: ManifestEntry =
            serde_json::from_str(&line).map_err(|source| DatasetError::Manifest { line: i + 1, source })?;
        crate::container::check_version(e.format_version)?;
        out.push(e);
    }
    Ok(out)
}

/// Evaluation protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Split {
    /// Test on one session of every subject, train on the others.
    SessionIndependent { test_session: u32 },
    /// Test on one subject, train on the rest.
    UnseenSubject { test_subject: u32 },
}

/// Train, validation and test portions of a manifest.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SplitSets {
    pub train: Vec<ManifestEntry>,
    pub validation: Vec<ManifestEntry>,
    pub test: Vec<ManifestEntry>,
}

/// Splits by metadata. The validation set is the highest-numbered session
/// among the training data (when more than one training session exists).
pub fn split(entries: &[ManifestEntry], split: Split) -> SplitSets {
    let is_test = |e: &ManifestEntry| match split {
        Split::SessionIndependent { test_session } => e.session == test_session,
        Split::UnseenSubject { test_subject } => e.subject == test_subject,
    };
    let (test, rest): (Vec<_>, Vec<_>) = entries.iter().cloned().partition(is_test);
    let mut sessions: Vec<u32> = rest.iter().map(|e| e.session).collect();
    sessions.sort_unstable();
    sessions.dedup();
    let (validation, train) = if sessions.len() > 1 {
        let val = *sessions.last().unwrap();
        rest.into_iter().partition(|e| e.session == val)
    } else {
        (Vec::new(), rest)
    };
    SplitSets { train, validation, test }
}

/// Manifest windows loaded into memory, addressable as a [`WindowSource`].
/// Labels are indices into the model's class names.
pub struct WindowCorpus {
    spectrograms: Vec<JtfSpectrogram>,
    windows: Vec<(usize, usize)>,
    labels: Vec<usize>,
}

impl WindowCorpus {
    pub fn load(root: &Path, entries: &[ManifestEntry], class_names: &[String]) -> Result<Self, DatasetError> {
        let mut cache: HashMap<&str, usize> = HashMap::new();
        let mut spectrograms = Vec::new();
        let mut windows = Vec::with_capacity(entries.len());
        let mut labels = Vec::with_capacity(entries.len());
        for e in entries {
            let label = class_names
                .iter()
                .position(|c| c == e.label.name())
                .ok_or_else(|| DatasetError::UnknownClass(e.label.name().into()))?;
            let idx = match cache.get(e.path.as_str()) {
                Some(&i) => i,
                None => {
                    let path: PathBuf = root.join(&e.path);
                    spectrograms.push(jtf0::load_spectrogram(&path)?);
                    cache.insert(&e.path, spectrograms.len() - 1);
                    spectrograms.len() - 1
                }
            };
            let columns = spectrograms[idx].num_columns();
            if e.start_col + TIME_STEPS > columns {
                return Err(DatasetError::WindowOutOfRange {
                    path: e.path.clone(),
                    start: e.start_col,
                    columns,
                });
            }
            windows.push((idx, e.start_col));
            labels.push(label);
        }
        Ok(Self {
            spectrograms,
            windows,
            labels,
        })
    }
}

impl WindowSource for WindowCorpus {
    fn len(&self) -> usize {
        self.windows.len()
    }

    fn label(&self, index: usize) -> usize {
        self.labels[index]
    }

    fn window(&self, index: usize) -> &[f32] {
        let (s, start) = self.windows[index];
        &self.spectrograms[s].data[start * DOPPLER_BINS..(start + TIME_STEPS) * DOPPLER_BINS]
    }
}

//! Scripted days for replay: a sequence of statuses with durations, turned
//! into one simulated frame source per room plus the ground-truth totals.

use std::collections::BTreeMap;

use radaract_core::dsp::RangeProcessor;
use radaract_core::pad::{calibrate_empty, PadCalibration, PadConfig, PadError, Room};
use radaract_core::radar::{generate_motion_for, Activity, ChirpConfig, RadarCube, RadarError, Simulator, SubjectProfile};
use radaract_core::status::Status;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DaySegment {
    pub status: Status,
    pub minutes: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayScript {
    /// Epoch milliseconds of the first segment.
    pub start_ms: i64,
    pub segments: Vec<DaySegment>,
}

impl DayScript {
    /// Two hours touching every status except the living-room "empty"
    /// class, with two washroom visits.
    pub fn two_hour_day(start_ms: i64) -> Self {
        use Status::*;
        let plan = [
            (InBed, 20.0),
            (InWashroom, 6.0),
            (Sedentary, 15.0),
            (Walking, 6.0),
            (Washing, 10.0),
            (OutOfHome, 15.0),
            (Vacuuming, 10.0),
            (InWashroom, 5.0),
            (InPlaceMovement, 10.0),
            (Sedentary, 8.0),
            (InBed, 15.0),
        ];
        Self {
            start_ms,
            segments: plan.iter().map(|&(status, minutes)| DaySegment { status, minutes }).collect(),
        }
    }

    pub fn total_ms(&self) -> i64 {
        self.segments.iter().map(|s| minutes_ms(s.minutes)).sum()
    }

    pub fn truth_ms(&self) -> BTreeMap<Status, i64> {
        let mut m = BTreeMap::new();
        for s in &self.segments {
            *m.entry(s.status).or_insert(0) += minutes_ms(s.minutes);
        }
        m
    }

    pub fn washroom_visits(&self) -> u32 {
        let mut prev = None;
        let mut n = 0;
        for s in &self.segments {
            if s.status == Status::InWashroom && prev != Some(Status::InWashroom) {
                n += 1;
            }
            prev = Some(s.status);
        }
        n
    }

    /// Segment boundaries the status takes part in.
    pub fn transitions(&self, status: Status) -> usize {
        self.segments
            .windows(2)
            .filter(|w| w[0].status != w[1].status && (w[0].status == status || w[1].status == status))
            .count()
    }

    /// Frames for `room` at sensor speed `1/time_scale` of the script. The
    /// subject is rendered in the room its status belongs to; bed and
    /// washroom stays use the sedentary and in-place templates.
    pub fn room_source(
        &self,
        room: Room,
        config: &ChirpConfig,
        time_scale: f64,
        seed: u64,
        subject: SubjectProfile,
    ) -> Result<ScheduleSource, RadarError> {
        let period = config.frame_period_s;
        let mut parts = Vec::new();
        let mut elapsed_s = 0.0;
        let mut first_frame = 0usize;
        for (i, seg) in self.segments.iter().enumerate() {
            elapsed_s += seg.minutes * 60.0 / time_scale;
            let end_frame = (elapsed_s / period).round() as usize;
            let frames = end_frame.saturating_sub(first_frame);
            if frames == 0 {
                continue;
            }
            let activity = if seg.status.room() == Some(room) {
                match seg.status {
                    Status::InBed => Activity::Sedentary,
                    Status::InWashroom => Activity::InPlaceMovement,
                    s => s.activity().unwrap_or(Activity::Empty),
                }
            } else {
                Activity::Empty
            };
            let seg_seed = seed ^ ((room.code() as u64 + 1) << 48) ^ ((i as u64 + 1) << 32);
            let script = generate_motion_for(activity, frames as f64 * period + 1.0, seg_seed, &subject)?;
            let start = self.start_ms + (first_frame as f64 * period * 1000.0).round() as i64;
            let sim = Simulator::new(config, &script, seg_seed ^ 0x51_4D00)?.with_start_time(start);
            parts.push((sim, frames));
            first_frame = end_frame;
        }
        Ok(ScheduleSource {
            parts,
            part: 0,
            frame: 0,
        })
    }
}

/// Calibrates `room` from `frames` simulated frames of the empty scene.
pub fn empty_room_calibration(
    room: Room,
    config: &ChirpConfig,
    pad: &PadConfig,
    frames: usize,
    seed: u64,
) -> Result<PadCalibration, PadError> {
    let script = generate_motion_for(Activity::Empty, frames as f64 * config.frame_period_s + 1.0, seed, &SubjectProfile::default())
        .map_err(|e| PadError::InvalidConfig(e.to_string()))?;
    let sim = Simulator::new(config, &script, seed ^ 0xCA11).map_err(|e| PadError::InvalidConfig(e.to_string()))?;
    let mut range = RangeProcessor::new(config);
    let mut profiles = Vec::with_capacity(frames);
    for f in 0..frames {
        let cube = sim.frame(f).map_err(|e| PadError::InvalidConfig(e.to_string()))?;
        profiles.push(range.process(&cube)?);
    }
    calibrate_empty(room, &profiles, pad)
}

fn minutes_ms(m: f64) -> i64 {
    (m * 60_000.0).round() as i64
}

/// Concatenated simulators rendered lazily, frame by frame.
pub struct ScheduleSource {
    parts: Vec<(Simulator, usize)>,
    part: usize,
    frame: usize,
}

impl ScheduleSource {
    pub fn total_frames(&self) -> usize {
        self.parts.iter().map(|p| p.1).sum()
    }
}

impl Iterator for ScheduleSource {
    type Item = Result<RadarCube, RadarError>;

    fn next(&mut self) -> Option<Self::Item> {
        while let Some((sim, frames)) = self.parts.get(self.part) {
            if self.frame < *frames {
                self.frame += 1;
                return Some(sim.frame(self.frame - 1));
            }
            self.part += 1;
            self.frame = 0;
        }
        None
    }
}

//! Point-scatterer models of a person performing one of the six in-home
//! activities.
//!
//! A scene is a handful of scatterers: one torso and two to four limbs. Each
//! scatterer follows a body path (fixed, pacing between waypoints, or sweeping
//! back and forth) plus zero or more sinusoidal radial oscillations. Range and
//! radial velocity are analytic functions of slow time, so the simulator can
//! integrate the carrier phase exactly.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::RadarError;

/// The six living-room classes, in class-index order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activity {
    Empty,
    Sedentary,
    Washing,
    Vacuuming,
    InPlaceMovement,
    Walking,
}

impl Activity {
    pub const ALL: [Activity; 6] = [
        Activity::Empty,
        Activity::Sedentary,
        Activity::Washing,
        Activity::Vacuuming,
        Activity::InPlaceMovement,
        Activity::Walking,
    ];

    /// The four classes recorded in the large, low-clutter hall.
    pub const LOW_CLUTTER: [Activity; 4] = [
        Activity::Empty,
        Activity::Sedentary,
        Activity::InPlaceMovement,
        Activity::Walking,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Result<Self, RadarError> {
        Self::ALL
            .get(index)
            .copied()
            .ok_or_else(|| RadarError::UnknownActivity(index.to_string()))
    }

    pub fn name(self) -> &'static str {
        match self {
            Activity::Empty => "empty",
            Activity::Sedentary => "sedentary",
            Activity::Washing => "washing",
            Activity::Vacuuming => "vacuuming",
            Activity::InPlaceMovement => "in_place_movement",
            Activity::Walking => "walking",
        }
    }
}

impl fmt::Display for Activity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activity {
    type Err = RadarError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace(['-', ' '], "_");
        Self::ALL
            .iter()
            .copied()
            .find(|a| a.name() == norm || (norm == "inplacemovement" && *a == Activity::InPlaceMovement))
            .ok_or_else(|| RadarError::UnknownActivity(s.to_string()))
    }
}

/// Range and radial velocity of a scatterer at one slow-time instant.
/// Positive velocity means receding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kinematics {
    pub range_m: f64,
    pub velocity_mps: f64,
}

/// Radial motion shared by every scatterer attached to the same body.
#[derive(Debug, Clone, PartialEq)]
pub enum BodyPath {
    Fixed {
        range_m: f64,
    },
    /// Walks back and forth between waypoint ranges with a speed that is
    /// modulated sinusoidally at the stride rate.
    Pacing {
        waypoints: Vec<f64>,
        /// Cumulative path length at each waypoint (starts at 0).
        cumulative: Vec<f64>,
        speed_mps: f64,
        stride_hz: f64,
        modulation: f64,
        phase_rad: f64,
    },
    /// Triangle-wave drift about a center range.
    Sweep {
        center_m: f64,
        half_span_m: f64,
        speed_mps: f64,
        phase: f64,
    },
}

impl BodyPath {
    fn pacing(waypoints: Vec<f64>, speed_mps: f64, stride_hz: f64, modulation: f64, phase_rad: f64) -> Self {
        let mut cumulative = Vec::with_capacity(waypoints.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        for w in waypoints.windows(2) {
            acc += (w[1] - w[0]).abs();
            cumulative.push(acc);
        }
        BodyPath::Pacing {
            waypoints,
            cumulative,
            speed_mps,
            stride_hz,
            modulation,
            phase_rad,
        }
    }

    pub fn kinematics(&self, t: f64) -> Kinematics {
        match self {
            BodyPath::Fixed { range_m } => Kinematics {
                range_m: *range_m,
                velocity_mps: 0.0,
            },
            BodyPath::Pacing {
                waypoints,
                cumulative,
                speed_mps,
                stride_hz,
                modulation,
                phase_rad,
            } => {
                let w = 2.0 * PI * stride_hz;
                let speed = speed_mps * (1.0 + modulation * (w * t + phase_rad).sin());
                let travelled = speed_mps
                    * (t - modulation / w * ((w * t + phase_rad).cos() - phase_rad.cos()));
                let total = *cumulative.last().unwrap_or(&0.0);
                let d = travelled.clamp(0.0, total);
                let seg = match cumulative.binary_search_by(|c| c.total_cmp(&d)) {
                    Ok(i) => i.min(waypoints.len().saturating_sub(2)),
                    Err(i) => i.saturating_sub(1).min(waypoints.len().saturating_sub(2)),
                };
                if waypoints.len() < 2 {
                    return Kinematics {
                        range_m: waypoints.first().copied().unwrap_or(0.0),
                        velocity_mps: 0.0,
                    };
                }
                let dir = (waypoints[seg + 1] - waypoints[seg]).signum();
                Kinematics {
                    range_m: waypoints[seg] + dir * (d - cumulative[seg]),
                    velocity_mps: dir * speed,
                }
            }
            BodyPath::Sweep {
                center_m,
                half_span_m,
                speed_mps,
                phase,
            } => {
                // One period covers 4 half spans.
                let period = 4.0 * half_span_m / speed_mps;
                let u = ((t / period + phase).rem_euclid(1.0)) * 4.0;
                let (offset, dir) = if u < 1.0 {
                    (u, 1.0)
                } else if u < 3.0 {
                    (2.0 - u, -1.0)
                } else {
                    (u - 4.0, 1.0)
                };
                Kinematics {
                    range_m: center_m + half_span_m * offset,
                    velocity_mps: dir * speed_mps,
                }
            }
        }
    }
}

/// Sinusoidal radial displacement `A e(t) sin(2 pi f t + phi)`, optionally
/// gated by a smooth `sin^2` envelope so the motion comes and goes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Oscillation {
    pub amplitude_m: f64,
    pub freq_hz: f64,
    pub phase_rad: f64,
    pub envelope_hz: Option<f64>,
}

impl Oscillation {
    pub fn new(amplitude_m: f64, freq_hz: f64, phase_rad: f64) -> Self {
        Self {
            amplitude_m,
            freq_hz,
            phase_rad,
            envelope_hz: None,
        }
    }

    fn displacement_velocity(&self, t: f64) -> (f64, f64) {
        let w = 2.0 * PI * self.freq_hz;
        let (s, c) = (w * t + self.phase_rad).sin_cos();
        match self.envelope_hz {
            None => (self.amplitude_m * s, self.amplitude_m * w * c),
            Some(fe) => {
                let we = PI * fe;
                let (se, ce) = (we * t).sin_cos();
                let env = se * se;
                let denv = 2.0 * se * ce * we;
                (
                    self.amplitude_m * env * s,
                    self.amplitude_m * (denv * s + env * w * c),
                )
            }
        }
    }

    /// Peak radial speed contributed by this oscillation, envelope included.
    pub fn peak_speed(&self) -> f64 {
        let w = 2.0 * PI * self.freq_hz;
        self.amplitude_m * (w + self.envelope_hz.map_or(0.0, |fe| PI * fe))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BodyPart {
    Torso,
    Limb,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scatterer {
    pub part: BodyPart,
    /// Linear reflectivity.
    pub amplitude: f64,
    pub path: Arc<BodyPath>,
    /// Constant radial offset from the body path.
    pub range_offset_m: f64,
    pub oscillations: Vec<Oscillation>,
    pub azimuth_rad: f64,
}

impl Scatterer {
    pub fn kinematics(&self, t: f64) -> Kinematics {
        let base = self.path.kinematics(t);
        let (mut r, mut v) = (base.range_m + self.range_offset_m, base.velocity_mps);
        for osc in &self.oscillations {
            let (dr, dv) = osc.displacement_velocity(t);
            r += dr;
            v += dv;
        }
        Kinematics {
            range_m: r,
            velocity_mps: v,
        }
    }

    /// A point reflector that never moves.
    pub fn fixed(range_m: f64, amplitude: f64, azimuth_rad: f64) -> Self {
        Self {
            part: BodyPart::Torso,
            amplitude,
            path: Arc::new(BodyPath::Fixed { range_m }),
            range_offset_m: 0.0,
            oscillations: Vec::new(),
            azimuth_rad,
        }
    }

    /// A point reflector moving at constant radial velocity, starting at
    /// `range_m` at `t = 0`.
    pub fn constant_velocity(range_m: f64, velocity_mps: f64, amplitude: f64) -> Self {
        let waypoint_end = range_m + velocity_mps * 1.0e6;
        Self {
            part: BodyPart::Torso,
            amplitude,
            path: Arc::new(BodyPath::pacing(
                vec![range_m, waypoint_end],
                velocity_mps.abs(),
                1.0,
                0.0,
                0.0,
            )),
            range_offset_m: 0.0,
            oscillations: Vec::new(),
            azimuth_rad: 0.0,
        }
    }
}

/// Per-subject scaling of template amplitudes and rates. Each subject owns a
/// disjoint seed range, so two subjects never share motion parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubjectProfile {
    pub amplitude_scale: f64,
    pub rate_scale: f64,
    pub speed_scale: f64,
}

impl Default for SubjectProfile {
    fn default() -> Self {
        Self {
            amplitude_scale: 1.0,
            rate_scale: 1.0,
            speed_scale: 1.0,
        }
    }
}

impl SubjectProfile {
    /// Draws a profile with every factor in `[0.85, 1.15]`.
    pub fn for_subject(subject_id: u32) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5EED_0000 ^ (subject_id as u64) << 20);
        Self {
            amplitude_scale: rng.random_range(0.85..=1.15),
            rate_scale: rng.random_range(0.85..=1.15),
            speed_scale: rng.random_range(0.85..=1.15),
        }
    }
}

/// A scripted activity: which scatterers exist and how they move.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionScript {
    pub activity: Activity,
    pub duration_s: f64,
    pub seed: u64,
    pub scatterers: Vec<Scatterer>,
}

impl MotionScript {
    pub fn torso(&self) -> Option<&Scatterer> {
        self.scatterers.iter().find(|s| s.part == BodyPart::Torso)
    }

    pub fn limbs(&self) -> impl Iterator<Item = &Scatterer> {
        self.scatterers.iter().filter(|s| s.part == BodyPart::Limb)
    }
}

/// Hard ceiling for any template's radial speed, kept below a 2.5 m/s
/// ambiguity limit with margin.
const SPEED_CEILING: f64 = 2.1;
const NEAR_RANGE: f64 = 1.0;
const FAR_RANGE: f64 = 4.6;

pub fn generate_motion(activity: Activity, duration_s: f64, seed: u64) -> Result<MotionScript, RadarError> {
    generate_motion_for(activity, duration_s, seed, &SubjectProfile::default())
}

/// Looks the activity up by name first; unknown names are rejected.
pub fn generate_motion_named(name: &str, duration_s: f64, seed: u64) -> Result<MotionScript, RadarError> {
    generate_motion(name.parse()?, duration_s, seed)
}

pub fn generate_motion_for(
    activity: Activity,
    duration_s: f64,
    seed: u64,
    subject: &SubjectProfile,
) -> Result<MotionScript, RadarError> {
    if !(duration_s.is_finite() && duration_s > 0.0) {
        return Err(RadarError::InvalidDuration(duration_s));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((activity.index() as u64 + 1) << 56));
    let amp = subject.amplitude_scale;
    let rate = subject.rate_scale;
    let azimuth = rng.random_range(-0.7..0.7);
    let scatterers = match activity {
        Activity::Empty => Vec::new(),
        Activity::Sedentary => sedentary(&mut rng, amp, rate, azimuth),
        Activity::Washing => washing(&mut rng, amp, rate, azimuth),
        Activity::Vacuuming => vacuuming(&mut rng, amp, rate, subject.speed_scale, azimuth),
        Activity::InPlaceMovement => in_place(&mut rng, amp, rate, azimuth),
        Activity::Walking => walking(&mut rng, duration_s, amp, rate, subject.speed_scale, azimuth),
    };
    Ok(MotionScript {
        activity,
        duration_s,
        seed,
        scatterers,
    })
}

fn torso(path: Arc<BodyPath>, amplitude: f64, azimuth: f64, oscillations: Vec<Oscillation>) -> Scatterer {
    Scatterer {
        part: BodyPart::Torso,
        amplitude,
        path,
        range_offset_m: 0.0,
        oscillations,
        azimuth_rad: azimuth,
    }
}

fn limb(path: &Arc<BodyPath>, amplitude: f64, offset: f64, azimuth: f64, oscillations: Vec<Oscillation>) -> Scatterer {
    Scatterer {
        part: BodyPart::Limb,
        amplitude,
        path: Arc::clone(path),
        range_offset_m: offset,
        oscillations,
        azimuth_rad: azimuth,
    }
}

fn breathing(rng: &mut ChaCha8Rng, amp: f64, rate: f64) -> Oscillation {
    Oscillation::new(
        0.006 * amp,
        (rng.random_range(0.2..0.4) * rate).clamp(0.2, 0.4),
        rng.random_range(0.0..2.0 * PI),
    )
}

/// Shrinks an oscillation until its peak speed plus `base_speed` stays under
/// the template ceiling.
fn capped(mut osc: Oscillation, base_speed: f64) -> Oscillation {
    let budget = SPEED_CEILING - base_speed;
    let peak = osc.peak_speed();
    if peak > budget && peak > 0.0 {
        osc.amplitude_m *= budget.max(0.0) / peak;
    }
    osc
}

fn sedentary(rng: &mut ChaCha8Rng, amp: f64, rate: f64, azimuth: f64) -> Vec<Scatterer> {
    let path = Arc::new(BodyPath::Fixed {
        range_m: rng.random_range(1.2..4.0),
    });
    let mut out = vec![torso(Arc::clone(&path), 1.0 * amp, azimuth, vec![breathing(rng, amp, rate)])];
    for k in 0..2 {
        let jitter = Oscillation {
            amplitude_m: rng.random_range(0.008..0.02) * amp,
            freq_hz: rng.random_range(0.3..0.8) * rate,
            phase_rad: rng.random_range(0.0..2.0 * PI),
            envelope_hz: Some(rng.random_range(0.08..0.2)),
        };
        let side = if k == 0 { -0.15 } else { 0.15 };
        out.push(limb(&path, 0.3 * amp, side, azimuth, vec![jitter]));
    }
    out
}

fn washing(rng: &mut ChaCha8Rng, amp: f64, rate: f64, azimuth: f64) -> Vec<Scatterer> {
    let path = Arc::new(BodyPath::Fixed {
        range_m: rng.random_range(1.5..4.0),
    });
    let mut out = vec![torso(Arc::clone(&path), 1.0 * amp, azimuth, vec![breathing(rng, amp, rate)])];
    let freq = (rng.random_range(0.5..1.5) * rate).clamp(0.5, 1.5);
    for _ in 0..2 {
        let arm = Oscillation::new(
            0.2 * amp,
            freq * rng.random_range(0.9..1.1),
            rng.random_range(0.0..2.0 * PI),
        );
        out.push(limb(&path, 0.4 * amp, -0.3, azimuth, vec![capped(arm, 0.0)]));
    }
    out
}

fn vacuuming(rng: &mut ChaCha8Rng, amp: f64, rate: f64, speed_scale: f64, azimuth: f64) -> Vec<Scatterer> {
    let speed = (rng.random_range(0.3..0.6) * speed_scale).min(0.6);
    let path = Arc::new(BodyPath::Sweep {
        center_m: rng.random_range(2.2..3.4),
        half_span_m: rng.random_range(0.7..1.0),
        speed_mps: speed,
        phase: rng.random_range(0.0..1.0),
    });
    let stroke = Oscillation::new(0.2 * amp, rng.random_range(0.85..1.15) * rate, rng.random_range(0.0..2.0 * PI));
    let hand = Oscillation::new(
        rng.random_range(0.02..0.05),
        rng.random_range(0.3..0.8),
        rng.random_range(0.0..2.0 * PI),
    );
    vec![
        torso(Arc::clone(&path), 1.0 * amp, azimuth, vec![breathing(rng, amp, rate)]),
        limb(&path, 0.4 * amp, -0.35, azimuth, vec![capped(stroke, speed)]),
        limb(&path, 0.25 * amp, 0.1, azimuth, vec![capped(hand, speed)]),
    ]
}

fn in_place(rng: &mut ChaCha8Rng, amp: f64, rate: f64, azimuth: f64) -> Vec<Scatterer> {
    let path = Arc::new(BodyPath::Fixed {
        range_m: rng.random_range(1.5..3.8),
    });
    let freq = (rng.random_range(0.35..0.8) * rate).min(0.8);
    let phase = rng.random_range(0.0..2.0 * PI);
    let excursion = Oscillation::new(0.15 * amp, freq, phase);
    let mut out = vec![torso(Arc::clone(&path), 1.0 * amp, azimuth, vec![excursion])];
    for _ in 0..2 {
        let reach = Oscillation::new(
            0.3 * amp,
            freq,
            phase + rng.random_range(0.2..0.8),
        );
        out.push(limb(&path, 0.35 * amp, -0.2, azimuth, vec![capped(reach, 0.0)]));
    }
    out
}

fn walking(
    rng: &mut ChaCha8Rng,
    duration_s: f64,
    amp: f64,
    rate: f64,
    speed_scale: f64,
    azimuth: f64,
) -> Vec<Scatterer> {
    let speed = (rng.random_range(0.8..1.6) * speed_scale).clamp(0.8, 1.6);
    let stride = rng.random_range(0.9..1.1) * rate;
    let modulation = 0.15;
    let needed = speed * (1.0 + modulation) * duration_s + 2.0;
    let mut waypoints = vec![rng.random_range(NEAR_RANGE..FAR_RANGE)];
    let mut length = 0.0;
    while length < needed {
        let last = *waypoints.last().unwrap();
        // Alternate direction, with legs of at least one metre.
        let next = if last - NEAR_RANGE > FAR_RANGE - last {
            rng.random_range(NEAR_RANGE..(last - 1.0).max(NEAR_RANGE + 1e-3))
        } else {
            rng.random_range((last + 1.0).min(FAR_RANGE - 1e-3)..FAR_RANGE)
        };
        length += (next - last).abs();
        waypoints.push(next);
    }
    let path = Arc::new(BodyPath::pacing(
        waypoints,
        speed,
        stride,
        modulation,
        rng.random_range(0.0..2.0 * PI),
    ));
    let torso_peak = speed * (1.0 + modulation);
    let mut out = vec![torso(Arc::clone(&path), 1.0 * amp, azimuth, Vec::new())];
    for k in 0..4 {
        let limb_freq = 2.0 * stride;
        let speed_offset = rng.random_range(0.6..2.0) * speed;
        let osc = Oscillation::new(
            speed_offset / (2.0 * PI * limb_freq),
            limb_freq,
            rng.random_range(0.0..2.0 * PI),
        );
        let offset = if k % 2 == 0 { -0.1 } else { 0.1 };
        let reflectivity = if k < 2 { 0.35 } else { 0.2 };
        out.push(limb(&path, reflectivity * amp, offset, azimuth, vec![capped(osc, torso_peak)]));
    }
    out
}

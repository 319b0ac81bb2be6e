use std::f64::consts::PI;

use num_complex::{Complex32, Complex64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::config::{derive_params, ChirpConfig, DerivedParams, SPEED_OF_LIGHT};
use super::scene::{MotionScript, Scatterer};
use super::RadarError;

/// Complex baseband samples of a recording, stored frame -> chirp -> channel
/// -> sample.
#[derive(Debug, Clone, PartialEq)]
pub struct RadarCube {
    pub config: ChirpConfig,
    pub num_frames: usize,
    pub start_time_ms: i64,
    pub data: Vec<Complex32>,
}

impl RadarCube {
    pub fn zeros(config: ChirpConfig, num_frames: usize, start_time_ms: i64) -> Self {
        let len = num_frames * config.chirps_per_frame * config.num_channels * config.samples_per_chirp;
        Self {
            config,
            num_frames,
            start_time_ms,
            data: vec![Complex32::new(0.0, 0.0); len],
        }
    }

    pub fn expected_len(&self) -> usize {
        self.num_frames * self.config.chirps_per_frame * self.config.num_channels * self.config.samples_per_chirp
    }

    /// Samples of one chirp on one channel.
    pub fn chirp(&self, frame: usize, chirp: usize, channel: usize) -> &[Complex32] {
        let c = &self.config;
        let start = ((frame * c.chirps_per_frame + chirp) * c.num_channels + channel) * c.samples_per_chirp;
        &self.data[start..start + c.samples_per_chirp]
    }

    pub fn frame_data(&self, frame: usize) -> &[Complex32] {
        let n = self.config.chirps_per_frame * self.config.num_channels * self.config.samples_per_chirp;
        &self.data[frame * n..(frame + 1) * n]
    }

    /// Duration spanned by the frames.
    pub fn duration_s(&self) -> f64 {
        self.num_frames as f64 * self.config.frame_period_s
    }
}

/// Per-run channel impairments: the constant phase mismatch of each virtual
/// receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMismatch {
    pub phase_rad: Vec<f64>,
}

impl ChannelMismatch {
    pub fn draw(config: &ChirpConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(u64::MAX);
        let w = config.channel_mismatch_rad;
        let phase_rad = (0..config.num_channels)
            .map(|_| if w > 0.0 { rng.random_range(-w..=w) } else { 0.0 })
            .collect();
        Self { phase_rad }
    }

    pub fn none(num_channels: usize) -> Self {
        Self {
            phase_rad: vec![0.0; num_channels],
        }
    }
}

/// Spatial phase of channel `l` for a plane wave from `azimuth` on a
/// half-wavelength uniform linear array.
pub fn steering_phase(channel: usize, azimuth_rad: f64) -> f64 {
    PI * channel as f64 * azimuth_rad.sin()
}

/// Synthesizes one chirp on one channel at slow time `t_s`.
///
/// Each scatterer contributes `b exp(j(2 pi f_b t_f + 4 pi R(t_s)/lambda +
/// tau_l + alpha_l))` with `f_b = 2 S R / c`; the sum is rotated by the
/// per-sample residual phase noise and complex Gaussian noise is added.
pub fn synthesize_chirp<R: Rng + ?Sized>(
    config: &ChirpConfig,
    scatterers: &[Scatterer],
    t_s: f64,
    channel: usize,
    mismatch: &ChannelMismatch,
    rng: &mut R,
) -> Result<Vec<Complex64>, RadarError> {
    let derived = derive_params(config);
    let mut out = vec![Complex64::new(0.0, 0.0); config.samples_per_chirp];
    synthesize_into(config, &derived, scatterers, t_s, channel, mismatch, rng, &mut out)?;
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn synthesize_into<R: Rng + ?Sized>(
    config: &ChirpConfig,
    derived: &DerivedParams,
    scatterers: &[Scatterer],
    t_s: f64,
    channel: usize,
    mismatch: &ChannelMismatch,
    rng: &mut R,
    out: &mut [Complex64],
) -> Result<(), RadarError> {
    out.iter_mut().for_each(|x| *x = Complex64::new(0.0, 0.0));
    let alpha = mismatch.phase_rad.get(channel).copied().unwrap_or(0.0);
    for sc in scatterers {
        let kin = sc.kinematics(t_s);
        if !(kin.range_m > 0.0 && kin.range_m < derived.max_range_m) {
            return Err(RadarError::RangeOutOfBound {
                range_m: kin.range_m,
                max_range_m: derived.max_range_m,
            });
        }
        if kin.velocity_mps.abs() >= derived.max_velocity_mps {
            return Err(RadarError::VelocityAmbiguous {
                velocity_mps: kin.velocity_mps,
                max_velocity_mps: derived.max_velocity_mps,
            });
        }
        let beat_hz = config.slope_hz_per_s * 2.0 * kin.range_m / SPEED_OF_LIGHT;
        let phase0 = 4.0 * PI * kin.range_m / derived.wavelength_m
            + steering_phase(channel, sc.azimuth_rad)
            + alpha;
        let step = Complex64::from_polar(1.0, 2.0 * PI * beat_hz / config.fs_hz);
        let mut phasor = Complex64::from_polar(sc.amplitude, phase0);
        for x in out.iter_mut() {
            *x += phasor;
            phasor *= step;
        }
    }
    let sigma_psi = config.phase_noise_std_rad;
    let sigma = config.noise_floor / std::f64::consts::SQRT_2;
    for x in out.iter_mut() {
        if sigma_psi > 0.0 && !scatterers.is_empty() {
            let psi: f64 = rng.sample::<f64, _>(StandardNormal) * sigma_psi;
            *x *= Complex64::from_polar(1.0, psi);
        }
        if sigma > 0.0 {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *x += Complex64::new(re * sigma, im * sigma);
        }
    }
    Ok(())
}

/// Frame-by-frame simulator. Frame `i` draws its noise from an independent
/// stream keyed by `(seed, i)`, so frames can be produced in any order and the
/// result is always bit-identical.
#[derive(Debug, Clone)]
pub struct Simulator {
    config: ChirpConfig,
    derived: DerivedParams,
    scatterers: Vec<Scatterer>,
    mismatch: ChannelMismatch,
    seed: u64,
    start_time_ms: i64,
    /// Slow-time offset of frame 0 relative to the motion script origin.
    time_offset_s: f64,
}

impl Simulator {
    pub fn new(config: &ChirpConfig, script: &MotionScript, seed: u64) -> Result<Self, RadarError> {
        config.validate()?;
        Ok(Self {
            config: config.clone(),
            derived: derive_params(config),
            scatterers: script.scatterers.clone(),
            mismatch: ChannelMismatch::draw(config, seed),
            seed,
            start_time_ms: 0,
            time_offset_s: 0.0,
        })
    }

    pub fn with_start_time(mut self, start_time_ms: i64) -> Self {
        self.start_time_ms = start_time_ms;
        self
    }

    /// Starts the motion script `offset_s` seconds in.
    pub fn with_time_offset(mut self, offset_s: f64) -> Self {
        self.time_offset_s = offset_s;
        self
    }

    pub fn with_mismatch(mut self, mismatch: ChannelMismatch) -> Self {
        self.mismatch = mismatch;
        self
    }

    pub fn config(&self) -> &ChirpConfig {
        &self.config
    }

    /// Writes frame `index` into `out` (length chirps x channels x samples).
    pub fn render_frame(&self, index: usize, out: &mut [Complex32]) -> Result<(), RadarError> {
        let c = &self.config;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        let mut buf = vec![Complex64::new(0.0, 0.0); c.samples_per_chirp];
        let frame_t = self.time_offset_s + index as f64 * c.frame_period_s;
        for chirp in 0..c.chirps_per_frame {
            let t_s = frame_t + chirp as f64 * c.chirp_period_s;
            for ch in 0..c.num_channels {
                synthesize_into(c, &self.derived, &self.scatterers, t_s, ch, &self.mismatch, &mut rng, &mut buf)?;
                let base = (chirp * c.num_channels + ch) * c.samples_per_chirp;
                for (dst, src) in out[base..base + c.samples_per_chirp].iter_mut().zip(&buf) {
                    *dst = Complex32::new(src.re as f32, src.im as f32);
                }
            }
        }
        Ok(())
    }

    /// A one-frame cube for frame `index`, timestamped on the frame grid.
    pub fn frame(&self, index: usize) -> Result<RadarCube, RadarError> {
        let start = self.start_time_ms + (index as f64 * self.config.frame_period_s * 1000.0).round() as i64;
        let mut cube = RadarCube::zeros(self.config.clone(), 1, start);
        self.render_frame(index, &mut cube.data)?;
        Ok(cube)
    }

    pub fn run(&self, num_frames: usize) -> Result<RadarCube, RadarError> {
        let mut cube = RadarCube::zeros(self.config.clone(), num_frames, self.start_time_ms);
        let n = self.config.chirps_per_frame * self.config.num_channels * self.config.samples_per_chirp;
        for (i, chunk) in cube.data.chunks_mut(n).enumerate() {
            self.render_frame(i, chunk)?;
        }
        Ok(cube)
    }
}

/// Simulates every whole frame of `script`.
pub fn simulate(config: &ChirpConfig, script: &MotionScript, seed: u64) -> Result<RadarCube, RadarError> {
    let frames = config.frames_in(script.duration_s);
    if frames == 0 {
        return Err(RadarError::InvalidDuration(script.duration_s));
    }
    Simulator::new(config, script, seed)?.run(frames)
}

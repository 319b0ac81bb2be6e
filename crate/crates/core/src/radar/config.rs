use serde::{Deserialize, Serialize};

use super::RadarError;

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

fn default_phase_noise() -> f64 {
    0.01
}

fn default_mismatch() -> f64 {
    0.05
}

/// FMCW waveform and receiver parameters.
///
/// Field names double as the keys of the JSON config files and of the RCUB
/// header, so they carry their units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChirpConfig {
    /// Start frequency of the ramp.
    pub f0_hz: f64,
    pub slope_hz_per_s: f64,
    /// Swept bandwidth during the ADC sampling window.
    pub bandwidth_hz: f64,
    pub fs_hz: f64,
    pub samples_per_chirp: usize,
    pub chirps_per_frame: usize,
    /// Chirp repetition period, idle time included.
    pub chirp_period_s: f64,
    pub frame_period_s: f64,
    /// Number of virtual receive channels.
    pub num_channels: usize,
    /// RMS amplitude of the additive complex Gaussian noise (`E|n|^2 = noise_floor^2`).
    #[serde(default)]
    pub noise_floor: f64,
    /// Standard deviation of the per-sample residual phase noise.
    #[serde(default = "default_phase_noise")]
    pub phase_noise_std_rad: f64,
    /// Half-width of the uniform per-channel phase mismatch.
    #[serde(default = "default_mismatch")]
    pub channel_mismatch_rad: f64,
}

/// Range and velocity quantities implied by a [`ChirpConfig`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedParams {
    pub range_resolution_m: f64,
    pub max_range_m: f64,
    pub max_velocity_mps: f64,
    pub velocity_resolution_mps: f64,
    pub doppler_bins: usize,
    pub wavelength_m: f64,
}

impl ChirpConfig {
    /// The AWR1443 configuration used for the in-home recordings: 77 GHz,
    /// 43.03 MHz/us slope, 3870 MHz swept, 3.4 Msps, 256 chirps in a 98 ms
    /// frame, 12 virtual channels.
    pub fn awr1443() -> Self {
        Self {
            f0_hz: 77.0e9,
            slope_hz_per_s: 43.03e12,
            bandwidth_hz: 3870.0e6,
            fs_hz: 3.4e6,
            samples_per_chirp: 306,
            chirps_per_frame: 256,
            chirp_period_s: 0.098 / 256.0,
            frame_period_s: 0.098,
            num_channels: 12,
            noise_floor: 0.05,
            phase_noise_std_rad: default_phase_noise(),
            channel_mismatch_rad: default_mismatch(),
        }
    }

    /// Same slow-time geometry as [`ChirpConfig::awr1443`] (carrier, chirp
    /// period, chirps per frame, so identical Doppler axis) with a short
    /// 64-sample ramp and two channels. Used where many minutes of data are
    /// synthesized.
    pub fn compact() -> Self {
        let base = Self::awr1443();
        let samples = 64;
        Self {
            bandwidth_hz: base.slope_hz_per_s * samples as f64 / base.fs_hz,
            samples_per_chirp: samples,
            num_channels: 2,
            ..base
        }
    }

    pub fn wavelength_m(&self) -> f64 {
        SPEED_OF_LIGHT / self.f0_hz
    }

    pub fn range_bins(&self) -> usize {
        self.samples_per_chirp / 2
    }

    /// Number of whole frames that fit in `duration_s`.
    pub fn frames_in(&self, duration_s: f64) -> usize {
        // Tolerate float noise when the duration is an exact multiple.
        ((duration_s / self.frame_period_s) + 1e-9).floor().max(0.0) as usize
    }

    pub fn validate(&self) -> Result<(), RadarError> {
        let positive = [
            ("f0_hz", self.f0_hz),
            ("slope_hz_per_s", self.slope_hz_per_s),
            ("bandwidth_hz", self.bandwidth_hz),
            ("fs_hz", self.fs_hz),
            ("chirp_period_s", self.chirp_period_s),
            ("frame_period_s", self.frame_period_s),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(RadarError::InvalidConfig(format!("{name} must be positive")));
            }
        }
        if self.num_channels == 0 {
            return Err(RadarError::InvalidConfig("num_channels must be >= 1".into()));
        }
        if self.samples_per_chirp < 2 || self.chirps_per_frame < 2 {
            return Err(RadarError::InvalidConfig(
                "need at least 2 samples per chirp and 2 chirps per frame".into(),
            ));
        }
        let swept = self.slope_hz_per_s * self.samples_per_chirp as f64 / self.fs_hz;
        if ((swept - self.bandwidth_hz) / self.bandwidth_hz).abs() > 0.01 {
            return Err(RadarError::InvalidConfig(format!(
                "bandwidth {} Hz inconsistent with slope x sampling window {} Hz",
                self.bandwidth_hz, swept
            )));
        }
        let active = self.chirps_per_frame as f64 * self.chirp_period_s;
        if active > self.frame_period_s * (1.0 + 1e-9) {
            return Err(RadarError::InvalidConfig(
                "chirps_per_frame x chirp_period_s exceeds frame_period_s".into(),
            ));
        }
        if !(self.noise_floor >= 0.0 && self.phase_noise_std_rad >= 0.0) {
            return Err(RadarError::InvalidConfig("noise terms must be >= 0".into()));
        }
        Ok(())
    }

    /// True when two configs describe the same sampling grid, ignoring the
    /// stochastic impairment settings.
    pub fn same_geometry(&self, other: &Self) -> bool {
        self.f0_hz == other.f0_hz
            && self.slope_hz_per_s == other.slope_hz_per_s
            && self.fs_hz == other.fs_hz
            && self.samples_per_chirp == other.samples_per_chirp
            && self.chirps_per_frame == other.chirps_per_frame
            && self.chirp_period_s == other.chirp_period_s
            && self.num_channels == other.num_channels
    }
}

/// Derives resolution and ambiguity limits from a waveform.
pub fn derive_params(config: &ChirpConfig) -> DerivedParams {
    let wavelength = config.wavelength_m();
    let max_velocity = wavelength / (4.0 * config.chirp_period_s);
    DerivedParams {
        range_resolution_m: SPEED_OF_LIGHT / (2.0 * config.bandwidth_hz),
        max_range_m: SPEED_OF_LIGHT * config.fs_hz / (4.0 * config.slope_hz_per_s),
        max_velocity_mps: max_velocity,
        velocity_resolution_mps: 2.0 * max_velocity / config.chirps_per_frame as f64,
        doppler_bins: config.chirps_per_frame,
        wavelength_m: wavelength,
    }
}

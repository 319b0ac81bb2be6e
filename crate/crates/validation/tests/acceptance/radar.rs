use radaract_core::dsp::{clutter_removal as remove_clutter, compute_jtf, range_fft, RangeProfile, DOPPLER_BINS};
use radaract_core::radar::{derive_params, simulate, Activity, ChirpConfig, MotionScript, Scatterer, SPEED_OF_LIGHT};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Checks, Context, Outcome};

const BUNDLED_CONFIG: &str = include_str!("../../../cli/configs/ti_awr1443.json");

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

pub fn derived_parameters(_: &mut Context) -> Outcome {
    let config: ChirpConfig = serde_json::from_str(BUNDLED_CONFIG).map_err(|e| e.to_string())?;
    let p = derive_params(&config);
    let mut checks = Checks::default();
    for (name, got, quoted) in [
        ("R_max", p.max_range_m, 5.9238),
        ("dR", p.range_resolution_m, 0.038733),
        ("v_max", p.max_velocity_mps, 2.5414),
        ("v_res", p.velocity_resolution_mps, 0.02),
    ] {
        let e = rel(got, quoted);
        checks.check(e <= 0.002, format!("{name} {got:.6} vs {quoted} ({:.3}%)", 100.0 * e));
    }
    checks.finish()
}

fn script(scatterers: Vec<Scatterer>, duration_s: f64) -> MotionScript {
    MotionScript {
        activity: Activity::Sedentary,
        duration_s,
        seed: 0,
        scatterers,
    }
}

fn argmax<T: PartialOrd + Copy>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

fn profile(config: &ChirpConfig, scatterers: Vec<Scatterer>, duration_s: f64, seed: u64) -> Result<RangeProfile, String> {
    let cube = simulate(config, &script(scatterers, duration_s), seed).map_err(|e| e.to_string())?;
    range_fft(&cube).map_err(|e| e.to_string())
}

/// The sensor geometry with the swept bandwidth equal to the span the ADC
/// actually samples, so one FFT bin is exactly one range resolution cell.
fn bin_consistent_config() -> ChirpConfig {
    let mut c = ChirpConfig::awr1443();
    c.bandwidth_hz = c.slope_hz_per_s * c.samples_per_chirp as f64 / c.fs_hz;
    c
}

pub fn dsp_fidelity(_: &mut Context) -> Outcome {
    let mut checks = Checks::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);

    let mut c = bin_consistent_config();
    c.chirps_per_frame = 4;
    c.frame_period_s = 4.0 * c.chirp_period_s;
    let dr = derive_params(&c).range_resolution_m;
    let mut range_misses = Vec::new();
    for trial in 0..20 {
        let r = rng.random_range(0.3..5.6);
        let expected = (r / dr).round() as usize;
        let p = profile(&c, vec![Scatterer::fixed(r, 1.0, rng.random_range(-0.5..0.5))], c.frame_period_s, trial)?;
        for chirp in 0..p.num_chirps {
            for ch in 0..p.num_channels() {
                let mags: Vec<f64> = (0..p.range_bins()).map(|b| p.at(chirp, ch, b).norm()).collect();
                let got = argmax(&mags);
                if got != expected {
                    range_misses.push(format!("R={r:.4} bin {got} != {expected}"));
                }
            }
        }
    }
    checks.check(range_misses.is_empty(), format!("20 static scatterers on exact bin ({} misses {:?})", range_misses.len(), range_misses.first()));

    let c = ChirpConfig::compact();
    let v_res = derive_params(&c).velocity_resolution_mps;
    let duration = 10.0 * c.frame_period_s;
    let mut worst = 0i64;
    let mut doppler_misses = Vec::new();
    for trial in 0..10 {
        let v: f64 = rng.random_range(-2.0..2.0);
        let r0 = 3.0 - v * duration / 2.0;
        let p = profile(&c, vec![Scatterer::constant_velocity(r0, v, 1.0)], duration, 500 + trial)?;
        let spec = compute_jtf(&p).map_err(|e| e.to_string())?;
        let mut acc = vec![0.0f64; DOPPLER_BINS];
        for col in spec.columns() {
            for (a, &x) in acc.iter_mut().zip(col) {
                *a += x as f64;
            }
        }
        let expected = 128 + (v / v_res).round() as i64;
        let off = (argmax(&acc) as i64 - expected).abs();
        worst = worst.max(off);
        if off > 1 {
            doppler_misses.push(format!("v={v:.3} off by {off}"));
        }
    }
    checks.check(doppler_misses.is_empty(), format!("10 moving scatterers within {worst} Doppler bin {doppler_misses:?}"));
    checks.finish()
}

pub fn clutter_removal(_: &mut Context) -> Outcome {
    let mut checks = Checks::default();
    let c = ChirpConfig::awr1443();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let ranges: Vec<f64> = (0..3).map(|_| rng.random_range(0.5..5.5)).collect();
    let scatterers: Vec<Scatterer> = ranges.iter().map(|&r| Scatterer::fixed(r, 1.0, rng.random_range(-0.6..0.6))).collect();
    let p = profile(&c, scatterers, 2.0 * c.frame_period_s, 17)?;
    let out = remove_clutter(&p).map_err(|e| e.to_string())?;
    let before = p.bin_energy();
    let after = out.bin_energy();
    let mut worst_db = f64::INFINITY;
    for r in &ranges {
        let beat = c.slope_hz_per_s * 2.0 * r / SPEED_OF_LIGHT * c.samples_per_chirp as f64 / c.fs_hz;
        let centre = beat.round() as usize;
        let bin = (centre - 1..=centre + 1)
            .max_by(|&x, &y| before[x].total_cmp(&before[y]))
            .unwrap();
        worst_db = worst_db.min(10.0 * (before[bin] / after[bin]).log10());
    }
    checks.check(worst_db >= 40.0, format!("static energy suppressed by {worst_db:.1} dB"));

    let n = c.chirps_per_frame;
    let stride = c.num_channels * c.range_bins();
    let rms = (p.energy() / p.data.len() as f64).sqrt();
    let mut worst = 0.0f64;
    for block in 0..p.num_chirps / n {
        for cell in 0..stride {
            let mut mean = num_complex::Complex64::new(0.0, 0.0);
            for chirp in block * n..(block + 1) * n {
                mean += out.data[chirp * stride + cell];
            }
            worst = worst.max((mean / n as f64).norm() / rms);
        }
    }
    checks.check(worst < 1e-9, format!("block mean {worst:.2e} x input RMS"));
    checks.finish()
}

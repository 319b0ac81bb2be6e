use num_complex::Complex64;
use proptest::prelude::*;
use radaract_core::dsp::{
    clutter_removal, coherent_accumulate, compute_jtf, mutual_coupling_reduction, range_fft, CouplingCalibration,
    RangeProfile, DOPPLER_BINS, ZERO_DOPPLER_BIN,
};
use radaract_core::radar::{
    derive_params, generate_motion, simulate, Activity, ChirpConfig, MotionScript, Scatterer, SPEED_OF_LIGHT,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

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

fn profile_of(config: &ChirpConfig, scatterers: Vec<Scatterer>, duration_s: f64, seed: u64) -> RangeProfile {
    let cube = simulate(config, &script(scatterers, duration_s), seed).unwrap();
    range_fft(&cube).unwrap()
}

/// Spectrum summed over every column.
fn doppler_profile(p: &RangeProfile) -> Vec<f64> {
    let spec = compute_jtf(p).unwrap();
    let mut acc = vec![0.0; DOPPLER_BINS];
    for col in spec.columns() {
        for (a, &x) in acc.iter_mut().zip(col) {
            *a += x as f64;
        }
    }
    acc
}

#[test]
fn static_range_peak_follows_beat_frequency() {
    let mut c = ChirpConfig::awr1443();
    c.chirps_per_frame = 4;
    c.frame_period_s = 4.0 * c.chirp_period_s;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..20 {
        let r = rng.random_range(0.5..5.5);
        let fb = c.slope_hz_per_s * 2.0 * r / SPEED_OF_LIGHT;
        let expected = (fb * c.samples_per_chirp as f64 / c.fs_hz).round() as usize;
        let p = profile_of(&c, vec![Scatterer::fixed(r, 1.0, 0.0)], c.frame_period_s, trial);
        for chirp in 0..p.num_chirps {
            let mags: Vec<f64> = (0..p.range_bins()).map(|b| p.at(chirp, 0, b).norm()).collect();
            assert_eq!(argmax(&mags), expected, "R = {r} m, chirp {chirp}");
        }
    }
}

#[test]
fn doppler_peak_tracks_constant_velocity() {
    let c = ChirpConfig::compact();
    let v_res = derive_params(&c).velocity_resolution_mps;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let duration = 10.0 * c.frame_period_s;
    for trial in 0..10 {
        let v: f64 = rng.random_range(-2.0..2.0);
        let r0 = 3.0 - v * duration / 2.0;
        let p = profile_of(&c, vec![Scatterer::constant_velocity(r0, v, 1.0)], duration, 100 + trial);
        let peak = argmax(&doppler_profile(&p)) as i64;
        let expected = ZERO_DOPPLER_BIN as i64 + (v / v_res).round() as i64;
        assert!((peak - expected).abs() <= 1, "v = {v}: bin {peak}, expected {expected}");
    }
}

#[test]
fn plus_one_meter_per_second_lands_on_bin_178() {
    let c = ChirpConfig::compact();
    let p = profile_of(&c, vec![Scatterer::constant_velocity(2.0, 1.0, 1.0)], 5.0 * c.frame_period_s, 3);
    let spec = compute_jtf(&p).unwrap();
    for col in spec.columns() {
        let peak = argmax(col) as i64;
        assert!((peak - 178).abs() <= 1, "peak {peak}");
    }
}

#[test]
fn static_scatterer_suppressed_by_40_db() {
    let c = ChirpConfig::awr1443();
    let p = profile_of(&c, vec![Scatterer::fixed(2.0, 1.0, 0.3)], c.frame_period_s, 9);
    let before = p.bin_energy();
    let after = clutter_removal(&p).unwrap().bin_energy();
    let ratio_db = 10.0 * (before[52] / after[52]).log10();
    assert!(ratio_db >= 40.0, "suppression {ratio_db:.1} dB");
}

#[test]
fn moving_target_survives_clutter_removal() {
    let c = ChirpConfig::compact();
    let p = profile_of(&c, vec![Scatterer::constant_velocity(2.0, 0.5, 1.0)], 4.0 * c.frame_period_s, 4);
    let before = p.bin_energy();
    let after = clutter_removal(&p).unwrap().bin_energy();
    let peak = before.iter().cloned().fold(0.0, f64::max);
    let occupied: Vec<usize> = (0..before.len()).filter(|&b| before[b] > 0.1 * peak).collect();
    let e_in: f64 = occupied.iter().map(|&b| before[b]).sum();
    let e_out: f64 = occupied.iter().map(|&b| after[b]).sum();
    assert!(e_out >= 0.9 * e_in, "kept {:.3}", e_out / e_in);
}

/// Adds the same complex offset to every chirp of each (channel, bin).
fn add_leakage(p: &mut RangeProfile, leak: &[Complex64]) {
    let stride = leak.len();
    for chunk in p.data.chunks_mut(stride) {
        for (x, l) in chunk.iter_mut().zip(leak) {
            *x += l;
        }
    }
}

#[test]
fn coupling_reduction_removes_leakage() {
    let c = ChirpConfig::compact();
    let stride = c.num_channels * c.range_bins();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let leak: Vec<Complex64> = (0..stride)
        .map(|i| {
            let decay = (-((i % c.range_bins()) as f64) / 3.0).exp();
            Complex64::from_polar(40.0 * decay, rng.random_range(0.0..std::f64::consts::TAU))
        })
        .collect();
    let empty: Vec<RangeProfile> = (0..3)
        .map(|s| {
            let mut p = profile_of(&c, Vec::new(), 2.0 * c.frame_period_s, 50 + s);
            add_leakage(&mut p, &leak);
            p
        })
        .collect();
    let cal = CouplingCalibration::from_profiles(&empty).unwrap();
    let clean = profile_of(&c, vec![Scatterer::constant_velocity(3.0, 0.8, 1.0)], 2.0 * c.frame_period_s, 77);
    let mut dirty = clean.clone();
    add_leakage(&mut dirty, &leak);
    let reduced = mutual_coupling_reduction(&dirty, &cal).unwrap();
    // Leakage left behind = chirp-mean of (reduced - clean), per bin.
    let n = clean.num_chirps as f64;
    let mut residual = vec![Complex64::new(0.0, 0.0); stride];
    for (i, (r, x)) in reduced.data.iter().zip(&clean.data).enumerate() {
        residual[i % stride] += (r - x) / n;
    }
    let leak_bins: Vec<usize> = (0..stride).filter(|&i| leak[i].norm() > 1.0).collect();
    let e_leak: f64 = leak_bins.iter().map(|&i| leak[i].norm_sqr()).sum();
    let e_res: f64 = leak_bins.iter().map(|&i| residual[i].norm_sqr()).sum();
    let drop_db = 10.0 * (e_leak / e_res).log10();
    assert!(drop_db >= 30.0, "leakage dropped {drop_db:.1} dB");
    // Target bins stay above the noise.
    let target = clean.bin_energy();
    let out = reduced.bin_energy();
    let hot = argmax(&target);
    assert!(out[hot] > 0.5 * target[hot]);
}

#[test]
fn coupling_calibration_rejects_other_config() {
    let c = ChirpConfig::compact();
    let cal = CouplingCalibration::zeros(&c);
    let p = RangeProfile::zeros(ChirpConfig::awr1443(), 4, 0);
    assert!(mutual_coupling_reduction(&p, &cal).is_err());
}

#[test]
fn sedentary_energy_stays_near_zero_doppler() {
    let c = ChirpConfig::compact();
    let params = derive_params(&c);
    for seed in 0..3 {
        let m = generate_motion(Activity::Sedentary, 6.0, seed).unwrap();
        let p = range_fft(&simulate(&c, &m, seed).unwrap()).unwrap();
        let spec = compute_jtf(&p).unwrap();
        let mut total = 0.0;
        let mut slow = 0.0;
        for col in spec.columns() {
            for (b, &x) in col.iter().enumerate() {
                total += x as f64;
                if spec.bin_velocity(b).abs() <= 0.2 + 1e-9 {
                    slow += x as f64;
                }
            }
        }
        assert!(slow >= 0.95 * total, "seed {seed}: {:.3} within 0.2 m/s", slow / total);
        assert!((params.max_velocity_mps - spec.max_velocity_mps).abs() < 1e-9);
    }
}

#[test]
fn walking_shows_both_doppler_signs() {
    let c = ChirpConfig::compact();
    let m = generate_motion(Activity::Walking, 12.0, 8).unwrap();
    let p = range_fft(&simulate(&c, &m, 8).unwrap()).unwrap();
    let spec = compute_jtf(&p).unwrap();
    let centroids: Vec<f64> = spec
        .columns()
        .map(|col| {
            let e: f64 = col.iter().map(|&x| x as f64).sum();
            col.iter().enumerate().map(|(b, &x)| spec.bin_velocity(b) * x as f64).sum::<f64>() / e.max(1e-30)
        })
        .collect();
    let hi = centroids.iter().cloned().fold(f64::MIN, f64::max);
    let lo = centroids.iter().cloned().fold(f64::MAX, f64::min);
    assert!(hi >= 1.0 && lo <= -1.0, "centroid range [{lo:.2}, {hi:.2}]");
}

#[test]
fn delay_by_whole_frames_shifts_columns() {
    let c = ChirpConfig::compact();
    let m = generate_motion(Activity::InPlaceMovement, 3.0, 2).unwrap();
    let p = range_fft(&simulate(&c, &m, 2).unwrap()).unwrap();
    let base = compute_jtf(&p).unwrap();
    for frames in [1, 2] {
        let k = frames * c.chirps_per_frame / 64;
        let pad = profile_of(&c, Vec::new(), frames as f64 * c.frame_period_s, 99);
        let delayed = RangeProfile::concat(&[pad, p.clone()]).unwrap();
        let shifted = compute_jtf(&delayed).unwrap();
        assert_eq!(shifted.num_columns(), base.num_columns() + k);
        for i in 0..base.num_columns() {
            assert_eq!(shifted.column(i + k), base.column(i), "column {i}, shift {k}");
        }
    }
}

fn random_profile(seed: u64, frames: usize, scale: f64) -> RangeProfile {
    let mut c = ChirpConfig::compact();
    c.chirps_per_frame = 64;
    c.frame_period_s = 64.0 * c.chirp_period_s;
    let mut p = RangeProfile::zeros(c, 64 * frames, 0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let offset = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * scale;
    for z in &mut p.data {
        *z = offset + Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * scale * 0.1;
    }
    p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn clutter_removed_blocks_have_zero_mean(seed in any::<u64>(), frames in 1usize..4, scale in 1e-3f64..1e3) {
        let p = random_profile(seed, frames, scale);
        let out = clutter_removal(&p).unwrap();
        let n = p.config.chirps_per_frame;
        let stride = p.config.num_channels * p.range_bins();
        let rms = (p.energy() / p.data.len() as f64).sqrt();
        for block in 0..frames {
            for cell in 0..stride {
                let mut mean = Complex64::new(0.0, 0.0);
                for chirp in block * n..(block + 1) * n {
                    mean += out.data[chirp * stride + cell];
                }
                mean /= n as f64;
                prop_assert!(mean.norm() < 1e-9 * rms);
            }
        }
    }

    #[test]
    fn spectrogram_is_finite_and_non_negative(seed in any::<u64>(), frames in 2usize..4, scale in 1e-6f64..1e6) {
        let p = random_profile(seed, frames, scale);
        let spec = compute_jtf(&p).unwrap();
        for col in spec.columns() {
            prop_assert_eq!(col.len(), DOPPLER_BINS);
            prop_assert!(col.iter().all(|x| x.is_finite() && *x >= 0.0));
        }
    }

    #[test]
    fn accumulation_is_linear(seed in any::<u64>(), a in -10.0f64..10.0) {
        let p = random_profile(seed, 1, 1.0);
        let mut q = p.clone();
        for z in &mut q.data {
            *z *= a;
        }
        let s = coherent_accumulate(&p);
        let t = coherent_accumulate(&q);
        for (x, y) in s.samples.iter().zip(&t.samples) {
            prop_assert!((x * a - y).norm() <= 1e-9 * (1.0 + x.norm() * a.abs()));
        }
    }
}

//! Simulation parameter studies: the detection-threshold sweep, penalty
//! and mode-count sweeps of the decomposition, the distance sweep and the
//! passerby interference comparison. Each produces a CSV-ready table
//! with one row per (parameter value, seed) and aggregate means appended.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bpso::{bpso_optimize, BeamTask, BpsoConfig};
use crate::detect::{
    demux_stream, intensity_indicator, measure_intensity, respiration_indicator,
};
use crate::error::{CoreError, Result};
use crate::pipeline::{
    band_motion, calibrated_noise_db, four_person_positions, four_person_scene, measure_baseline,
    randomized_person, synthesize_scan_codings, SystemConfig,
};
use crate::ris::StcCoding;
use crate::scene::{scan_sequence, simulate_received, PasserbyTrack, Scene};
use crate::vmd::{
    baseline_vmd, estimate_rate, improved_vmd, Convergence, ImfSet, VmdConfig,
};

/// One sweep result: named columns, one row per trial, means appended by
/// [`SweepTable::append_means`] with the seed column set to NaN (printed
/// as `mean`).
#[derive(Debug, Clone)]
pub struct SweepTable {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl SweepTable {
    fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    /// Appends one mean row per distinct value of the parameter column;
    /// the seed column becomes NaN to mark the aggregate.
    pub fn append_means(&mut self, param_col: usize, seed_col: usize) {
        let mut params: Vec<f64> = self.rows.iter().map(|r| r[param_col]).collect();
        params.sort_by(|a, b| a.partial_cmp(b).unwrap());
        params.dedup();
        let mut means = Vec::new();
        for p in params {
            let group: Vec<&Vec<f64>> =
                self.rows.iter().filter(|r| r[param_col] == p).collect();
            let mut row = vec![0.0; self.columns.len()];
            for (c, slot) in row.iter_mut().enumerate() {
                if c == seed_col {
                    *slot = f64::NAN;
                } else {
                    *slot = group.iter().map(|r| r[c]).sum::<f64>() / group.len() as f64;
                }
            }
            means.push(row);
        }
        self.rows.extend(means);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .enumerate()
                .map(|(c, v)| {
                    if v.is_nan() && self.columns[c] == "seed" {
                        "mean".to_string()
                    } else if self.columns[c] == "seed" || self.columns[c] == "i_total" {
                        format!("{}", *v as i64)
                    } else {
                        format!("{v}")
                    }
                })
                .collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

// ─── Shared single-person trial machinery ────────────────────────────────

/// Focused monitoring coding for one harmonic at one point.
fn focus_coding(config: &SystemConfig, k: i32, target: [f64; 3]) -> Result<StcCoding> {
    let task = BeamTask::uniform(&[(k, target)])?;
    let bpso = BpsoConfig { seed: config.monitor_bpso.seed, ..config.monitor_bpso.clone() };
    Ok(bpso_optimize(&task, &config.geometry, &config.grid, &bpso)?.best_coding)
}

/// Simulates the monitoring dwell and returns the decimated motion signal
/// of harmonic `k`.
fn monitored_motion(
    config: &SystemConfig,
    scene: &Scene,
    coding: &StcCoding,
    k: i32,
) -> Result<Vec<f64>> {
    let echo = simulate_received(
        scene,
        coding,
        &config.geometry,
        &config.grid,
        config.monitor_duration_s,
        config.fs,
        config.k_range_inclusive(),
    )?;
    band_motion(config, echo.stream(0), k)
}

/// Splits a baseline decomposition into respiration/heartbeat series by
/// mode center frequency; when no mode lands in the heartbeat band, the
/// heartbeat series falls back to the input minus the respiration share
/// (the estimator then sees the leftover spectrum).
pub fn split_modes_by_band(
    imfs: &ImfSet,
    input: &[f64],
    resp_band: (f64, f64),
    heart_band: (f64, f64),
) -> (Vec<f64>, Vec<f64>) {
    let n = input.len();
    let mut resp = vec![0.0; n];
    let mut heart = vec![0.0; n];
    let mut heart_hit = false;
    for (mode, &w) in imfs.modes.iter().zip(imfs.center_freqs_hz.iter()) {
        if w >= resp_band.0 && w <= resp_band.1 {
            for (r, m) in resp.iter_mut().zip(mode.iter()) {
                *r += m;
            }
        } else if w >= heart_band.0 && w <= heart_band.1 {
            heart_hit = true;
            for (h, m) in heart.iter_mut().zip(mode.iter()) {
                *h += m;
            }
        }
    }
    if !heart_hit {
        for i in 0..n {
            heart[i] = input[i] - resp[i];
        }
    }
    (resp, heart)
}

fn rate_errors(
    resp: &[f64],
    heart: &[f64],
    fs: f64,
    vmd: &VmdConfig,
    window_s: f64,
    gt_rr: f64,
    gt_hr: f64,
) -> Result<(f64, f64)> {
    let rr = estimate_rate(resp, fs, (0.1, vmd.lowpass_cutoff_hz), window_s)?;
    let hr = estimate_rate(heart, fs, vmd.heart_band_hz, window_s)?;
    Ok(((rr.per_minute - gt_rr).abs(), (hr.per_minute - gt_hr).abs()))
}

// ─── Threshold sweep ─────────────────────────────────────────────────────

/// Detection study over the intensity threshold: a four-person scene is
/// scanned once per seed, then every threshold value re-evaluates the
/// indicators. Counts hits (directions with a person) and false alarms
/// (without), for intensity-only detection and for the two-indicator
/// test.
pub fn sweep_mu(
    config: &SystemConfig,
    mu_values: &[f64],
    seeds: u64,
    snr_db: f64,
) -> Result<SweepTable> {
    config.validate()?;
    let mut table = SweepTable::new(
        "mu",
        &["mu", "seed", "hits_both", "false_both", "hits_intensity", "false_intensity"],
    );
    let scan_codings = synthesize_scan_codings(config)?;
    // directions holding a person (nearest-focus match)
    let positions = four_person_positions(config.grid.z);
    let person_dirs: Vec<usize> = positions
        .iter()
        .map(|p| {
            config
                .directions
                .iter()
                .enumerate()
                .min_by(|a, b| {
                    let da = (a.1[0] - p[0]).abs();
                    let db = (b.1[0] - p[0]).abs();
                    da.partial_cmp(&db).unwrap()
                })
                .map(|(d, _)| d)
                .expect("directions non-empty")
        })
        .collect();

    for seed in 0..seeds {
        let mut scene = four_person_scene(config.grid.z, 31_000 + seed);
        // calibrate against the weakest person through its scan coding
        let pairs: Vec<(usize, i32)> =
            (0..4).map(|i| (i, config.scan_harmonic)).collect();
        let mut worst = f64::NEG_INFINITY;
        for (i, &d) in person_dirs.iter().enumerate() {
            let db =
                calibrated_noise_db(&scene, &scan_codings[d], config, &[(i, pairs[i].1)], snr_db)?;
            worst = worst.max(db);
        }
        scene.noise_power_db = worst;

        let baseline = measure_baseline(config, &scan_codings, &scene)?;
        let echo = scan_sequence(
            &scene,
            &scan_codings,
            &config.geometry,
            &config.grid,
            config.scan_dwell_s,
            config.fs,
            config.k_range_inclusive(),
        )?;
        // per-direction intensity and respiration verdicts, independent
        // of the threshold
        let mut intensities = Vec::new();
        let mut respiration = Vec::new();
        for d in 0..config.directions.len() {
            let band = demux_stream(
                echo.stream(d),
                echo.fs,
                echo.mod_freq_hz,
                config.scan_harmonic,
                None,
            )?;
            intensities.push(measure_intensity(&band));
            respiration.push(respiration_indicator(&band, echo.fs, &config.detection)?);
        }

        for &mu in mu_values {
            let mut hits_both = 0;
            let mut false_both = 0;
            let mut hits_intensity = 0;
            let mut false_intensity = 0;
            for d in 0..config.directions.len() {
                let threshold = if config.detection.mu_absolute {
                    mu
                } else {
                    mu * baseline.intensities[d]
                };
                let strong =
                    intensity_indicator(intensities[d], baseline.intensities[d], threshold);
                let both = strong && respiration[d];
                let has_person = person_dirs.contains(&d);
                if strong {
                    if has_person {
                        hits_intensity += 1;
                    } else {
                        false_intensity += 1;
                    }
                }
                if both {
                    if has_person {
                        hits_both += 1;
                    } else {
                        false_both += 1;
                    }
                }
            }
            table.rows.push(vec![
                mu,
                seed as f64,
                hits_both as f64,
                false_both as f64,
                hits_intensity as f64,
                false_intensity as f64,
            ]);
        }
    }
    table.append_means(0, 1);
    Ok(table)
}

// ─── Penalty sweep ───────────────────────────────────────────────────────

/// Estimation-error study over the bandwidth penalty: constant-penalty
/// runs at each listed value plus one adaptive-penalty run per seed
/// (recorded with alpha = 0).
pub fn sweep_alpha(
    config: &SystemConfig,
    alpha_values: &[f64],
    seeds: u64,
    snr_db: f64,
) -> Result<SweepTable> {
    config.validate()?;
    let mut table =
        SweepTable::new("alpha", &["alpha", "seed", "rr_error_rpm", "hr_error_bpm"]);
    let target = [0.5, 0.0, config.grid.z];
    let k = config.scan_harmonic;
    let coding = focus_coding(config, k, target)?;
    for seed in 0..seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(32_000 + seed);
        let mut scene = Scene::new(32_000 + seed);
        scene.persons.push(randomized_person(target, &mut rng));
        scene.noise_power_db = calibrated_noise_db(&scene, &coding, config, &[(0, k)], snr_db)?;
        let motion = monitored_motion(config, &scene, &coding, k)?;
        let gt_rr = scene.persons[0].resp_hz * 60.0;
        let gt_hr = scene.persons[0].heart_hz * 60.0;
        let window = config.monitor_duration_s;

        for &alpha in alpha_values {
            let vmd = VmdConfig { alpha_init: alpha, zeta_hz2: 0.0, ..config.vmd.clone() };
            let out = improved_vmd(&motion, config.vmd_fs, &vmd)?;
            let (rr_e, hr_e) = rate_errors(
                &out.resp_signal,
                &out.heart_signal,
                config.vmd_fs,
                &vmd,
                window,
                gt_rr,
                gt_hr,
            )?;
            table.rows.push(vec![alpha, seed as f64, rr_e, hr_e]);
        }
        // adaptive penalty, recorded as alpha = 0
        let out = improved_vmd(&motion, config.vmd_fs, &config.vmd)?;
        let (rr_e, hr_e) = rate_errors(
            &out.resp_signal,
            &out.heart_signal,
            config.vmd_fs,
            &config.vmd,
            window,
            gt_rr,
            gt_hr,
        )?;
        table.rows.push(vec![0.0, seed as f64, rr_e, hr_e]);
    }
    table.append_means(0, 1);
    Ok(table)
}

// ─── Mode-count sweep ────────────────────────────────────────────────────

/// Paired improved-vs-baseline estimation errors over the mode count.
pub fn sweep_imf_count(
    config: &SystemConfig,
    counts: &[usize],
    seeds: u64,
    snr_db: f64,
) -> Result<SweepTable> {
    config.validate()?;
    let mut table = SweepTable::new(
        "imf_count",
        &[
            "i_total",
            "seed",
            "rr_improved_rpm",
            "hr_improved_bpm",
            "rr_baseline_rpm",
            "hr_baseline_bpm",
        ],
    );
    let target = [0.5, 0.0, config.grid.z];
    let k = config.scan_harmonic;
    let coding = focus_coding(config, k, target)?;
    for seed in 0..seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(33_000 + seed);
        let mut scene = Scene::new(33_000 + seed);
        scene.persons.push(randomized_person(target, &mut rng));
        scene.noise_power_db = calibrated_noise_db(&scene, &coding, config, &[(0, k)], snr_db)?;
        let motion = monitored_motion(config, &scene, &coding, k)?;
        let gt_rr = scene.persons[0].resp_hz * 60.0;
        let gt_hr = scene.persons[0].heart_hz * 60.0;
        let window = config.monitor_duration_s;

        for &i_total in counts {
            let vmd = VmdConfig {
                i_total,
                m_resp: 3.min(i_total - 1).max(1),
                ..config.vmd.clone()
            };
            let out = improved_vmd(&motion, config.vmd_fs, &vmd)?;
            let (rr_i, hr_i) = rate_errors(
                &out.resp_signal,
                &out.heart_signal,
                config.vmd_fs,
                &vmd,
                window,
                gt_rr,
                gt_hr,
            )?;
            let base = baseline_vmd(
                &motion,
                config.vmd_fs,
                i_total,
                vmd.alpha_init,
                vmd.lagrange_step,
                &Convergence {
                    tol_abs: vmd.tol_abs,
                    tol_rel: vmd.tol_rel,
                    max_iters: vmd.max_iters,
                },
            )?;
            let (resp_b, heart_b) = split_modes_by_band(
                &base,
                &motion,
                (0.1, vmd.lowpass_cutoff_hz),
                vmd.heart_band_hz,
            );
            let (rr_b, hr_b) =
                rate_errors(&resp_b, &heart_b, config.vmd_fs, &vmd, window, gt_rr, gt_hr)?;
            table
                .rows
                .push(vec![i_total as f64, seed as f64, rr_i, hr_i, rr_b, hr_b]);
        }
    }
    table.append_means(0, 1);
    Ok(table)
}

// ─── Distance sweep ──────────────────────────────────────────────────────

/// Estimation errors with the person moved away from the aperture. The
/// noise floor is fixed at the level calibrated for the nearest distance,
/// so path loss alone degrades the SNR with range.
pub fn sweep_distance(
    config: &SystemConfig,
    distances_m: &[f64],
    seeds: u64,
    snr_at_first_db: f64,
) -> Result<SweepTable> {
    config.validate()?;
    if distances_m.is_empty() {
        return Err(CoreError::Scene("distance sweep needs at least one distance".into()));
    }
    let mut table =
        SweepTable::new("distance", &["distance_m", "seed", "rr_error_rpm", "hr_error_bpm"]);
    let k = config.scan_harmonic;
    // per-distance config (grid plane follows the person) and coding
    let mut setups = Vec::new();
    for &z in distances_m {
        let mut cfg = config.clone();
        cfg.grid = crate::ris::FieldGrid::new(
            z,
            config.grid.x_min,
            config.grid.x_max,
            config.grid.y_min,
            config.grid.y_max,
            config.grid.nx,
            config.grid.ny,
        )?;
        let coding = focus_coding(&cfg, k, [0.0, 0.0, z])?;
        setups.push((z, cfg, coding));
    }
    // fixed noise: calibrated at the first distance
    let noise_db = {
        let (z, cfg, coding) = &setups[0];
        let mut rng = ChaCha8Rng::seed_from_u64(34_000);
        let mut scene = Scene::new(34_000);
        scene.persons.push(randomized_person([0.0, 0.0, *z], &mut rng));
        calibrated_noise_db(&scene, coding, cfg, &[(0, k)], snr_at_first_db)?
    };

    for seed in 0..seeds {
        for (z, cfg, coding) in &setups {
            let mut rng = ChaCha8Rng::seed_from_u64(34_000 + seed);
            let mut scene = Scene::new(34_000 + seed);
            scene.persons.push(randomized_person([0.0, 0.0, *z], &mut rng));
            scene.noise_power_db = noise_db;
            let motion = monitored_motion(cfg, &scene, coding, k)?;
            let out = improved_vmd(&motion, cfg.vmd_fs, &cfg.vmd)?;
            let (rr_e, hr_e) = rate_errors(
                &out.resp_signal,
                &out.heart_signal,
                cfg.vmd_fs,
                &cfg.vmd,
                cfg.monitor_duration_s,
                scene.persons[0].resp_hz * 60.0,
                scene.persons[0].heart_hz * 60.0,
            )?;
            table.rows.push(vec![*z, seed as f64, rr_e, hr_e]);
        }
    }
    table.append_means(0, 1);
    Ok(table)
}

// ─── Passerby comparison ─────────────────────────────────────────────────

/// Vital-sign errors under a crossing passerby: a coding focused on the
/// subject versus the broad beam of a constant coding (monitored on its
/// zero-order line). Noise is identical in both runs.
pub fn passerby_compare(config: &SystemConfig, seeds: u64, snr_db: f64) -> Result<SweepTable> {
    config.validate()?;
    let mut table = SweepTable::new(
        "passerby",
        &[
            "mode", // 0 = focused, 1 = constant (broad)
            "seed",
            "rr_error_rpm",
            "hr_error_bpm",
        ],
    );
    let target = [0.5, 0.0, config.grid.z];
    let k = config.scan_harmonic;
    let focused = focus_coding(config, k, target)?;
    let constant = StcCoding::constant(
        config.geometry.rows,
        config.geometry.cols,
        config.geometry.code_length,
    );
    for seed in 0..seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(35_000 + seed);
        let mut scene = Scene::new(35_000 + seed);
        scene.persons.push(randomized_person(target, &mut rng));
        scene.passerby = Some(PasserbyTrack::crossing(config.grid.z, 10.0, 4.0));
        scene.noise_power_db = calibrated_noise_db(&scene, &focused, config, &[(0, k)], snr_db)?;
        let gt_rr = scene.persons[0].resp_hz * 60.0;
        let gt_hr = scene.persons[0].heart_hz * 60.0;
        let window = config.monitor_duration_s;

        for (mode, coding, band_k) in [(0.0, &focused, k), (1.0, &constant, 0)] {
            let motion = monitored_motion(config, &scene, coding, band_k)?;
            let out = improved_vmd(&motion, config.vmd_fs, &config.vmd)?;
            let (rr_e, hr_e) = rate_errors(
                &out.resp_signal,
                &out.heart_signal,
                config.vmd_fs,
                &config.vmd,
                window,
                gt_rr,
                gt_hr,
            )?;
            table.rows.push(vec![mode, seed as f64, rr_e, hr_e]);
        }
    }
    table.append_means(0, 1);
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bpso::CodingMode;
    use crate::detect::DetectionConfig;
    use crate::ris::{FieldGrid, RisGeometry};

    fn small_system() -> SystemConfig {
        let geometry = RisGeometry::new(8, 8, 0.0428, 0.0428, 3.5e9, 0.01, 8).unwrap();
        let grid = FieldGrid::new(1.0, -2.0, 2.0, -0.3, 0.3, 41, 7).unwrap();
        let directions: Vec<[f64; 3]> =
            (0..9).map(|i| [-2.0 + 0.5 * i as f64, 0.0, 1.0]).collect();
        SystemConfig {
            geometry,
            grid,
            k_range: (-3, 3),
            fs: 2000.0,
            vmd_fs: 20.0,
            scan_dwell_s: 20.0,
            monitor_duration_s: 30.0,
            directions,
            scan_harmonic: 1,
            harmonic_pool: vec![-3, -1, 1, 3],
            detection: DetectionConfig::default(),
            vmd: VmdConfig::default(),
            scan_bpso: BpsoConfig {
                swarm_size: 10,
                iterations: 30,
                seed: 50,
                mode: CodingMode::ColumnShared,
                ..Default::default()
            },
            monitor_bpso: BpsoConfig {
                swarm_size: 12,
                iterations: 40,
                seed: 60,
                mode: CodingMode::ColumnShared,
                ..Default::default()
            },
            baseline_seed: 70,
        }
    }

    #[test]
    fn table_csv_and_means() {
        let mut t = SweepTable::new("x", &["p", "seed", "v"]);
        t.rows.push(vec![1.0, 0.0, 2.0]);
        t.rows.push(vec![1.0, 1.0, 4.0]);
        t.rows.push(vec![2.0, 0.0, 10.0]);
        t.append_means(0, 1);
        let csv = t.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "p,seed,v");
        assert_eq!(lines.len(), 1 + 3 + 2);
        assert!(lines[4].starts_with("1,mean,3"), "{}", lines[4]);
        assert!(lines[5].starts_with("2,mean,10"), "{}", lines[5]);
    }

    #[test]
    fn alpha_sweep_produces_rows() {
        let mut config = small_system();
        config.monitor_duration_s = 30.0;
        let table = sweep_alpha(&config, &[1900.0], 2, 12.0).unwrap();
        // 2 seeds x (1 constant + 1 adaptive) + 2 mean rows
        assert_eq!(table.rows.len(), 2 * 2 + 2);
        // errors are finite and non-negative
        for row in &table.rows {
            assert!(row[2] >= 0.0 && row[2].is_finite());
            assert!(row[3] >= 0.0 && row[3].is_finite());
        }
    }

    #[test]
    fn imf_sweep_pairs_improved_and_baseline() {
        let mut config = small_system();
        config.monitor_duration_s = 30.0;
        let table = sweep_imf_count(&config, &[4], 1, 12.0).unwrap();
        assert_eq!(table.columns.len(), 6);
        assert_eq!(table.rows.len(), 1 + 1);
        let row = &table.rows[0];
        assert!(row.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn mu_sweep_counts_direction_outcomes() {
        let config = small_system();
        let table = sweep_mu(&config, &[0.05, 0.5], 1, 15.0).unwrap();
        // 1 seed x 2 thresholds + 2 mean rows
        assert_eq!(table.rows.len(), 2 + 2);
        for row in &table.rows {
            // at most 9 directions can fire
            assert!(row[2] + row[3] <= 9.0);
            assert!(row[4] + row[5] <= 9.0);
            // two-indicator detections are a subset of intensity-only
            assert!(row[2] <= row[4]);
            assert!(row[3] <= row[5]);
        }
    }
}

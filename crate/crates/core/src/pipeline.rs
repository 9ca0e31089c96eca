//! End-to-end orchestration: scan-coding synthesis, empty-room baseline,
//! detection scan, monitoring-coding synthesis, per-person band
//! processing and the final report.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bpso::{bpso_optimize, BeamTask, BpsoConfig, CodingMode, OptResult};
use crate::detect::{
    demux_stream, extract_motion_signal, intensity_indicator, measure_intensity,
    respiration_indicator, update_assignments, AssignmentState, BaselineIntensity,
    DetectionConfig, DetectionEvent, DirectionObservation,
};
use crate::dsp;
use crate::error::{CoreError, Result};
use crate::ris::{FieldGrid, RisGeometry, StcCoding};
use crate::scene::{scan_sequence, simulate_received, Person, Scene};
use crate::vmd::{estimate_vitals, improved_vmd, VitalEstimate, VmdConfig};

/// Everything a full sensing run needs besides the scene.
#[derive(Debug, Clone)]
pub struct SystemConfig {
    pub geometry: RisGeometry,
    pub grid: FieldGrid,
    /// Simulated harmonic span (inclusive).
    pub k_range: (i32, i32),
    /// Capture sample rate (Hz).
    pub fs: f64,
    /// Motion-signal rate fed to the decomposition (Hz); fs must be an
    /// integer multiple.
    pub vmd_fs: f64,
    /// Seconds spent on each scan direction.
    pub scan_dwell_s: f64,
    /// Seconds of continuous monitoring after assignment.
    pub monitor_duration_s: f64,
    /// Scan foci (the discrete directions of the digital layer).
    pub directions: Vec<[f64; 3]>,
    /// Harmonic used by every scanning beam.
    pub scan_harmonic: i32,
    /// Harmonics available for monitoring assignments.
    pub harmonic_pool: Vec<i32>,
    pub detection: DetectionConfig,
    pub vmd: VmdConfig,
    /// Small-budget optimizer for the single-focus scan codings.
    pub scan_bpso: BpsoConfig,
    /// Full-budget optimizer for the multi-harmonic monitoring coding.
    pub monitor_bpso: BpsoConfig,
    /// Noise seed of the empty-room prescan.
    pub baseline_seed: u64,
}

impl SystemConfig {
    /// Desk-scale defaults: a 32x32 one-bit aperture at 3.5 GHz with a
    /// 21-slot coding cycling at 100 Hz, eleven scan directions half a
    /// meter apart on a plane one meter out, and a four-harmonic
    /// monitoring pool.
    pub fn desk_default() -> Result<Self> {
        let geometry = RisGeometry::new(32, 32, 0.0428, 0.0428, 3.5e9, 0.01, 21)?;
        let grid = FieldGrid::new(1.0, -2.6, 2.6, -0.4, 0.4, 53, 9)?;
        let directions: Vec<[f64; 3]> =
            (0..11).map(|i| [-2.5 + 0.5 * i as f64, 0.0, grid.z]).collect();
        Ok(Self {
            geometry,
            grid,
            k_range: (-5, 5),
            fs: 2000.0,
            vmd_fs: 20.0,
            scan_dwell_s: 20.0,
            monitor_duration_s: 60.0,
            directions,
            scan_harmonic: 1,
            harmonic_pool: vec![-3, -1, 1, 3],
            detection: DetectionConfig::default(),
            vmd: VmdConfig::default(),
            scan_bpso: BpsoConfig {
                swarm_size: 20,
                iterations: 100,
                seed: 1000,
                mode: CodingMode::ColumnShared,
                ..Default::default()
            },
            monitor_bpso: BpsoConfig { seed: 2000, ..Default::default() },
            baseline_seed: 999,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.detection.validate()?;
        self.vmd.validate()?;
        if self.directions.is_empty() {
            return Err(CoreError::Scene("need at least one scan direction".into()));
        }
        if self.harmonic_pool.is_empty() {
            return Err(CoreError::Detection("empty harmonic pool".into()));
        }
        let factor = self.fs / self.vmd_fs;
        if (factor - factor.round()).abs() > 1e-9 || factor < 1.0 {
            return Err(CoreError::Scene(format!(
                "fs {} must be an integer multiple of vmd_fs {}",
                self.fs, self.vmd_fs
            )));
        }
        if self.scan_dwell_s < self.detection.confirm_window_s {
            return Err(CoreError::Detection(format!(
                "scan dwell {} s shorter than the confirmation window {} s",
                self.scan_dwell_s, self.detection.confirm_window_s
            )));
        }
        Ok(())
    }

    pub fn k_range_inclusive(&self) -> std::ops::RangeInclusive<i32> {
        self.k_range.0..=self.k_range.1
    }

    fn decimation_factor(&self) -> usize {
        (self.fs / self.vmd_fs).round() as usize
    }
}

// ─── Stage: coding synthesis ─────────────────────────────────────────────

/// One scanning coding per direction: the scan harmonic focused on that
/// direction's cell. Seeds derive from the scan optimizer seed plus the
/// direction index, so codings are independent of evaluation order.
pub fn synthesize_scan_codings(config: &SystemConfig) -> Result<Vec<StcCoding>> {
    config.validate()?;
    let mut codings = Vec::with_capacity(config.directions.len());
    for (d, target) in config.directions.iter().enumerate() {
        let task = BeamTask::uniform(&[(config.scan_harmonic, *target)])?;
        let bpso = BpsoConfig { seed: config.scan_bpso.seed + d as u64, ..config.scan_bpso.clone() };
        let result = bpso_optimize(&task, &config.geometry, &config.grid, &bpso)?;
        codings.push(result.best_coding);
    }
    Ok(codings)
}

/// Monitoring coding for a realized assignment: each assigned harmonic
/// focused on its direction.
pub fn synthesize_monitor_coding(
    config: &SystemConfig,
    assignments: &[(usize, i32)],
) -> Result<(StcCoding, OptResult)> {
    if assignments.is_empty() {
        return Err(CoreError::Optimizer("no assignments to focus on".into()));
    }
    let pairs: Vec<(i32, [f64; 3])> = assignments
        .iter()
        .map(|&(d, k)| {
            config
                .directions
                .get(d)
                .map(|p| (k, *p))
                .ok_or_else(|| CoreError::Detection(format!("unknown direction {d}")))
        })
        .collect::<Result<_>>()?;
    let task = BeamTask::uniform(&pairs)?;
    let result = bpso_optimize(&task, &config.geometry, &config.grid, &config.monitor_bpso)?;
    Ok((result.best_coding.clone(), result))
}

// ─── Stage: baseline and detection ───────────────────────────────────────

/// Empty-room prescan: the per-direction intensity of the scan-harmonic
/// band with nothing but leakage and noise in the scene.
pub fn measure_baseline(
    config: &SystemConfig,
    scan_codings: &[StcCoding],
    reference: &Scene,
) -> Result<BaselineIntensity> {
    let mut empty = Scene::new(config.baseline_seed);
    empty.noise_power_db = reference.noise_power_db;
    empty.leakage_db = reference.leakage_db;
    empty.rx_position = reference.rx_position;
    let echo = scan_sequence(
        &empty,
        scan_codings,
        &config.geometry,
        &config.grid,
        config.scan_dwell_s,
        config.fs,
        config.k_range_inclusive(),
    )?;
    let intensities = (0..echo.directions())
        .map(|d| {
            demux_stream(echo.stream(d), echo.fs, echo.mod_freq_hz, config.scan_harmonic, None)
                .map(|s| measure_intensity(&s))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BaselineIntensity { intensities, dwell_s: config.scan_dwell_s, fs: config.fs })
}

/// Outcome of one full detection scan.
#[derive(Debug, Clone)]
pub struct ScanOutcome {
    pub state: AssignmentState,
    pub events: Vec<DetectionEvent>,
    pub intensities: Vec<f64>,
    /// Per-direction indicator pair (intensity, respiration if evaluated).
    pub observations: Vec<DirectionObservation>,
}

/// Scans every direction, applies both indicators and feeds one update
/// into the assignment state machine at the scan end time.
pub fn detect_scan(
    config: &SystemConfig,
    scene: &Scene,
    scan_codings: &[StcCoding],
    baseline: &BaselineIntensity,
    state: &AssignmentState,
) -> Result<ScanOutcome> {
    if scan_codings.len() != config.directions.len() {
        return Err(CoreError::Detection(format!(
            "{} scan codings for {} directions",
            scan_codings.len(),
            config.directions.len()
        )));
    }
    if baseline.intensities.len() != config.directions.len() {
        return Err(CoreError::Detection("baseline does not cover all directions".into()));
    }
    let echo = scan_sequence(
        scene,
        scan_codings,
        &config.geometry,
        &config.grid,
        config.scan_dwell_s,
        config.fs,
        config.k_range_inclusive(),
    )?;
    let mut observations = Vec::with_capacity(config.directions.len());
    let mut intensities = Vec::with_capacity(config.directions.len());
    for d in 0..config.directions.len() {
        let band =
            demux_stream(echo.stream(d), echo.fs, echo.mod_freq_hz, config.scan_harmonic, None)?;
        let intensity = measure_intensity(&band);
        let threshold = config.detection.threshold_for(baseline.intensities[d]);
        let pass = intensity_indicator(intensity, baseline.intensities[d], threshold);
        let respiration = if pass {
            Some(respiration_indicator(&band, echo.fs, &config.detection)?)
        } else {
            None
        };
        intensities.push(intensity);
        observations.push(DirectionObservation {
            direction: d,
            intensity_pass: pass,
            respiration_pass: respiration,
        });
    }
    let now = config.scan_dwell_s * config.directions.len() as f64;
    let (state, events) = update_assignments(state, &observations, now, &config.detection)?;
    Ok(ScanOutcome { state, events, intensities, observations })
}

// ─── Stage: monitoring ───────────────────────────────────────────────────

/// Per-person monitoring product: the decimated motion signal and the
/// vital estimate derived from it.
#[derive(Debug, Clone)]
pub struct MonitoredBand {
    pub direction: usize,
    pub harmonic: i32,
    pub motion: Vec<f64>,
    pub motion_fs: f64,
    pub vitals: VitalEstimate,
}

/// Demultiplexes one harmonic of a capture, extracts and decimates the
/// motion signal.
pub fn band_motion(
    config: &SystemConfig,
    samples: &[num_complex::Complex64],
    k: i32,
) -> Result<Vec<f64>> {
    let band = demux_stream(samples, config.fs, config.geometry.mod_freq_hz(), k, None)?;
    let motion = extract_motion_signal(&band);
    dsp::decimate(&motion, config.fs, config.decimation_factor())
}

/// Monitors all assigned directions over one continuous capture through
/// the monitoring coding and estimates each person's vitals.
pub fn monitor_and_estimate(
    config: &SystemConfig,
    scene: &Scene,
    monitor_coding: &StcCoding,
    assignments: &[(usize, i32)],
) -> Result<Vec<MonitoredBand>> {
    let echo = simulate_received(
        scene,
        monitor_coding,
        &config.geometry,
        &config.grid,
        config.monitor_duration_s,
        config.fs,
        config.k_range_inclusive(),
    )?;
    let window = config.monitor_duration_s.min(60.0);
    assignments
        .iter()
        .map(|&(direction, harmonic)| {
            let motion = band_motion(config, echo.stream(0), harmonic)?;
            let out = improved_vmd(&motion, config.vmd_fs, &config.vmd)?;
            let vitals = estimate_vitals(
                &out.resp_signal,
                &out.heart_signal,
                config.vmd_fs,
                &config.vmd,
                window,
            )?;
            Ok(MonitoredBand { direction, harmonic, motion, motion_fs: config.vmd_fs, vitals })
        })
        .collect()
}

// ─── Full run and report ─────────────────────────────────────────────────

/// Ground truth vs estimate for one monitored person.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PersonReport {
    pub direction: usize,
    pub harmonic: i32,
    pub position: [f64; 3],
    pub gt_rr_rpm: f64,
    pub gt_hr_bpm: f64,
    pub est_rr_rpm: f64,
    pub est_hr_bpm: f64,
    pub rr_error_rpm: f64,
    pub hr_error_bpm: f64,
    pub rr_valid: bool,
    pub hr_valid: bool,
}

/// Full-run report: per-person results, the detection event log and the
/// configuration echo.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub persons: Vec<PersonReport>,
    pub events: Vec<DetectionEvent>,
    pub detected: usize,
    pub capacity_events: usize,
    pub scan_intensities: Vec<f64>,
    pub baseline_intensities: Vec<f64>,
    pub runtime_s: f64,
    pub config_echo: serde_json::Value,
}

impl Report {
    /// JSON with the wall-clock field zeroed; two reproducible runs agree
    /// byte for byte on this form.
    pub fn comparable_json(&self) -> Result<String> {
        let mut clone = self.clone();
        clone.runtime_s = 0.0;
        serde_json::to_string_pretty(&clone)
            .map_err(|e| CoreError::Parse(format!("report serialization failed: {e}")))
    }
}

/// Previously produced stage artifacts; any stage present here is reused
/// instead of recomputed, which is how a run resumes.
#[derive(Debug, Clone, Default)]
pub struct PipelineArtifacts {
    pub scan_codings: Option<Vec<StcCoding>>,
    pub baseline: Option<BaselineIntensity>,
    pub monitor_coding: Option<StcCoding>,
}

/// Stage products of a full run, reusable as [`PipelineArtifacts`].
#[derive(Debug, Clone)]
pub struct PipelineOutputs {
    pub scan_codings: Vec<StcCoding>,
    pub baseline: BaselineIntensity,
    pub monitor_coding: Option<StcCoding>,
    pub state: AssignmentState,
    pub bands: Vec<MonitoredBand>,
}

fn config_echo(config: &SystemConfig, scene: &Scene) -> serde_json::Value {
    serde_json::json!({
        "aperture": [config.geometry.rows, config.geometry.cols],
        "code_length": config.geometry.code_length,
        "carrier_hz": config.geometry.carrier_hz,
        "mod_freq_hz": config.geometry.mod_freq_hz(),
        "fs": config.fs,
        "vmd_fs": config.vmd_fs,
        "k_range": config.k_range,
        "scan_dwell_s": config.scan_dwell_s,
        "monitor_duration_s": config.monitor_duration_s,
        "directions": config.directions,
        "scan_harmonic": config.scan_harmonic,
        "harmonic_pool": config.harmonic_pool,
        "detection": config.detection,
        "vmd": config.vmd,
        "scene_seed": scene.seed,
        "noise_power_db": scene.noise_power_db,
        "leakage_db": scene.leakage_db,
        "persons": scene.persons.len(),
    })
}

/// Runs scan, detection, assignment, monitoring and estimation end to
/// end. Deterministic for a given config and scene.
pub fn run_full(
    config: &SystemConfig,
    scene: &Scene,
    artifacts: &PipelineArtifacts,
) -> Result<(Report, PipelineOutputs)> {
    config.validate()?;
    scene.validate()?;
    let started = Instant::now();

    let scan_codings = match &artifacts.scan_codings {
        Some(c) => c.clone(),
        None => synthesize_scan_codings(config)?,
    };
    let baseline = match &artifacts.baseline {
        Some(b) => b.clone(),
        None => measure_baseline(config, &scan_codings, scene)?,
    };
    let state = AssignmentState::new(config.directions.len(), config.harmonic_pool.clone())?;
    let scan = detect_scan(config, scene, &scan_codings, &baseline, &state)?;

    let assignments = scan.state.assigned();
    let mut persons = Vec::new();
    let mut monitor_coding = None;
    let mut bands = Vec::new();
    if !assignments.is_empty() {
        let coding = match &artifacts.monitor_coding {
            Some(c) => c.clone(),
            None => synthesize_monitor_coding(config, &assignments)?.0,
        };
        bands = monitor_and_estimate(config, scene, &coding, &assignments)?;
        monitor_coding = Some(coding);
        for band in &bands {
            let focus = config.directions[band.direction];
            let person = nearest_person(scene, focus);
            let (gt_rr, gt_hr, position) = match person {
                Some(p) => (p.resp_hz * 60.0, p.heart_hz * 60.0, p.position),
                None => (f64::NAN, f64::NAN, focus),
            };
            persons.push(PersonReport {
                direction: band.direction,
                harmonic: band.harmonic,
                position,
                gt_rr_rpm: gt_rr,
                gt_hr_bpm: gt_hr,
                est_rr_rpm: band.vitals.rr_rpm,
                est_hr_bpm: band.vitals.hr_bpm,
                rr_error_rpm: (band.vitals.rr_rpm - gt_rr).abs(),
                hr_error_bpm: (band.vitals.hr_bpm - gt_hr).abs(),
                rr_valid: band.vitals.rr_valid,
                hr_valid: band.vitals.hr_valid,
            });
        }
    }

    let report = Report {
        detected: assignments.len(),
        capacity_events: scan
            .events
            .iter()
            .filter(|e| e.event == crate::detect::EventKind::Capacity)
            .count(),
        persons,
        events: scan.events.clone(),
        scan_intensities: scan.intensities.clone(),
        baseline_intensities: baseline.intensities.clone(),
        runtime_s: started.elapsed().as_secs_f64(),
        config_echo: config_echo(config, scene),
    };
    let outputs = PipelineOutputs {
        scan_codings,
        baseline,
        monitor_coding,
        state: scan.state,
        bands,
    };
    Ok((report, outputs))
}

fn nearest_person<'a>(scene: &'a Scene, focus: [f64; 3]) -> Option<&'a Person> {
    scene
        .persons
        .iter()
        .map(|p| {
            let d = (0..3).map(|i| (p.position[i] - focus[i]).powi(2)).sum::<f64>();
            (p, d)
        })
        .filter(|(_, d)| *d < 0.25 * 0.25) // within a quarter meter
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .map(|(p, _)| p)
}

// ─── Scene builders for studies ──────────────────────────────────────────

/// The four monitored positions used across the simulation studies:
/// half-meter lateral offsets on the plane at distance `z`.
pub fn four_person_positions(z: f64) -> [[f64; 3]; 4] {
    [[-1.5, 0.0, z], [-0.5, 0.0, z], [0.5, 0.0, z], [1.5, 0.0, z]]
}

/// A person with seed-randomized vitals: respiration in 0.20..0.32 Hz,
/// heartbeat in 1.15..1.55 Hz.
pub fn randomized_person<R: rand::Rng>(position: [f64; 3], rng: &mut R) -> Person {
    let resp = 0.20 + 0.12 * rng.random::<f64>();
    let heart = 1.15 + 0.40 * rng.random::<f64>();
    Person::new(position, resp, heart)
}

/// Four randomized persons at the standard positions; noise must still be
/// calibrated by the caller.
pub fn four_person_scene(z: f64, seed: u64) -> Scene {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut scene = Scene::new(seed);
    for p in four_person_positions(z) {
        scene.persons.push(randomized_person(p, &mut rng));
    }
    scene
}

/// Noise level that puts the weakest listed person path at `snr_db`
/// in-band SNR through the given coding.
pub fn calibrated_noise_db(
    scene: &Scene,
    coding: &StcCoding,
    config: &SystemConfig,
    person_harmonics: &[(usize, i32)],
    snr_db: f64,
) -> Result<f64> {
    let mut min_power = f64::MAX;
    for &(person, k) in person_harmonics {
        let p = crate::scene::person_band_power(scene, person, coding, &config.geometry, k)?;
        min_power = min_power.min(p);
    }
    if !min_power.is_finite() || min_power <= 0.0 {
        return Err(CoreError::Scene("no usable person path for SNR calibration".into()));
    }
    let band_hz = config.geometry.mod_freq_hz() / 2.0;
    Ok(crate::scene::noise_db_for_band_snr(min_power, snr_db, config.fs, band_hz))
}

//! Harmonic demultiplexing, the two-indicator human detection test and
//! the beam-assignment state machine.
//!
//! Detection runs per scan direction: the echo strength must rise above
//! the empty-room baseline by a preset margin, and the motion signal must
//! show a spectral peak inside the respiration band. Only when both
//! indicators pass is a harmonic beam assigned to the direction.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dsp;
use crate::error::{CoreError, Result};
use crate::scene::EchoSet;

/// Empty-room prescan intensities, one per scan direction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BaselineIntensity {
    pub intensities: Vec<f64>,
    pub dwell_s: f64,
    pub fs: f64,
}

impl BaselineIntensity {
    pub fn validate(&self) -> Result<()> {
        if self.intensities.is_empty() {
            return Err(CoreError::Detection("baseline needs at least one direction".into()));
        }
        if self.intensities.iter().any(|&v| !(v >= 0.0)) {
            return Err(CoreError::Detection("baseline intensities must be >= 0".into()));
        }
        Ok(())
    }
}

/// Detection thresholds and windows.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectionConfig {
    /// Intensity threshold. Interpreted as a fraction of the per-direction
    /// baseline unless `mu_absolute` is set.
    pub mu: f64,
    /// Treat `mu` as an absolute linear-power threshold.
    pub mu_absolute: bool,
    /// Respiration band (Hz).
    pub resp_band_hz: (f64, f64),
    /// Required rise of the in-band peak over the in-band median (dB).
    pub prominence_db: f64,
    /// Seconds of signal required before the respiration test runs.
    pub confirm_window_s: f64,
    /// Seconds of continuously failing intensity before an assigned
    /// direction is released.
    pub loss_timeout_s: f64,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self {
            mu: 0.05,
            mu_absolute: false,
            resp_band_hz: (0.1, 0.7),
            prominence_db: 6.0,
            confirm_window_s: 20.0,
            loss_timeout_s: 30.0,
        }
    }
}

impl DetectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0) {
            return Err(CoreError::Detection("mu must be positive".into()));
        }
        let (lo, hi) = self.resp_band_hz;
        if !(lo > 0.0 && hi > lo) {
            return Err(CoreError::Detection("respiration band must satisfy 0 < lo < hi".into()));
        }
        if !(self.confirm_window_s >= 2.0 / lo) {
            return Err(CoreError::Detection(format!(
                "confirmation window {} s shorter than 2 periods of the band floor ({} s)",
                self.confirm_window_s,
                2.0 / lo
            )));
        }
        Ok(())
    }

    /// Absolute intensity-difference threshold for one direction.
    pub fn threshold_for(&self, baseline: f64) -> f64 {
        if self.mu_absolute {
            self.mu
        } else {
            self.mu * baseline
        }
    }
}

// ─── Demultiplexing ──────────────────────────────────────────────────────

/// Shifts harmonic `k` to DC and low-pass filters it. The FIR is linear
/// phase with the group delay compensated, so the output is time-aligned
/// with the input. `half_bw` defaults to f0/4 and must stay below f0/2 or
/// adjacent bands would overlap.
pub fn demux_stream(
    samples: &[Complex64],
    fs: f64,
    mod_freq_hz: f64,
    k: i32,
    half_bw: Option<f64>,
) -> Result<Vec<Complex64>> {
    let half_bw = half_bw.unwrap_or(mod_freq_hz / 4.0);
    if !(half_bw > 0.0) || half_bw > mod_freq_hz / 2.0 {
        return Err(CoreError::Detection(format!(
            "half-bandwidth {half_bw} Hz overlaps adjacent bands (limit {} Hz)",
            mod_freq_hz / 2.0
        )));
    }
    let f_shift = k as f64 * mod_freq_hz;
    if !(fs > 2.0 * (f_shift.abs() + half_bw)) {
        return Err(CoreError::Detection(format!(
            "sample rate {fs} Hz too low for harmonic {k} at f0 = {mod_freq_hz} Hz"
        )));
    }
    let mixed: Vec<Complex64> = samples
        .iter()
        .enumerate()
        .map(|(i, &v)| v * Complex64::from_polar(1.0, -2.0 * PI * f_shift * i as f64 / fs))
        .collect();
    // transition band from half_bw to 2*half_bw keeps the adjacent-band
    // boundary at f0/2 inside the stopband
    let taps = dsp::fir_lowpass(fs, half_bw, half_bw)?;
    Ok(dsp::filter_aligned(&mixed, &taps))
}

/// Demultiplexes the requested harmonics of one capture direction.
pub fn demux_harmonics(
    echo: &EchoSet,
    direction: usize,
    k_set: &[i32],
    half_bw: Option<f64>,
) -> Result<Vec<Vec<Complex64>>> {
    let samples = echo
        .streams
        .get(direction)
        .ok_or_else(|| CoreError::Detection(format!("no capture direction {direction}")))?;
    k_set
        .iter()
        .map(|&k| demux_stream(samples, echo.fs, echo.mod_freq_hz, k, half_bw))
        .collect()
}

/// Mean squared magnitude over the dwell.
pub fn measure_intensity(stream: &[Complex64]) -> f64 {
    if stream.is_empty() {
        return 0.0;
    }
    stream.iter().map(|v| v.norm_sqr()).sum::<f64>() / stream.len() as f64
}

/// Strength indicator: the intensity rise over the baseline must strictly
/// exceed the threshold.
pub fn intensity_indicator(intensity: f64, baseline: f64, threshold: f64) -> bool {
    intensity - baseline > threshold
}

/// Recovers the scalar motion signal (radians) from a demultiplexed
/// stream: estimates the static path as the least-squares center of the
/// IQ trajectory (the chest echo sweeps a circular arc around it), takes
/// the phase of the centered trajectory, unwraps and detrends it.
///
/// Plain mean subtraction would be wrong here: the mean of an arc is not
/// its center, and phase read against it folds the motion into a square
/// wave.
pub fn extract_motion_signal(stream: &[Complex64]) -> Vec<f64> {
    if stream.is_empty() {
        return Vec::new();
    }
    let mean = stream.iter().sum::<Complex64>() / stream.len() as f64;
    let spread = stream.iter().map(|v| (v - mean).norm_sqr()).sum::<f64>() / stream.len() as f64;
    if spread <= 1e-24 * mean.norm_sqr().max(1e-300) {
        // static stream: no motion
        return vec![0.0; stream.len()];
    }
    let center = dsp::fit_circle_center(stream).unwrap_or(mean);
    let mut phase: Vec<f64> = stream.iter().map(|v| (v - center).arg()).collect();
    dsp::unwrap_phase(&mut phase);
    dsp::detrend_linear(&mut phase);
    phase
}

/// Respiration indicator over the last confirmation window: removes the
/// complex mean (the static path), takes the Welch spectrum of the
/// centered stream and passes when the peak over the respiration-band
/// bins (both sidebands) rises at least `prominence_db` above their
/// median.
///
/// Chest motion phase-modulates the echo, so breathing shows up as
/// spectral lines at +/-f_r beside the static carrier; a motionless
/// stream leaves flat noise there. Testing the complex sidebands rather
/// than the spectrum of the extracted phase keeps the null case flat:
/// phase read from a noise-only stream is a bounded random walk whose
/// sloped spectrum would forge the prominence of a tone and push the
/// noise false-alarm rate above 1%. Welch segments span 40% of the
/// window (four averages at 50% overlap).
pub fn respiration_indicator(
    stream: &[Complex64],
    fs: f64,
    config: &DetectionConfig,
) -> Result<bool> {
    config.validate()?;
    let window = (config.confirm_window_s * fs).round() as usize;
    if stream.len() < window {
        return Err(CoreError::Detection(format!(
            "stream of {} samples shorter than the {} s confirmation window",
            stream.len(),
            config.confirm_window_s
        )));
    }
    let tail = &stream[stream.len() - window..];
    let mean = tail.iter().sum::<Complex64>() / tail.len() as f64;
    let centered: Vec<Complex64> = tail.iter().map(|v| v - mean).collect();
    let segment = ((0.4 * config.confirm_window_s * fs).round() as usize).max(16);
    let (freqs, psd) = dsp::welch_power_complex(&centered, fs, segment)?;
    let (lo, hi) = config.resp_band_hz;
    let band: Vec<f64> = freqs
        .iter()
        .zip(psd.iter())
        .filter(|(f, _)| f.abs() >= lo && f.abs() <= hi)
        .map(|(_, p)| *p)
        .collect();
    if band.is_empty() {
        return Err(CoreError::Detection("respiration band holds no spectral bins".into()));
    }
    let peak = band.iter().cloned().fold(f64::MIN, f64::max);
    if peak <= 0.0 {
        return Ok(false);
    }
    let mut sorted = band;
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = sorted[sorted.len() / 2].max(1e-300);
    Ok(10.0 * (peak / median).log10() >= config.prominence_db)
}

// ─── Assignment state machine ────────────────────────────────────────────

/// Status of one scan direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "status")]
pub enum DirectionStatus {
    Empty,
    Candidate { since: f64 },
    Assigned { harmonic: i32 },
}

/// Per-direction indicator outcome of one scan pass. `respiration_pass`
/// is `None` when not enough signal has accumulated to run the test.
#[derive(Debug, Clone, Copy)]
pub struct DirectionObservation {
    pub direction: usize,
    pub intensity_pass: bool,
    pub respiration_pass: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Candidate,
    Assigned,
    Released,
    Capacity,
}

/// Line-delimited JSON detection log record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectionEvent {
    pub t: f64,
    pub direction: usize,
    pub event: EventKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub harmonic: Option<i32>,
}

/// Value-like assignment state: per-direction status, the free-harmonic
/// pool and per-direction last-seen timestamps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentState {
    pub statuses: Vec<DirectionStatus>,
    /// Free harmonics, kept sorted lowest |k| first (negative first on
    /// magnitude ties).
    pool: Vec<i32>,
    last_seen: Vec<f64>,
    all_harmonics: Vec<i32>,
}

fn pool_order(a: &i32, b: &i32) -> std::cmp::Ordering {
    (a.abs(), *a).cmp(&(b.abs(), *b))
}

impl AssignmentState {
    pub fn new(directions: usize, mut harmonics: Vec<i32>) -> Result<Self> {
        if directions == 0 {
            return Err(CoreError::Detection("need at least one direction".into()));
        }
        harmonics.sort_by(pool_order);
        harmonics.dedup();
        Ok(Self {
            statuses: vec![DirectionStatus::Empty; directions],
            pool: harmonics.clone(),
            last_seen: vec![0.0; directions],
            all_harmonics: harmonics,
        })
    }

    pub fn directions(&self) -> usize {
        self.statuses.len()
    }

    pub fn pool(&self) -> &[i32] {
        &self.pool
    }

    /// (direction, harmonic) pairs currently assigned.
    pub fn assigned(&self) -> Vec<(usize, i32)> {
        self.statuses
            .iter()
            .enumerate()
            .filter_map(|(d, s)| match s {
                DirectionStatus::Assigned { harmonic } => Some((d, *harmonic)),
                _ => None,
            })
            .collect()
    }

    /// Invariant: assigned harmonics pairwise distinct and, with the pool,
    /// exactly the full harmonic set.
    fn check_consistency(&self) -> Result<()> {
        let mut seen: Vec<i32> = self.assigned().iter().map(|&(_, k)| k).collect();
        let n_assigned = seen.len();
        seen.extend_from_slice(&self.pool);
        seen.sort_by(pool_order);
        let before = seen.len();
        seen.dedup();
        if seen.len() != before {
            return Err(CoreError::Detection("harmonic assigned twice".into()));
        }
        if seen != self.all_harmonics {
            return Err(CoreError::Detection("pool plus assignments lost a harmonic".into()));
        }
        debug_assert_eq!(n_assigned + self.pool.len(), self.all_harmonics.len());
        Ok(())
    }
}

/// Applies one scan pass to the state and returns the successor state plus
/// the events it produced. Pure: identical (state, observations, now)
/// always produce the identical successor.
///
/// Transitions: empty directions become candidates when the intensity
/// indicator passes; candidates are assigned the lowest-|k| free harmonic
/// when the respiration indicator also passes (a candidate observed with
/// both indicators in one pass assigns immediately); assigned directions
/// are released after their intensity has failed for the loss timeout.
/// An exhausted pool leaves the candidate pending and reports a capacity
/// event.
pub fn update_assignments(
    state: &AssignmentState,
    observations: &[DirectionObservation],
    now: f64,
    config: &DetectionConfig,
) -> Result<(AssignmentState, Vec<DetectionEvent>)> {
    let mut next = state.clone();
    let mut events = Vec::new();

    let mut by_direction: Vec<Option<&DirectionObservation>> = vec![None; state.directions()];
    for obs in observations {
        if obs.direction >= state.directions() {
            return Err(CoreError::Detection(format!(
                "observation for unknown direction {}",
                obs.direction
            )));
        }
        if by_direction[obs.direction].is_some() {
            return Err(CoreError::Detection(format!(
                "duplicate observation for direction {}",
                obs.direction
            )));
        }
        by_direction[obs.direction] = Some(obs);
    }
    // the scan must cover every direction not currently assigned
    for (d, status) in state.statuses.iter().enumerate() {
        if !matches!(status, DirectionStatus::Assigned { .. }) && by_direction[d].is_none() {
            return Err(CoreError::Detection(format!(
                "scan result misses non-assigned direction {d}"
            )));
        }
    }

    for d in 0..next.directions() {
        let Some(obs) = by_direction[d] else { continue };
        match next.statuses[d] {
            DirectionStatus::Empty => {
                if obs.intensity_pass {
                    next.statuses[d] = DirectionStatus::Candidate { since: now };
                    next.last_seen[d] = now;
                    events.push(DetectionEvent {
                        t: now,
                        direction: d,
                        event: EventKind::Candidate,
                        harmonic: None,
                    });
                    try_assign(&mut next, &mut events, d, obs, now);
                }
            }
            DirectionStatus::Candidate { .. } => {
                if obs.intensity_pass {
                    next.last_seen[d] = now;
                    try_assign(&mut next, &mut events, d, obs, now);
                } else {
                    next.statuses[d] = DirectionStatus::Empty;
                }
            }
            DirectionStatus::Assigned { harmonic } => {
                if obs.intensity_pass {
                    next.last_seen[d] = now;
                } else if now - next.last_seen[d] >= config.loss_timeout_s {
                    next.statuses[d] = DirectionStatus::Empty;
                    let pos = next.pool.binary_search_by(|k| pool_order(k, &harmonic));
                    if let Err(pos) = pos {
                        next.pool.insert(pos, harmonic);
                    }
                    events.push(DetectionEvent {
                        t: now,
                        direction: d,
                        event: EventKind::Released,
                        harmonic: Some(harmonic),
                    });
                }
            }
        }
    }

    next.check_consistency()?;
    Ok((next, events))
}

fn try_assign(
    state: &mut AssignmentState,
    events: &mut Vec<DetectionEvent>,
    d: usize,
    obs: &DirectionObservation,
    now: f64,
) {
    if obs.respiration_pass != Some(true) {
        return;
    }
    if state.pool.is_empty() {
        events.push(DetectionEvent {
            t: now,
            direction: d,
            event: EventKind::Capacity,
            harmonic: None,
        });
        return;
    }
    let harmonic = state.pool.remove(0);
    state.statuses[d] = DirectionStatus::Assigned { harmonic };
    state.last_seen[d] = now;
    events.push(DetectionEvent {
        t: now,
        direction: d,
        event: EventKind::Assigned,
        harmonic: Some(harmonic),
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn tone(fs: f64, n: usize, f: f64, amp: f64) -> Vec<Complex64> {
        (0..n)
            .map(|i| Complex64::from_polar(amp, 2.0 * PI * f * i as f64 / fs))
            .collect()
    }

    #[test]
    fn demux_selectivity() {
        let fs = 2000.0;
        let f0 = 100.0;
        let x = tone(fs, 20_000, f0, 1.0);
        let plus = demux_stream(&x, fs, f0, 1, None).unwrap();
        let minus = demux_stream(&x, fs, f0, -1, None).unwrap();
        // steady-state region
        let p_plus = measure_intensity(&plus[2000..18_000]);
        let p_minus = measure_intensity(&minus[2000..18_000]);
        assert!((10.0 * p_plus.log10()).abs() < 0.1, "k=+1 {} dB", 10.0 * p_plus.log10());
        assert!(
            10.0 * (p_minus / p_plus).log10() < -60.0,
            "k=-1 leak {} dB",
            10.0 * (p_minus / p_plus).log10()
        );
        // constant magnitude on the +1 stream
        for v in &plus[2000..18_000] {
            assert!((v.norm() - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn demux_two_tone_linearity() {
        let fs = 2000.0;
        let f0 = 100.0;
        let n = 20_000;
        let x: Vec<Complex64> = (0..n)
            .map(|i| {
                let t = i as f64 / fs;
                Complex64::from_polar(1.0, 2.0 * PI * f0 * t)
                    + Complex64::from_polar(0.5, -2.0 * PI * f0 * t)
            })
            .collect();
        let plus = demux_stream(&x, fs, f0, 1, None).unwrap();
        let minus = demux_stream(&x, fs, f0, -1, None).unwrap();
        let ratio =
            measure_intensity(&plus[2000..18_000]) / measure_intensity(&minus[2000..18_000]);
        assert!((10.0 * ratio.log10() - 6.0206).abs() < 0.2, "ratio {} dB", 10.0 * ratio.log10());
    }

    #[test]
    fn demux_rejects_overlapping_bands() {
        let x = tone(2000.0, 1000, 0.0, 1.0);
        assert!(demux_stream(&x, 2000.0, 100.0, 0, Some(60.0)).is_err());
    }

    #[test]
    fn demux_noise_power_matches_filter_gain() {
        let fs = 2000.0;
        let f0 = 100.0;
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let sigma = 0.1f64;
        let n = 200_000;
        let x: Vec<Complex64> = (0..n)
            .map(|_| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                Complex64::new(re, im) * (sigma / 2f64.sqrt())
            })
            .collect();
        let y = demux_stream(&x, fs, f0, 1, None).unwrap();
        let taps = dsp::fir_lowpass(fs, 25.0, 25.0).unwrap();
        let expected = sigma * sigma * dsp::fir_noise_gain(&taps);
        let measured = measure_intensity(&y[1000..n - 1000]);
        assert!(
            (10.0 * (measured / expected).log10()).abs() < 1.0,
            "measured {measured:e}, expected {expected:e}"
        );
    }

    #[test]
    fn intensity_basics() {
        assert_eq!(measure_intensity(&[]), 0.0);
        let ones = vec![Complex64::new(1.0, 0.0); 64];
        assert!((measure_intensity(&ones) - 1.0).abs() < 1e-15);
        let scaled: Vec<Complex64> = ones.iter().map(|v| v * 3.0).collect();
        assert!((measure_intensity(&scaled) - 9.0).abs() < 1e-12);
    }

    #[test]
    fn intensity_indicator_strictness() {
        assert!(!intensity_indicator(1.0, 1.0, 0.25));
        assert!(intensity_indicator(1.75, 1.0, 0.25));
        // boundary: difference exactly equal to the threshold stays false
        // (binary-exact values so the comparison is not a rounding artifact)
        assert!(!intensity_indicator(1.25, 1.0, 0.25));
    }

    #[test]
    fn motion_extraction_recovers_phase() {
        let fs = 100.0;
        let n = 6000;
        let x: Vec<Complex64> = (0..n)
            .map(|i| {
                let t = i as f64 / fs;
                Complex64::from_polar(1.0, 0.1 * (2.0 * PI * 0.25 * t).sin())
                    + Complex64::new(5.0, 0.0)
            })
            .collect();
        let motion = extract_motion_signal(&x);
        let mut worst = 0.0f64;
        for (i, m) in motion.iter().enumerate() {
            let t = i as f64 / fs;
            let want = 0.1 * (2.0 * PI * 0.25 * t).sin();
            worst = worst.max((m - want).abs());
        }
        assert!(worst < 0.01, "max deviation {worst}");
    }

    #[test]
    fn motion_extraction_edge_cases() {
        // constant stream: zero motion
        let x = vec![Complex64::new(2.0, 1.0); 128];
        assert!(extract_motion_signal(&x).iter().all(|&v| v == 0.0));
        // conjugated input negates the output
        let fs = 50.0;
        let x: Vec<Complex64> = (0..2000)
            .map(|i| {
                let t = i as f64 / fs;
                Complex64::from_polar(1.0, 0.4 * (2.0 * PI * 0.3 * t).sin())
                    + Complex64::new(3.0, -1.0)
            })
            .collect();
        let conj: Vec<Complex64> = x.iter().map(|v| v.conj()).collect();
        let a = extract_motion_signal(&x);
        let b = extract_motion_signal(&conj);
        for (u, v) in a.iter().zip(b.iter()) {
            assert!((u + v).abs() < 1e-9);
        }
    }

    #[test]
    fn respiration_indicator_tone_vs_static() {
        let fs = 200.0;
        let config = DetectionConfig::default();
        let n = (fs * 30.0) as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut noisy = |amp: f64| -> Vec<Complex64> {
            (0..n)
                .map(|i| {
                    let t = i as f64 / fs;
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    Complex64::from_polar(1.0, amp * (2.0 * PI * 0.25 * t).sin())
                        + Complex64::new(4.0, 1.0)
                        + Complex64::new(re, im) * 0.05
                })
                .collect()
        };
        let breathing = noisy(0.7);
        assert!(respiration_indicator(&breathing, fs, &config).unwrap());
        let rigid = noisy(0.0);
        assert!(!respiration_indicator(&rigid, fs, &config).unwrap());
        // too-short stream errors out
        assert!(respiration_indicator(&breathing[..(fs * 10.0) as usize], fs, &config).is_err());
    }

    #[test]
    fn respiration_indicator_noise_false_alarm_rate() {
        let fs = 100.0;
        let config = DetectionConfig::default();
        let n = (fs * config.confirm_window_s) as usize;
        let mut alarms = 0;
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let x: Vec<Complex64> = (0..n)
                .map(|_| {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    Complex64::new(3.0 + 0.1 * re, 0.1 * im)
                })
                .collect();
            if respiration_indicator(&x, fs, &config).unwrap() {
                alarms += 1;
            }
        }
        assert!(alarms <= 1, "{alarms} false alarms in 100 noise streams");
    }

    fn obs(direction: usize, intensity: bool, resp: Option<bool>) -> DirectionObservation {
        DirectionObservation { direction, intensity_pass: intensity, respiration_pass: resp }
    }

    #[test]
    fn assignment_basic_flow() {
        let config = DetectionConfig::default();
        let state = AssignmentState::new(4, vec![-3, -1, 1, 3]).unwrap();
        assert_eq!(state.pool(), &[-1, 1, -3, 3]);

        // one direction passes both indicators: assigned the lowest |k|
        let scan = vec![
            obs(0, false, None),
            obs(1, true, Some(true)),
            obs(2, false, None),
            obs(3, false, None),
        ];
        let (s1, events) = update_assignments(&state, &scan, 10.0, &config).unwrap();
        assert_eq!(s1.assigned(), vec![(1, -1)]);
        assert_eq!(events.len(), 2); // candidate + assigned
        assert_eq!(events[1].event, EventKind::Assigned);
        assert_eq!(events[1].harmonic, Some(-1));
    }

    #[test]
    fn assignment_pool_exhaustion_and_capacity() {
        let config = DetectionConfig::default();
        let mut state = AssignmentState::new(5, vec![-3, -1, 1, 3]).unwrap();
        let scan: Vec<_> = (0..5).map(|d| obs(d, d < 4, Some(d < 4))).collect();
        let (s, _) = update_assignments(&state, &scan, 1.0, &config).unwrap();
        state = s;
        assert_eq!(state.assigned().len(), 4);
        assert!(state.pool().is_empty());
        // fifth direction now passes: capacity event, stays candidate
        let scan = vec![obs(4, true, Some(true))];
        let (s, events) = update_assignments(&state, &scan, 2.0, &config).unwrap();
        assert!(events.iter().any(|e| e.event == EventKind::Capacity));
        assert!(matches!(s.statuses[4], DirectionStatus::Candidate { .. }));
    }

    #[test]
    fn assignment_release_after_timeout() {
        let config = DetectionConfig { loss_timeout_s: 30.0, ..Default::default() };
        let state = AssignmentState::new(2, vec![1, -1]).unwrap();
        let scan = vec![obs(0, true, Some(true)), obs(1, false, None)];
        let (state, _) = update_assignments(&state, &scan, 0.0, &config).unwrap();
        assert_eq!(state.assigned(), vec![(0, -1)]);
        // intensity keeps failing; before the timeout nothing changes
        let scan = vec![obs(0, false, None), obs(1, false, None)];
        let (state, events) = update_assignments(&state, &scan, 20.0, &config).unwrap();
        assert!(events.is_empty());
        assert_eq!(state.assigned(), vec![(0, -1)]);
        // past the timeout the direction empties and the harmonic returns
        let (state, events) = update_assignments(&state, &scan, 31.0, &config).unwrap();
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].event, EventKind::Released);
        assert!(state.assigned().is_empty());
        assert_eq!(state.pool(), &[-1, 1]);
    }

    #[test]
    fn assignment_update_is_pure() {
        let config = DetectionConfig::default();
        let state = AssignmentState::new(3, vec![1, -1, 2]).unwrap();
        let scan = vec![obs(0, true, Some(true)), obs(1, true, None), obs(2, false, None)];
        let a = update_assignments(&state, &scan, 5.0, &config).unwrap();
        let b = update_assignments(&state, &scan, 5.0, &config).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1.len(), b.1.len());
    }

    #[test]
    fn assignment_requires_full_scan_coverage() {
        let config = DetectionConfig::default();
        let state = AssignmentState::new(3, vec![1]).unwrap();
        // direction 2 missing
        let scan = vec![obs(0, false, None), obs(1, false, None)];
        assert!(update_assignments(&state, &scan, 0.0, &config).is_err());
        // duplicate direction
        let scan = vec![obs(0, false, None), obs(0, true, None), obs(2, false, None)];
        assert!(update_assignments(&state, &scan, 0.0, &config).is_err());
    }

    #[test]
    fn detection_event_log_shape() {
        let e = DetectionEvent {
            t: 1.5,
            direction: 2,
            event: EventKind::Assigned,
            harmonic: Some(-1),
        };
        let line = serde_json::to_string(&e).unwrap();
        assert_eq!(line, r#"{"t":1.5,"direction":2,"event":"assigned","harmonic":-1}"#);
    }
}

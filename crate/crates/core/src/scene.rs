//! Synthetic baseband echo generation for scenes observed through the
//! RIS harmonic channel.
//!
//! All signals are complex envelopes relative to the carrier; harmonic
//! offsets k*f0 stay explicit, so sample rates remain in the kHz range.
//! The received baseband model is
//!
//! ```text
//! x(t) = sum_k exp(j 2 pi k f0 t) * [ h_static_k
//!          + sum_persons G_k(p) * Gamma_p * exp(j 4 pi d(t) / lambda) * g_rx(p)
//!          + passerby_k(t) ] + n(t)
//! ```
//!
//! where `G_k` is the near-field harmonic gain, `g_rx` the free-space
//! target-to-Rx factor, `d(t)` the chest displacement, and `h_static_k`
//! collects the direct RIS-to-Rx leakage plus static reflectors. The
//! round trip over a chest displaced by d shortens/stretches both legs by
//! about d, hence the 4 pi d / lambda phase.

use std::f64::consts::PI;
use std::ops::RangeInclusive;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::ris::{harmonic_gains_at, FieldGrid, RisGeometry, StcCoding};

/// Default chest-motion amplitudes (m).
pub const DEFAULT_RESP_AMP_M: f64 = 5e-3;
pub const DEFAULT_HEART_AMP_M: f64 = 0.5e-3;

/// A monitored person: a point reflector at the chest whose range is
/// modulated by respiration and heartbeat.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Person {
    pub position: [f64; 3],
    /// Respiration frequency f_r (Hz), physiological range 0.1..=0.7.
    #[serde(rename = "f_r")]
    pub resp_hz: f64,
    /// Heartbeat frequency f_h (Hz), physiological range 0.8..=2.5.
    #[serde(rename = "f_h")]
    pub heart_hz: f64,
    /// Respiration chest amplitude A_r (m).
    #[serde(rename = "A_r")]
    pub resp_amp_m: f64,
    /// Heartbeat chest amplitude A_h (m); smaller than A_r.
    #[serde(rename = "A_h")]
    pub heart_amp_m: f64,
    /// Complex reflectivity of the person.
    #[serde(with = "complex_serde")]
    pub reflectivity: Complex64,
    /// Breath-hold intervals [start, end) in seconds; respiration motion
    /// is gated off inside them.
    #[serde(default)]
    pub breath_holds: Vec<(f64, f64)>,
}

impl Person {
    pub fn new(position: [f64; 3], resp_hz: f64, heart_hz: f64) -> Self {
        Self {
            position,
            resp_hz,
            heart_hz,
            resp_amp_m: DEFAULT_RESP_AMP_M,
            heart_amp_m: DEFAULT_HEART_AMP_M,
            reflectivity: Complex64::new(1.0, 0.0),
            breath_holds: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.1..=0.7).contains(&self.resp_hz) {
            return Err(CoreError::Scene(format!(
                "respiration frequency {} Hz outside 0.1..0.7",
                self.resp_hz
            )));
        }
        if !(0.8..=2.5).contains(&self.heart_hz) {
            return Err(CoreError::Scene(format!(
                "heartbeat frequency {} Hz outside 0.8..2.5",
                self.heart_hz
            )));
        }
        if !(self.heart_amp_m < self.resp_amp_m) {
            return Err(CoreError::Scene(
                "heartbeat amplitude must stay below respiration amplitude".into(),
            ));
        }
        if !(self.reflectivity.norm() > 0.0) {
            return Err(CoreError::Scene("person reflectivity must be non-zero".into()));
        }
        for &(a, b) in &self.breath_holds {
            if !(b > a) || a < 0.0 {
                return Err(CoreError::Scene(format!("invalid breath-hold interval [{a}, {b})")));
            }
        }
        Ok(())
    }

    fn holding(&self, t: f64) -> bool {
        self.breath_holds.iter().any(|&(a, b)| t >= a && t < b)
    }
}

/// A motionless point reflector (chair, desk, wall fragment).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StaticReflector {
    pub position: [f64; 3],
    #[serde(with = "complex_serde")]
    pub reflectivity: Complex64,
}

/// Straight-line constant-velocity crossing of an unmonitored person.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PasserbyTrack {
    pub start: [f64; 3],
    pub velocity: [f64; 3],
    pub t_start: f64,
    pub t_end: f64,
    #[serde(with = "complex_serde")]
    pub reflectivity: Complex64,
}

impl PasserbyTrack {
    /// Default crossing used in interference studies: walks along x at
    /// 0.5 m/s, 0.5 m in front of a subject plane at distance `subject_z`.
    pub fn crossing(subject_z: f64, t_start: f64, span_x: f64) -> Self {
        let speed = 0.5;
        Self {
            start: [-span_x / 2.0, 0.0, (subject_z - 0.5).max(0.1)],
            velocity: [speed, 0.0, 0.0],
            t_start,
            t_end: t_start + span_x / speed,
            reflectivity: Complex64::new(2.0, 0.0),
        }
    }

    pub fn position(&self, t: f64) -> Option<[f64; 3]> {
        if t < self.t_start || t > self.t_end {
            return None;
        }
        let dt = t - self.t_start;
        Some([
            self.start[0] + self.velocity[0] * dt,
            self.start[1] + self.velocity[1] * dt,
            self.start[2] + self.velocity[2] * dt,
        ])
    }
}

/// Scene content plus noise/leakage levels and the master noise seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scene {
    #[serde(rename = "person", default)]
    pub persons: Vec<Person>,
    #[serde(rename = "reflector", default)]
    pub reflectors: Vec<StaticReflector>,
    #[serde(default)]
    pub passerby: Option<PasserbyTrack>,
    /// Total complex-noise power relative to the unit carrier (dB);
    /// `-inf` disables noise.
    pub noise_power_db: f64,
    /// Direct RIS-to-Rx leakage level relative to a unit-reflectivity
    /// person path at 1 m boresight (dB); `-inf` disables it.
    pub leakage_db: f64,
    /// Receive antenna position; beside the aperture at its height.
    pub rx_position: [f64; 3],
    pub seed: u64,
}

impl Scene {
    pub fn new(seed: u64) -> Self {
        Self {
            persons: Vec::new(),
            reflectors: Vec::new(),
            passerby: None,
            noise_power_db: f64::NEG_INFINITY,
            leakage_db: -20.0,
            rx_position: [0.3, 0.0, 0.0],
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for p in &self.persons {
            p.validate()?;
        }
        for (i, a) in self.persons.iter().enumerate() {
            for b in self.persons.iter().skip(i + 1) {
                if a.position == b.position {
                    return Err(CoreError::Scene(format!(
                        "two persons share the position {:?}",
                        a.position
                    )));
                }
            }
        }
        if self.noise_power_db.is_nan() || self.noise_power_db == f64::INFINITY {
            return Err(CoreError::Scene("noise power must be finite or -inf".into()));
        }
        Ok(())
    }
}

/// Complex baseband capture: one stream per scan direction (or a single
/// continuous stream), with the sampling and carrier metadata needed to
/// demodulate it.
#[derive(Debug, Clone)]
pub struct EchoSet {
    pub streams: Vec<Vec<Complex64>>,
    pub fs: f64,
    /// Duration per stream (s).
    pub duration: f64,
    pub carrier_hz: f64,
    pub mod_freq_hz: f64,
    pub seed: u64,
}

impl EchoSet {
    pub fn stream(&self, direction: usize) -> &[Complex64] {
        &self.streams[direction]
    }

    pub fn directions(&self) -> usize {
        self.streams.len()
    }
}

/// Chest displacement of a person at time `t`: respiration (gated by the
/// breath-hold intervals) plus heartbeat.
pub fn chest_displacement(person: &Person, t: f64) -> f64 {
    let hold = if person.holding(t) { 0.0 } else { 1.0 };
    person.resp_amp_m * (2.0 * PI * person.resp_hz * t).sin() * hold
        + person.heart_amp_m * (2.0 * PI * person.heart_hz * t).sin()
}

/// Free-space amplitude/phase factor from a scene point to the receiver.
fn rx_factor(geometry: &RisGeometry, point: [f64; 3], rx: [f64; 3]) -> Result<Complex64> {
    let r = dist3(point, rx);
    if r <= 0.0 {
        return Err(CoreError::Scene("scene point coincides with the receiver".into()));
    }
    Ok(Complex64::from_polar(1.0 / r, geometry.wavenumber() * r))
}

/// Reference point of the leakage path: unit boresight distance.
const LEAK_REF_POINT: [f64; 3] = [0.0, 0.0, 1.0];

/// Round-trip gain of one person path at harmonic `k` (squared magnitude
/// of G_k * Gamma * g_rx). Used to calibrate in-band SNR levels.
pub fn person_band_power(
    scene: &Scene,
    person_idx: usize,
    coding: &StcCoding,
    geometry: &RisGeometry,
    k: i32,
) -> Result<f64> {
    let person = scene
        .persons
        .get(person_idx)
        .ok_or_else(|| CoreError::Scene(format!("no person {person_idx}")))?;
    let g = harmonic_gains_at(coding, geometry, person.position, k..=k)?[0];
    let rx = rx_factor(geometry, person.position, scene.rx_position)?;
    Ok((g * person.reflectivity * rx).norm_sqr())
}

/// Total noise power (dB, relative to unit carrier) that puts the given
/// in-band SNR on a signal of `band_signal_power` after a demultiplexer of
/// `band_hz` bandwidth, with the noise white over the full sample rate.
pub fn noise_db_for_band_snr(band_signal_power: f64, snr_db: f64, fs: f64, band_hz: f64) -> f64 {
    let band_noise = band_signal_power / 10f64.powf(snr_db / 10.0);
    let total = band_noise * fs / band_hz;
    10.0 * total.log10()
}

/// Passerby harmonic gains sampled at waypoints along the track and
/// complex-linearly interpolated per sample. Waypoints sit lambda/32
/// apart, keeping the interpolated phase step around 11 degrees.
struct PasserbyGains {
    /// gains[k_idx][waypoint]
    gains: Vec<Vec<Complex64>>,
    t_start: f64,
    t_end: f64,
    waypoints: usize,
}

impl PasserbyGains {
    fn build(
        track: &PasserbyTrack,
        coding: &StcCoding,
        geometry: &RisGeometry,
        rx: [f64; 3],
        k_range: &RangeInclusive<i32>,
    ) -> Result<Self> {
        if !(track.t_end > track.t_start) {
            return Err(CoreError::Scene("passerby track needs t_end > t_start".into()));
        }
        let p0 = track.position(track.t_start).expect("t_start on track");
        let p1 = track.position(track.t_end).expect("t_end on track");
        let len = dist3(p0, p1);
        let step = geometry.wavelength() / 32.0;
        let waypoints = ((len / step).ceil() as usize).max(1) + 1;
        let nk = k_range.clone().count();
        let mut gains = vec![Vec::with_capacity(waypoints); nk];
        for w in 0..waypoints {
            let frac = w as f64 / (waypoints - 1) as f64;
            let p = [
                p0[0] + (p1[0] - p0[0]) * frac,
                p0[1] + (p1[1] - p0[1]) * frac,
                p0[2] + (p1[2] - p0[2]) * frac,
            ];
            let g = harmonic_gains_at(coding, geometry, p, k_range.clone())?;
            let rxf = rx_factor(geometry, p, rx)?;
            for (ki, v) in g.into_iter().enumerate() {
                gains[ki].push(v * track.reflectivity * rxf);
            }
        }
        Ok(Self { gains, t_start: track.t_start, t_end: track.t_end, waypoints })
    }

    fn at(&self, ki: usize, t: f64) -> Complex64 {
        if t < self.t_start || t > self.t_end {
            return Complex64::new(0.0, 0.0);
        }
        if self.waypoints < 2 {
            return self.gains[ki][0];
        }
        let s = (t - self.t_start) / (self.t_end - self.t_start) * (self.waypoints - 1) as f64;
        let w0 = (s.floor() as usize).min(self.waypoints - 2);
        let frac = s - w0 as f64;
        self.gains[ki][w0] * (1.0 - frac) + self.gains[ki][w0 + 1] * frac
    }
}

fn dist3(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

#[allow(clippy::too_many_arguments)]
fn simulate_stream(
    scene: &Scene,
    coding: &StcCoding,
    geometry: &RisGeometry,
    grid: &FieldGrid,
    duration: f64,
    fs: f64,
    k_range: &RangeInclusive<i32>,
    t_offset: f64,
    stream_index: u64,
) -> Result<Vec<Complex64>> {
    let ks: Vec<i32> = k_range.clone().collect();
    let nk = ks.len();
    let f0 = geometry.mod_freq_hz();
    let lambda = geometry.wavelength();

    // static paths: leakage reference plus fixed reflectors
    let mut h_static = vec![Complex64::new(0.0, 0.0); nk];
    if scene.leakage_db.is_finite() {
        let leak_gain = 10f64.powf(scene.leakage_db / 20.0);
        let g = harmonic_gains_at(coding, geometry, LEAK_REF_POINT, k_range.clone())?;
        let rxf = rx_factor(geometry, LEAK_REF_POINT, scene.rx_position)?;
        for (ki, v) in g.into_iter().enumerate() {
            h_static[ki] += v * leak_gain * rxf;
        }
    }
    for refl in &scene.reflectors {
        let g = harmonic_gains_at(coding, geometry, refl.position, k_range.clone())?;
        let rxf = rx_factor(geometry, refl.position, scene.rx_position)?;
        for (ki, v) in g.into_iter().enumerate() {
            h_static[ki] += v * refl.reflectivity * rxf;
        }
    }

    // person paths (static factor; the vital phase rides on top per sample)
    let mut person_paths: Vec<Vec<Complex64>> = Vec::with_capacity(scene.persons.len());
    for person in &scene.persons {
        if !grid.contains_xy(person.position) || person.position[2] <= 0.0 {
            return Err(CoreError::Scene(format!(
                "person at {:?} lies outside the evaluated field-grid extent",
                person.position
            )));
        }
        let g = harmonic_gains_at(coding, geometry, person.position, k_range.clone())?;
        let rxf = rx_factor(geometry, person.position, scene.rx_position)?;
        person_paths.push(g.into_iter().map(|v| v * person.reflectivity * rxf).collect());
    }

    let passerby = match &scene.passerby {
        Some(track) => {
            Some(PasserbyGains::build(track, coding, geometry, scene.rx_position, k_range)?)
        }
        None => None,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(scene.seed);
    rng.set_stream(stream_index);
    let sigma = if scene.noise_power_db.is_finite() {
        10f64.powf(scene.noise_power_db / 20.0)
    } else {
        0.0
    };
    let per_component = sigma / std::f64::consts::SQRT_2;

    let n_samples = (fs * duration).round() as usize;
    let mut out = Vec::with_capacity(n_samples);
    let two_way = 4.0 * PI / lambda;
    let mut vital = vec![Complex64::new(0.0, 0.0); scene.persons.len()];
    for i in 0..n_samples {
        let t = t_offset + i as f64 / fs;
        // per-person vital phase factor, shared across harmonics
        for (p, slot) in scene.persons.iter().zip(vital.iter_mut()) {
            *slot = Complex64::from_polar(1.0, two_way * chest_displacement(p, t));
        }
        let mut sample = Complex64::new(0.0, 0.0);
        for (ki, &k) in ks.iter().enumerate() {
            let mut inner = h_static[ki];
            for (pi, path) in person_paths.iter().enumerate() {
                inner += path[ki] * vital[pi];
            }
            if let Some(pb) = &passerby {
                inner += pb.at(ki, t);
            }
            sample += Complex64::from_polar(1.0, 2.0 * PI * k as f64 * f0 * t) * inner;
        }
        if per_component > 0.0 {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            sample += Complex64::new(re * per_component, im * per_component);
        }
        out.push(sample);
    }
    Ok(out)
}

fn check_sampling(geometry: &RisGeometry, fs: f64, k_range: &RangeInclusive<i32>) -> Result<()> {
    let k_max = k_range.clone().map(|k| k.unsigned_abs()).max().unwrap_or(0) as f64;
    let f0 = geometry.mod_freq_hz();
    if !(fs > 2.0 * (k_max * f0 + 10.0)) {
        return Err(CoreError::Scene(format!(
            "sample rate {fs} Hz violates fs > 2 (k_max f0 + 10) = {} Hz",
            2.0 * (k_max * f0 + 10.0)
        )));
    }
    Ok(())
}

/// Simulates the received baseband stream for a scene observed through one
/// coding. Deterministic: identical scene (including seed) gives a bitwise
/// identical capture.
pub fn simulate_received(
    scene: &Scene,
    coding: &StcCoding,
    geometry: &RisGeometry,
    grid: &FieldGrid,
    duration: f64,
    fs: f64,
    k_range: RangeInclusive<i32>,
) -> Result<EchoSet> {
    scene.validate()?;
    coding.check_matches(geometry)?;
    check_sampling(geometry, fs, &k_range)?;
    if !(duration > 0.0) {
        return Err(CoreError::Scene("duration must be positive".into()));
    }
    let stream = simulate_stream(scene, coding, geometry, grid, duration, fs, &k_range, 0.0, 0)?;
    Ok(EchoSet {
        streams: vec![stream],
        fs,
        duration,
        carrier_hz: geometry.carrier_hz,
        mod_freq_hz: geometry.mod_freq_hz(),
        seed: scene.seed,
    })
}

/// Runs one dwell per scan direction, each with its own coding. Direction
/// `d` covers absolute time [d*dwell, (d+1)*dwell), so scene motion runs
/// continuously across the scan, and draws noise from substream `d` of the
/// scene seed, making the capture independent of evaluation order.
pub fn scan_sequence(
    scene: &Scene,
    codings_per_direction: &[StcCoding],
    geometry: &RisGeometry,
    grid: &FieldGrid,
    dwell: f64,
    fs: f64,
    k_range: RangeInclusive<i32>,
) -> Result<EchoSet> {
    if codings_per_direction.is_empty() {
        return Err(CoreError::Scene("scan needs at least one coding".into()));
    }
    scene.validate()?;
    check_sampling(geometry, fs, &k_range)?;
    if !(dwell > 0.0) {
        return Err(CoreError::Scene("dwell must be positive".into()));
    }
    let mut streams = Vec::with_capacity(codings_per_direction.len());
    for (d, coding) in codings_per_direction.iter().enumerate() {
        coding.check_matches(geometry)?;
        streams.push(simulate_stream(
            scene,
            coding,
            geometry,
            grid,
            dwell,
            fs,
            &k_range,
            d as f64 * dwell,
            d as u64,
        )?);
    }
    Ok(EchoSet {
        streams,
        fs,
        duration: dwell,
        carrier_hz: geometry.carrier_hz,
        mod_freq_hz: geometry.mod_freq_hz(),
        seed: scene.seed,
    })
}

pub(crate) mod complex_serde {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Complex64, s: S) -> Result<S::Ok, S::Error> {
        [v.re, v.im].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Complex64, D::Error> {
        let [re, im] = <[f64; 2]>::deserialize(d)?;
        Ok(Complex64::new(re, im))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;

    fn test_geometry() -> RisGeometry {
        RisGeometry::new(8, 8, 0.0428, 0.0428, 3.5e9, 0.01, 8).unwrap()
    }

    fn test_grid() -> FieldGrid {
        FieldGrid::centered(1.0, 4.0, 1.0, 33, 9).unwrap()
    }

    #[test]
    fn displacement_examples() {
        let mut p = Person::new([0.0, 0.0, 1.0], 0.25, 1.35);
        p.heart_amp_m = 0.0;
        assert_eq!(chest_displacement(&p, 0.0), 0.0);
        // quarter-period respiration peak
        let t = 1.0 / (4.0 * p.resp_hz);
        assert_relative_eq!(chest_displacement(&p, t), p.resp_amp_m, max_relative = 1e-12);
        // inside a hold only the heartbeat term survives
        let mut q = Person::new([0.0, 0.0, 1.0], 0.25, 1.35);
        q.breath_holds = vec![(10.0, 20.0)];
        let t = 12.3;
        let expect = q.heart_amp_m * (2.0 * PI * q.heart_hz * t).sin();
        assert_relative_eq!(chest_displacement(&q, t), expect, max_relative = 1e-12);
    }

    #[test]
    fn person_validation() {
        let mut p = Person::new([0.0, 0.0, 1.0], 0.25, 1.35);
        assert!(p.validate().is_ok());
        p.resp_hz = 0.05;
        assert!(p.validate().is_err());
        let mut p = Person::new([0.0, 0.0, 1.0], 0.25, 1.35);
        p.heart_amp_m = p.resp_amp_m;
        assert!(p.validate().is_err());
    }

    #[test]
    fn empty_scene_constant_coding_is_pure_dc() {
        let geom = test_geometry();
        let grid = test_grid();
        let coding = StcCoding::constant(8, 8, 8);
        let scene = Scene::new(1); // no noise by default
        let fs = 2000.0;
        let echo = simulate_received(&scene, &coding, &geom, &grid, 1.0, fs, -3..=3).unwrap();
        let x = echo.stream(0);
        // DFT bins at offsets 0 and k*f0 over the full capture
        let bin = |f: f64| -> f64 {
            let mut acc = Complex64::new(0.0, 0.0);
            for (i, v) in x.iter().enumerate() {
                acc += v * Complex64::from_polar(1.0, -2.0 * PI * f * i as f64 / fs);
            }
            (acc / x.len() as f64).norm_sqr()
        };
        let dc = bin(0.0);
        assert!(dc > 0.0);
        for k in [-3i32, -2, -1, 1, 2, 3] {
            let p = bin(k as f64 * echo.mod_freq_hz);
            assert!(
                10.0 * (p / dc).log10() < -120.0,
                "k={k}: {} dBc",
                10.0 * (p / dc).log10()
            );
        }
    }

    #[test]
    fn static_reflector_gives_constant_magnitude() {
        let geom = test_geometry();
        let grid = test_grid();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let coding = StcCoding::random(8, 8, 8, &mut rng);
        let mut scene = Scene::new(3);
        scene.leakage_db = f64::NEG_INFINITY;
        scene.reflectors.push(StaticReflector {
            position: [0.4, 0.0, 1.0],
            reflectivity: Complex64::new(1.0, 0.0),
        });
        let echo = simulate_received(&scene, &coding, &geom, &grid, 0.5, 2000.0, -2..=2).unwrap();
        let x = echo.stream(0);
        // every harmonic line has a fixed amplitude, so |x| repeats each
        // modulation period
        let period = (2000.0 * geom.mod_period_s) as usize;
        for i in 0..x.len() - period {
            assert!((x[i].norm() - x[i + period].norm()).abs() < 1e-10);
        }
    }

    #[test]
    fn determinism_and_seed_sensitivity() {
        let geom = test_geometry();
        let grid = test_grid();
        let coding = StcCoding::constant(8, 8, 8);
        let mut scene = Scene::new(11);
        scene.noise_power_db = -30.0;
        let a = simulate_received(&scene, &coding, &geom, &grid, 0.2, 2000.0, -2..=2).unwrap();
        let b = simulate_received(&scene, &coding, &geom, &grid, 0.2, 2000.0, -2..=2).unwrap();
        assert_eq!(a.stream(0), b.stream(0));
        scene.seed = 12;
        let c = simulate_received(&scene, &coding, &geom, &grid, 0.2, 2000.0, -2..=2).unwrap();
        assert_ne!(a.stream(0), c.stream(0));
    }

    #[test]
    fn reflectivity_linearity() {
        let geom = test_geometry();
        let grid = test_grid();
        let coding = StcCoding::constant(8, 8, 8);
        let base = Scene::new(5);
        let mut with_person = base.clone();
        with_person.persons.push(Person::new([0.3, 0.0, 1.0], 0.25, 1.2));
        let mut with_double = base.clone();
        let mut p2 = Person::new([0.3, 0.0, 1.0], 0.25, 1.2);
        p2.reflectivity = Complex64::new(2.0, 0.0);
        with_double.persons.push(p2);

        let run = |s: &Scene| {
            simulate_received(s, &coding, &geom, &grid, 0.3, 2000.0, -2..=2)
                .unwrap()
                .streams
                .remove(0)
        };
        let x0 = run(&base);
        let x1 = run(&with_person);
        let x2 = run(&with_double);
        for i in 0..x0.len() {
            let c1 = x1[i] - x0[i];
            let c2 = x2[i] - x0[i];
            // doubling the reflectivity doubles the contribution, up to
            // one rounding of the outer sums
            assert!((c2 - 2.0 * c1).norm() <= 1e-12 * c1.norm().max(1e-18), "sample {i}");
        }
    }

    #[test]
    fn noise_calibration_within_half_db() {
        let geom = test_geometry();
        let grid = test_grid();
        let coding = StcCoding::constant(8, 8, 8);
        let mut scene = Scene::new(21);
        scene.leakage_db = f64::NEG_INFINITY;
        scene.noise_power_db = -37.0;
        let echo = simulate_received(&scene, &coding, &geom, &grid, 60.0, 2000.0, -2..=2).unwrap();
        let x = echo.stream(0);
        assert!(x.len() >= 100_000);
        let measured = x.iter().map(|v| v.norm_sqr()).sum::<f64>() / x.len() as f64;
        let measured_db = 10.0 * measured.log10();
        assert!(
            (measured_db - scene.noise_power_db).abs() < 0.5,
            "measured {measured_db} dB, configured {} dB",
            scene.noise_power_db
        );
    }

    #[test]
    fn person_outside_grid_is_rejected() {
        let geom = test_geometry();
        let grid = test_grid();
        let coding = StcCoding::constant(8, 8, 8);
        let mut scene = Scene::new(1);
        scene.persons.push(Person::new([9.0, 0.0, 1.0], 0.25, 1.2));
        assert!(simulate_received(&scene, &coding, &geom, &grid, 0.2, 2000.0, -2..=2).is_err());
    }

    #[test]
    fn sampling_rate_guard() {
        let geom = test_geometry();
        let grid = test_grid();
        let coding = StcCoding::constant(8, 8, 8);
        let scene = Scene::new(1);
        // |k| up to 3 at f0 = 100 Hz needs fs > 620 Hz
        assert!(simulate_received(&scene, &coding, &geom, &grid, 0.2, 500.0, -3..=3).is_err());
    }

    #[test]
    fn scan_sequence_substreams() {
        let geom = test_geometry();
        let grid = test_grid();
        let codings = vec![StcCoding::constant(8, 8, 8); 3];
        let mut scene = Scene::new(9);
        scene.leakage_db = f64::NEG_INFINITY;
        scene.noise_power_db = -20.0;
        let echo = scan_sequence(&scene, &codings, &geom, &grid, 0.5, 2000.0, -2..=2).unwrap();
        assert_eq!(echo.directions(), 3);
        // identical codings + empty scene: statistically identical noise
        // from distinct substreams
        let p: Vec<f64> = echo
            .streams
            .iter()
            .map(|s| s.iter().map(|v| v.norm_sqr()).sum::<f64>() / s.len() as f64)
            .collect();
        for w in p.windows(2) {
            assert!((10.0 * (w[0] / w[1]).log10()).abs() < 1.0);
        }
        assert_ne!(echo.streams[0], echo.streams[1]);
        assert!(scan_sequence(&scene, &[], &geom, &grid, 0.5, 2000.0, -2..=2).is_err());
    }

    #[test]
    fn snr_helper_round_trip() {
        let db = noise_db_for_band_snr(1e-6, 10.0, 2000.0, 50.0);
        let total = 10f64.powf(db / 10.0);
        let band = total * 50.0 / 2000.0;
        assert_relative_eq!(10.0 * (1e-6 / band).log10(), 10.0, max_relative = 1e-9);
    }
}

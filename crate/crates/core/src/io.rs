//! File formats: coding text files, pattern CSV grids, echo captures
//! (CSV and raw I/Q with a sidecar header), scene descriptions, baseline
//! CSV and the line-delimited JSON detection log.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::bpso::CodingMode;
use crate::detect::{BaselineIntensity, DetectionEvent};
use crate::error::{CoreError, Result};
use crate::ris::{HarmonicPattern, StcCoding};
use crate::scene::{EchoSet, Scene};

// ─── Coding files ────────────────────────────────────────────────────────

/// Writes a coding as plain text: a `M N L mode` header line, then one
/// line per slot l holding the '0'/'1' characters of that slot (one per
/// column, row or element depending on the mode).
pub fn write_coding(path: &Path, coding: &StcCoding, mode: CodingMode) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!(
        "{} {} {} {}\n",
        coding.rows,
        coding.cols,
        coding.code_length,
        mode.as_str()
    ));
    for l in 0..coding.code_length {
        match mode {
            CodingMode::ColumnShared => {
                for n in 0..coding.cols {
                    // shared across rows; verify before trusting row 0
                    for m in 1..coding.rows {
                        if coding.bit(m, n, l) != coding.bit(0, n, l) {
                            return Err(CoreError::Coding(
                                "coding is not column-shared; cannot export in this mode".into(),
                            ));
                        }
                    }
                    out.push(char::from(b'0' + coding.bit(0, n, l)));
                }
            }
            CodingMode::RowShared => {
                for m in 0..coding.rows {
                    for n in 1..coding.cols {
                        if coding.bit(m, n, l) != coding.bit(m, 0, l) {
                            return Err(CoreError::Coding(
                                "coding is not row-shared; cannot export in this mode".into(),
                            ));
                        }
                    }
                    out.push(char::from(b'0' + coding.bit(m, 0, l)));
                }
            }
            CodingMode::Full => {
                for m in 0..coding.rows {
                    for n in 0..coding.cols {
                        out.push(char::from(b'0' + coding.bit(m, n, l)));
                    }
                }
            }
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads a coding file written by [`write_coding`].
pub fn read_coding(path: &Path) -> Result<(StcCoding, CodingMode)> {
    let file = fs::File::open(path)?;
    let mut lines = BufReader::new(file).lines();
    let header = lines
        .next()
        .ok_or_else(|| CoreError::Parse("empty coding file".into()))??;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 4 {
        return Err(CoreError::Parse(format!(
            "coding header must be 'M N L mode', got '{header}'"
        )));
    }
    let rows: usize = parts[0].parse().map_err(|_| bad_header(&header))?;
    let cols: usize = parts[1].parse().map_err(|_| bad_header(&header))?;
    let code_length: usize = parts[2].parse().map_err(|_| bad_header(&header))?;
    let mode = CodingMode::parse(parts[3])?;
    let per_line = match mode {
        CodingMode::ColumnShared => cols,
        CodingMode::RowShared => rows,
        CodingMode::Full => rows * cols,
    };
    let mut slot_bits: Vec<Vec<u8>> = Vec::with_capacity(code_length);
    for (l, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if l >= code_length {
            return Err(CoreError::Parse("more slot lines than L".into()));
        }
        let bits: Vec<u8> = line
            .trim()
            .chars()
            .map(|c| match c {
                '0' => Ok(0u8),
                '1' => Ok(1u8),
                other => Err(CoreError::Parse(format!("invalid coding character '{other}'"))),
            })
            .collect::<Result<_>>()?;
        if bits.len() != per_line {
            return Err(CoreError::Parse(format!(
                "slot line {} has {} characters, expected {per_line}",
                l + 1,
                bits.len()
            )));
        }
        slot_bits.push(bits);
    }
    if slot_bits.len() != code_length {
        return Err(CoreError::Parse(format!(
            "coding file has {} slot lines, header says {code_length}",
            slot_bits.len()
        )));
    }
    // slot-major lines to (m, n, l) tensor
    let mut bits = vec![0u8; rows * cols * code_length];
    for m in 0..rows {
        for n in 0..cols {
            for l in 0..code_length {
                let v = match mode {
                    CodingMode::ColumnShared => slot_bits[l][n],
                    CodingMode::RowShared => slot_bits[l][m],
                    CodingMode::Full => slot_bits[l][m * cols + n],
                };
                bits[(m * cols + n) * code_length + l] = v;
            }
        }
    }
    Ok((StcCoding::from_bits(rows, cols, code_length, bits)?, mode))
}

fn bad_header(header: &str) -> CoreError {
    CoreError::Parse(format!("malformed coding header '{header}'"))
}

// ─── Pattern CSV ─────────────────────────────────────────────────────────

/// File name carrying the explicit harmonic sign: pattern_k+1.csv etc.
pub fn pattern_file_name(k: i32) -> String {
    format!("pattern_k{}{}.csv", if k < 0 { "-" } else { "+" }, k.abs())
}

/// Writes one CSV grid per harmonic order with columns
/// x_m,y_m,z_m,re,im,magnitude_db. Returns the written paths.
pub fn write_pattern_csvs(dir: &Path, pattern: &HarmonicPattern) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    for k in pattern.orders() {
        let path = dir.join(pattern_file_name(k));
        let mut w = BufWriter::new(fs::File::create(&path)?);
        writeln!(w, "x_m,y_m,z_m,re,im,magnitude_db")?;
        let gains = pattern.gains(k).expect("order in range");
        for idx in 0..pattern.grid.len() {
            let p = pattern.grid.point_flat(idx);
            let g = gains[idx];
            let db = 20.0 * g.norm().max(1e-300).log10();
            writeln!(w, "{},{},{},{},{},{}", p[0], p[1], p[2], g.re, g.im, db)?;
        }
        w.flush()?;
        paths.push(path);
    }
    Ok(paths)
}

// ─── Echo capture ────────────────────────────────────────────────────────

/// Writes one capture direction as CSV (t_s,i,q).
pub fn write_echo_csv(path: &Path, echo: &EchoSet, direction: usize) -> Result<()> {
    let stream = echo
        .streams
        .get(direction)
        .ok_or_else(|| CoreError::Signal(format!("no capture direction {direction}")))?;
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "t_s,i,q")?;
    for (i, v) in stream.iter().enumerate() {
        writeln!(w, "{},{},{}", i as f64 / echo.fs, v.re, v.im)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a (t_s,i,q) CSV back into samples plus the sample rate inferred
/// from the time column.
pub fn read_echo_csv(path: &Path) -> Result<(Vec<Complex64>, f64)> {
    let file = fs::File::open(path)?;
    let mut samples = Vec::new();
    let mut times: Vec<f64> = Vec::new();
    for (ln, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if ln == 0 || line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 3 {
            return Err(CoreError::Parse(format!("echo CSV line {} malformed", ln + 1)));
        }
        let t: f64 = cols[0].trim().parse().map_err(|_| bad_num(ln))?;
        let re: f64 = cols[1].trim().parse().map_err(|_| bad_num(ln))?;
        let im: f64 = cols[2].trim().parse().map_err(|_| bad_num(ln))?;
        times.push(t);
        samples.push(Complex64::new(re, im));
    }
    if samples.len() < 2 {
        return Err(CoreError::Parse("echo CSV needs at least two samples".into()));
    }
    let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    Ok((samples, 1.0 / dt))
}

fn bad_num(line: usize) -> CoreError {
    CoreError::Parse(format!("bad number on line {}", line + 1))
}

/// Sidecar header of a raw I/Q capture.
#[derive(Debug, Clone, PartialEq)]
pub struct EchoHeader {
    pub fs: f64,
    pub duration: f64,
    pub f_c: f64,
    pub f0: f64,
    pub direction: usize,
}

/// Writes interleaved little-endian f64 I/Q plus a `<path>.hdr` sidecar
/// with fs, duration, f_c, f0 and the direction index.
pub fn write_echo_raw(path: &Path, echo: &EchoSet, direction: usize) -> Result<()> {
    let stream = echo
        .streams
        .get(direction)
        .ok_or_else(|| CoreError::Signal(format!("no capture direction {direction}")))?;
    let mut w = BufWriter::new(fs::File::create(path)?);
    for v in stream {
        w.write_all(&v.re.to_le_bytes())?;
        w.write_all(&v.im.to_le_bytes())?;
    }
    w.flush()?;
    let hdr = format!(
        "fs={}\nduration={}\nf_c={}\nf0={}\ndirection={}\n",
        echo.fs, echo.duration, echo.carrier_hz, echo.mod_freq_hz, direction
    );
    fs::write(sidecar_path(path), hdr)?;
    Ok(())
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(".hdr");
    PathBuf::from(os)
}

/// Reads a raw I/Q capture and its sidecar header.
pub fn read_echo_raw(path: &Path) -> Result<(Vec<Complex64>, EchoHeader)> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() % 16 != 0 {
        return Err(CoreError::Parse("raw capture length is not a multiple of 16 bytes".into()));
    }
    let samples = bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[0..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(c[8..16].try_into().expect("8 bytes"));
            Complex64::new(re, im)
        })
        .collect();
    let hdr_text = fs::read_to_string(sidecar_path(path))?;
    let mut fs_hz = None;
    let mut duration = None;
    let mut f_c = None;
    let mut f0 = None;
    let mut direction = None;
    for line in hdr_text.lines() {
        let Some((key, value)) = line.split_once('=') else { continue };
        match key.trim() {
            "fs" => fs_hz = value.trim().parse().ok(),
            "duration" => duration = value.trim().parse().ok(),
            "f_c" => f_c = value.trim().parse().ok(),
            "f0" => f0 = value.trim().parse().ok(),
            "direction" => direction = value.trim().parse().ok(),
            _ => {}
        }
    }
    let header = EchoHeader {
        fs: fs_hz.ok_or_else(|| CoreError::Parse("sidecar misses fs".into()))?,
        duration: duration.ok_or_else(|| CoreError::Parse("sidecar misses duration".into()))?,
        f_c: f_c.ok_or_else(|| CoreError::Parse("sidecar misses f_c".into()))?,
        f0: f0.ok_or_else(|| CoreError::Parse("sidecar misses f0".into()))?,
        direction: direction.ok_or_else(|| CoreError::Parse("sidecar misses direction".into()))?,
    };
    Ok((samples, header))
}

/// Reads a (t, value) signal CSV (any header line is skipped); returns
/// the series and the sample rate inferred from the time column.
pub fn read_signal_csv(path: &Path) -> Result<(Vec<f64>, f64)> {
    let file = fs::File::open(path)?;
    let mut values = Vec::new();
    let mut times = Vec::new();
    for (ln, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let cols: Vec<&str> = trimmed.split(',').collect();
        if cols.len() < 2 {
            return Err(CoreError::Parse(format!("signal CSV line {} malformed", ln + 1)));
        }
        let t: f64 = match cols[0].trim().parse() {
            Ok(v) => v,
            Err(_) if ln == 0 => continue, // header
            Err(_) => return Err(bad_num(ln)),
        };
        let v: f64 = cols[1].trim().parse().map_err(|_| bad_num(ln))?;
        times.push(t);
        values.push(v);
    }
    if values.len() < 2 {
        return Err(CoreError::Parse("signal CSV needs at least two samples".into()));
    }
    let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    Ok((values, 1.0 / dt))
}

/// Writes a (t, value) signal CSV.
pub fn write_signal_csv(path: &Path, series: &[f64], fs: f64) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "t_s,value")?;
    for (i, v) in series.iter().enumerate() {
        writeln!(w, "{},{}", i as f64 / fs, v)?;
    }
    w.flush()?;
    Ok(())
}

// ─── Scene description ───────────────────────────────────────────────────

/// Writes the scene as sectioned key-value text (TOML).
pub fn write_scene(path: &Path, scene: &Scene) -> Result<()> {
    let text = toml::to_string_pretty(scene)
        .map_err(|e| CoreError::Parse(format!("scene serialization failed: {e}")))?;
    fs::write(path, text)?;
    Ok(())
}

/// Reads a scene description written by [`write_scene`].
pub fn read_scene(path: &Path) -> Result<Scene> {
    let text = fs::read_to_string(path)?;
    let scene: Scene =
        toml::from_str(&text).map_err(|e| CoreError::Parse(format!("scene file: {e}")))?;
    scene.validate()?;
    Ok(scene)
}

// ─── Baseline CSV ────────────────────────────────────────────────────────

/// Writes the per-direction baseline intensities as CSV
/// (direction,intensity) with the capture parameters in comment lines.
pub fn write_baseline_csv(path: &Path, baseline: &BaselineIntensity) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "# dwell_s={} fs={}", baseline.dwell_s, baseline.fs)?;
    writeln!(w, "direction,intensity")?;
    for (d, v) in baseline.intensities.iter().enumerate() {
        writeln!(w, "{d},{v}")?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a baseline CSV written by [`write_baseline_csv`].
pub fn read_baseline_csv(path: &Path) -> Result<BaselineIntensity> {
    let file = fs::File::open(path)?;
    let mut dwell_s = 0.0;
    let mut fs_hz = 0.0;
    let mut intensities = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed == "direction,intensity" {
            continue;
        }
        if let Some(meta) = trimmed.strip_prefix('#') {
            for part in meta.split_whitespace() {
                if let Some(v) = part.strip_prefix("dwell_s=") {
                    dwell_s = v.parse().unwrap_or(0.0);
                }
                if let Some(v) = part.strip_prefix("fs=") {
                    fs_hz = v.parse().unwrap_or(0.0);
                }
            }
            continue;
        }
        let (d, v) = trimmed
            .split_once(',')
            .ok_or_else(|| CoreError::Parse(format!("baseline line '{trimmed}' malformed")))?;
        let d: usize = d
            .trim()
            .parse()
            .map_err(|_| CoreError::Parse(format!("bad direction '{d}'")))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| CoreError::Parse(format!("bad intensity '{v}'")))?;
        if d != intensities.len() {
            return Err(CoreError::Parse("baseline directions out of order".into()));
        }
        intensities.push(v);
    }
    let baseline = BaselineIntensity { intensities, dwell_s, fs: fs_hz };
    baseline.validate()?;
    Ok(baseline)
}

// ─── Detection log ───────────────────────────────────────────────────────

/// Writes detection events as line-delimited JSON.
pub fn write_detection_log(path: &Path, events: &[DetectionEvent]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for e in events {
        let line = serde_json::to_string(e)
            .map_err(|err| CoreError::Parse(format!("event serialization failed: {err}")))?;
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a detection log written by [`write_detection_log`].
pub fn read_detection_log(path: &Path) -> Result<Vec<DetectionEvent>> {
    let file = fs::File::open(path)?;
    BufReader::new(file)
        .lines()
        .filter_map(|l| match l {
            Ok(line) if line.trim().is_empty() => None,
            Ok(line) => Some(
                serde_json::from_str(&line)
                    .map_err(|e| CoreError::Parse(format!("detection log: {e}"))),
            ),
            Err(e) => Some(Err(CoreError::Io(e))),
        })
        .collect()
}

/// Writes a fitness trace as CSV (iteration,best_fitness).
pub fn write_fitness_trace_csv(path: &Path, trace: &[f64]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "iteration,best_fitness")?;
    for (i, f) in trace.iter().enumerate() {
        writeln!(w, "{i},{f}")?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detect::EventKind;
    use crate::ris::{near_field_pattern, FieldGrid, RisGeometry};
    use crate::scene::{simulate_received, Person};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn coding_round_trip_all_modes() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        // column-shared
        let seqs: Vec<Vec<u8>> =
            (0..4).map(|_| (0..5).map(|_| rng.random_range(0..=1u8)).collect()).collect();
        let coding = StcCoding::from_column_sequences(3, &seqs).unwrap();
        let path = dir.path().join("col.coding");
        write_coding(&path, &coding, CodingMode::ColumnShared).unwrap();
        let (back, mode) = read_coding(&path).unwrap();
        assert_eq!(back, coding);
        assert_eq!(mode, CodingMode::ColumnShared);
        // full
        let coding = StcCoding::random(3, 4, 5, &mut rng);
        let path = dir.path().join("full.coding");
        write_coding(&path, &coding, CodingMode::Full).unwrap();
        let (back, mode) = read_coding(&path).unwrap();
        assert_eq!(back, coding);
        assert_eq!(mode, CodingMode::Full);
        // a full random coding is (almost surely) not column-shared
        assert!(write_coding(&path, &coding, CodingMode::ColumnShared).is_err());
    }

    #[test]
    fn coding_file_shape() {
        let dir = tempfile::tempdir().unwrap();
        let seqs = vec![vec![0u8, 1], vec![1u8, 0], vec![1u8, 1]];
        let coding = StcCoding::from_column_sequences(2, &seqs).unwrap();
        let path = dir.path().join("c.coding");
        write_coding(&path, &coding, CodingMode::ColumnShared).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "2 3 2 column-shared");
        // L = 2 slot lines, each N = 3 characters
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[1].len(), 3);
        // slot 1 holds the first bit of each column sequence
        assert_eq!(lines[1], "011");
        assert_eq!(lines[2], "101");
    }

    #[test]
    fn pattern_csv_written_per_order() {
        let dir = tempfile::tempdir().unwrap();
        let geom = RisGeometry::new(2, 2, 0.0428, 0.0428, 3.5e9, 0.01, 2).unwrap();
        let coding = StcCoding::constant(2, 2, 2);
        let grid = FieldGrid::centered(0.5, 0.2, 0.2, 3, 3).unwrap();
        let pattern = near_field_pattern(&coding, &geom, &grid, -1..=1).unwrap();
        let paths = write_pattern_csvs(dir.path(), &pattern).unwrap();
        assert_eq!(paths.len(), 3);
        assert!(dir.path().join("pattern_k-1.csv").exists());
        assert!(dir.path().join("pattern_k+0.csv").exists());
        assert!(dir.path().join("pattern_k+1.csv").exists());
        let text = fs::read_to_string(dir.path().join("pattern_k+0.csv")).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "x_m,y_m,z_m,re,im,magnitude_db");
        assert_eq!(lines.len(), 1 + grid.len());
    }

    #[test]
    fn echo_csv_and_raw_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let geom = RisGeometry::new(2, 2, 0.0428, 0.0428, 3.5e9, 0.01, 2).unwrap();
        let grid = FieldGrid::centered(1.0, 2.0, 0.5, 9, 3).unwrap();
        let coding = StcCoding::constant(2, 2, 2);
        let mut scene = Scene::new(5);
        scene.persons.push(Person::new([0.2, 0.0, 1.0], 0.25, 1.2));
        scene.noise_power_db = -40.0;
        let echo = simulate_received(&scene, &coding, &geom, &grid, 0.05, 2000.0, -1..=1).unwrap();

        let csv = dir.path().join("echo.csv");
        write_echo_csv(&csv, &echo, 0).unwrap();
        let (samples, fs) = read_echo_csv(&csv).unwrap();
        assert_eq!(samples.len(), echo.stream(0).len());
        assert!((fs - echo.fs).abs() < 1e-6);
        for (a, b) in samples.iter().zip(echo.stream(0).iter()) {
            assert!((a - b).norm() < 1e-12);
        }

        let raw = dir.path().join("echo.iq");
        write_echo_raw(&raw, &echo, 0).unwrap();
        let (samples, header) = read_echo_raw(&raw).unwrap();
        // raw round-trip is bit exact
        assert_eq!(samples, echo.streams[0]);
        assert_eq!(header.fs, echo.fs);
        assert_eq!(header.f0, echo.mod_freq_hz);
        assert_eq!(header.direction, 0);
    }

    #[test]
    fn scene_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut scene = Scene::new(77);
        scene.persons.push(Person::new([0.5, 0.0, 1.0], 0.25, 1.35));
        scene.persons[0].breath_holds = vec![(20.0, 35.0)];
        scene.reflectors.push(crate::scene::StaticReflector {
            position: [-0.4, 0.0, 1.2],
            reflectivity: Complex64::new(0.8, 0.1),
        });
        scene.noise_power_db = -35.0;
        let path = dir.path().join("scene.toml");
        write_scene(&path, &scene).unwrap();
        let back = read_scene(&path).unwrap();
        assert_eq!(back.persons.len(), 1);
        assert_eq!(back.persons[0].resp_hz, 0.25);
        assert_eq!(back.persons[0].breath_holds, vec![(20.0, 35.0)]);
        assert_eq!(back.reflectors[0].reflectivity, Complex64::new(0.8, 0.1));
        assert_eq!(back.noise_power_db, -35.0);
        assert_eq!(back.seed, 77);
        // the file uses the domain key names
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.contains("f_r"), "{text}");
        assert!(text.contains("A_r"), "{text}");
    }

    #[test]
    fn scene_file_rejects_invalid_person() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.toml");
        fs::write(
            &path,
            r#"
noise_power_db = -30.0
leakage_db = -20.0
rx_position = [0.3, 0.0, 0.0]
seed = 1

[[person]]
position = [0.0, 0.0, 1.0]
f_r = 5.0
f_h = 1.2
A_r = 0.005
A_h = 0.0005
reflectivity = [1.0, 0.0]
"#,
        )
        .unwrap();
        // f_r = 5 Hz is outside the physiological range
        assert!(read_scene(&path).is_err());
    }

    #[test]
    fn baseline_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let baseline = BaselineIntensity {
            intensities: vec![1.0e-9, 2.5e-9, 0.7e-9],
            dwell_s: 20.0,
            fs: 2000.0,
        };
        let path = dir.path().join("baseline.csv");
        write_baseline_csv(&path, &baseline).unwrap();
        let back = read_baseline_csv(&path).unwrap();
        assert_eq!(back.intensities, baseline.intensities);
        assert_eq!(back.dwell_s, 20.0);
        assert_eq!(back.fs, 2000.0);
    }

    #[test]
    fn detection_log_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let events = vec![
            DetectionEvent { t: 20.0, direction: 1, event: EventKind::Candidate, harmonic: None },
            DetectionEvent {
                t: 20.0,
                direction: 1,
                event: EventKind::Assigned,
                harmonic: Some(-1),
            },
        ];
        let path = dir.path().join("events.jsonl");
        write_detection_log(&path, &events).unwrap();
        let back = read_detection_log(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[1].event, EventKind::Assigned);
        assert_eq!(back[1].harmonic, Some(-1));
    }

    #[test]
    fn signal_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let series: Vec<f64> = (0..100).map(|i| (i as f64 * 0.1).sin()).collect();
        let path = dir.path().join("sig.csv");
        write_signal_csv(&path, &series, 20.0).unwrap();
        let (back, fs) = read_signal_csv(&path).unwrap();
        assert_eq!(back.len(), 100);
        assert!((fs - 20.0).abs() < 1e-9);
        for (a, b) in back.iter().zip(series.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

//! Shared signal-processing primitives: FFT wrappers, FIR filtering,
//! Welch spectra, phase unwrapping and IQ circle fitting.

use std::cell::RefCell;
use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::{num_complex::Complex, FftPlanner};

use crate::error::{CoreError, Result};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// In-place forward FFT (unnormalized, rustfft convention).
pub fn fft_in_place(buf: &mut [Complex64]) {
    PLANNER.with(|p| {
        let fft = p.borrow_mut().plan_fft_forward(buf.len());
        fft.process(buf);
    });
}

/// In-place inverse FFT, normalized by 1/N.
pub fn ifft_in_place(buf: &mut [Complex64]) {
    let n = buf.len();
    PLANNER.with(|p| {
        let fft = p.borrow_mut().plan_fft_inverse(n);
        fft.process(buf);
    });
    let scale = 1.0 / n as f64;
    for v in buf.iter_mut() {
        *v *= scale;
    }
}

/// Forward FFT of a real series, returned as a full complex spectrum.
pub fn fft_real(x: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fft_in_place(&mut buf);
    buf
}

/// Hann window of length `n` (periodic form used for spectral averaging).
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

/// Symmetric Hann window (zero at both ends), used for FIR design.
pub fn hann_symmetric(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / (n - 1) as f64).cos())
        .collect()
}

/// Blackman window of length `n` (symmetric).
pub fn blackman(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| {
            let x = 2.0 * PI * i as f64 / (n - 1) as f64;
            0.42 - 0.5 * x.cos() + 0.08 * (2.0 * x).cos()
        })
        .collect()
}

/// Linear-phase lowpass FIR via the windowed-sinc method with a Blackman
/// window. `cutoff_hz` is the -6 dB edge; `transition_hz` sets the tap
/// count (Blackman needs ~5.5/N of normalized transition width and gives
/// ~74 dB stopband rejection). DC gain is normalized to exactly 1.
pub fn fir_lowpass(fs: f64, cutoff_hz: f64, transition_hz: f64) -> Result<Vec<f64>> {
    if !(fs > 0.0) || !(cutoff_hz > 0.0) || !(transition_hz > 0.0) {
        return Err(CoreError::Signal(
            "fir_lowpass: fs, cutoff and transition must be positive".into(),
        ));
    }
    if cutoff_hz + transition_hz >= fs / 2.0 {
        return Err(CoreError::Signal(format!(
            "fir_lowpass: cutoff {cutoff_hz} Hz + transition {transition_hz} Hz exceeds Nyquist {}",
            fs / 2.0
        )));
    }
    let mut ntaps = (5.5 * fs / transition_hz).ceil() as usize + 1;
    if ntaps % 2 == 0 {
        ntaps += 1;
    }
    let mid = (ntaps - 1) as f64 / 2.0;
    let fc = cutoff_hz / fs; // cycles per sample
    let win = blackman(ntaps);
    let mut taps: Vec<f64> = (0..ntaps)
        .map(|i| {
            let m = i as f64 - mid;
            let sinc = if m == 0.0 {
                2.0 * fc
            } else {
                (2.0 * PI * fc * m).sin() / (PI * m)
            };
            sinc * win[i]
        })
        .collect();
    let sum: f64 = taps.iter().sum();
    for t in taps.iter_mut() {
        *t /= sum;
    }
    Ok(taps)
}

/// Filters a complex stream with real FIR taps and compensates the group
/// delay, so the output is time-aligned with the input (same length; the
/// first and last (ntaps-1)/2 samples carry edge transients).
pub fn filter_aligned(x: &[Complex64], taps: &[f64]) -> Vec<Complex64> {
    let n = x.len();
    let half = (taps.len() - 1) / 2;
    let mut y = vec![Complex64::new(0.0, 0.0); n];
    for (i, out) in y.iter_mut().enumerate() {
        // output sample i corresponds to full-convolution index i + half
        let conv_idx = i + half;
        let mut acc = Complex64::new(0.0, 0.0);
        let t_lo = conv_idx.saturating_sub(n - 1);
        let t_hi = taps.len().min(conv_idx + 1);
        for (t, &tap) in taps.iter().enumerate().take(t_hi).skip(t_lo) {
            acc += x[conv_idx - t] * tap;
        }
        *out = acc;
    }
    y
}

/// Real-input version of [`filter_aligned`].
pub fn filter_aligned_real(x: &[f64], taps: &[f64]) -> Vec<f64> {
    let n = x.len();
    let half = (taps.len() - 1) / 2;
    let mut y = vec![0.0; n];
    for (i, out) in y.iter_mut().enumerate() {
        let conv_idx = i + half;
        let mut acc = 0.0;
        let t_lo = conv_idx.saturating_sub(n - 1);
        let t_hi = taps.len().min(conv_idx + 1);
        for (t, &tap) in taps.iter().enumerate().take(t_hi).skip(t_lo) {
            acc += x[conv_idx - t] * tap;
        }
        *out = acc;
    }
    y
}

/// Equivalent noise bandwidth of an FIR filter in Hz: white noise of
/// density N0/fs per sample comes out with power N0 * enbw / fs * fs ...
/// i.e. output noise power = input noise power * sum(taps^2).
pub fn fir_noise_gain(taps: &[f64]) -> f64 {
    taps.iter().map(|t| t * t).sum()
}

/// Anti-aliased integer-factor decimation of a real series.
pub fn decimate(x: &[f64], fs: f64, factor: usize) -> Result<Vec<f64>> {
    if factor == 0 {
        return Err(CoreError::Signal("decimate: factor must be >= 1".into()));
    }
    if factor == 1 {
        return Ok(x.to_vec());
    }
    let out_nyquist = fs / (2.0 * factor as f64);
    let taps = fir_lowpass(fs, 0.7 * out_nyquist, 0.25 * out_nyquist)?;
    let filtered = filter_aligned_real(x, &taps);
    Ok(filtered.iter().step_by(factor).copied().collect())
}

/// Unwraps a phase series in place (removes 2-pi jumps).
pub fn unwrap_phase(phase: &mut [f64]) {
    let mut offset = 0.0;
    for i in 1..phase.len() {
        let raw = phase[i] + offset;
        let prev = phase[i - 1];
        let mut d = raw - prev;
        while d > PI {
            offset -= 2.0 * PI;
            d -= 2.0 * PI;
        }
        while d < -PI {
            offset += 2.0 * PI;
            d += 2.0 * PI;
        }
        phase[i] = prev + d;
    }
}

/// Removes the least-squares linear trend from a series in place.
pub fn detrend_linear(x: &mut [f64]) {
    let n = x.len();
    if n < 2 {
        if n == 1 {
            x[0] = 0.0;
        }
        return;
    }
    let nf = n as f64;
    let t_mean = (nf - 1.0) / 2.0;
    let x_mean = x.iter().sum::<f64>() / nf;
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, &v) in x.iter().enumerate() {
        let dt = i as f64 - t_mean;
        num += dt * (v - x_mean);
        den += dt * dt;
    }
    let slope = if den > 0.0 { num / den } else { 0.0 };
    for (i, v) in x.iter_mut().enumerate() {
        *v -= x_mean + slope * (i as f64 - t_mean);
    }
}

/// Welch power spectral estimate of a real series: Hann-windowed segments
/// with 50% overlap, averaged one-sided power spectrum. Returns
/// (frequencies in Hz, mean power per bin). Power is scaled so a unit
/// sinusoid appears with in-bin power ~0.25*(window gain); only relative
/// levels matter to the callers.
pub fn welch_power(x: &[f64], fs: f64, segment_len: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if segment_len < 8 || x.len() < segment_len {
        return Err(CoreError::Signal(format!(
            "welch_power: need at least one segment of {segment_len} samples, got {}",
            x.len()
        )));
    }
    let hop = segment_len / 2;
    let win = hann(segment_len);
    let n_bins = segment_len / 2 + 1;
    let mut acc = vec![0.0; n_bins];
    let mut count = 0usize;
    let mut start = 0usize;
    while start + segment_len <= x.len() {
        let mut buf: Vec<Complex64> = (0..segment_len)
            .map(|i| Complex64::new(x[start + i] * win[i], 0.0))
            .collect();
        fft_in_place(&mut buf);
        for (b, a) in acc.iter_mut().enumerate() {
            *a += buf[b].norm_sqr();
        }
        count += 1;
        start += hop;
    }
    let scale = 1.0 / (count as f64 * segment_len as f64);
    for a in acc.iter_mut() {
        *a *= scale;
    }
    let freqs = (0..n_bins).map(|b| b as f64 * fs / segment_len as f64).collect();
    Ok((freqs, acc))
}

/// Welch power spectrum of a complex series: Hann-windowed segments with
/// 50% overlap, averaged two-sided power per bin. Returns (signed
/// frequencies in Hz over (-fs/2, fs/2], mean power per bin), bin order
/// ascending in frequency.
pub fn welch_power_complex(
    x: &[Complex64],
    fs: f64,
    segment_len: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if segment_len < 8 || x.len() < segment_len {
        return Err(CoreError::Signal(format!(
            "welch_power_complex: need at least one segment of {segment_len} samples, got {}",
            x.len()
        )));
    }
    let hop = segment_len / 2;
    let win = hann(segment_len);
    let mut acc = vec![0.0; segment_len];
    let mut count = 0usize;
    let mut start = 0usize;
    while start + segment_len <= x.len() {
        let mut buf: Vec<Complex64> =
            (0..segment_len).map(|i| x[start + i] * win[i]).collect();
        fft_in_place(&mut buf);
        for (b, a) in acc.iter_mut().enumerate() {
            *a += buf[b].norm_sqr();
        }
        count += 1;
        start += hop;
    }
    let scale = 1.0 / (count as f64 * segment_len as f64);
    for a in acc.iter_mut() {
        *a *= scale;
    }
    // reorder bins to ascending signed frequency
    let n = segment_len as i64;
    let mut bins: Vec<(i64, f64)> = acc
        .into_iter()
        .enumerate()
        .map(|(b, p)| {
            let b = b as i64;
            let signed = if b <= n / 2 { b } else { b - n };
            (signed, p)
        })
        .collect();
    bins.sort_by_key(|&(s, _)| s);
    let freqs = bins.iter().map(|&(s, _)| s as f64 * fs / segment_len as f64).collect();
    let power = bins.into_iter().map(|(_, p)| p).collect();
    Ok((freqs, power))
}

/// Three-point parabolic peak interpolation around a local maximum.
/// Given samples y(-1), y(0), y(+1) with the max at 0, returns the
/// sub-sample offset in (-0.5, 0.5) and the interpolated peak value.
pub fn quadratic_peak(y_m1: f64, y_0: f64, y_p1: f64) -> (f64, f64) {
    let denom = y_m1 - 2.0 * y_0 + y_p1;
    if denom.abs() < 1e-300 {
        return (0.0, y_0);
    }
    let delta = 0.5 * (y_m1 - y_p1) / denom;
    let delta = delta.clamp(-0.5, 0.5);
    let value = y_0 - 0.25 * (y_m1 - y_p1) * delta;
    (delta, value)
}

/// Least-squares circle fit (Kasa method) to an IQ trajectory. Returns
/// the estimated circle center, or `None` when the trajectory is
/// degenerate (collapsed to a point or collinear to numerical precision).
pub fn fit_circle_center(iq: &[Complex64]) -> Option<Complex64> {
    let n = iq.len();
    if n < 3 {
        return None;
    }
    let nf = n as f64;
    let mx = iq.iter().map(|z| z.re).sum::<f64>() / nf;
    let my = iq.iter().map(|z| z.im).sum::<f64>() / nf;
    // centered coordinates keep it well conditioned
    let (mut suu, mut suv, mut svv, mut suuu, mut svvv, mut suvv, mut svuu) =
        (0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for z in iq {
        let u = z.re - mx;
        let v = z.im - my;
        suu += u * u;
        suv += u * v;
        svv += v * v;
        suuu += u * u * u;
        svvv += v * v * v;
        suvv += u * v * v;
        svuu += v * u * u;
    }
    let det = suu * svv - suv * suv;
    let scale = (suu + svv) / nf;
    if det.abs() <= 1e-24 * (scale * nf).powi(2).max(1e-300) {
        return None;
    }
    let b1 = 0.5 * (suuu + suvv);
    let b2 = 0.5 * (svvv + svuu);
    let uc = (svv * b1 - suv * b2) / det;
    let vc = (suu * b2 - suv * b1) / det;
    Some(Complex64::new(uc + mx, vc + my))
}

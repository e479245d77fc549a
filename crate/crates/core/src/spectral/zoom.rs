use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use super::Spectrum;
use crate::error::{Error, Result};
use crate::signals::Waveform;

pub const ZFFT_FIR_TAPS: usize = 127;

/// Hamming-windowed sinc low-pass with unit DC gain. `cutoff` is in cycles per sample.
pub fn design_lowpass(taps: usize, cutoff: f64) -> Vec<f64> {
    let mid = (taps - 1) as f64 / 2.0;
    let mut h: Vec<f64> = (0..taps)
        .map(|n| {
            let x = n as f64 - mid;
            let sinc = if x == 0.0 { 2.0 * cutoff } else { (2.0 * PI * cutoff * x).sin() / (PI * x) };
            let hamming = if taps > 1 { 0.54 - 0.46 * (2.0 * PI * n as f64 / (taps - 1) as f64).cos() } else { 1.0 };
            sinc * hamming
        })
        .collect();
    let sum: f64 = h.iter().sum();
    h.iter_mut().for_each(|v| *v /= sum);
    h
}

/// Zoom FFT: shift `f_center` to DC, low-pass, keep every `decimation`-th
/// sample, zero-pad to `pad_to` and transform. Bins are ordered so that bin
/// `pad_to / 2` sits at `f_center`.
pub fn zfft(w: &Waveform, f_center_hz: f64, decimation: usize, pad_to: usize) -> Result<Spectrum> {
    if w.is_empty() {
        return Err(Error::input("zfft of an empty waveform"));
    }
    if decimation == 0 {
        return Err(Error::spec("decimation must be at least 1"));
    }
    if !(f_center_hz.is_finite() && f_center_hz >= 0.0 && f_center_hz < w.nyquist_hz()) {
        return Err(Error::spec(format!("zoom centre {f_center_hz} Hz outside [0, {}) Hz", w.nyquist_hz())));
    }
    let n = w.len();
    let n_dec = n.div_ceil(decimation);
    if pad_to < n_dec {
        return Err(Error::spec(format!("pad length {pad_to} shorter than {n_dec} decimated samples")));
    }
    let dt = w.dt();
    let shifted: Vec<Complex64> = w
        .samples()
        .iter()
        .enumerate()
        .map(|(k, &x)| {
            let cycles = (f_center_hz * dt * k as f64).rem_euclid(1.0);
            Complex64::from_polar(x, 2.0 * PI * cycles)
        })
        .collect();

    let mut buf = vec![Complex64::new(0.0, 0.0); pad_to];
    if decimation == 1 {
        buf[..n].copy_from_slice(&shifted);
    } else {
        let h = design_lowpass(ZFFT_FIR_TAPS, 0.8 * 0.5 / decimation as f64);
        let mid = (ZFFT_FIR_TAPS - 1) / 2;
        for (slot, out) in buf.iter_mut().take(n_dec).enumerate() {
            let centre = slot * decimation;
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, &hj) in h.iter().enumerate() {
                let idx = centre as isize + mid as isize - j as isize;
                if idx >= 0 && (idx as usize) < n {
                    acc += shifted[idx as usize] * hj;
                }
            }
            *out = acc;
        }
    }

    FftPlanner::<f64>::new().plan_fft_inverse(pad_to).process(&mut buf);
    let norm = 1.0 / n_dec as f64;
    let half = pad_to / 2;
    let bins = (0..pad_to).map(|j| buf[(j + pad_to - half) % pad_to] * norm).collect();
    let step = 1.0 / (pad_to as f64 * decimation as f64 * dt);
    Ok(Spectrum { bins, f_start_hz: f_center_hz - half as f64 * step, f_step_hz: step, source_len: n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::{synth_tones, ToneSpec};
    use crate::spectral::dft;

    #[test]
    fn lowpass_has_unit_dc_and_symmetry() {
        let h = design_lowpass(127, 0.02);
        assert!((h.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for i in 0..63 {
            assert!((h[i] - h[126 - i]).abs() < 1e-15);
        }
    }

    #[test]
    fn decimation_by_twenty_gives_five_hz_grid() {
        let w = synth_tones(&[ToneSpec::unit(650.0)], 0.05, 16_000.0, 0.0, 0).unwrap();
        let s = zfft(&w, 650.0, 20, 160).unwrap();
        assert!(s.f_step_hz <= 5.0 + 1e-12);
        let mag = s.magnitudes();
        let best = (0..mag.len()).max_by(|&a, &b| mag[a].total_cmp(&mag[b])).unwrap();
        assert_eq!(best, 80);
        assert!((s.frequency(best) - 650.0).abs() < 1e-9);
    }

    #[test]
    fn undecimated_matches_shifted_dft() {
        let w = synth_tones(&[ToneSpec::new(610.0, 1.0, 0.3), ToneSpec::new(905.0, 0.4, 2.0)], 0.05, 16_000.0, 0.0, 0)
            .unwrap();
        let z = zfft(&w, 640.0, 1, 800).unwrap();
        let d = dft(&w).unwrap();
        for j in 0..800 {
            let f = z.frequency(j);
            let k = ((f / d.f_step_hz).round() as i64).rem_euclid(800) as usize;
            assert!((z.bins[j].norm() - d.bins[k].norm()).abs() <= 1e-3);
        }
    }

    #[test]
    fn rejects_bad_configurations() {
        let w = Waveform::zeros(800, 16_000.0).unwrap();
        assert!(zfft(&w, 650.0, 0, 160).is_err());
        assert!(zfft(&w, 650.0, 20, 10).is_err());
        assert!(zfft(&w, 9000.0, 20, 160).is_err());
    }
}

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use super::Spectrum;
use crate::error::{Error, Result};
use crate::signals::Waveform;

/// `X_j = (1/N) sum_k s_k exp(+i 2 pi j k / N)` with bin `j` at `j / T`.
pub fn dft(w: &Waveform) -> Result<Spectrum> {
    if w.is_empty() {
        return Err(Error::input("dft of an empty waveform"));
    }
    let bins = dft_samples(w.samples());
    Ok(Spectrum { bins, f_start_hz: 0.0, f_step_hz: w.sample_rate_hz() / w.len() as f64, source_len: w.len() })
}

/// FFT for power-of-two lengths, direct sum otherwise.
pub fn dft_samples(s: &[f64]) -> Vec<Complex64> {
    if s.len().is_power_of_two() {
        dft_fft(s)
    } else {
        dft_direct(s)
    }
}

pub fn dft_direct(s: &[f64]) -> Vec<Complex64> {
    let n = s.len();
    let twiddle: Vec<Complex64> = (0..n).map(|m| Complex64::from_polar(1.0, 2.0 * PI * m as f64 / n as f64)).collect();
    let norm = 1.0 / n as f64;
    (0..n)
        .map(|j| {
            let mut acc = Complex64::new(0.0, 0.0);
            let mut idx = 0usize;
            for &x in s {
                acc += twiddle[idx] * x;
                idx += j;
                if idx >= n {
                    idx -= n;
                }
            }
            acc * norm
        })
        .collect()
}

pub fn dft_fft(s: &[f64]) -> Vec<Complex64> {
    let n = s.len();
    if n == 0 {
        return Vec::new();
    }
    let mut buf: Vec<Complex64> = s.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    // The inverse plan carries the +i kernel sign.
    FftPlanner::<f64>::new().plan_fft_inverse(n).process(&mut buf);
    let norm = 1.0 / n as f64;
    buf.iter_mut().for_each(|b| *b *= norm);
    buf
}

/// Inverse of [`dft`]: `s_k = sum_j X_j exp(-i 2 pi j k / N)`.
pub fn idft(s: &Spectrum) -> Result<Vec<Complex64>> {
    if s.is_empty() {
        return Err(Error::input("idft of an empty spectrum"));
    }
    let mut buf = s.bins.clone();
    FftPlanner::<f64>::new().plan_fft_forward(buf.len()).process(&mut buf);
    Ok(buf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::{synth_tones, ToneSpec};

    #[test]
    fn step_is_inverse_duration() {
        let w = Waveform::zeros(800, 16_000.0).unwrap();
        assert!((dft(&w).unwrap().f_step_hz - 20.0).abs() < 1e-12);
        assert!(dft(&Waveform::zeros(0, 16_000.0).unwrap()).is_err());
    }

    #[test]
    fn on_bin_tone_has_half_amplitude() {
        let w = synth_tones(&[ToneSpec::unit(640.0)], 0.05, 16_000.0, 0.0, 0).unwrap();
        let s = dft(&w).unwrap();
        let mag = s.magnitudes();
        assert!((mag[32] - 0.5).abs() < 1e-12);
        assert!((mag[800 - 32] - 0.5).abs() < 1e-12);
        for (j, m) in mag.iter().enumerate() {
            if j != 32 && j != 768 {
                assert!(*m < 1e-9, "bin {j}: {m}");
            }
        }
    }

    #[test]
    fn constant_is_dc() {
        let w = Waveform::new(vec![0.75; 64], 1000.0).unwrap();
        let s = dft(&w).unwrap();
        assert!((s.bins[0] - Complex64::new(0.75, 0.0)).norm() < 1e-14);
        assert!(s.bins[1..].iter().all(|b| b.norm() < 1e-14));
    }

    #[test]
    fn fft_and_direct_agree() {
        for n in [1usize, 2, 4, 16, 128, 256] {
            let s: Vec<f64> = (0..n).map(|k| ((k * 7919) % 101) as f64 / 50.0 - 1.0).collect();
            let a = dft_fft(&s);
            let b = dft_direct(&s);
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn round_trip() {
        let s: Vec<f64> = (0..100).map(|k| (k as f64 * 0.37).sin() + 0.1 * k as f64).collect();
        let w = Waveform::new(s.clone(), 100.0).unwrap();
        let back = idft(&dft(&w).unwrap()).unwrap();
        for (x, y) in back.iter().zip(&s) {
            assert!((x.re - y).abs() < 1e-9 && x.im.abs() < 1e-9);
        }
    }
}

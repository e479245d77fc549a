use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use super::Spectrum;
use crate::error::{Error, Result};
use crate::signals::Waveform;

/// Direct evaluation is used while `N * M` stays below this.
const DIRECT_WORK_LIMIT: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CztMethod {
    #[default]
    Auto,
    Direct,
    Bluestein,
}

/// Transform on the unit-circle arc from `f_i` to `f_f` with `M` points:
/// `X_j = sum_k s_k exp(+i 2 pi f_j k dt)`, `f_j = f_i + j (f_f - f_i) / (M - 1)`.
pub fn czt(w: &Waveform, f_i_hz: f64, f_f_hz: f64, m: usize) -> Result<Spectrum> {
    czt_with(w, f_i_hz, f_f_hz, m, CztMethod::Auto)
}

pub fn czt_with(w: &Waveform, f_i_hz: f64, f_f_hz: f64, m: usize, method: CztMethod) -> Result<Spectrum> {
    if !(f_i_hz.is_finite() && f_f_hz.is_finite() && f_i_hz < f_f_hz) {
        return Err(Error::spec(format!("czt band [{f_i_hz}, {f_f_hz}] Hz is empty")));
    }
    if m < 2 {
        return Err(Error::spec("czt needs at least 2 output points"));
    }
    if w.is_empty() {
        return Err(Error::input("czt of an empty waveform"));
    }
    let step = (f_f_hz - f_i_hz) / (m - 1) as f64;
    let dt = w.dt();
    let direct = match method {
        CztMethod::Auto => w.len() * m < DIRECT_WORK_LIMIT,
        CztMethod::Direct => true,
        CztMethod::Bluestein => false,
    };
    let bins = if direct {
        czt_direct(w.samples(), f_i_hz * dt, step * dt, m)
    } else {
        czt_bluestein(w.samples(), f_i_hz * dt, step * dt, m)
    };
    Ok(Spectrum { bins, f_start_hz: f_i_hz, f_step_hz: step, source_len: w.len() })
}

/// Frequencies are in cycles per sample.
pub fn czt_direct(s: &[f64], start_cps: f64, step_cps: f64, m: usize) -> Vec<Complex64> {
    (0..m)
        .map(|j| {
            let f = start_cps + j as f64 * step_cps;
            s.iter()
                .enumerate()
                .map(|(k, &x)| {
                    let cycles = (f * k as f64).rem_euclid(1.0);
                    Complex64::from_polar(x, 2.0 * PI * cycles)
                })
                .sum()
        })
        .collect()
}

pub fn czt_bluestein(s: &[f64], start_cps: f64, step_cps: f64, m: usize) -> Vec<Complex64> {
    let n = s.len();
    let l = (n + m - 1).next_power_of_two();
    let phi = 2.0 * PI * step_cps;
    let theta = 2.0 * PI * start_cps;
    let chirp = |q: usize| {
        let q = q as f64;
        Complex64::from_polar(1.0, -0.5 * phi * q * q)
    };

    let mut a = vec![Complex64::new(0.0, 0.0); l];
    for (k, &x) in s.iter().enumerate() {
        a[k] = Complex64::from_polar(x, theta * k as f64) * chirp(k).conj();
    }
    let mut b = vec![Complex64::new(0.0, 0.0); l];
    for q in 0..m {
        b[q] = chirp(q);
    }
    for q in 1..n {
        b[l - q] = chirp(q);
    }

    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(l);
    let inv = planner.plan_fft_inverse(l);
    fwd.process(&mut a);
    fwd.process(&mut b);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= y;
    }
    inv.process(&mut a);
    let norm = 1.0 / l as f64;
    (0..m).map(|j| a[j] * chirp(j).conj() * norm).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::{synth_tones, ToneSpec};

    #[test]
    fn grid_and_errors() {
        let w = Waveform::zeros(16, 16_000.0).unwrap();
        let s = czt(&w, 600.0, 695.0, 20).unwrap();
        assert!((s.f_step_hz - 5.0).abs() < 1e-12);
        assert!((s.f_end_hz() - 695.0).abs() < 1e-9);
        assert!(czt(&w, 700.0, 600.0, 20).is_err());
        assert!(czt(&w, 600.0, 700.0, 1).is_err());
    }

    #[test]
    fn tone_peaks_on_its_bin() {
        let w = synth_tones(&[ToneSpec::unit(640.0)], 0.05, 16_000.0, 0.0, 0).unwrap();
        let mag = czt(&w, 600.0, 695.0, 20).unwrap().magnitudes();
        let best = (0..20).max_by(|&a, &b| mag[a].total_cmp(&mag[b])).unwrap();
        assert_eq!(best, 8);
        assert!((mag[8] - 400.0).abs() < 1e-6);
    }

    #[test]
    fn bluestein_matches_direct() {
        let s: Vec<f64> = (0..300).map(|k| ((k * 31) % 17) as f64 - 8.0).collect();
        let a = czt_direct(&s, 0.01, 0.0007, 77);
        let b = czt_bluestein(&s, 0.01, 0.0007, 77);
        let scale = a.iter().fold(0.0f64, |m, v| m.max(v.norm()));
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).norm() <= 1e-8 * scale);
        }
    }
}

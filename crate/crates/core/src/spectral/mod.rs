//! Frequency-analysis baselines: DFT, zoom FFT, chirp Z-transform, MFCC and
//! peak extraction.

mod czt;
mod fourier;
mod mfcc;
mod peaks;
mod zoom;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use czt::{czt, czt_bluestein, czt_direct, czt_with, CztMethod};
pub use fourier::{dft, dft_direct, dft_fft, dft_samples, idft};
pub use mfcc::{mel_to_hz, hz_to_mel, mfcc, MelBank, MFCC_BAND_HZ, MFCC_LOG_FLOOR};
pub use peaks::{local_maxima, pick_peaks, significant_peaks, two_tone_estimate, Peak, PeakSet};
pub use zoom::{design_lowpass, zfft, ZFFT_FIR_TAPS};

/// Complex spectrum on a uniform grid: bin `j` sits at `f_start_hz + j * f_step_hz`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub bins: Vec<Complex64>,
    pub f_start_hz: f64,
    pub f_step_hz: f64,
    pub source_len: usize,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn frequency(&self, j: usize) -> f64 {
        self.f_start_hz + j as f64 * self.f_step_hz
    }

    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.len()).map(|j| self.frequency(j)).collect()
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.bins.iter().map(|b| b.norm()).collect()
    }

    pub fn f_end_hz(&self) -> f64 {
        self.frequency(self.len().saturating_sub(1))
    }

    /// Indices whose frequency lies in `[lo, hi]`.
    pub fn band_indices(&self, lo_hz: f64, hi_hz: f64) -> std::ops::Range<usize> {
        let tol = 1e-9 * self.f_step_hz;
        let start = (0..self.len()).find(|&j| self.frequency(j) >= lo_hz - tol).unwrap_or(self.len());
        let end = (0..self.len()).rev().find(|&j| self.frequency(j) <= hi_hz + tol).map_or(0, |j| j + 1);
        start..end.max(start)
    }

    /// Copy restricted to bins inside `[lo, hi]`.
    pub fn band(&self, lo_hz: f64, hi_hz: f64) -> Spectrum {
        let r = self.band_indices(lo_hz, hi_hz);
        Spectrum {
            f_start_hz: self.frequency(r.start),
            bins: self.bins[r].to_vec(),
            f_step_hz: self.f_step_hz,
            source_len: self.source_len,
        }
    }

    /// Linear interpolation of |bins| at arbitrary frequencies; zero outside the grid.
    pub fn magnitude_at(&self, freqs_hz: &[f64]) -> Vec<f64> {
        let mag = self.magnitudes();
        freqs_hz
            .iter()
            .map(|&f| {
                let x = (f - self.f_start_hz) / self.f_step_hz;
                if x < 0.0 || x > (mag.len() - 1) as f64 {
                    return 0.0;
                }
                let i = x.floor() as usize;
                if i + 1 >= mag.len() {
                    return mag[mag.len() - 1];
                }
                let u = x - i as f64;
                mag[i] * (1.0 - u) + mag[i + 1] * u
            })
            .collect()
    }
}

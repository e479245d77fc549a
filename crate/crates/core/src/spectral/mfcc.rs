use std::f64::consts::PI;

use super::fourier::dft_samples;
use crate::error::{Error, Result};
use crate::signals::Waveform;

pub const MFCC_BAND_HZ: (f64, f64) = (200.0, 3000.0);
pub const MFCC_LOG_FLOOR: f64 = 1e-12;

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular filters with edges equally spaced in mel over a band.
#[derive(Debug, Clone, PartialEq)]
pub struct MelBank {
    edges_hz: Vec<f64>,
}

impl MelBank {
    pub fn new(n_mels: usize, lo_hz: f64, hi_hz: f64) -> Result<Self> {
        if n_mels == 0 {
            return Err(Error::spec("need at least one mel filter"));
        }
        if !(lo_hz >= 0.0 && hi_hz > lo_hz) {
            return Err(Error::spec("mel band must be increasing"));
        }
        let (a, b) = (hz_to_mel(lo_hz), hz_to_mel(hi_hz));
        let edges_hz = (0..n_mels + 2).map(|i| mel_to_hz(a + (b - a) * i as f64 / (n_mels + 1) as f64)).collect();
        Ok(Self { edges_hz })
    }

    pub fn len(&self) -> usize {
        self.edges_hz.len() - 2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn weight(&self, filter: usize, f_hz: f64) -> f64 {
        let (lo, c, hi) = (self.edges_hz[filter], self.edges_hz[filter + 1], self.edges_hz[filter + 2]);
        ((f_hz - lo) / (c - lo)).min((hi - f_hz) / (hi - c)).max(0.0)
    }

    /// Filter energies of a one-sided power spectrum with bin step `df`.
    pub fn energies(&self, power: &[f64], df: f64) -> Vec<f64> {
        (0..self.len())
            .map(|m| power.iter().enumerate().map(|(k, p)| self.weight(m, k as f64 * df) * p).sum())
            .collect()
    }
}

/// Single-frame cepstrum: power spectrum, mel energies, log, DCT-II.
pub fn mfcc(w: &Waveform, n_mels: usize, n_coeffs: usize) -> Result<Vec<f64>> {
    if w.len() < 2 {
        return Err(Error::input("mfcc needs at least 2 samples"));
    }
    if n_coeffs == 0 || n_coeffs > n_mels {
        return Err(Error::spec(format!("n_coeffs {n_coeffs} must lie in 1..={n_mels}")));
    }
    let bank = MelBank::new(n_mels, MFCC_BAND_HZ.0, MFCC_BAND_HZ.1)?;
    let n = w.len();
    let spectrum = dft_samples(w.samples());
    let power: Vec<f64> = spectrum[..=n / 2].iter().map(|b| b.norm_sqr()).collect();
    let log_e: Vec<f64> =
        bank.energies(&power, w.sample_rate_hz() / n as f64).into_iter().map(|e| (e + MFCC_LOG_FLOOR).ln()).collect();
    let m = log_e.len() as f64;
    Ok((0..n_coeffs)
        .map(|q| log_e.iter().enumerate().map(|(i, v)| v * (PI * q as f64 * (i as f64 + 0.5) / m).cos()).sum())
        .collect())
}

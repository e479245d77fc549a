//! Tonotopic membrane simulated as a bank of independent damped harmonic
//! oscillators. Each channel's displacement is the force convolved with the
//! oscillator's Green function, so the channel index carries a place code.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::signals::Waveform;

/// Kernels at or above this many taps are applied with overlap-add FFT convolution.
pub const FFT_CONVOLUTION_TAPS: usize = 4096;

/// Kernel horizon in units of the memory time 2/gamma.
pub const KERNEL_HORIZON_MEMORY_TIMES: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscillatorParams {
    pub omega0_rad_s: f64,
    pub gamma_per_s: f64,
    pub mass: f64,
    pub gain: f64,
}

impl OscillatorParams {
    pub fn new(omega0_rad_s: f64, gamma_per_s: f64, mass: f64, gain: f64) -> Result<Self> {
        let p = Self { omega0_rad_s, gamma_per_s, mass, gain };
        p.validate()?;
        Ok(p)
    }

    pub fn from_frequency(f0_hz: f64, gamma_per_s: f64) -> Result<Self> {
        Self::new(2.0 * PI * f0_hz, gamma_per_s, 1.0, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        let finite_pos = |x: f64| x.is_finite() && x > 0.0;
        if !finite_pos(self.omega0_rad_s) || !finite_pos(self.gamma_per_s) || !finite_pos(self.mass) {
            return Err(Error::spec("omega0, gamma and mass must be positive"));
        }
        if !self.gain.is_finite() {
            return Err(Error::spec("gain must be finite"));
        }
        let four_omega_sq = 4.0 * self.omega0_rad_s * self.omega0_rad_s;
        let gamma_sq = self.gamma_per_s * self.gamma_per_s;
        if four_omega_sq <= gamma_sq {
            return Err(Error::Overdamped { four_omega_sq, gamma_sq });
        }
        Ok(())
    }

    pub fn resonance_hz(&self) -> f64 {
        self.omega0_rad_s / (2.0 * PI)
    }

    /// Damped angular frequency sqrt(omega0^2 - gamma^2/4).
    pub fn omega_d(&self) -> f64 {
        (self.omega0_rad_s * self.omega0_rad_s - 0.25 * self.gamma_per_s * self.gamma_per_s).sqrt()
    }

    /// Memory time 2/gamma in seconds.
    pub fn memory_time_s(&self) -> f64 {
        2.0 / self.gamma_per_s
    }

    pub fn kernel_len(&self, dt_s: f64) -> usize {
        (KERNEL_HORIZON_MEMORY_TIMES * self.memory_time_s() / dt_s).ceil() as usize + 1
    }
}

fn check_kernel_args(p: &OscillatorParams, dt_s: f64, length: usize) -> Result<()> {
    p.validate()?;
    if !(dt_s.is_finite() && dt_s > 0.0) {
        return Err(Error::spec("dt must be positive"));
    }
    if length == 0 {
        return Err(Error::spec("kernel length must be at least 1"));
    }
    Ok(())
}

/// `G[k] = exp(-gamma k dt / 2) cos(sqrt(4 w0^2 - gamma^2) k dt) / (pi sqrt(4 w0^2 - gamma^2))`,
/// exactly as the closed form is usually printed for this membrane model.
pub fn green_kernel(p: &OscillatorParams, dt_s: f64, length: usize) -> Result<Vec<f64>> {
    check_kernel_args(p, dt_s, length)?;
    let root = (4.0 * p.omega0_rad_s * p.omega0_rad_s - p.gamma_per_s * p.gamma_per_s).sqrt();
    Ok((0..length)
        .map(|k| {
            let t = k as f64 * dt_s;
            (-0.5 * p.gamma_per_s * t).exp() * (root * t).cos() / (PI * root)
        })
        .collect())
}

/// Textbook underdamped impulse response `exp(-gamma t / 2) sin(w_d t) / (m w_d)`.
pub fn green_kernel_physical(p: &OscillatorParams, dt_s: f64, length: usize) -> Result<Vec<f64>> {
    check_kernel_args(p, dt_s, length)?;
    let wd = p.omega_d();
    Ok((0..length)
        .map(|k| {
            let t = k as f64 * dt_s;
            (-0.5 * p.gamma_per_s * t).exp() * (wd * t).sin() / (p.mass * wd)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelForm {
    #[default]
    Physical,
    Verbatim,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvolutionMethod {
    #[default]
    Auto,
    Direct,
    Fft,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    #[default]
    Log,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembraneModel {
    pub channels: Vec<OscillatorParams>,
    pub positions_m: Vec<f64>,
    #[serde(default)]
    pub spread_sigma_channels: f64,
    #[serde(default)]
    pub kernel: KernelForm,
}

impl MembraneModel {
    pub fn new(channels: Vec<OscillatorParams>, positions_m: Vec<f64>, spread_sigma_channels: f64) -> Result<Self> {
        let m = Self { channels, positions_m, spread_sigma_channels, kernel: KernelForm::Physical };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels.is_empty() {
            return Err(Error::spec("membrane needs at least one channel"));
        }
        if self.positions_m.len() != self.channels.len() {
            return Err(Error::spec("one position per channel required"));
        }
        for c in &self.channels {
            c.validate()?;
        }
        if self.channels.windows(2).any(|p| p[1].omega0_rad_s <= p[0].omega0_rad_s) {
            return Err(Error::spec("channel resonances must increase strictly from apex to base"));
        }
        if !(self.spread_sigma_channels.is_finite() && self.spread_sigma_channels >= 0.0) {
            return Err(Error::spec("spread sigma must be non-negative"));
        }
        Ok(())
    }

    pub fn with_kernel(mut self, kernel: KernelForm) -> Self {
        self.kernel = kernel;
        self
    }

    pub fn with_spread(mut self, sigma_channels: f64) -> Result<Self> {
        self.spread_sigma_channels = sigma_channels;
        self.validate()?;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    pub fn channel_freqs_hz(&self) -> Vec<f64> {
        self.channels.iter().map(OscillatorParams::resonance_hz).collect()
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let m: Self = serde_json::from_slice(&std::fs::read(path)?)?;
        m.validate()?;
        Ok(m)
    }
}

/// Channels with resonances spaced over `[f_low, f_high]`, uniform
/// `gamma = 2 / q_time_s`, unit mass and gain, no spread.
pub fn default_model(n_channels: usize, f_low_hz: f64, f_high_hz: f64, q_time_s: f64) -> Result<MembraneModel> {
    model_with_spacing(n_channels, f_low_hz, f_high_hz, q_time_s, Spacing::Log)
}

pub fn model_with_spacing(
    n_channels: usize,
    f_low_hz: f64,
    f_high_hz: f64,
    q_time_s: f64,
    spacing: Spacing,
) -> Result<MembraneModel> {
    if n_channels == 0 {
        return Err(Error::spec("need at least one channel"));
    }
    if !(f_low_hz.is_finite() && f_high_hz.is_finite() && f_low_hz > 0.0 && f_high_hz > f_low_hz) {
        return Err(Error::spec(format!("degenerate band [{f_low_hz}, {f_high_hz}] Hz")));
    }
    if !(q_time_s.is_finite() && q_time_s > 0.0) {
        return Err(Error::spec("q_time must be positive"));
    }
    let gamma = 2.0 / q_time_s;
    let freqs: Vec<f64> = if n_channels == 1 {
        vec![f_low_hz]
    } else {
        let last = (n_channels - 1) as f64;
        (0..n_channels)
            .map(|i| {
                let u = i as f64 / last;
                match spacing {
                    Spacing::Log => f_low_hz * (f_high_hz / f_low_hz).powf(u),
                    Spacing::Linear => f_low_hz + u * (f_high_hz - f_low_hz),
                }
            })
            .collect()
    };
    let channels = freqs.iter().map(|&f| OscillatorParams::from_frequency(f, gamma)).collect::<Result<Vec<_>>>()?;
    // Positions along a 2 cm strip, apex at 0.
    let positions = (0..n_channels)
        .map(|i| if n_channels == 1 { 0.0 } else { 0.02 * i as f64 / (n_channels - 1) as f64 })
        .collect();
    MembraneModel::new(channels, positions, 0.0)
}

/// Channels x frames displacement image, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisplacementPattern {
    values: Vec<f64>,
    channel_count: usize,
    frame_count: usize,
    frame_rate_hz: f64,
    channel_freqs_hz: Vec<f64>,
}

impl DisplacementPattern {
    pub fn new(values: Vec<f64>, channel_count: usize, frame_count: usize, frame_rate_hz: f64, channel_freqs_hz: Vec<f64>) -> Result<Self> {
        if values.len() != channel_count * frame_count {
            return Err(Error::shape(format!(
                "{} values for {channel_count} x {frame_count} pattern",
                values.len()
            )));
        }
        if channel_freqs_hz.len() != channel_count {
            return Err(Error::shape("one frequency per channel required"));
        }
        if !(frame_rate_hz.is_finite() && frame_rate_hz > 0.0) {
            return Err(Error::spec("frame rate must be positive"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("non-finite displacement"));
        }
        Ok(Self { values, channel_count, frame_count, frame_rate_hz, channel_freqs_hz })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn channel_count(&self) -> usize {
        self.channel_count
    }

    pub fn frame_count(&self) -> usize {
        self.frame_count
    }

    pub fn frame_rate_hz(&self) -> f64 {
        self.frame_rate_hz
    }

    pub fn channel_freqs_hz(&self) -> &[f64] {
        &self.channel_freqs_hz
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        &self.values[c * self.frame_count..(c + 1) * self.frame_count]
    }

    pub fn get(&self, channel: usize, frame: usize) -> f64 {
        self.values[channel * self.frame_count + frame]
    }

    /// Frames `[start, start + len)` of every channel.
    pub fn slice_frames(&self, start: usize, len: usize) -> Result<Self> {
        if len == 0 || start + len > self.frame_count {
            return Err(Error::Range(format!("frames [{start}, {}) outside {}", start + len, self.frame_count)));
        }
        let values = (0..self.channel_count).flat_map(|c| self.channel(c)[start..start + len].iter().copied()).collect();
        Ok(Self { values, frame_count: len, channel_freqs_hz: self.channel_freqs_hz.clone(), ..*self })
    }

    /// Per-channel RMS over frames `[start, end)`.
    pub fn channel_rms(&self, start: usize) -> Vec<f64> {
        (0..self.channel_count)
            .map(|c| {
                let xs = &self.channel(c)[start.min(self.frame_count)..];
                if xs.is_empty() {
                    0.0
                } else {
                    (xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64).sqrt()
                }
            })
            .collect()
    }

    fn sidecar_path(path: &Path) -> PathBuf {
        let mut s = path.as_os_str().to_owned();
        s.push(".json");
        PathBuf::from(s)
    }

    /// Writes `path` (LE f64, row-major) and `path.json` (header).
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        for v in &self.values {
            out.write_all(&v.to_le_bytes())?;
        }
        out.flush()?;
        std::fs::write(Self::sidecar_path(path), serde_json::to_vec_pretty(&self.header())?)?;
        Ok(())
    }

    pub fn header(&self) -> PatternHeader {
        PatternHeader {
            channels: self.channel_count,
            frames: self.frame_count,
            frame_rate_hz: self.frame_rate_hz,
            channel_freqs_hz: self.channel_freqs_hz.clone(),
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let header: PatternHeader = serde_json::from_slice(&std::fs::read(Self::sidecar_path(path))?)?;
        let mut bytes = Vec::new();
        BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
        if bytes.len() != 8 * header.channels * header.frames {
            return Err(Error::Corrupt(format!(
                "pattern body has {} bytes, header implies {}",
                bytes.len(),
                8 * header.channels * header.frames
            )));
        }
        let values = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        Self::new(values, header.channels, header.frames, header.frame_rate_hz, header.channel_freqs_hz)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternHeader {
    pub channels: usize,
    pub frames: usize,
    pub frame_rate_hz: f64,
    pub channel_freqs_hz: Vec<f64>,
}

fn channel_kernel(model: &MembraneModel, p: &OscillatorParams, dt: f64) -> Result<Vec<f64>> {
    let len = p.kernel_len(dt);
    let mut k = match model.kernel {
        KernelForm::Physical => green_kernel_physical(p, dt, len)?,
        KernelForm::Verbatim => {
            let mut g = green_kernel(p, dt, len)?;
            g.iter_mut().for_each(|v| *v /= p.mass);
            g
        }
    };
    let scale = dt * p.gain;
    k.iter_mut().for_each(|v| *v *= scale);
    Ok(k)
}

/// Causal convolution truncated to the input length.
pub fn convolve_causal(signal: &[f64], kernel: &[f64], method: ConvolutionMethod) -> Vec<f64> {
    let use_fft = match method {
        ConvolutionMethod::Auto => kernel.len() >= FFT_CONVOLUTION_TAPS,
        ConvolutionMethod::Direct => false,
        ConvolutionMethod::Fft => true,
    };
    if use_fft {
        overlap_add(signal, kernel)
    } else {
        direct_convolution(signal, kernel)
    }
}

fn direct_convolution(signal: &[f64], kernel: &[f64]) -> Vec<f64> {
    let n = signal.len();
    let mut out = vec![0.0; n];
    for (j, &k) in kernel.iter().enumerate().take(n) {
        for (o, &x) in out[j..].iter_mut().zip(&signal[..n - j]) {
            *o += k * x;
        }
    }
    out
}

fn overlap_add(signal: &[f64], kernel: &[f64]) -> Vec<f64> {
    let n = signal.len();
    if n == 0 || kernel.is_empty() {
        return vec![0.0; n];
    }
    let block = kernel.len().next_power_of_two();
    let size = 2 * block;
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);

    let mut kspec: Vec<Complex64> = kernel.iter().map(|&k| Complex64::new(k, 0.0)).collect();
    kspec.resize(size, Complex64::new(0.0, 0.0));
    fwd.process(&mut kspec);

    let mut out = vec![0.0; n];
    let mut buf = vec![Complex64::new(0.0, 0.0); size];
    let mut start = 0;
    while start < n {
        let end = (start + block).min(n);
        buf.iter_mut().for_each(|b| *b = Complex64::new(0.0, 0.0));
        for (b, &s) in buf.iter_mut().zip(&signal[start..end]) {
            b.re = s;
        }
        fwd.process(&mut buf);
        for (b, k) in buf.iter_mut().zip(&kspec) {
            *b *= k;
        }
        inv.process(&mut buf);
        let norm = 1.0 / size as f64;
        for (i, b) in buf.iter().enumerate() {
            let idx = start + i;
            if idx >= n {
                break;
            }
            out[idx] += b.re * norm;
        }
        start = end;
    }
    out
}

/// Gaussian blur across the channel axis, renormalized at the edges.
fn spread_channels(values: &mut [f64], channels: usize, frames: usize, sigma: f64) {
    if sigma <= 0.0 || channels < 2 {
        return;
    }
    let weights: Vec<Vec<f64>> = (0..channels)
        .map(|c| {
            let w: Vec<f64> = (0..channels)
                .map(|d| {
                    let x = (c as f64 - d as f64) / sigma;
                    (-0.5 * x * x).exp()
                })
                .collect();
            let s: f64 = w.iter().sum();
            w.into_iter().map(|v| v / s).collect()
        })
        .collect();
    let src = values.to_vec();
    for (c, row) in weights.iter().enumerate() {
        for t in 0..frames {
            values[c * frames + t] = row.iter().enumerate().map(|(d, w)| w * src[d * frames + t]).sum();
        }
    }
}

/// Displacement of every channel driven by the waveform treated as force.
pub fn respond(model: &MembraneModel, w: &Waveform) -> Result<DisplacementPattern> {
    respond_with(model, w, ConvolutionMethod::Auto)
}

pub fn respond_with(model: &MembraneModel, w: &Waveform, method: ConvolutionMethod) -> Result<DisplacementPattern> {
    model.validate()?;
    if w.is_empty() {
        return Err(Error::input("cannot drive the membrane with an empty waveform"));
    }
    let dt = w.dt();
    let rows: Vec<Vec<f64>> = model
        .channels
        .par_iter()
        .map(|p| channel_kernel(model, p, dt).map(|k| convolve_causal(w.samples(), &k, method)))
        .collect::<Result<_>>()?;
    let frames = w.len();
    let mut values: Vec<f64> = rows.into_iter().flatten().collect();
    spread_channels(&mut values, model.len(), frames, model.spread_sigma_channels);
    DisplacementPattern::new(values, model.len(), frames, w.sample_rate_hz(), model.channel_freqs_hz())
}

/// RK4 integration of `m x'' + m gamma x' + m w0^2 x = F(t)` from rest, one
/// step per sample. Mid-step forces use 4-point interpolation.
pub fn ode_oracle(p: &OscillatorParams, w: &Waveform) -> Result<Vec<f64>> {
    p.validate()?;
    if w.is_empty() {
        return Err(Error::input("empty waveform"));
    }
    let f = w.samples();
    let n = f.len();
    let dt = w.dt();
    let force_mid = |k: usize| -> f64 {
        if k + 1 >= n {
            return f[k];
        }
        if k >= 1 && k + 2 < n {
            (-f[k - 1] + 9.0 * f[k] + 9.0 * f[k + 1] - f[k + 2]) / 16.0
        } else {
            0.5 * (f[k] + f[k + 1])
        }
    };
    let force_at = |k: usize| -> f64 { f[k.min(n - 1)] };
    let (g, w2, m) = (p.gamma_per_s, p.omega0_rad_s * p.omega0_rad_s, p.mass);
    let accel = |x: f64, v: f64, force: f64| force / m - g * v - w2 * x;

    let mut out = Vec::with_capacity(n);
    let (mut x, mut v) = (0.0f64, 0.0f64);
    for k in 0..n {
        out.push(x);
        let (f0, fm, f1) = (force_at(k), force_mid(k), force_at(k + 1));
        let k1x = v;
        let k1v = accel(x, v, f0);
        let k2x = v + 0.5 * dt * k1v;
        let k2v = accel(x + 0.5 * dt * k1x, v + 0.5 * dt * k1v, fm);
        let k3x = v + 0.5 * dt * k2v;
        let k3v = accel(x + 0.5 * dt * k2x, v + 0.5 * dt * k2v, fm);
        let k4x = v + dt * k3v;
        let k4v = accel(x + dt * k3x, v + dt * k3v, f1);
        x += dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
        v += dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureMode {
    #[default]
    Rms,
    MeanAbs,
    RawDecimate,
}

impl std::str::FromStr for FeatureMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rms" => Ok(FeatureMode::Rms),
            "mean-abs" => Ok(FeatureMode::MeanAbs),
            "raw-decimate" => Ok(FeatureMode::RawDecimate),
            other => Err(Error::spec(format!("unknown feature mode '{other}'"))),
        }
    }
}

/// Reduce non-overlapping frames of `frame_ms` to one statistic each; a
/// trailing partial frame is dropped.
pub fn features(pat: &DisplacementPattern, frame_ms: f64, mode: FeatureMode) -> Result<DisplacementPattern> {
    if !(frame_ms.is_finite() && frame_ms > 0.0) {
        return Err(Error::spec("frame length must be positive"));
    }
    let spf = (frame_ms * 1e-3 * pat.frame_rate_hz).round() as usize;
    if spf < 2 {
        return Err(Error::spec(format!("frame of {frame_ms} ms holds {spf} samples; need at least 2")));
    }
    features_by_samples(pat, spf, mode)
}

/// As [`features`], with the frame given in samples.
pub fn features_by_samples(pat: &DisplacementPattern, spf: usize, mode: FeatureMode) -> Result<DisplacementPattern> {
    if spf < 2 {
        return Err(Error::spec(format!("frames of {spf} samples; need at least 2")));
    }
    if spf > pat.frame_count {
        return Err(Error::input(format!("frame of {spf} samples longer than pattern of {}", pat.frame_count)));
    }
    let out_frames = pat.frame_count / spf;
    let mut values = Vec::with_capacity(pat.channel_count * out_frames);
    for c in 0..pat.channel_count {
        for chunk in pat.channel(c).chunks_exact(spf) {
            let v = match mode {
                FeatureMode::Rms => (chunk.iter().map(|x| x * x).sum::<f64>() / spf as f64).sqrt(),
                FeatureMode::MeanAbs => chunk.iter().map(|x| x.abs()).sum::<f64>() / spf as f64,
                FeatureMode::RawDecimate => chunk[0],
            };
            values.push(v);
        }
    }
    DisplacementPattern::new(values, pat.channel_count, out_frames, pat.frame_rate_hz / spf as f64, pat.channel_freqs_hz.clone())
}

/// Independent Gaussian read-out noise per channel, with standard deviation
/// `10^(level_db/20)` times that channel's RMS.
pub fn add_sensor_noise(pat: &mut DisplacementPattern, level_db: f64, seed: u64) {
    if !level_db.is_finite() {
        return;
    }
    let rel = 10f64.powf(level_db / 20.0);
    let rms = pat.channel_rms(0);
    let frames = pat.frame_count;
    for (c, r) in rms.iter().enumerate() {
        let sigma = rel * r;
        if sigma <= 0.0 {
            continue;
        }
        let normal = Normal::new(0.0, sigma).expect("finite sigma");
        let mut g = rng::rng_for(seed, &[0x73656e73, c as u64]);
        for v in &mut pat.values[c * frames..(c + 1) * frames] {
            *v += normal.sample(&mut g);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::{synth_tones, ToneSpec};

    const FS: f64 = 16_000.0;

    #[test]
    fn green_kernel_origin_and_envelope() {
        let p = OscillatorParams::from_frequency(640.0, 2000.0).unwrap();
        let g = green_kernel(&p, 1.0 / FS, 400).unwrap();
        let root = (4.0 * p.omega0_rad_s.powi(2) - 4.0e6f64).sqrt();
        assert!((g[0] - 1.0 / (PI * root)).abs() < 1e-18);
        for (k, v) in g.iter().enumerate() {
            let env = (-1000.0 * k as f64 / FS).exp() / (PI * root);
            assert!(v.abs() <= env * (1.0 + 1e-12));
        }
        // 1/e decay of the envelope at 2/gamma = 1 ms, i.e. sample 16.
        let env16 = (-0.5 * p.gamma_per_s * 16.0 / FS).exp();
        assert!((env16 - (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn overdamped_rejected() {
        let err = OscillatorParams::new(500.0, 1000.0, 1.0, 1.0).unwrap_err();
        assert!(matches!(err, Error::Overdamped { .. }));
        assert!(default_model(12, 100.0, 1300.0, 1e-3).is_err());
        assert!(default_model(12, 100.0, 1300.0, 4e-3).is_ok());
    }

    #[test]
    fn default_model_layouts() {
        let m = default_model(6, 600.0, 695.0, 1e-3).unwrap();
        let f = m.channel_freqs_hz();
        assert!((f[0] - 600.0).abs() < 1e-9 && (f[5] - 695.0).abs() < 1e-9);
        let ratio = f[1] / f[0];
        for w in f.windows(2) {
            assert!((w[1] / w[0] - ratio).abs() < 1e-12);
        }
        assert!(m.channels.iter().all(|c| (c.gamma_per_s - 2000.0).abs() < 1e-9));
        let one = default_model(1, 600.0, 695.0, 1e-3).unwrap();
        assert_eq!(one.channel_freqs_hz(), vec![600.0]);
        assert!(default_model(3, 700.0, 600.0, 1e-3).is_err());
        assert!(default_model(0, 600.0, 700.0, 1e-3).is_err());
        let lin = model_with_spacing(3, 100.0, 300.0, 1e-2, Spacing::Linear).unwrap();
        assert!((lin.channel_freqs_hz()[1] - 200.0).abs() < 1e-9);
    }

    #[test]
    fn zero_input_gives_zero_pattern() {
        let m = default_model(6, 600.0, 695.0, 1e-3).unwrap();
        let w = Waveform::zeros(400, FS).unwrap();
        let pat = respond(&m, &w).unwrap();
        assert!(pat.values().iter().all(|&v| v == 0.0));
        assert!(respond(&m, &Waveform::zeros(0, FS).unwrap()).is_err());
    }

    #[test]
    fn fft_and_direct_convolution_agree() {
        let w = synth_tones(&[ToneSpec::unit(200.0), ToneSpec::new(330.0, 0.5, 1.0)], 0.6, FS, 0.0, 0).unwrap();
        // gamma = 40 /s gives a 8000-tap kernel.
        let p = OscillatorParams::from_frequency(210.0, 40.0).unwrap();
        let m = MembraneModel::new(vec![p], vec![0.0], 0.0).unwrap();
        let a = respond_with(&m, &w, ConvolutionMethod::Direct).unwrap();
        let b = respond_with(&m, &w, ConvolutionMethod::Fft).unwrap();
        let scale = a.values().iter().fold(0.0f64, |s, v| s.max(v.abs()));
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() <= 1e-9 * scale, "{x} vs {y}");
        }
    }

    #[test]
    fn features_shapes_and_statistics() {
        let c = -0.25;
        let pat = DisplacementPattern::new(vec![c; 6 * 800], 6, 800, FS, vec![1.0; 6]).unwrap();
        let f = features(&pat, 5.0, FeatureMode::Rms).unwrap();
        assert_eq!((f.channel_count(), f.frame_count()), (6, 10));
        assert_eq!(f.frame_rate_hz(), 200.0);
        assert!(f.values().iter().all(|v| (v - c.abs()).abs() < 1e-15));
        let ma = features(&pat, 1.0, FeatureMode::MeanAbs).unwrap();
        assert!(ma.values().iter().all(|v| (v - 0.25).abs() < 1e-15));
        assert!(features(&pat, 0.0625, FeatureMode::Rms).is_err());
        assert!(features(&pat, 60.0, FeatureMode::Rms).is_err());

        let w = synth_tones(&[ToneSpec::unit(500.0)], 0.05, FS, 0.0, 0).unwrap();
        let sine = DisplacementPattern::new(w.samples().to_vec(), 1, 800, FS, vec![500.0]).unwrap();
        let r = features(&sine, 2.0, FeatureMode::Rms).unwrap();
        for v in r.values() {
            assert!((v - 0.5f64.sqrt()).abs() < 0.02 * 0.5f64.sqrt());
        }
        let d = features(&sine, 1.0, FeatureMode::RawDecimate).unwrap();
        assert_eq!(d.get(0, 3), w.samples()[48]);
    }

    #[test]
    fn spread_preserves_constant_rows() {
        let mut v = vec![1.0; 4 * 3];
        spread_channels(&mut v, 4, 3, 1.5);
        assert!(v.iter().all(|x| (x - 1.0).abs() < 1e-12));
    }

    #[test]
    fn pattern_file_round_trip_and_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pat.f64");
        let pat = DisplacementPattern::new((0..12).map(|i| i as f64 * 0.5).collect(), 3, 4, 1000.0, vec![1.0, 2.0, 3.0])
            .unwrap();
        pat.write(&path).unwrap();
        assert_eq!(DisplacementPattern::read(&path).unwrap(), pat);
        std::fs::write(&path, [0u8; 20]).unwrap();
        assert!(matches!(DisplacementPattern::read(&path), Err(Error::Corrupt(_))));
    }

    #[test]
    fn sensor_noise_is_seeded_and_scaled() {
        let w = synth_tones(&[ToneSpec::unit(640.0)], 0.05, FS, 0.0, 0).unwrap();
        let m = default_model(2, 600.0, 700.0, 1e-3).unwrap();
        let clean = respond(&m, &w).unwrap();
        let mut a = clean.clone();
        let mut b = clean.clone();
        add_sensor_noise(&mut a, -20.0, 5);
        add_sensor_noise(&mut b, -20.0, 5);
        assert_eq!(a, b);
        let noise_rms = (a.values().iter().zip(clean.values()).map(|(x, y)| (x - y).powi(2)).sum::<f64>()
            / a.values().len() as f64)
            .sqrt();
        let sig_rms = clean.channel_rms(0).iter().map(|r| r * r).sum::<f64>().sqrt() / 2f64.sqrt();
        assert!((noise_rms / sig_rms - 0.1).abs() < 0.02);
    }
}

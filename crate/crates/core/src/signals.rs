//! Stimulus synthesis: pure tones, tone mixtures, synthetic formant vowels,
//! rectangular windowing, and waveform file I/O.

use std::f64::consts::PI;
use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 16_000.0;

/// Uniformly sampled real signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate_hz: f64,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate_hz: f64) -> Result<Self> {
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::spec(format!("sample rate must be positive, got {sample_rate_hz}")));
        }
        if let Some(k) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::input(format!("non-finite sample at index {k}")));
        }
        Ok(Self { samples, sample_rate_hz })
    }

    pub fn zeros(len: usize, sample_rate_hz: f64) -> Result<Self> {
        Self::new(vec![0.0; len], sample_rate_hz)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }

    pub fn nyquist_hz(&self) -> f64 {
        0.5 * self.sample_rate_hz
    }

    pub fn rms(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        (self.samples.iter().map(|s| s * s).sum::<f64>() / self.samples.len() as f64).sqrt()
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, s| m.max(s.abs()))
    }

    pub fn scaled(&self, gain: f64) -> Self {
        Self { samples: self.samples.iter().map(|s| s * gain).collect(), sample_rate_hz: self.sample_rate_hz }
    }

    /// Sample-wise sum; both waveforms must share rate and length.
    pub fn add(&self, other: &Waveform) -> Result<Self> {
        if self.sample_rate_hz != other.sample_rate_hz || self.len() != other.len() {
            return Err(Error::shape("waveforms differ in rate or length"));
        }
        let samples = self.samples.iter().zip(&other.samples).map(|(a, b)| a + b).collect();
        Ok(Self { samples, sample_rate_hz: self.sample_rate_hz })
    }
}

/// One sinusoidal component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToneSpec {
    pub frequency_hz: f64,
    pub amplitude: f64,
    #[serde(default)]
    pub phase_rad: f64,
}

impl ToneSpec {
    pub fn new(frequency_hz: f64, amplitude: f64, phase_rad: f64) -> Self {
        Self { frequency_hz, amplitude, phase_rad }
    }

    pub fn unit(frequency_hz: f64) -> Self {
        Self::new(frequency_hz, 1.0, 0.0)
    }

    fn validate(&self, sample_rate_hz: f64) -> Result<()> {
        let nyq = 0.5 * sample_rate_hz;
        if !(self.frequency_hz > 0.0 && self.frequency_hz < nyq) {
            return Err(Error::spec(format!(
                "tone frequency {} Hz must lie in (0, {nyq}) Hz",
                self.frequency_hz
            )));
        }
        if !(self.amplitude.is_finite() && self.amplitude > 0.0) {
            return Err(Error::spec(format!("tone amplitude must be positive, got {}", self.amplitude)));
        }
        if !self.phase_rad.is_finite() {
            return Err(Error::spec("tone phase must be finite"));
        }
        Ok(())
    }
}

fn sample_count(duration_s: f64, sample_rate_hz: f64) -> Result<usize> {
    if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
        return Err(Error::spec(format!("sample rate must be positive, got {sample_rate_hz}")));
    }
    if !(duration_s.is_finite() && duration_s > 0.0) {
        return Err(Error::spec(format!("duration must be positive, got {duration_s}")));
    }
    Ok((duration_s * sample_rate_hz).round() as usize)
}

/// Sum of sinusoids plus seeded white Gaussian noise of standard deviation `noise_rms`.
pub fn synth_tones(
    specs: &[ToneSpec],
    duration_s: f64,
    sample_rate_hz: f64,
    noise_rms: f64,
    seed: u64,
) -> Result<Waveform> {
    let n = sample_count(duration_s, sample_rate_hz)?;
    if n < 2 {
        return Err(Error::spec(format!("duration {duration_s} s yields {n} samples; need at least 2")));
    }
    for s in specs {
        s.validate(sample_rate_hz)?;
    }
    if !(noise_rms.is_finite() && noise_rms >= 0.0) {
        return Err(Error::spec(format!("noise rms must be non-negative, got {noise_rms}")));
    }
    let mut samples = vec![0.0; n];
    for spec in specs {
        let w = 2.0 * PI * spec.frequency_hz;
        for (k, s) in samples.iter_mut().enumerate() {
            let t = k as f64 / sample_rate_hz;
            *s += spec.amplitude * (w * t + spec.phase_rad).sin();
        }
    }
    if noise_rms > 0.0 {
        add_white_noise(&mut samples, noise_rms, seed);
    }
    Waveform::new(samples, sample_rate_hz)
}

pub(crate) fn add_white_noise(samples: &mut [f64], sigma: f64, seed: u64) {
    let mut r = rng::rng_for(seed, &[0x6e6f697365]);
    let normal = Normal::new(0.0, sigma).expect("sigma is finite and non-negative");
    for s in samples {
        *s += normal.sample(&mut r);
    }
}

/// The five vowel classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VowelId {
    A,
    E,
    I,
    O,
    U,
}

impl VowelId {
    pub const ALL: [VowelId; 5] = [VowelId::A, VowelId::E, VowelId::I, VowelId::O, VowelId::U];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for VowelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self {
            VowelId::A => "a",
            VowelId::E => "e",
            VowelId::I => "i",
            VowelId::O => "o",
            VowelId::U => "u",
        };
        f.write_str(c)
    }
}

impl FromStr for VowelId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "a" => Ok(VowelId::A),
            "e" => Ok(VowelId::E),
            "i" => Ok(VowelId::I),
            "o" => Ok(VowelId::O),
            "u" => Ok(VowelId::U),
            other => Err(Error::spec(format!("unknown vowel '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Formant {
    pub center_hz: f64,
    pub bandwidth_hz: f64,
    pub relative_amplitude: f64,
}

impl Formant {
    pub const fn new(center_hz: f64, bandwidth_hz: f64, relative_amplitude: f64) -> Self {
        Self { center_hz, bandwidth_hz, relative_amplitude }
    }
}

/// Source-filter description of a vowel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VowelSpec {
    pub vowel_id: VowelId,
    pub formants: Vec<Formant>,
    pub fundamental_hz: f64,
}

impl VowelSpec {
    /// Textbook-typical formants for an adult voice at 150 Hz.
    pub fn preset(vowel_id: VowelId) -> Self {
        let f = |c, b, a| Formant::new(c, b, a);
        let formants = match vowel_id {
            VowelId::A => vec![f(800.0, 80.0, 1.0), f(1200.0, 90.0, 0.5), f(2500.0, 120.0, 0.25)],
            VowelId::E => vec![f(500.0, 60.0, 1.0), f(1900.0, 100.0, 0.5), f(2500.0, 120.0, 0.25)],
            VowelId::I => vec![f(300.0, 60.0, 1.0), f(2300.0, 100.0, 0.5), f(3000.0, 120.0, 0.25)],
            VowelId::O => vec![f(500.0, 60.0, 1.0), f(900.0, 80.0, 0.5), f(2500.0, 120.0, 0.25)],
            VowelId::U => vec![f(350.0, 60.0, 1.0), f(800.0, 80.0, 0.5), f(2500.0, 120.0, 0.25)],
        };
        Self { vowel_id, formants, fundamental_hz: 150.0 }
    }

    fn validate(&self, sample_rate_hz: f64) -> Result<()> {
        let nyq = 0.5 * sample_rate_hz;
        if self.formants.is_empty() {
            return Err(Error::spec("vowel needs at least one formant"));
        }
        if !(self.fundamental_hz > 0.0 && self.fundamental_hz < nyq) {
            return Err(Error::spec(format!("fundamental {} Hz out of range", self.fundamental_hz)));
        }
        for f in &self.formants {
            if !(f.center_hz > 0.0 && f.center_hz < nyq) {
                return Err(Error::spec(format!("formant {} Hz must lie in (0, {nyq}) Hz", f.center_hz)));
            }
            if !(f.bandwidth_hz > 0.0 && f.bandwidth_hz.is_finite()) {
                return Err(Error::spec("formant bandwidth must be positive"));
            }
            if !f.relative_amplitude.is_finite() {
                return Err(Error::spec("formant amplitude must be finite"));
            }
        }
        if self.formants.windows(2).any(|p| p[1].center_hz <= p[0].center_hz) {
            return Err(Error::spec("formant centers must be strictly ascending"));
        }
        Ok(())
    }
}

/// Impulse train at the (jittered) fundamental through parallel two-pole
/// resonators at the (jittered) formants, scaled to unit RMS.
pub fn synth_vowel(
    spec: &VowelSpec,
    duration_s: f64,
    sample_rate_hz: f64,
    jitter: f64,
    seed: u64,
) -> Result<Waveform> {
    spec.validate(sample_rate_hz)?;
    if !(jitter.is_finite() && (0.0..1.0).contains(&jitter)) {
        return Err(Error::spec(format!("jitter must lie in [0, 1), got {jitter}")));
    }
    let n = sample_count(duration_s, sample_rate_hz)?;
    if n == 0 {
        return Err(Error::spec("vowel duration shorter than one sample"));
    }
    let mut r = rng::rng_for(seed, &[0x766f77656c]);
    let mut perturb = |x: f64| {
        if jitter > 0.0 {
            x * (1.0 + r.random_range(-jitter..=jitter))
        } else {
            x
        }
    };
    let nyq = 0.5 * sample_rate_hz;
    let f0 = perturb(spec.fundamental_hz);
    let formants: Vec<Formant> = spec
        .formants
        .iter()
        .map(|f| Formant::new(perturb(f.center_hz), f.bandwidth_hz, perturb(f.relative_amplitude)))
        .collect();
    if let Some(f) = formants.iter().find(|f| f.center_hz >= nyq) {
        return Err(Error::spec(format!("jittered formant {} Hz reaches Nyquist", f.center_hz)));
    }

    let mut excitation = vec![0.0; n];
    let period = sample_rate_hz / f0;
    let mut k = 0usize;
    loop {
        let idx = (k as f64 * period).round() as usize;
        if idx >= n {
            break;
        }
        excitation[idx] = 1.0;
        k += 1;
    }

    let mut out = vec![0.0; n];
    for f in &formants {
        let radius = (-PI * f.bandwidth_hz / sample_rate_hz).exp();
        let theta = 2.0 * PI * f.center_hz / sample_rate_hz;
        let a1 = 2.0 * radius * theta.cos();
        let a2 = -radius * radius;
        let b0 = 1.0 - radius;
        let (mut y1, mut y2) = (0.0, 0.0);
        for (o, &x) in out.iter_mut().zip(&excitation) {
            let y = b0 * x + a1 * y1 + a2 * y2;
            y2 = y1;
            y1 = y;
            *o += f.relative_amplitude * y;
        }
    }
    let w = Waveform::new(out, sample_rate_hz)?;
    let rms = w.rms();
    Ok(if rms > 0.0 { w.scaled(1.0 / rms) } else { w })
}

/// Rectangular, sample-aligned slice `[start, start + length)`.
pub fn window(w: &Waveform, start_s: f64, length_s: f64) -> Result<Waveform> {
    if !(start_s.is_finite() && start_s >= 0.0 && length_s.is_finite() && length_s > 0.0) {
        return Err(Error::Range(format!("window start {start_s} s / length {length_s} s invalid")));
    }
    let start = (start_s * w.sample_rate_hz).round() as usize;
    let len = (length_s * w.sample_rate_hz).round() as usize;
    window_samples(w, start, len)
}

pub fn window_samples(w: &Waveform, start: usize, len: usize) -> Result<Waveform> {
    if len == 0 || start + len > w.len() {
        return Err(Error::Range(format!(
            "window [{start}, {}) outside waveform of {} samples",
            start + len,
            w.len()
        )));
    }
    Ok(Waveform { samples: w.samples[start..start + len].to_vec(), sample_rate_hz: w.sample_rate_hz })
}

// ---------- file I/O ----------

/// Writes mono 16-bit PCM. Samples must lie in [-1, 1].
pub fn write_wav(path: &Path, w: &Waveform) -> Result<()> {
    if w.peak() > 1.0 {
        return Err(Error::Range(format!("peak {} exceeds 16-bit full scale", w.peak())));
    }
    let rate = w.sample_rate_hz.round();
    if (rate - w.sample_rate_hz).abs() > 1e-9 || rate > u32::MAX as f64 {
        return Err(Error::spec("WAV needs an integral sample rate"));
    }
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: rate as u32,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec)?;
    for &s in &w.samples {
        let q = (s * 32767.0).round().clamp(-32768.0, 32767.0) as i16;
        writer.write_sample(q)?;
    }
    writer.finalize()?;
    Ok(())
}

/// Reads a mono PCM WAV (any integer depth) or 32-bit float WAV.
pub fn read_wav(path: &Path) -> Result<Waveform> {
    let mut reader = hound::WavReader::open(path)?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::input(format!("expected mono WAV, found {} channels", spec.channels)));
    }
    let samples: Vec<f64> = match spec.sample_format {
        hound::SampleFormat::Int => {
            let scale = ((1i64 << (spec.bits_per_sample - 1)) - 1) as f64;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f64 / scale))
                .collect::<std::result::Result<_, _>>()?
        }
        hound::SampleFormat::Float => {
            reader.samples::<f32>().map(|s| s.map(f64::from)).collect::<std::result::Result<_, _>>()?
        }
    };
    Waveform::new(samples, spec.sample_rate as f64)
}

/// Raw format: f64 LE sample rate, then f64 LE samples.
pub fn write_raw_f64(path: &Path, w: &Waveform) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_raw_to(&mut out, w)?;
    out.flush()?;
    Ok(())
}

pub fn write_raw_to<W: Write>(out: &mut W, w: &Waveform) -> Result<()> {
    out.write_all(&w.sample_rate_hz.to_le_bytes())?;
    for s in &w.samples {
        out.write_all(&s.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_raw_f64(path: &Path) -> Result<Waveform> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    if bytes.len() < 8 || bytes.len() % 8 != 0 {
        return Err(Error::Corrupt(format!("raw waveform has {} bytes, not 8 + 8k", bytes.len())));
    }
    let mut words = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    let rate = words.next().expect("header present");
    Waveform::new(words.collect(), rate)
}

/// Dispatch on extension: `.wav` or raw f64 otherwise.
pub fn read_waveform(path: &Path) -> Result<Waveform> {
    if has_wav_extension(path) {
        read_wav(path)
    } else {
        read_raw_f64(path)
    }
}

pub fn has_wav_extension(path: &Path) -> bool {
    path.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("wav"))
}

#[cfg(test)]
mod tests {
    use super::*;

    const FS: f64 = DEFAULT_SAMPLE_RATE_HZ;

    #[test]
    fn single_tone_basic_shape() {
        let w = synth_tones(&[ToneSpec::unit(600.0)], 0.05, FS, 0.0, 0).unwrap();
        assert_eq!(w.len(), 800);
        assert_eq!(w.samples()[0], 0.0);
        assert!(w.peak() <= 1.0);
        assert_eq!(w.duration_seconds(), 800.0 / FS);
    }

    #[test]
    fn antiphase_tones_cancel() {
        let specs = [ToneSpec::new(640.0, 1.0, 0.3), ToneSpec::new(640.0, 1.0, 0.3 + PI)];
        let w = synth_tones(&specs, 0.05, FS, 0.0, 0).unwrap();
        assert!(w.peak() < 1e-12, "peak {}", w.peak());
    }

    #[test]
    fn tone_at_nyquist_is_rejected() {
        let err = synth_tones(&[ToneSpec::unit(8000.0)], 0.05, FS, 0.0, 0).unwrap_err();
        assert!(matches!(err, Error::InvalidSpec(_)));
        let err = synth_tones(&[ToneSpec::unit(600.0)], 0.5 / FS, FS, 0.0, 0).unwrap_err();
        assert!(matches!(err, Error::InvalidSpec(_)));
    }

    #[test]
    fn noise_is_seeded() {
        let a = synth_tones(&[ToneSpec::unit(600.0)], 0.01, FS, 0.1, 7).unwrap();
        let b = synth_tones(&[ToneSpec::unit(600.0)], 0.01, FS, 0.1, 7).unwrap();
        let c = synth_tones(&[ToneSpec::unit(600.0)], 0.01, FS, 0.1, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn unit_tone_rms_over_whole_periods() {
        // 600 Hz at 16 kHz: 80 samples = 3 periods.
        let w = synth_tones(&[ToneSpec::new(600.0, 1.0, 0.7)], 0.05, FS, 0.0, 0).unwrap();
        assert!((w.rms() - 0.5f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn vowel_determinism_and_short_window() {
        let spec = VowelSpec::preset(VowelId::A);
        let a = synth_vowel(&spec, 0.02, FS, 0.0, 3).unwrap();
        let b = synth_vowel(&spec, 0.02, FS, 0.0, 3).unwrap();
        assert_eq!(a.samples(), b.samples());
        let short = synth_vowel(&spec, 0.0005, FS, 0.0, 3).unwrap();
        assert_eq!(short.len(), 8);
        let j1 = synth_vowel(&spec, 0.02, FS, 0.1, 1).unwrap();
        let j2 = synth_vowel(&spec, 0.02, FS, 0.1, 2).unwrap();
        assert_ne!(j1.samples(), j2.samples());
    }

    #[test]
    fn vowel_formant_above_nyquist_rejected() {
        let mut spec = VowelSpec::preset(VowelId::I);
        spec.formants.push(Formant::new(9000.0, 100.0, 0.1));
        assert!(matches!(synth_vowel(&spec, 0.01, FS, 0.0, 0), Err(Error::InvalidSpec(_))));
        let mut spec = VowelSpec::preset(VowelId::I);
        spec.formants.swap(0, 1);
        assert!(matches!(synth_vowel(&spec, 0.01, FS, 0.0, 0), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn window_slices() {
        let w = synth_tones(&[ToneSpec::unit(600.0)], 0.05, FS, 0.0, 0).unwrap();
        assert_eq!(window(&w, 0.0, 0.05).unwrap(), w);
        let part = window(&w, 0.01, 0.02).unwrap();
        assert_eq!(part.len(), 320);
        assert_eq!(part.samples()[0], w.samples()[160]);
        assert!(matches!(window(&w, 0.04, 0.02), Err(Error::Range(_))));
    }

    #[test]
    fn vowel_id_parse() {
        assert_eq!("O".parse::<VowelId>().unwrap(), VowelId::O);
        assert!("y".parse::<VowelId>().is_err());
    }

    #[test]
    fn raw_and_wav_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let w = synth_tones(&[ToneSpec::new(605.0, 0.4, 0.0), ToneSpec::new(610.0, 0.4, 1.0)], 0.01, FS, 0.0, 0)
            .unwrap();
        let raw = dir.path().join("w.f64");
        write_raw_f64(&raw, &w).unwrap();
        assert_eq!(read_waveform(&raw).unwrap(), w);

        let wav = dir.path().join("w.wav");
        write_wav(&wav, &w).unwrap();
        let back = read_waveform(&wav).unwrap();
        assert_eq!(back.sample_rate_hz(), FS);
        for (a, b) in back.samples().iter().zip(w.samples()) {
            assert!((a - b).abs() < 1.0 / 32767.0);
        }
        assert!(matches!(write_wav(&wav, &w.scaled(3.0)), Err(Error::Range(_))));

        std::fs::write(&raw, [1u8; 12]).unwrap();
        assert!(matches!(read_raw_f64(&raw), Err(Error::Corrupt(_))));
    }
}

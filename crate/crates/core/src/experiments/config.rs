use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::sha256_hex;
use crate::error::{Error, Result};
use crate::membrane::{self, MembraneModel};
use crate::nn::{Architecture, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MembraneConfig {
    pub channels: usize,
    pub f_low_hz: f64,
    pub f_high_hz: f64,
    pub q_time_ms: f64,
    /// Resonance used when `channels == 1`.
    pub single_channel_hz: f64,
}

impl Default for MembraneConfig {
    fn default() -> Self {
        Self { channels: 6, f_low_hz: 300.0, f_high_hz: 1200.0, q_time_ms: 1.0, single_channel_hz: 600.0 }
    }
}

impl MembraneConfig {
    pub fn model(&self) -> Result<MembraneModel> {
        let q = self.q_time_ms * 1e-3;
        if self.channels == 1 {
            membrane::default_model(1, self.single_channel_hz, self.single_channel_hz * 2.0, q)
        } else {
            membrane::default_model(self.channels, self.f_low_hz, self.f_high_hz, q)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    /// One row-spanning convolution, then dense layers.
    #[default]
    BandConv,
    /// Two 3x3 convolutions and one dense hidden layer.
    Stacked,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetConfig {
    pub topology: Topology,
    pub filters: usize,
    pub kernel_w: usize,
    pub hidden: Vec<usize>,
    pub train: TrainConfig,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self { topology: Topology::BandConv, filters: 8, kernel_w: 3, hidden: vec![256, 256], train: TrainConfig::default() }
    }
}

impl NetConfig {
    pub fn architecture(&self, input_shape: Vec<usize>, n_labels: usize, seed: u64) -> Architecture {
        match self.topology {
            Topology::BandConv => Architecture::band_conv(input_shape, self.filters, self.kernel_w, &self.hidden, n_labels, seed),
            Topology::Stacked => Architecture::default_topology(input_shape, n_labels, seed),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TwoToneConfig {
    pub f_min_hz: f64,
    pub f_max_hz: f64,
    pub step_hz: f64,
    pub window_ms: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub sample_rate_hz: f64,
    /// White noise relative to the clean signal RMS, in dB.
    pub acoustic_noise_db: f64,
    /// Tone amplitudes are drawn uniformly from `1 +/- amplitude_jitter`.
    pub amplitude_jitter: f64,
    pub membrane: MembraneConfig,
    /// Independent read-out noise per channel relative to that channel's RMS, in dB.
    pub sensor_noise_db: f64,
    pub frame_ms: f64,
    pub seed: u64,
}

impl Default for TwoToneConfig {
    fn default() -> Self {
        Self {
            f_min_hz: 600.0,
            f_max_hz: 695.0,
            step_hz: 5.0,
            window_ms: 50.0,
            n_train: 200,
            n_test: 20,
            sample_rate_hz: 16_000.0,
            acoustic_noise_db: -30.0,
            amplitude_jitter: 0.1,
            membrane: MembraneConfig::default(),
            sensor_noise_db: -10.0,
            frame_ms: 1.0,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransformConfig {
    pub trials_per_case: usize,
    pub czt_f_i_hz: f64,
    pub czt_f_f_hz: f64,
    pub czt_points: usize,
    pub zfft_center_hz: f64,
    pub zfft_decimation: usize,
    pub zfft_pad: usize,
    /// Peaks are read inside this band.
    pub readout_lo_hz: f64,
    pub readout_hi_hz: f64,
    /// A second maximum counts when it reaches this fraction of the largest.
    pub peak_rel_threshold: f64,
}

impl Default for TransformConfig {
    fn default() -> Self {
        Self {
            trials_per_case: 100,
            czt_f_i_hz: 550.0,
            czt_f_f_hz: 745.0,
            czt_points: 40,
            zfft_center_hz: 650.0,
            zfft_decimation: 20,
            zfft_pad: 160,
            readout_lo_hz: 575.0,
            readout_hi_hz: 720.0,
            peak_rel_threshold: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Dft,
    Zfft,
    Czt,
    #[serde(rename = "membrane+nn")]
    MembraneNn,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Dft, Method::Zfft, Method::Czt, Method::MembraneNn];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Dft => "dft",
            Method::Zfft => "zfft",
            Method::Czt => "czt",
            Method::MembraneNn => "membrane+nn",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| Error::spec(format!("unknown method '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ComparisonConfig {
    pub dataset: TwoToneConfig,
    pub network: NetConfig,
    pub transforms: TransformConfig,
    pub methods: Vec<Method>,
}

impl Default for ComparisonConfig {
    fn default() -> Self {
        Self {
            dataset: TwoToneConfig::default(),
            network: NetConfig::default(),
            transforms: TransformConfig::default(),
            methods: Method::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationConfig {
    pub dataset: TwoToneConfig,
    pub network: NetConfig,
    pub channel_counts: Vec<usize>,
    /// Test error used for the epochs-to-threshold figure.
    pub error_threshold: f64,
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self { dataset: TwoToneConfig::default(), network: NetConfig::default(), channel_counts: vec![1, 6], error_threshold: 0.25 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VowelFeature {
    Membrane,
    Raw,
    Mfcc,
    Zfft,
    Czt,
}

impl VowelFeature {
    pub const ALL: [VowelFeature; 5] =
        [VowelFeature::Membrane, VowelFeature::Raw, VowelFeature::Mfcc, VowelFeature::Zfft, VowelFeature::Czt];

    pub fn name(&self) -> &'static str {
        match self {
            VowelFeature::Membrane => "membrane",
            VowelFeature::Raw => "raw",
            VowelFeature::Mfcc => "mfcc",
            VowelFeature::Zfft => "zfft",
            VowelFeature::Czt => "czt",
        }
    }
}

impl std::str::FromStr for VowelFeature {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        VowelFeature::ALL.into_iter().find(|f| f.name() == s).ok_or_else(|| Error::spec(format!("unknown feature '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VowelConfig {
    pub windows_ms: Vec<f64>,
    pub features: Vec<VowelFeature>,
    pub n_train: usize,
    pub n_test: usize,
    pub sample_rate_hz: f64,
    pub fundamental_hz: f64,
    pub jitter: f64,
    pub acoustic_noise_db: f64,
    /// Windows start this long after onset plus a random part of one pitch period.
    pub onset_ms: f64,
    pub membrane: MembraneConfig,
    pub sensor_noise_db: f64,
    pub membrane_frames: usize,
    pub spectrum_bins: usize,
    pub band_lo_hz: f64,
    pub band_hi_hz: f64,
    pub n_mels: usize,
    pub n_mfcc: usize,
    pub zfft_center_hz: f64,
    pub zfft_decimation: usize,
    pub zfft_pad: usize,
    pub network: NetConfig,
    pub seed: u64,
}

impl Default for VowelConfig {
    fn default() -> Self {
        Self {
            windows_ms: vec![0.5, 1.0, 5.0, 10.0, 20.0],
            features: VowelFeature::ALL.to_vec(),
            n_train: 200,
            n_test: 40,
            sample_rate_hz: 16_000.0,
            fundamental_hz: 150.0,
            jitter: 0.08,
            acoustic_noise_db: -30.0,
            onset_ms: 20.0,
            membrane: MembraneConfig { channels: 10, f_low_hz: 200.0, f_high_hz: 3000.0, q_time_ms: 1.0, single_channel_hz: 600.0 },
            sensor_noise_db: -20.0,
            membrane_frames: 4,
            spectrum_bins: 64,
            band_lo_hz: 200.0,
            band_hi_hz: 3000.0,
            n_mels: 20,
            n_mfcc: 13,
            zfft_center_hz: 1600.0,
            zfft_decimation: 2,
            zfft_pad: 180,
            network: NetConfig::default(),
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TonotopyConfig {
    pub membrane: MembraneConfig,
    pub f_start_hz: f64,
    pub f_stop_hz: f64,
    pub f_step_hz: f64,
    pub amplitude: f64,
    pub duration_ms: f64,
    pub discard_ms: f64,
    pub sample_rate_hz: f64,
}

impl Default for TonotopyConfig {
    fn default() -> Self {
        Self {
            membrane: MembraneConfig { channels: 12, f_low_hz: 100.0, f_high_hz: 1300.0, q_time_ms: 4.0, single_channel_hz: 100.0 },
            f_start_hz: 100.0,
            f_stop_hz: 1300.0,
            f_step_hz: 100.0,
            amplitude: 1.0,
            duration_ms: 100.0,
            discard_ms: 20.0,
            sample_rate_hz: 16_000.0,
        }
    }
}

impl TonotopyConfig {
    pub fn tone_grid(&self) -> Result<Vec<f64>> {
        grid(self.f_start_hz, self.f_stop_hz, self.f_step_hz)
    }
}

/// Inclusive grid `start, start + step, ..., stop`; `step` must divide the span.
pub fn grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(start.is_finite() && stop.is_finite() && step.is_finite() && step > 0.0 && stop > start) {
        return Err(Error::spec(format!("invalid grid {start}..{stop} step {step}")));
    }
    let n = (stop - start) / step;
    if (n - n.round()).abs() > 1e-9 {
        return Err(Error::spec(format!("step {step} does not divide {start}..{stop}")));
    }
    Ok((0..=n.round() as usize).map(|i| start + i as f64 * step).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "snake_case")]
pub enum ExperimentConfig {
    Comparison(ComparisonConfig),
    Ablation(AblationConfig),
    Vowels(VowelConfig),
    Tonotopy(TonotopyConfig),
}

impl ExperimentConfig {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentConfig::Comparison(_) => "comparison",
            ExperimentConfig::Ablation(_) => "ablation",
            ExperimentConfig::Vowels(_) => "vowels",
            ExperimentConfig::Tonotopy(_) => "tonotopy",
        }
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }
}

/// SHA-256 of the compact JSON encoding.
pub fn config_hash<T: Serialize>(cfg: &T) -> Result<String> {
    Ok(sha256_hex(&serde_json::to_vec(cfg)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_checks_divisibility() {
        let g = grid(600.0, 695.0, 5.0).unwrap();
        assert_eq!(g.len(), 20);
        assert_eq!(g[19], 695.0);
        assert!(grid(600.0, 695.0, 7.0).is_err());
        assert!(grid(600.0, 600.0, 5.0).is_err());
    }

    #[test]
    fn configs_round_trip_through_json() {
        let cfg = ExperimentConfig::Ablation(AblationConfig::default());
        let s = serde_json::to_string(&cfg).unwrap();
        assert!(s.contains("\"experiment\":\"ablation\""));
        assert_eq!(serde_json::from_str::<ExperimentConfig>(&s).unwrap(), cfg);
        let partial: ExperimentConfig =
            serde_json::from_str(r#"{"experiment":"comparison","dataset":{"n_train":5},"methods":["dft","membrane+nn"]}"#).unwrap();
        let ExperimentConfig::Comparison(c) = partial else { panic!() };
        assert_eq!(c.dataset.n_train, 5);
        assert_eq!(c.dataset.n_test, 20);
        assert_eq!(c.methods, vec![Method::Dft, Method::MembraneNn]);
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"experiment":"tonotopy","bogus":1}"#).is_err());
    }

    #[test]
    fn tonotopy_default_is_underdamped() {
        TonotopyConfig::default().membrane.model().unwrap();
        let g = TonotopyConfig::default().tone_grid().unwrap();
        assert_eq!(g.len(), 13);
    }
}

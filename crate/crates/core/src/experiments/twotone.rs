use std::f64::consts::PI;

use rand::Rng as _;
use rayon::prelude::*;

use super::config::{grid, TwoToneConfig};
use crate::dataset::{LabeledDataset, Split};
use crate::error::{Error, Result};
use crate::membrane::{self, DisplacementPattern, FeatureMode, MembraneModel};
use crate::rng;
use crate::signals::{self, synth_tones, ToneSpec, Waveform};

pub(crate) const TAG_TRAIN: u64 = 0;
pub(crate) const TAG_TEST: u64 = 1;
pub(crate) const TAG_TRIAL: u64 = 2;
const TAG_TONES: u64 = 0x746f6e6573;
const TAG_SENSOR: u64 = 0x73656e736f72;

/// Frequency nodes and the unordered pairs drawn from them.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoToneGrid {
    pub freqs_hz: Vec<f64>,
    pub cases: Vec<(usize, usize)>,
    pub step_hz: f64,
}

impl TwoToneGrid {
    pub fn new(cfg: &TwoToneConfig) -> Result<Self> {
        let freqs_hz = grid(cfg.f_min_hz, cfg.f_max_hz, cfg.step_hz)?;
        let n = freqs_hz.len();
        let cases = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        Ok(Self { freqs_hz, cases, step_hz: cfg.step_hz })
    }

    pub fn nodes(&self) -> usize {
        self.freqs_hz.len()
    }

    pub fn case_name(&self, case: usize) -> String {
        let (i, j) = self.cases[case];
        format!("{}+{}", self.freqs_hz[i], self.freqs_hz[j])
    }

    pub fn separation_hz(&self, case: usize) -> f64 {
        let (i, j) = self.cases[case];
        self.freqs_hz[j] - self.freqs_hz[i]
    }

    pub fn label(&self, case: usize) -> Vec<f64> {
        let (i, j) = self.cases[case];
        let mut y = vec![0.0; self.nodes()];
        y[i] = 1.0;
        y[j] = 1.0;
        y
    }

    pub fn case_of_pair(&self, a: usize, b: usize) -> Option<usize> {
        let (lo, hi) = (a.min(b), a.max(b));
        self.cases.iter().position(|&c| c == (lo, hi))
    }
}

fn check_config(cfg: &TwoToneConfig) -> Result<()> {
    if !(cfg.window_ms.is_finite() && cfg.window_ms > 0.0) {
        return Err(Error::spec("window must be positive"));
    }
    if !(0.0..1.0).contains(&cfg.amplitude_jitter) {
        return Err(Error::spec("amplitude jitter must lie in [0, 1)"));
    }
    Ok(())
}

/// Two sines of random phase and jittered amplitude plus white noise relative to their RMS.
pub fn synth_twotone(cfg: &TwoToneConfig, f1_hz: f64, f2_hz: f64, seed: u64) -> Result<Waveform> {
    check_config(cfg)?;
    let mut g = rng::rng_for(seed, &[TAG_TONES]);
    let mut tone = |f: f64| {
        let a = if cfg.amplitude_jitter > 0.0 {
            g.random_range(1.0 - cfg.amplitude_jitter..1.0 + cfg.amplitude_jitter)
        } else {
            1.0
        };
        ToneSpec::new(f, a, g.random_range(0.0..2.0 * PI))
    };
    let specs = [tone(f1_hz), tone(f2_hz)];
    let clean = synth_tones(&specs, cfg.window_ms * 1e-3, cfg.sample_rate_hz, 0.0, seed)?;
    if !cfg.acoustic_noise_db.is_finite() {
        return Ok(clean);
    }
    let sigma = clean.rms() * 10f64.powf(cfg.acoustic_noise_db / 20.0);
    let mut s = clean.into_samples();
    signals::add_white_noise(&mut s, sigma, seed);
    Waveform::new(s, cfg.sample_rate_hz)
}

/// Respond, add sensor noise, reduce to RMS frames.
pub fn membrane_pattern(cfg: &TwoToneConfig, model: &MembraneModel, w: &Waveform, seed: u64) -> Result<DisplacementPattern> {
    let mut pat = membrane::respond(model, w)?;
    membrane::add_sensor_noise(&mut pat, cfg.sensor_noise_db, rng::derive(seed, &[TAG_SENSOR]));
    membrane::features(&pat, cfg.frame_ms, FeatureMode::Rms)
}

pub(crate) fn item_seed(base: u64, tag: u64, case: usize, rep: usize) -> u64 {
    rng::derive(base, &[tag, case as u64, rep as u64])
}

/// Multi-hot labeled membrane patterns for every pair, `n_train` and `n_test`
/// instances each. Inputs are `[1, channels, frames]` and not standardized.
pub fn build_twotone_dataset(cfg: &TwoToneConfig) -> Result<LabeledDataset> {
    check_config(cfg)?;
    let grid = TwoToneGrid::new(cfg)?;
    let model = cfg.membrane.model()?;
    let mut items = Vec::with_capacity(grid.cases.len() * (cfg.n_train + cfg.n_test));
    for (split, tag, n) in [(Split::Train, TAG_TRAIN, cfg.n_train), (Split::Test, TAG_TEST, cfg.n_test)] {
        for case in 0..grid.cases.len() {
            for rep in 0..n {
                items.push((split, tag, case, rep));
            }
        }
    }
    let patterns: Vec<DisplacementPattern> = items
        .par_iter()
        .map(|&(_, tag, case, rep)| {
            let (i, j) = grid.cases[case];
            let seed = item_seed(cfg.seed, tag, case, rep);
            let w = synth_twotone(cfg, grid.freqs_hz[i], grid.freqs_hz[j], seed)?;
            membrane_pattern(cfg, &model, &w, seed)
        })
        .collect::<Result<_>>()?;
    let (channels, frames) = patterns.first().map_or((model.len(), 0), |p| (p.channel_count(), p.frame_count()));
    let metadata = serde_json::json!({ "kind": "twotone", "config": cfg, "channel_freqs_hz": model.channel_freqs_hz() });
    let mut ds = LabeledDataset::new(vec![1, channels, frames.max(1)], grid.nodes(), metadata)?;
    for (id, (&(split, _, case, _), pat)) in items.iter().zip(&patterns).enumerate() {
        ds.push(pat.values(), &grid.label(case), split, case, id as u64)?;
    }
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_has_190_cases_and_balanced_nodes() {
        let g = TwoToneGrid::new(&TwoToneConfig::default()).unwrap();
        assert_eq!(g.nodes(), 20);
        assert_eq!(g.cases.len(), 190);
        for node in 0..20 {
            assert_eq!(g.cases.iter().filter(|&&(i, j)| i == node || j == node).count(), 19);
        }
        assert_eq!(g.case_name(0), "600+605");
        assert_eq!(g.separation_hz(0), 5.0);
        assert_eq!(g.case_of_pair(1, 0), Some(0));
    }

    #[test]
    fn bad_grid_rejected() {
        let cfg = TwoToneConfig { step_hz: 7.0, ..Default::default() };
        assert!(TwoToneGrid::new(&cfg).is_err());
        assert!(build_twotone_dataset(&TwoToneConfig { window_ms: 0.0, ..Default::default() }).is_err());
    }

    #[test]
    fn small_dataset_shapes() {
        let cfg = TwoToneConfig { n_train: 2, n_test: 1, f_max_hz: 615.0, ..Default::default() };
        let ds = build_twotone_dataset(&cfg).unwrap();
        assert_eq!(ds.len(), 6 * 3);
        assert_eq!(ds.input_shape(), &[1, 6, 50]);
        assert!((0..ds.len()).all(|i| ds.positives(i).len() == 2));
        ds.check_split_hygiene().unwrap();
        assert_eq!(build_twotone_dataset(&cfg).unwrap(), ds);
    }

    #[test]
    fn noise_level_is_relative() {
        let cfg = TwoToneConfig { amplitude_jitter: 0.0, ..Default::default() };
        let noisy = synth_twotone(&cfg, 600.0, 640.0, 3).unwrap();
        let clean = synth_twotone(&TwoToneConfig { acoustic_noise_db: f64::NEG_INFINITY, ..cfg.clone() }, 600.0, 640.0, 3).unwrap();
        let diff: f64 = noisy.samples().iter().zip(clean.samples()).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / 800.0;
        let ratio = diff.sqrt() / clean.rms();
        assert!((ratio - 10f64.powf(-1.5)).abs() < 0.006, "{ratio}");
    }
}

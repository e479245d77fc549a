use rand::Rng as _;
use rayon::prelude::*;

use super::comparison::summarize;
use super::config::{config_hash, VowelConfig, VowelFeature};
use super::report::{confusion, BenchmarkReport, MethodResult, Tally, TrainingSummary};
use crate::dataset::{LabeledDataset, Split};
use crate::error::{Error, Result};
use crate::membrane::{self, FeatureMode, MembraneModel};
use crate::nn::{self, Network};
use crate::rng;
use crate::signals::{self, synth_vowel, VowelId, VowelSpec, Waveform};
use crate::spectral;

const TAG_VOWEL: u64 = 0x766f77;
const TAG_OFFSET: u64 = 0x6f6666;
const TAG_SENSOR: u64 = 0x73656e;

/// One vowel rendition: the analysis window and the signal up to its end.
#[derive(Debug, Clone)]
pub struct VowelSample {
    pub vowel: VowelId,
    pub history: Waveform,
    pub start: usize,
    pub window: Waveform,
}

pub fn window_samples(cfg: &VowelConfig, window_ms: f64) -> Result<usize> {
    let n = (window_ms * 1e-3 * cfg.sample_rate_hz).round() as usize;
    if n < 2 {
        return Err(Error::spec(format!("window of {window_ms} ms holds fewer than 2 samples")));
    }
    Ok(n)
}

/// Jittered vowel with white noise; the window starts `onset_ms` in plus a
/// random fraction of one pitch period.
pub fn vowel_sample(cfg: &VowelConfig, vowel: VowelId, window_ms: f64, seed: u64) -> Result<VowelSample> {
    let fs = cfg.sample_rate_hz;
    let n = window_samples(cfg, window_ms)?;
    let period = (fs / cfg.fundamental_hz).round().max(1.0) as usize;
    let onset = (cfg.onset_ms * 1e-3 * fs).round() as usize;
    let start = onset + rng::rng_for(seed, &[TAG_OFFSET]).random_range(0..period);
    let len = start + n;
    let mut spec = VowelSpec::preset(vowel);
    spec.fundamental_hz = cfg.fundamental_hz;
    let clean = synth_vowel(&spec, (len as f64 + 0.5) / fs, fs, cfg.jitter, rng::derive(seed, &[TAG_VOWEL]))?;
    let mut s = clean.into_samples();
    s.truncate(len);
    if cfg.acoustic_noise_db.is_finite() {
        signals::add_white_noise(&mut s, 10f64.powf(cfg.acoustic_noise_db / 20.0), seed);
    }
    let history = Waveform::new(s, fs)?;
    let window = signals::window_samples(&history, start, n)?;
    Ok(VowelSample { vowel, history, start, window })
}

/// Feature vector and its single-sample tensor shape.
pub fn vowel_features(cfg: &VowelConfig, model: &MembraneModel, feature: VowelFeature, s: &VowelSample, seed: u64) -> Result<(Vec<f64>, Vec<usize>)> {
    let grid: Vec<f64> = (0..cfg.spectrum_bins)
        .map(|j| cfg.band_lo_hz + j as f64 * (cfg.band_hi_hz - cfg.band_lo_hz) / (cfg.spectrum_bins - 1) as f64)
        .collect();
    let flat = |v: Vec<f64>| {
        let n = v.len();
        (v, vec![1, 1, n])
    };
    match feature {
        VowelFeature::Raw => Ok(flat(s.window.samples().to_vec())),
        VowelFeature::Mfcc => Ok(flat(spectral::mfcc(&s.window, cfg.n_mels, cfg.n_mfcc)?)),
        VowelFeature::Czt => {
            Ok(flat(spectral::czt(&s.window, cfg.band_lo_hz, cfg.band_hi_hz, cfg.spectrum_bins)?.magnitudes()))
        }
        VowelFeature::Zfft => {
            let z = spectral::zfft(&s.window, cfg.zfft_center_hz, cfg.zfft_decimation, cfg.zfft_pad)?;
            Ok(flat(z.magnitude_at(&grid)))
        }
        VowelFeature::Membrane => {
            let full = membrane::respond(model, &s.history)?;
            let mut pat = full.slice_frames(s.start, s.window.len())?;
            membrane::add_sensor_noise(&mut pat, cfg.sensor_noise_db, rng::derive(seed, &[TAG_SENSOR]));
            let spf = (s.window.len() / cfg.membrane_frames.max(1)).max(2);
            let f = membrane::features_by_samples(&pat, spf, FeatureMode::Rms)?;
            let shape = vec![1, f.channel_count(), f.frame_count()];
            Ok((f.into_values(), shape))
        }
    }
}

/// One dataset per feature, all built from the same vowel renditions.
pub fn build_vowel_datasets(cfg: &VowelConfig, window_ms: f64) -> Result<Vec<(VowelFeature, LabeledDataset)>> {
    if cfg.features.is_empty() {
        return Err(Error::spec("no vowel features selected"));
    }
    if cfg.spectrum_bins < 2 {
        return Err(Error::spec("need at least 2 spectrum bins"));
    }
    let model = cfg.membrane.model()?;
    let mut items = Vec::new();
    let win_tag = (window_ms * 1000.0).round() as u64;
    for (split, tag, n) in [(Split::Train, 0u64, cfg.n_train), (Split::Test, 1u64, cfg.n_test)] {
        for v in VowelId::ALL {
            for rep in 0..n {
                items.push((split, v, rng::derive(cfg.seed, &[win_tag, tag, v.index() as u64, rep as u64])));
            }
        }
    }
    let rows: Vec<Vec<(Vec<f64>, Vec<usize>)>> = items
        .par_iter()
        .map(|&(_, v, seed)| {
            let s = vowel_sample(cfg, v, window_ms, seed)?;
            cfg.features.iter().map(|&f| vowel_features(cfg, &model, f, &s, seed)).collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for (k, &feature) in cfg.features.iter().enumerate() {
        let shape = rows.first().map_or(vec![1, 1, 1], |r| r[k].1.clone());
        let meta = serde_json::json!({ "kind": "vowels", "feature": feature.name(), "window_ms": window_ms });
        let mut ds = LabeledDataset::new(shape, VowelId::ALL.len(), meta)?;
        for (id, (&(split, v, _), row)) in items.iter().zip(&rows).enumerate() {
            let mut y = vec![0.0; VowelId::ALL.len()];
            y[v.index()] = 1.0;
            ds.push(&row[k].0, &y, split, v.index(), id as u64)?;
        }
        out.push((feature, ds));
    }
    Ok(out)
}

pub fn run_vowel_sweep(cfg: &VowelConfig) -> Result<BenchmarkReport> {
    if cfg.windows_ms.is_empty() {
        return Err(Error::spec("no windows selected"));
    }
    let mut per_feature: Vec<(Vec<Tally>, Vec<(String, String)>, Vec<Tally>)> =
        cfg.features.iter().map(|_| (Vec::new(), Vec::new(), Vec::new())).collect();
    let mut training: Vec<TrainingSummary> = Vec::new();
    for &window_ms in &cfg.windows_ms {
        for (k, (feature, mut ds)) in build_vowel_datasets(cfg, window_ms)?.into_iter().enumerate() {
            ds.check_split_hygiene()?;
            ds.standardize()?;
            let arch = cfg.network.architecture(ds.input_shape().to_vec(), VowelId::ALL.len(), rng::derive(cfg.network.train.seed, &[0x61726368]));
            let mut net = Network::new(arch)?;
            let log = nn::train(&mut net, &ds, &cfg.network.train)?;
            let idx = ds.indices(Split::Test);
            let pred = nn::predict_items(&net, &ds, &idx)?;
            let group = format!("window_ms={window_ms}");
            let mut correct = 0;
            let mut case_counts = vec![(0usize, 0usize); VowelId::ALL.len()];
            for (&i, p) in idx.iter().zip(&pred) {
                let truth = ds.case(i);
                let ok = p[0] == truth;
                correct += ok as usize;
                case_counts[truth].0 += ok as usize;
                case_counts[truth].1 += 1;
                per_feature[k].1.push((format!("{group}/{}", VowelId::ALL[truth]), format!("{}", VowelId::ALL[p[0]])));
            }
            per_feature[k].0.push(Tally::new(group.clone(), correct, idx.len()));
            for (v, (c, n)) in case_counts.into_iter().enumerate() {
                per_feature[k].2.push(Tally::new(format!("{group}/{}", VowelId::ALL[v]), c, n));
            }
            training.push(summarize(&format!("{}/{group}", feature.name()), &log, 0.1));
        }
    }
    let methods = cfg
        .features
        .iter()
        .zip(per_feature)
        .map(|(f, (groups, conf, per_case))| {
            let (c, n) = groups.iter().fold((0, 0), |(c, n), t| (c + t.correct, n + t.trials));
            MethodResult { method: f.name().to_string(), overall: Tally::new("all", c, n), groups, per_case, confusion: confusion(conf) }
        })
        .collect();
    Ok(BenchmarkReport {
        experiment: "vowels".into(),
        windows_ms: cfg.windows_ms.clone(),
        config_hash: config_hash(cfg)?,
        methods,
        training,
        extra: serde_json::Value::Null,
    })
}

/// Accuracy of `feature` at `window_ms` in a sweep report.
pub fn vowel_accuracy(report: &BenchmarkReport, feature: VowelFeature, window_ms: f64) -> Option<f64> {
    let group = format!("window_ms={window_ms}");
    report.method(feature.name())?.groups.iter().find(|t| t.group == group).map(|t| t.accuracy)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_millisecond_window_shapes() {
        let cfg = VowelConfig { n_train: 1, n_test: 1, ..Default::default() };
        let sets = build_vowel_datasets(&cfg, 0.5).unwrap();
        let shape = |f: VowelFeature| sets.iter().find(|(g, _)| *g == f).unwrap().1.input_shape().to_vec();
        assert_eq!(shape(VowelFeature::Raw), vec![1, 1, 8]);
        assert_eq!(shape(VowelFeature::Membrane), vec![1, 10, 4]);
        assert_eq!(shape(VowelFeature::Mfcc), vec![1, 1, 13]);
        assert_eq!(shape(VowelFeature::Czt), vec![1, 1, 64]);
        assert_eq!(shape(VowelFeature::Zfft), vec![1, 1, 64]);
        assert_eq!(sets[0].1.len(), 10);
        let twenty = build_vowel_datasets(&cfg, 20.0).unwrap();
        assert_eq!(twenty.iter().find(|(g, _)| *g == VowelFeature::Membrane).unwrap().1.input_shape(), &[1, 10, 4]);
    }

    #[test]
    fn window_follows_onset() {
        let cfg = VowelConfig::default();
        let s = vowel_sample(&cfg, VowelId::A, 1.0, 4).unwrap();
        assert_eq!(s.window.len(), 16);
        assert!(s.start >= 320 && s.start < 320 + 107);
        assert_eq!(s.history.len(), s.start + 16);
        assert_eq!(&s.history.samples()[s.start..], s.window.samples());
    }
}

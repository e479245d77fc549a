use std::collections::BTreeMap;

use rayon::prelude::*;

use super::config::{config_hash, ComparisonConfig, Method, NetConfig, TransformConfig, TwoToneConfig};
use super::report::{confusion, BenchmarkReport, MethodResult, Tally, TrainingSummary};
use super::twotone::{build_twotone_dataset, item_seed, synth_twotone, TwoToneGrid, TAG_TRIAL};
use crate::dataset::{LabeledDataset, Split, Standardizer};
use crate::error::{Error, Result};
use crate::nn::{self, Network, TrainingLog};
use crate::rng;
use crate::signals::Waveform;
use crate::spectral::{self, Spectrum};

/// A trained two-tone classifier with the standardized data it was trained on.
#[derive(Debug, Clone)]
pub struct TwoToneRun {
    pub config: TwoToneConfig,
    pub grid: TwoToneGrid,
    pub dataset: LabeledDataset,
    pub standardizer: Standardizer,
    pub network: Network,
    pub log: TrainingLog,
}

impl TwoToneRun {
    pub fn test_accuracy(&self) -> f64 {
        self.log.last().map_or(0.0, |r| 1.0 - r.test_err)
    }
}

pub fn train_twotone(ds_cfg: &TwoToneConfig, net_cfg: &NetConfig, on_epoch: impl FnMut(&nn::EpochRecord)) -> Result<TwoToneRun> {
    let grid = TwoToneGrid::new(ds_cfg)?;
    let mut dataset = build_twotone_dataset(ds_cfg)?;
    dataset.check_split_hygiene()?;
    let standardizer = dataset.standardize()?;
    let arch = net_cfg.architecture(dataset.input_shape().to_vec(), grid.nodes(), rng::derive(net_cfg.train.seed, &[0x61726368]));
    let mut network = Network::new(arch)?;
    let log = nn::train_with(&mut network, &dataset, &net_cfg.train, on_epoch)?;
    Ok(TwoToneRun { config: ds_cfg.clone(), grid, dataset, standardizer, network, log })
}

fn pair_name(f: [f64; 2]) -> String {
    format!("{}+{}", f[0], f[1])
}

fn assemble(method: &str, grid: &TwoToneGrid, outcomes: &[(usize, bool, String)]) -> MethodResult {
    let mut by_case: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    let mut by_sep: BTreeMap<u64, (usize, usize)> = BTreeMap::new();
    for (case, ok, _) in outcomes {
        let e = by_case.entry(*case).or_default();
        e.0 += *ok as usize;
        e.1 += 1;
        let s = by_sep.entry((grid.separation_hz(*case) * 1000.0).round() as u64).or_default();
        s.0 += *ok as usize;
        s.1 += 1;
    }
    let correct = outcomes.iter().filter(|o| o.1).count();
    MethodResult {
        method: method.to_string(),
        overall: Tally::new("all", correct, outcomes.len()),
        groups: by_sep.into_iter().map(|(s, (c, n))| Tally::new(format!("sep_hz={}", s as f64 / 1000.0), c, n)).collect(),
        per_case: by_case.into_iter().map(|(k, (c, n))| Tally::new(grid.case_name(k), c, n)).collect(),
        confusion: confusion(outcomes.iter().map(|(case, _, p)| (grid.case_name(*case), p.clone()))),
    }
}

/// Test-split outcome of a trained run: top-2 outputs against the true pair.
pub fn evaluate_run(run: &TwoToneRun, method: &str) -> Result<MethodResult> {
    if run.log.epochs.is_empty() {
        return Err(Error::Experiment("membrane+nn network was never trained".into()));
    }
    let idx = run.dataset.indices(Split::Test);
    let pred = nn::predict_items(&run.network, &run.dataset, &idx)?;
    let outcomes: Vec<(usize, bool, String)> = idx
        .iter()
        .zip(&pred)
        .map(|(&i, p)| {
            let f = [run.grid.freqs_hz[p[0]], run.grid.freqs_hz[p[1]]];
            (run.dataset.case(i), *p == run.dataset.positives(i), pair_name(f))
        })
        .collect();
    Ok(assemble(method, &run.grid, &outcomes))
}

pub fn transform_spectrum(method: Method, w: &Waveform, t: &TransformConfig) -> Result<Spectrum> {
    match method {
        Method::Dft => spectral::dft(w),
        Method::Zfft => spectral::zfft(w, t.zfft_center_hz, t.zfft_decimation, t.zfft_pad),
        Method::Czt => spectral::czt(w, t.czt_f_i_hz, t.czt_f_f_hz, t.czt_points),
        Method::MembraneNn => Err(Error::spec("membrane+nn is not a spectral transform")),
    }
}

/// Two-frequency estimate on the grid step, or `None` if the readout band is empty.
pub fn transform_estimate(method: Method, w: &Waveform, t: &TransformConfig, grid_hz: f64) -> Result<Option<[f64; 2]>> {
    let s = transform_spectrum(method, w, t)?;
    Ok(spectral::two_tone_estimate(&s, t.readout_lo_hz, t.readout_hi_hz, t.peak_rel_threshold, grid_hz))
}

/// Number of significant maxima in the readout band.
pub fn resolved_peak_count(method: Method, w: &Waveform, t: &TransformConfig) -> Result<usize> {
    let s = transform_spectrum(method, w, t)?;
    Ok(spectral::significant_peaks(&s, t.readout_lo_hz, t.readout_hi_hz, t.peak_rel_threshold).len())
}

/// Fresh random-phase trials for every pair, scored by rounding both peaks to the grid.
pub fn run_transform_trials(ds: &TwoToneConfig, t: &TransformConfig, method: Method) -> Result<MethodResult> {
    let grid = TwoToneGrid::new(ds)?;
    let trials: Vec<(usize, usize)> =
        (0..grid.cases.len()).flat_map(|c| (0..t.trials_per_case).map(move |r| (c, r))).collect();
    let outcomes: Vec<(usize, bool, String)> = trials
        .par_iter()
        .map(|&(case, rep)| {
            let (i, j) = grid.cases[case];
            let truth = [grid.freqs_hz[i], grid.freqs_hz[j]];
            let w = synth_twotone(ds, truth[0], truth[1], item_seed(ds.seed, TAG_TRIAL, case, rep))?;
            let est = transform_estimate(method, &w, t, grid.step_hz)?;
            let ok = est.is_some_and(|e| (e[0] - truth[0]).abs() < 1e-6 && (e[1] - truth[1]).abs() < 1e-6);
            let name = est.map_or_else(|| "none".to_string(), pair_name);
            Ok((case, ok, name))
        })
        .collect::<Result<_>>()?;
    Ok(assemble(method.name(), &grid, &outcomes))
}

/// How many of `trials` random-phase renditions of the pair show a single
/// significant maximum under `method`.
pub fn merged_peak_trials(ds: &TwoToneConfig, t: &TransformConfig, method: Method, f1: f64, f2: f64, trials: usize) -> Result<usize> {
    let counts: Vec<usize> = (0..trials)
        .into_par_iter()
        .map(|r| {
            let w = synth_twotone(ds, f1, f2, rng::derive(ds.seed, &[0x6d657267, r as u64]))?;
            resolved_peak_count(method, &w, t)
        })
        .collect::<Result<_>>()?;
    Ok(counts.iter().filter(|&&c| c == 1).count())
}

pub fn summarize(name: &str, log: &TrainingLog, threshold: f64) -> TrainingSummary {
    let last = log.last();
    TrainingSummary {
        name: name.to_string(),
        final_train_err: last.map_or(1.0, |r| r.train_err),
        final_test_err: last.map_or(1.0, |r| r.test_err),
        epochs_to_threshold: log.epochs_to_test_error(threshold),
        log: log.clone(),
    }
}

pub fn run_method_comparison(cfg: &ComparisonConfig) -> Result<BenchmarkReport> {
    run_method_comparison_with(cfg, None)
}

/// Uses `trained` for the membrane+nn method when supplied; otherwise trains.
pub fn run_method_comparison_with(cfg: &ComparisonConfig, trained: Option<&TwoToneRun>) -> Result<BenchmarkReport> {
    if cfg.methods.is_empty() {
        return Err(Error::spec("no methods selected"));
    }
    let mut methods = Vec::new();
    let mut training = Vec::new();
    let mut own_run = None;
    for &m in &cfg.methods {
        if m == Method::MembraneNn {
            let run = match trained {
                Some(r) => r,
                None => own_run.insert(train_twotone(&cfg.dataset, &cfg.network, |_| {})?),
            };
            methods.push(evaluate_run(run, m.name())?);
            training.push(summarize(m.name(), &run.log, 0.05));
        } else {
            methods.push(run_transform_trials(&cfg.dataset, &cfg.transforms, m)?);
        }
    }
    Ok(BenchmarkReport {
        experiment: "comparison".into(),
        windows_ms: vec![cfg.dataset.window_ms],
        config_hash: config_hash(cfg)?,
        methods,
        training,
        extra: serde_json::json!({ "dft_step_hz": 1000.0 / cfg.dataset.window_ms }),
    })
}

use super::comparison::{evaluate_run, summarize, train_twotone, TwoToneRun};
use super::config::{config_hash, AblationConfig, MembraneConfig};
use super::report::BenchmarkReport;
use crate::error::{Error, Result};

pub fn channel_run_name(channels: usize) -> String {
    format!("channels={channels}")
}

pub fn run_channel_ablation(cfg: &AblationConfig) -> Result<BenchmarkReport> {
    run_channel_ablation_runs(cfg).map(|(r, _)| r)
}

/// Same pipeline per channel count; also returns the trained runs.
pub fn run_channel_ablation_runs(cfg: &AblationConfig) -> Result<(BenchmarkReport, Vec<TwoToneRun>)> {
    if cfg.channel_counts.is_empty() {
        return Err(Error::spec("no channel counts selected"));
    }
    let mut methods = Vec::new();
    let mut training = Vec::new();
    let mut runs = Vec::new();
    for &n in &cfg.channel_counts {
        let mut ds = cfg.dataset.clone();
        ds.membrane = MembraneConfig { channels: n, ..cfg.dataset.membrane.clone() };
        let run = train_twotone(&ds, &cfg.network, |_| {})?;
        let name = channel_run_name(n);
        methods.push(evaluate_run(&run, &name)?);
        training.push(summarize(&name, &run.log, cfg.error_threshold));
        runs.push(run);
    }
    let report = BenchmarkReport {
        experiment: "ablation".into(),
        windows_ms: vec![cfg.dataset.window_ms],
        config_hash: config_hash(cfg)?,
        methods,
        training,
        extra: serde_json::json!({ "error_threshold": cfg.error_threshold }),
    };
    Ok((report, runs))
}

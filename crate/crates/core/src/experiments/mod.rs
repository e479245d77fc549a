//! End-to-end experiments: two-tone method comparison, channel ablation,
//! short-window vowel sweep and the tonotopy scan.

mod ablation;
mod comparison;
pub mod config;
mod report;
mod tonotopy;
mod twotone;
mod vowels;

pub use ablation::{channel_run_name, run_channel_ablation, run_channel_ablation_runs};
pub use comparison::{
    evaluate_run, merged_peak_trials, resolved_peak_count, run_method_comparison, run_method_comparison_with,
    run_transform_trials, summarize, train_twotone, transform_estimate, transform_spectrum, TwoToneRun,
};
pub use config::{
    AblationConfig, ComparisonConfig, ExperimentConfig, MembraneConfig, Method, NetConfig, Topology, TonotopyConfig,
    TransformConfig, TwoToneConfig, VowelConfig, VowelFeature,
};
pub use report::{confusion, BenchmarkReport, ConfusionEntry, MethodResult, Tally, TrainingSummary};
pub use tonotopy::{reproduce_tonotopy, run_tonotopy, TonotopyMatrix};
pub use twotone::{build_twotone_dataset, membrane_pattern, synth_twotone, TwoToneGrid};
pub use vowels::{build_vowel_datasets, run_vowel_sweep, vowel_accuracy, vowel_features, vowel_sample, window_samples, VowelSample};

use crate::error::Result;

/// Runs any experiment and returns its report.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<BenchmarkReport> {
    match cfg {
        ExperimentConfig::Comparison(c) => run_method_comparison(c),
        ExperimentConfig::Ablation(c) => run_channel_ablation(c),
        ExperimentConfig::Vowels(c) => run_vowel_sweep(c),
        ExperimentConfig::Tonotopy(c) => run_tonotopy(c).map(|(r, _)| r),
    }
}

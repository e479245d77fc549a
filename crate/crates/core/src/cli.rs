//! The `cochlea-bench` command line.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::dataset::{LabeledDataset, Split, Standardizer};
use crate::error::Error;
use crate::experiments::{
    self, build_twotone_dataset, build_vowel_datasets, BenchmarkReport, ExperimentConfig, NetConfig, TonotopyConfig,
    TwoToneConfig, VowelConfig, VowelFeature,
};
use crate::io::{write_atomic, write_atomic_with};
use crate::membrane::{self, FeatureMode, MembraneModel};
use crate::nn;
use crate::signals::{self, synth_tones, synth_vowel, ToneSpec, VowelId, VowelSpec, Waveform};
use crate::spectral;

pub const EXIT_OK: i32 = 0;
pub const EXIT_COMPUTE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "cochlea-bench", version, about = "Membrane-encoding benchmark against DFT, ZFFT and CZT")]
pub struct Cli {
    /// Worker threads (default: all cores; falls back to COCHLEA_BENCH_THREADS)
    #[arg(long, global = true, env = "COCHLEA_BENCH_THREADS")]
    pub threads: Option<usize>,
    /// Suppress diagnostics on stderr
    #[arg(long, short, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize tones or a vowel into a WAV (.wav) or raw f64 file
    Synth(SynthArgs),
    /// Drive a membrane model with a waveform and write the displacement pattern
    Simulate(SimulateArgs),
    /// Spectrum or MFCC of a waveform as CSV
    Transform(TransformArgs),
    /// Build a labeled two-tone or vowel dataset
    Dataset(DatasetArgs),
    /// Train a network on a dataset
    Train(TrainArgs),
    /// Evaluate a trained network on a dataset's test split
    Eval(EvalArgs),
    /// Run an experiment from a JSON config and write its report
    Experiment(ExperimentArgs),
    /// Steady-state channel response to a sweep of pure tones
    Tonotopy(TonotopyArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Tone frequencies in Hz, comma separated
    #[arg(long, value_delimiter = ',', conflicts_with = "vowel")]
    pub tones: Vec<f64>,
    /// Tone amplitudes (linear), comma separated; default 1 each
    #[arg(long, value_delimiter = ',')]
    pub amps: Vec<f64>,
    /// Tone phases in radians, comma separated; default 0 each
    #[arg(long, value_delimiter = ',')]
    pub phases: Vec<f64>,
    /// Synthesize a vowel instead of tones (a, e, i, o, u)
    #[arg(long)]
    pub vowel: Option<VowelId>,
    /// Vowel fundamental in Hz
    #[arg(long, default_value_t = 150.0)]
    pub f0: f64,
    /// Vowel jitter as a fraction of f0 and formant centers
    #[arg(long, default_value_t = 0.0)]
    pub jitter: f64,
    /// Duration in milliseconds
    #[arg(long)]
    pub ms: f64,
    /// Sample rate in Hz
    #[arg(long, default_value_t = 16000.0)]
    pub rate: f64,
    /// Additive white noise standard deviation (linear)
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long)]
    pub seed: u64,
    /// Output path; `.wav` writes 16-bit PCM, anything else raw f64
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Membrane model JSON; otherwise built from the channel flags
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value_t = 6)]
    pub channels: usize,
    /// Lowest channel resonance in Hz
    #[arg(long, default_value_t = 300.0)]
    pub f_low: f64,
    /// Highest channel resonance in Hz
    #[arg(long, default_value_t = 1200.0)]
    pub f_high: f64,
    /// Memory time 2/gamma in milliseconds
    #[arg(long, default_value_t = 1.0)]
    pub q_ms: f64,
    /// Reduce to frames of this many milliseconds
    #[arg(long)]
    pub frame_ms: Option<f64>,
    #[arg(long, value_enum, default_value_t = FeatureArg::Rms)]
    pub mode: FeatureArg,
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Pattern body; the header goes to `<out>.json`
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FeatureArg {
    Rms,
    MeanAbs,
    RawDecimate,
}

impl From<FeatureArg> for FeatureMode {
    fn from(f: FeatureArg) -> Self {
        match f {
            FeatureArg::Rms => FeatureMode::Rms,
            FeatureArg::MeanAbs => FeatureMode::MeanAbs,
            FeatureArg::RawDecimate => FeatureMode::RawDecimate,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TransformMethod {
    Dft,
    Zfft,
    Czt,
    Mfcc,
}

#[derive(Debug, Args)]
pub struct TransformArgs {
    #[arg(long, value_enum)]
    pub method: TransformMethod,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// CZT start frequency in Hz
    #[arg(long, default_value_t = 550.0)]
    pub f_start: f64,
    /// CZT end frequency in Hz
    #[arg(long, default_value_t = 745.0)]
    pub f_end: f64,
    /// CZT output points
    #[arg(long, default_value_t = 40)]
    pub points: usize,
    /// ZFFT center frequency in Hz
    #[arg(long, default_value_t = 650.0)]
    pub center: f64,
    /// ZFFT decimation factor
    #[arg(long, default_value_t = 20)]
    pub decimation: usize,
    /// ZFFT padded length in samples
    #[arg(long, default_value_t = 160)]
    pub pad: usize,
    /// MFCC mel bands
    #[arg(long, default_value_t = 20)]
    pub mels: usize,
    /// MFCC coefficients kept
    #[arg(long, default_value_t = 13)]
    pub coeffs: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DatasetKind {
    Twotone,
    Vowels,
}

#[derive(Debug, Args)]
pub struct DatasetArgs {
    #[arg(long, value_enum, default_value_t = DatasetKind::Twotone)]
    pub kind: DatasetKind,
    /// JSON config (two-tone or vowel fields); flags override it
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: u64,
    /// Training items per case
    #[arg(long)]
    pub n_train: Option<usize>,
    /// Test items per case
    #[arg(long)]
    pub n_test: Option<usize>,
    /// Membrane channels
    #[arg(long)]
    pub channels: Option<usize>,
    /// Window length in milliseconds
    #[arg(long)]
    pub window_ms: Option<f64>,
    /// Vowel feature (membrane, raw, mfcc, zfft, czt)
    #[arg(long, default_value = "membrane")]
    pub feature: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Network JSON config; flags override it
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// SGD learning rate
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
    /// Output directory for model.cbnn, standardizer.json, training.csv
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Directory written by `train`
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Write the result JSON here instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides every seed in the config
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TonotopyArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub channels: Option<usize>,
    /// Lowest channel resonance in Hz
    #[arg(long)]
    pub f_low: Option<f64>,
    /// Highest channel resonance in Hz
    #[arg(long)]
    pub f_high: Option<f64>,
    /// Memory time 2/gamma in milliseconds
    #[arg(long)]
    pub q_ms: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Core(e) if e.is_io() => EXIT_IO,
            CliError::Core(_) => EXIT_COMPUTE,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses and runs; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("cochlea-bench: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli) -> CliResult<()> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| CliError::Usage(e.to_string()))?;
    let log = Log { quiet: cli.quiet };
    pool.install(|| match &cli.command {
        Command::Synth(a) => synth(a, &log),
        Command::Simulate(a) => simulate(a, &log),
        Command::Transform(a) => transform(a, &log),
        Command::Dataset(a) => dataset(a, &log),
        Command::Train(a) => train(a, &log),
        Command::Eval(a) => eval(a, &log),
        Command::Experiment(a) => experiment(a, &log),
        Command::Tonotopy(a) => tonotopy(a, &log),
    })
}

struct Log {
    quiet: bool,
}

impl Log {
    fn info(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }
}

fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn run_record(command: &str, config: &impl Serialize, seed: Option<u64>, started: Instant) -> CliResult<Vec<u8>> {
    let v = json!({
        "command": command,
        "config": config,
        "seed": seed,
        "version": env!("CARGO_PKG_VERSION"),
        "wall_time_s": started.elapsed().as_secs_f64(),
    });
    let mut bytes = serde_json::to_vec_pretty(&v).map_err(Error::from)?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Provenance next to a single-file output.
fn write_file_record(out: &Path, command: &str, config: &impl Serialize, seed: Option<u64>, started: Instant) -> CliResult<()> {
    write_atomic(&sidecar(out, ".run.json"), &run_record(command, config, seed, started)?)?;
    Ok(())
}

fn write_dir_record(dir: &Path, command: &str, config: &impl Serialize, seed: Option<u64>, started: Instant) -> CliResult<()> {
    write_atomic(&dir.join("run.json"), &run_record(command, config, seed, started)?)?;
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let bytes = std::fs::read(path).map_err(Error::from)?;
    serde_json::from_slice(&bytes).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn write_waveform(path: &Path, w: &Waveform) -> CliResult<()> {
    if signals::has_wav_extension(path) {
        write_atomic_with(path, |tmp| signals::write_wav(tmp, w))?;
    } else {
        let mut bytes = Vec::with_capacity(8 * (w.len() + 1));
        signals::write_raw_to(&mut bytes, w)?;
        write_atomic(path, &bytes)?;
    }
    Ok(())
}

fn write_pattern(path: &Path, pat: &membrane::DisplacementPattern) -> CliResult<()> {
    let body: Vec<u8> = pat.values().iter().flat_map(|v| v.to_le_bytes()).collect();
    let header = serde_json::to_vec_pretty(&pat.header()).map_err(Error::from)?;
    write_atomic(path, &body)?;
    write_atomic(&sidecar(path, ".json"), &header)?;
    Ok(())
}

fn synth(a: &SynthArgs, log: &Log) -> CliResult<()> {
    let started = Instant::now();
    let dur = a.ms * 1e-3;
    let w = if let Some(v) = a.vowel {
        let mut spec = VowelSpec::preset(v);
        spec.fundamental_hz = a.f0;
        let w = synth_vowel(&spec, dur, a.rate, a.jitter, a.seed)?;
        if a.noise > 0.0 {
            let mut s = w.into_samples();
            signals::add_white_noise(&mut s, a.noise, a.seed);
            Waveform::new(s, a.rate)?
        } else {
            w
        }
    } else {
        if a.tones.is_empty() {
            return Err(CliError::Usage("give --tones or --vowel".into()));
        }
        let pick = |v: &[f64], i: usize, name: &str, default: f64| -> CliResult<f64> {
            match v.len() {
                0 => Ok(default),
                n if n == a.tones.len() => Ok(v[i]),
                n => Err(CliError::Usage(format!("--{name} has {n} values for {} tones", a.tones.len()))),
            }
        };
        let specs = a
            .tones
            .iter()
            .enumerate()
            .map(|(i, &f)| Ok(ToneSpec::new(f, pick(&a.amps, i, "amps", 1.0)?, pick(&a.phases, i, "phases", 0.0)?)))
            .collect::<CliResult<Vec<_>>>()?;
        synth_tones(&specs, dur, a.rate, a.noise, a.seed)?
    };
    write_waveform(&a.out, &w)?;
    let cfg = json!({ "tones_hz": a.tones, "amps": a.amps, "phases": a.phases, "vowel": a.vowel, "f0_hz": a.f0,
        "jitter": a.jitter, "ms": a.ms, "rate_hz": a.rate, "noise": a.noise });
    write_file_record(&a.out, "synth", &cfg, Some(a.seed), started)?;
    log.info(format!("wrote {} samples to {}", w.len(), a.out.display()));
    Ok(())
}

fn simulate(a: &SimulateArgs, log: &Log) -> CliResult<()> {
    let started = Instant::now();
    let model = match &a.model {
        Some(p) => MembraneModel::read_json(p)?,
        None => membrane::default_model(a.channels, a.f_low, a.f_high, a.q_ms * 1e-3)?,
    };
    let w = signals::read_waveform(&a.input)?;
    let mut pat = membrane::respond(&model, &w)?;
    if let Some(ms) = a.frame_ms {
        pat = membrane::features(&pat, ms, a.mode.into())?;
    }
    write_pattern(&a.out, &pat)?;
    write_file_record(&a.out, "simulate", &json!({ "model": model, "input": a.input, "frame_ms": a.frame_ms }), None, started)?;
    log.info(format!("{} channels x {} frames -> {}", pat.channel_count(), pat.frame_count(), a.out.display()));
    Ok(())
}

fn transform(a: &TransformArgs, log: &Log) -> CliResult<()> {
    let started = Instant::now();
    let w = signals::read_waveform(&a.input)?;
    let csv = match a.method {
        TransformMethod::Mfcc => {
            let c = spectral::mfcc(&w, a.mels, a.coeffs)?;
            let mut s = String::from("coeff,value\n");
            for (i, v) in c.iter().enumerate() {
                s.push_str(&format!("{i},{v:.12e}\n"));
            }
            s
        }
        m => {
            let spec = match m {
                TransformMethod::Dft => spectral::dft(&w)?,
                TransformMethod::Zfft => spectral::zfft(&w, a.center, a.decimation, a.pad)?,
                _ => spectral::czt(&w, a.f_start, a.f_end, a.points)?,
            };
            let mut s = String::from("freq_hz,re,im,mag\n");
            for (j, b) in spec.bins.iter().enumerate() {
                s.push_str(&format!("{},{:.12e},{:.12e},{:.12e}\n", spec.frequency(j), b.re, b.im, b.norm()));
            }
            s
        }
    };
    write_atomic(&a.out, csv.as_bytes())?;
    let cfg = json!({ "method": format!("{:?}", a.method).to_lowercase(), "input": a.input, "f_start_hz": a.f_start,
        "f_end_hz": a.f_end, "points": a.points, "center_hz": a.center, "decimation": a.decimation, "pad": a.pad,
        "mels": a.mels, "coeffs": a.coeffs });
    write_file_record(&a.out, "transform", &cfg, None, started)?;
    log.info(format!("wrote {}", a.out.display()));
    Ok(())
}

fn dataset(a: &DatasetArgs, log: &Log) -> CliResult<()> {
    let started = Instant::now();
    let (ds, cfg) = match a.kind {
        DatasetKind::Twotone => {
            let mut c: TwoToneConfig = a.config.as_deref().map(read_json).transpose()?.unwrap_or_default();
            c.seed = a.seed;
            if let Some(n) = a.n_train {
                c.n_train = n;
            }
            if let Some(n) = a.n_test {
                c.n_test = n;
            }
            if let Some(n) = a.channels {
                c.membrane.channels = n;
            }
            if let Some(ms) = a.window_ms {
                c.window_ms = ms;
            }
            (build_twotone_dataset(&c)?, serde_json::to_value(&c).map_err(Error::from)?)
        }
        DatasetKind::Vowels => {
            let mut c: VowelConfig = a.config.as_deref().map(read_json).transpose()?.unwrap_or_default();
            c.seed = a.seed;
            let feature: VowelFeature = a.feature.parse().map_err(|e: Error| CliError::Usage(e.to_string()))?;
            c.features = vec![feature];
            if let Some(n) = a.n_train {
                c.n_train = n;
            }
            if let Some(n) = a.n_test {
                c.n_test = n;
            }
            if let Some(n) = a.channels {
                c.membrane.channels = n;
            }
            let ms = a.window_ms.unwrap_or(1.0);
            c.windows_ms = vec![ms];
            let ds = build_vowel_datasets(&c, ms)?.pop().map(|(_, d)| d).ok_or_else(|| Error::Experiment("no dataset".into()))?;
            (ds, serde_json::to_value(&c).map_err(Error::from)?)
        }
    };
    ds.check_split_hygiene()?;
    write_atomic_with(&a.out, |tmp| ds.write(tmp))?;
    write_file_record(&a.out, "dataset", &cfg, Some(a.seed), started)?;
    log.info(format!("{} items ({} train, {} test) -> {}", ds.len(), ds.count(Split::Train), ds.count(Split::Test), a.out.display()));
    Ok(())
}

fn train(a: &TrainArgs, log: &Log) -> CliResult<()> {
    let started = Instant::now();
    let mut net_cfg: NetConfig = a.config.as_deref().map(read_json).transpose()?.unwrap_or_default();
    net_cfg.train.seed = a.seed;
    if let Some(e) = a.epochs {
        net_cfg.train.epochs = e;
    }
    if let Some(lr) = a.lr {
        net_cfg.train.learning_rate = lr;
    }
    if let Some(b) = a.batch {
        net_cfg.train.batch_size = b;
    }
    let mut ds = LabeledDataset::read(&a.data)?;
    let standardizer = ds.standardize()?;
    let arch = net_cfg.architecture(ds.input_shape().to_vec(), ds.label_dim(), crate::rng::derive(a.seed, &[0x61726368]));
    let mut net = nn::Network::new(arch)?;
    let tlog = nn::train_with(&mut net, &ds, &net_cfg.train, |r| {
        log.info(format!("epoch {:>3}  loss {:.5}  train_err {:.4}  test_err {:.4}", r.epoch, r.train_loss, r.train_err, r.test_err))
    })?;
    std::fs::create_dir_all(&a.out).map_err(Error::from)?;
    write_atomic(&a.out.join("model.cbnn"), &nn::checkpoint_bytes(&net)?)?;
    write_atomic(&a.out.join("standardizer.json"), &serde_json::to_vec(&standardizer).map_err(Error::from)?)?;
    write_atomic(&a.out.join("training.csv"), tlog.to_csv().as_bytes())?;
    write_dir_record(&a.out, "train", &json!({ "network": net_cfg, "data": a.data }), Some(a.seed), started)?;
    Ok(())
}

#[derive(Serialize)]
struct EvalResult {
    test_items: usize,
    correct: usize,
    accuracy: f64,
}

fn eval(a: &EvalArgs, log: &Log) -> CliResult<()> {
    let net = nn::load_checkpoint(&a.model.join("model.cbnn"))?;
    let standardizer: Standardizer = read_json(&a.model.join("standardizer.json"))?;
    let mut ds = LabeledDataset::read(&a.data)?;
    ds.apply_standardizer(&standardizer)?;
    let idx = ds.indices(Split::Test);
    let err = nn::error_rate(&net, &ds, &idx)?;
    let correct = idx.len() - (err * idx.len() as f64).round() as usize;
    let r = EvalResult { test_items: idx.len(), correct, accuracy: 1.0 - err };
    let mut bytes = serde_json::to_vec_pretty(&r).map_err(Error::from)?;
    bytes.push(b'\n');
    match &a.out {
        Some(p) => {
            write_atomic(p, &bytes)?;
            log.info(format!("accuracy {:.4} -> {}", r.accuracy, p.display()));
        }
        None => print!("{}", String::from_utf8_lossy(&bytes)),
    }
    Ok(())
}

fn set_seed(cfg: &mut ExperimentConfig, seed: u64) {
    match cfg {
        ExperimentConfig::Comparison(c) => {
            c.dataset.seed = seed;
            c.network.train.seed = seed;
        }
        ExperimentConfig::Ablation(c) => {
            c.dataset.seed = seed;
            c.network.train.seed = seed;
        }
        ExperimentConfig::Vowels(c) => {
            c.seed = seed;
            c.network.train.seed = seed;
        }
        ExperimentConfig::Tonotopy(_) => {}
    }
}

fn write_report(dir: &Path, report: &BenchmarkReport) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(Error::from)?;
    report.write_dir(dir)?;
    Ok(())
}

fn experiment(a: &ExperimentArgs, log: &Log) -> CliResult<()> {
    let started = Instant::now();
    let bytes = std::fs::read(&a.config).map_err(Error::from)?;
    let mut cfg: ExperimentConfig =
        serde_json::from_slice(&bytes).map_err(|e| CliError::Usage(format!("{}: {e}", a.config.display())))?;
    if let Some(s) = a.seed {
        set_seed(&mut cfg, s);
    }
    log.info(format!("running {} experiment", cfg.name()));
    let report = experiments::run_experiment(&cfg)?;
    write_report(&a.out, &report)?;
    write_dir_record(&a.out, "experiment", &cfg, a.seed, started)?;
    for m in &report.methods {
        log.info(format!("{:<16} {:>6}/{:<6} {:.4}", m.method, m.overall.correct, m.overall.trials, m.overall.accuracy));
    }
    Ok(())
}

fn tonotopy(a: &TonotopyArgs, log: &Log) -> CliResult<()> {
    let started = Instant::now();
    let mut cfg: TonotopyConfig = a.config.as_deref().map(read_json).transpose()?.unwrap_or_default();
    if let Some(n) = a.channels {
        cfg.membrane.channels = n;
    }
    if let Some(f) = a.f_low {
        cfg.membrane.f_low_hz = f;
    }
    if let Some(f) = a.f_high {
        cfg.membrane.f_high_hz = f;
    }
    if let Some(q) = a.q_ms {
        cfg.membrane.q_time_ms = q;
    }
    let (report, m) = experiments::run_tonotopy(&cfg)?;
    write_report(&a.out, &report)?;
    write_dir_record(&a.out, "tonotopy", &cfg, None, started)?;
    log.info(format!("argmax channels {:?}, monotone {}", m.argmax_channels(), m.is_monotone()));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> std::result::Result<Cli, clap::Error> {
        Cli::try_parse_from(std::iter::once("cochlea-bench").chain(args.iter().copied()))
    }

    #[test]
    fn synth_flags_parse() {
        let cli = parse(&["synth", "--tones", "605,610", "--ms", "50", "--rate", "16000", "--seed", "1", "--out", "a.wav"]).unwrap();
        match cli.command {
            Command::Synth(a) => {
                assert_eq!(a.tones, vec![605.0, 610.0]);
                assert_eq!(a.seed, 1);
            }
            _ => panic!(),
        }
    }

    #[test]
    fn missing_seed_and_unknown_flag_are_usage_errors() {
        assert!(parse(&["synth", "--tones", "605", "--ms", "50", "--out", "a.wav"]).is_err());
        assert!(parse(&["tonotopy", "--out", "d", "--bogus"]).is_err());
        assert_eq!(main_with_args(["cochlea-bench", "synth", "--ms", "5", "--out", "x.wav"]), EXIT_USAGE);
    }

    #[test]
    fn missing_config_is_io_error() {
        let code = main_with_args(["cochlea-bench", "-q", "experiment", "--config", "/nonexistent/missing.json", "--out", "/tmp/x"]);
        assert_eq!(code, EXIT_IO);
    }
}

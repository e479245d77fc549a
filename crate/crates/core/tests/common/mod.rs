#![allow(dead_code)]

use std::f64::consts::PI;

use cochlea_core::membrane::{self, MembraneModel, OscillatorParams};
use cochlea_core::nn::{Architecture, LayerSpec, Network};
use cochlea_core::signals::{synth_tones, ToneSpec, Waveform};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Textbook sum with exact integer phase reduction.
pub fn naive_dft(s: &[f64]) -> Vec<Complex64> {
    let n = s.len();
    (0..n)
        .map(|j| {
            let mut re = 0.0;
            let mut im = 0.0;
            for (k, &x) in s.iter().enumerate() {
                let a = 2.0 * PI * ((j * k) % n) as f64 / n as f64;
                re += x * a.cos();
                im += x * a.sin();
            }
            Complex64::new(re / n as f64, im / n as f64)
        })
        .collect()
}

pub fn max_abs_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn random_signal(n: usize, seed: u64) -> Vec<f64> {
    let mut g = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| g.random_range(-1.0..1.0)).collect()
}

pub fn tone(f: f64, ms: f64, fs: f64) -> Waveform {
    synth_tones(&[ToneSpec::new(f, 1.0, 0.0)], ms * 1e-3, fs, 0.0, 0).unwrap()
}

/// Steady-state step displacement of the RK4 oracle relative to F0/(m w0^2).
pub fn step_response_error(p: &OscillatorParams, fs: f64) -> f64 {
    let n = (40.0 * p.memory_time_s() * fs) as usize;
    let w = Waveform::new(vec![1.0; n], fs).unwrap();
    let x = membrane::ode_oracle(p, &w).unwrap();
    let expected = 1.0 / (p.mass * p.omega0_rad_s * p.omega0_rad_s);
    (x[n - 1] - expected).abs() / expected
}

/// Steady-state amplitude at resonance relative to 1/(m gamma w0).
pub fn resonance_error(p: &OscillatorParams, fs: f64) -> f64 {
    let settle = 20.0 * p.memory_time_s();
    let period = 1.0 / p.resonance_hz();
    let dur = settle + 20.0 * period;
    let w = tone(p.resonance_hz(), dur * 1e3, fs);
    let x = membrane::ode_oracle(p, &w).unwrap();
    let start = (settle * fs) as usize;
    let tail = &x[start..];
    let rms = (tail.iter().map(|v| v * v).sum::<f64>() / tail.len() as f64).sqrt();
    let expected = 1.0 / (p.mass * p.gamma_per_s * p.omega0_rad_s);
    (rms * 2f64.sqrt() - expected).abs() / expected
}

/// Largest relative gap between convolution and ODE channel RMS over a tone.
pub fn green_vs_ode_error(model: &MembraneModel, f: f64, fs: f64) -> f64 {
    let w = tone(f, 50.0, fs);
    let pat = membrane::respond(model, &w).unwrap();
    let skip = w.len() / 2;
    let conv = pat.channel_rms(skip);
    model
        .channels
        .iter()
        .zip(conv)
        .map(|(p, c)| {
            let x = membrane::ode_oracle(p, &w).unwrap();
            let tail = &x[skip..];
            let o = (tail.iter().map(|v| v * v).sum::<f64>() / tail.len() as f64).sqrt();
            (c - o).abs() / o
        })
        .fold(0.0, f64::max)
}

pub fn small_conv_arch(seed: u64) -> Architecture {
    Architecture {
        input_shape: vec![1, 4, 6],
        layers: vec![
            LayerSpec::Conv2d { filters: 3, kernel_h: 2, kernel_w: 3, stride: 1 },
            LayerSpec::Relu,
            LayerSpec::Flatten,
            LayerSpec::Dense { units: 7 },
            LayerSpec::Relu,
            LayerSpec::Dense { units: 5 },
            LayerSpec::Sigmoid,
        ],
        seed,
    }
}

/// Central-difference check of every parameter; returns the worst relative error.
pub fn gradient_check(seed: u64) -> f64 {
    let net = Network::new(small_conv_arch(seed)).unwrap();
    let batch = 2;
    let mut g = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let x: Vec<f64> = (0..batch * net.input_len()).map(|_| g.random_range(-1.0..1.0)).collect();
    let t: Vec<f64> = (0..batch * net.output_len()).map(|_| g.random_range(0.0..1.0)).collect();
    let (_, grads, _) = net.gradients(&x, &t, batch).unwrap();
    let analytic = grads.flat();
    let base = net.params_flat();
    let eps = 1e-6;
    let mut worst: f64 = 0.0;
    for (i, a) in analytic.iter().enumerate() {
        let mut probe = net.clone();
        let mut p = base.clone();
        p[i] = base[i] + eps;
        probe.set_params_flat(&p).unwrap();
        let up = probe.gradients(&x, &t, batch).unwrap().0;
        p[i] = base[i] - eps;
        probe.set_params_flat(&p).unwrap();
        let down = probe.gradients(&x, &t, batch).unwrap().0;
        let numeric = (up - down) / (2.0 * eps);
        let scale = a.abs().max(numeric.abs());
        if scale > 1e-7 {
            worst = worst.max((a - numeric).abs() / scale);
        }
    }
    worst
}

/// Reduced comparison, vowel and tonotopy runs rendered as report files.
pub fn small_reports() -> Vec<(String, Vec<u8>)> {
    use cochlea_core::experiments::*;
    let mut network = NetConfig::default();
    network.train.epochs = 3;
    let dataset = TwoToneConfig { f_max_hz: 625.0, n_train: 4, n_test: 2, ..Default::default() };
    let comparison = ComparisonConfig {
        dataset,
        network: network.clone(),
        transforms: TransformConfig { trials_per_case: 2, ..Default::default() },
        methods: Method::ALL.to_vec(),
    };
    let vowels = VowelConfig { windows_ms: vec![1.0, 5.0], n_train: 4, n_test: 2, network, ..Default::default() };
    let mut out = Vec::new();
    for (name, report) in [
        ("comparison", run_method_comparison(&comparison).unwrap()),
        ("vowels", run_vowel_sweep(&vowels).unwrap()),
        ("tonotopy", run_tonotopy(&TonotopyConfig::default()).unwrap().0),
    ] {
        for (file, bytes) in report.files().unwrap() {
            out.push((format!("{name}/{file}"), bytes));
        }
    }
    out
}

pub fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{config_hash, TonotopyConfig};
use super::report::BenchmarkReport;
use crate::error::{Error, Result};
use crate::membrane::{self, MembraneModel};
use crate::signals::{synth_tones, ToneSpec, Waveform};

/// Steady-state RMS displacement, one row per tone, one column per channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TonotopyMatrix {
    pub tones_hz: Vec<f64>,
    pub channel_freqs_hz: Vec<f64>,
    pub rms: Vec<Vec<f64>>,
}

impl TonotopyMatrix {
    /// Strongest channel per tone, lower index on ties.
    pub fn argmax_channels(&self) -> Vec<usize> {
        self.rms
            .iter()
            .map(|row| (0..row.len()).fold(0, |best, c| if row[c] > row[best] { c } else { best }))
            .collect()
    }

    pub fn is_monotone(&self) -> bool {
        self.argmax_channels().windows(2).all(|w| w[1] >= w[0])
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("tone_hz");
        for f in &self.channel_freqs_hz {
            s.push_str(&format!(",ch_{f:.1}"));
        }
        s.push('\n');
        for (t, row) in self.tones_hz.iter().zip(&self.rms) {
            s.push_str(&format!("{t}"));
            for v in row {
                s.push_str(&format!(",{v:.9e}"));
            }
            s.push('\n');
        }
        s
    }
}

pub fn reproduce_tonotopy(
    model: &MembraneModel,
    tones_hz: &[f64],
    amplitude: f64,
    duration_s: f64,
    discard_s: f64,
    sample_rate_hz: f64,
) -> Result<TonotopyMatrix> {
    model.validate()?;
    if !(amplitude.is_finite() && amplitude >= 0.0) {
        return Err(Error::spec("amplitude must be non-negative"));
    }
    if !(discard_s >= 0.0 && duration_s > discard_s) {
        return Err(Error::spec("duration must exceed the discarded transient"));
    }
    let n = (duration_s * sample_rate_hz).round() as usize;
    let skip = (discard_s * sample_rate_hz).round() as usize;
    let rms = tones_hz
        .par_iter()
        .map(|&f| {
            let w = if amplitude == 0.0 {
                Waveform::zeros(n, sample_rate_hz)?
            } else {
                synth_tones(&[ToneSpec::new(f, amplitude, 0.0)], duration_s, sample_rate_hz, 0.0, 0)?
            };
            Ok(membrane::respond(model, &w)?.channel_rms(skip))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TonotopyMatrix { tones_hz: tones_hz.to_vec(), channel_freqs_hz: model.channel_freqs_hz(), rms })
}

pub fn run_tonotopy(cfg: &TonotopyConfig) -> Result<(BenchmarkReport, TonotopyMatrix)> {
    let model = cfg.membrane.model()?;
    let m = reproduce_tonotopy(
        &model,
        &cfg.tone_grid()?,
        cfg.amplitude,
        cfg.duration_ms * 1e-3,
        cfg.discard_ms * 1e-3,
        cfg.sample_rate_hz,
    )?;
    let report = BenchmarkReport {
        experiment: "tonotopy".into(),
        windows_ms: vec![cfg.duration_ms - cfg.discard_ms],
        config_hash: config_hash(cfg)?,
        methods: Vec::new(),
        training: Vec::new(),
        extra: serde_json::json!({
            "matrix": m,
            "argmax_channels": m.argmax_channels(),
            "monotone": m.is_monotone(),
            "matrix_csv": m.to_csv(),
        }),
    };
    Ok((report, m))
}

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::nn::TrainingLog;

/// Correct/total tally for one group of trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tally {
    pub group: String,
    pub correct: usize,
    pub trials: usize,
    pub accuracy: f64,
}

impl Tally {
    pub fn new(group: impl Into<String>, correct: usize, trials: usize) -> Self {
        let accuracy = if trials == 0 { 0.0 } else { correct as f64 / trials as f64 };
        Self { group: group.into(), correct, trials, accuracy }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionEntry {
    pub truth: String,
    pub predicted: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub method: String,
    pub overall: Tally,
    /// Grouped tallies, e.g. per frequency separation or per window.
    pub groups: Vec<Tally>,
    pub per_case: Vec<Tally>,
    pub confusion: Vec<ConfusionEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub name: String,
    pub final_train_err: f64,
    pub final_test_err: f64,
    pub epochs_to_threshold: Option<usize>,
    pub log: TrainingLog,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub experiment: String,
    pub windows_ms: Vec<f64>,
    pub config_hash: String,
    pub methods: Vec<MethodResult>,
    pub training: Vec<TrainingSummary>,
    /// Experiment-specific extras, such as the tonotopy matrix.
    pub extra: serde_json::Value,
}

impl BenchmarkReport {
    pub fn method(&self, name: &str) -> Option<&MethodResult> {
        self.methods.iter().find(|m| m.method == name)
    }

    pub fn training(&self, name: &str) -> Option<&TrainingSummary> {
        self.training.iter().find(|t| t.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// One row per (method, group), plus an `all` row per method.
    pub fn summary_csv(&self) -> String {
        let mut s = String::from("method,group,correct,trials,accuracy\n");
        for m in &self.methods {
            for t in std::iter::once(&m.overall).chain(&m.groups) {
                s.push_str(&format!("{},{},{},{},{:.6}\n", m.method, t.group, t.correct, t.trials, t.accuracy));
            }
        }
        s
    }

    pub fn method_csv(m: &MethodResult) -> String {
        let mut s = String::from("case,correct,trials,accuracy\n");
        for t in &m.per_case {
            s.push_str(&format!("{},{},{},{:.6}\n", t.group, t.correct, t.trials, t.accuracy));
        }
        s
    }

    /// File name and contents of every artifact of the report.
    pub fn files(&self) -> Result<Vec<(String, Vec<u8>)>> {
        let mut out = vec![
            ("report.json".to_string(), self.to_json()?.into_bytes()),
            ("summary.csv".to_string(), self.summary_csv().into_bytes()),
        ];
        for m in &self.methods {
            out.push((format!("method_{}.csv", sanitize(&m.method)), Self::method_csv(m).into_bytes()));
        }
        for t in &self.training {
            out.push((format!("training_{}.csv", sanitize(&t.name)), t.log.to_csv().into_bytes()));
        }
        if let Some(csv) = self.extra.get("matrix_csv").and_then(|v| v.as_str()) {
            out.push(("tonotopy.csv".to_string(), csv.as_bytes().to_vec()));
        }
        Ok(out)
    }

    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, bytes) in self.files()? {
            crate::io::write_atomic(&dir.join(name), &bytes)?;
        }
        Ok(())
    }
}

fn sanitize(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

/// Sorted confusion entries from (truth, predicted) pairs.
pub fn confusion<I: IntoIterator<Item = (String, String)>>(pairs: I) -> Vec<ConfusionEntry> {
    let mut counts: BTreeMap<(String, String), usize> = BTreeMap::new();
    for p in pairs {
        *counts.entry(p).or_default() += 1;
    }
    counts.into_iter().map(|((truth, predicted), count)| ConfusionEntry { truth, predicted, count }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tallies_and_csv() {
        let m = MethodResult {
            method: "czt".into(),
            overall: Tally::new("all", 3, 4),
            groups: vec![Tally::new("sep_hz=5", 1, 2)],
            per_case: vec![Tally::new("600+605", 1, 2)],
            confusion: confusion(vec![("a".into(), "b".into()), ("a".into(), "b".into()), ("a".into(), "a".into())]),
        };
        assert_eq!(m.confusion.iter().map(|c| c.count).sum::<usize>(), 3);
        let r = BenchmarkReport {
            experiment: "comparison".into(),
            windows_ms: vec![50.0],
            config_hash: "x".into(),
            methods: vec![m],
            training: vec![],
            extra: serde_json::Value::Null,
        };
        assert_eq!(r.summary_csv(), "method,group,correct,trials,accuracy\nczt,all,3,4,0.750000\nczt,sep_hz=5,1,2,0.500000\n");
        assert_eq!(r.files().unwrap().len(), 3);
        assert_eq!(Tally::new("z", 0, 0).accuracy, 0.0);
    }
}

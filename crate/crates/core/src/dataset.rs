//! Labeled tensors with a train/test split, plus a binary file format.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"CBDS";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    input_shape: Vec<usize>,
    label_dim: usize,
    inputs: Vec<f64>,
    labels: Vec<f64>,
    splits: Vec<Split>,
    cases: Vec<usize>,
    ids: Vec<u64>,
    pub metadata: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
struct Header {
    input_shape: Vec<usize>,
    label_dim: usize,
    splits: Vec<Split>,
    cases: Vec<usize>,
    ids: Vec<u64>,
    metadata: serde_json::Value,
}

/// Per-element mean and standard deviation fitted on the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn apply(&self, x: &mut [f64]) {
        for row in x.chunks_exact_mut(self.mean.len()) {
            for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
                *v = (*v - m) / s;
            }
        }
    }
}

impl LabeledDataset {
    pub fn new(input_shape: Vec<usize>, label_dim: usize, metadata: serde_json::Value) -> Result<Self> {
        if input_shape.is_empty() || input_shape.contains(&0) || label_dim == 0 {
            return Err(Error::shape("dataset needs a non-empty input shape and label dimension"));
        }
        Ok(Self {
            input_shape,
            label_dim,
            inputs: Vec::new(),
            labels: Vec::new(),
            splits: Vec::new(),
            cases: Vec::new(),
            ids: Vec::new(),
            metadata,
        })
    }

    pub fn push(&mut self, input: &[f64], label: &[f64], split: Split, case: usize, id: u64) -> Result<()> {
        if input.len() != self.input_len() {
            return Err(Error::shape(format!("input of {} values, expected {}", input.len(), self.input_len())));
        }
        if label.len() != self.label_dim {
            return Err(Error::shape(format!("label of {} values, expected {}", label.len(), self.label_dim)));
        }
        if input.iter().chain(label).any(|v| !v.is_finite()) {
            return Err(Error::input("dataset values must be finite"));
        }
        self.inputs.extend_from_slice(input);
        self.labels.extend_from_slice(label);
        self.splits.push(split);
        self.cases.push(case);
        self.ids.push(id);
        Ok(())
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn input_len(&self) -> usize {
        self.input_shape.iter().product()
    }

    pub fn label_dim(&self) -> usize {
        self.label_dim
    }

    pub fn len(&self) -> usize {
        self.splits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.splits.is_empty()
    }

    pub fn input(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.input_len()..(i + 1) * self.input_len()]
    }

    pub fn label(&self, i: usize) -> &[f64] {
        &self.labels[i * self.label_dim..(i + 1) * self.label_dim]
    }

    pub fn split(&self, i: usize) -> Split {
        self.splits[i]
    }

    pub fn case(&self, i: usize) -> usize {
        self.cases[i]
    }

    pub fn id(&self, i: usize) -> u64 {
        self.ids[i]
    }

    pub fn indices(&self, split: Split) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.splits[i] == split).collect()
    }

    pub fn count(&self, split: Split) -> usize {
        self.splits.iter().filter(|&&s| s == split).count()
    }

    /// Active label positions of item `i`.
    pub fn positives(&self, i: usize) -> Vec<usize> {
        self.label(i).iter().enumerate().filter(|(_, &v)| v > 0.5).map(|(j, _)| j).collect()
    }

    /// Gathers rows for `idx` into contiguous input and label buffers.
    pub fn gather(&self, idx: &[usize]) -> (Vec<f64>, Vec<f64>) {
        let mut x = Vec::with_capacity(idx.len() * self.input_len());
        let mut y = Vec::with_capacity(idx.len() * self.label_dim);
        for &i in idx {
            x.extend_from_slice(self.input(i));
            y.extend_from_slice(self.label(i));
        }
        (x, y)
    }

    /// Fit on the training split.
    pub fn fit_standardizer(&self) -> Result<Standardizer> {
        let train = self.indices(Split::Train);
        if train.is_empty() {
            return Err(Error::input("no training items to fit a standardizer on"));
        }
        let n = self.input_len();
        let mut mean = vec![0.0; n];
        for &i in &train {
            for (m, v) in mean.iter_mut().zip(self.input(i)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= train.len() as f64);
        let mut var = vec![0.0; n];
        for &i in &train {
            for ((s, v), m) in var.iter_mut().zip(self.input(i)).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var.into_iter().map(|s| (s / train.len() as f64).sqrt() + 1e-9).collect();
        Ok(Standardizer { mean, std })
    }

    pub fn apply_standardizer(&mut self, s: &Standardizer) -> Result<()> {
        if s.mean.len() != self.input_len() {
            return Err(Error::shape("standardizer does not match input size"));
        }
        s.apply(&mut self.inputs);
        Ok(())
    }

    /// Fit on train and apply to every item.
    pub fn standardize(&mut self) -> Result<Standardizer> {
        let s = self.fit_standardizer()?;
        self.apply_standardizer(&s)?;
        Ok(s)
    }

    /// Errors if any test input is bit-identical to a training input.
    pub fn check_split_hygiene(&self) -> Result<()> {
        let mut seen: HashMap<[u8; 32], Vec<usize>> = HashMap::new();
        for i in self.indices(Split::Train) {
            seen.entry(hash_row(self.input(i))).or_default().push(i);
        }
        for i in self.indices(Split::Test) {
            if let Some(train) = seen.get(&hash_row(self.input(i))) {
                if train.iter().any(|&j| self.input(j) == self.input(i)) {
                    return Err(Error::Experiment(format!("test item {i} duplicates a training input")));
                }
            }
        }
        Ok(())
    }

    /// Items for which `keep` is true, preserving order and metadata.
    pub fn filter(&self, keep: impl Fn(usize) -> bool) -> Self {
        let mut out = Self { inputs: Vec::new(), labels: Vec::new(), splits: Vec::new(), cases: Vec::new(), ids: Vec::new(), ..self.clone_header() };
        for i in (0..self.len()).filter(|&i| keep(i)) {
            out.inputs.extend_from_slice(self.input(i));
            out.labels.extend_from_slice(self.label(i));
            out.splits.push(self.splits[i]);
            out.cases.push(self.cases[i]);
            out.ids.push(self.ids[i]);
        }
        out
    }

    fn clone_header(&self) -> Self {
        Self {
            input_shape: self.input_shape.clone(),
            label_dim: self.label_dim,
            inputs: Vec::new(),
            labels: Vec::new(),
            splits: Vec::new(),
            cases: Vec::new(),
            ids: Vec::new(),
            metadata: self.metadata.clone(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        self.write_to(&mut out)?;
        out.flush()?;
        Ok(())
    }

    pub fn write_to(&self, out: &mut impl Write) -> Result<()> {
        let header = serde_json::to_vec(&Header {
            input_shape: self.input_shape.clone(),
            label_dim: self.label_dim,
            splits: self.splits.clone(),
            cases: self.cases.clone(),
            ids: self.ids.clone(),
            metadata: self.metadata.clone(),
        })?;
        out.write_all(MAGIC)?;
        out.write_all(&VERSION.to_le_bytes())?;
        out.write_all(&(header.len() as u64).to_le_bytes())?;
        out.write_all(&header)?;
        for v in self.inputs.iter().chain(&self.labels) {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 || &bytes[..4] != MAGIC {
            return Err(Error::Corrupt("not a dataset file".into()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
        if version != VERSION {
            return Err(Error::Version { found: version, expected: VERSION });
        }
        let hlen = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
        let body = bytes.get(16..).ok_or_else(|| Error::Corrupt("truncated dataset".into()))?;
        if body.len() < hlen {
            return Err(Error::Corrupt("truncated dataset header".into()));
        }
        let header: Header = serde_json::from_slice(&body[..hlen]).map_err(|e| Error::Corrupt(format!("dataset header: {e}")))?;
        let n = header.splits.len();
        if header.cases.len() != n || header.ids.len() != n {
            return Err(Error::Corrupt("dataset header arrays differ in length".into()));
        }
        let mut ds = Self::new(header.input_shape, header.label_dim, header.metadata)?;
        let values = &body[hlen..];
        let n_in = n * ds.input_len();
        let n_lab = n * ds.label_dim;
        if values.len() != 8 * (n_in + n_lab) {
            return Err(Error::Corrupt(format!("dataset body has {} bytes, expected {}", values.len(), 8 * (n_in + n_lab))));
        }
        let floats: Vec<f64> = values.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        ds.inputs = floats[..n_in].to_vec();
        ds.labels = floats[n_in..].to_vec();
        ds.splits = header.splits;
        ds.cases = header.cases;
        ds.ids = header.ids;
        Ok(ds)
    }
}

fn hash_row(row: &[f64]) -> [u8; 32] {
    let mut h = Sha256::new();
    for v in row {
        h.update(v.to_bits().to_le_bytes());
    }
    h.finalize().into()
}

/// Hex SHA-256 of arbitrary bytes.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> LabeledDataset {
        let mut d = LabeledDataset::new(vec![2], 2, serde_json::json!({"k": 1})).unwrap();
        d.push(&[1.0, 2.0], &[1.0, 0.0], Split::Train, 0, 10).unwrap();
        d.push(&[3.0, 6.0], &[0.0, 1.0], Split::Train, 1, 11).unwrap();
        d.push(&[2.0, 5.0], &[0.0, 1.0], Split::Test, 1, 12).unwrap();
        d
    }

    #[test]
    fn push_checks_shapes() {
        let mut d = toy();
        assert!(d.push(&[1.0], &[1.0, 0.0], Split::Train, 0, 0).is_err());
        assert!(d.push(&[1.0, 1.0], &[1.0], Split::Train, 0, 0).is_err());
        assert_eq!(d.count(Split::Train), 2);
        assert_eq!(d.positives(2), vec![1]);
    }

    #[test]
    fn standardizer_uses_train_only() {
        let mut d = toy();
        let s = d.standardize().unwrap();
        assert_eq!(s.mean, vec![2.0, 4.0]);
        assert!((d.input(0)[0] + 1.0).abs() < 1e-6);
        assert!((d.input(2)[1] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn hygiene_detects_leak() {
        let mut d = toy();
        d.check_split_hygiene().unwrap();
        d.push(&[1.0, 2.0], &[1.0, 0.0], Split::Test, 0, 13).unwrap();
        assert!(d.check_split_hygiene().is_err());
    }

    #[test]
    fn file_round_trip_and_corruption() {
        let d = toy();
        let mut buf = Vec::new();
        d.write_to(&mut buf).unwrap();
        assert_eq!(LabeledDataset::from_bytes(&buf).unwrap(), d);
        assert!(matches!(LabeledDataset::from_bytes(&buf[..buf.len() - 3]), Err(Error::Corrupt(_))));
        let mut bad = buf.clone();
        bad[4] = 9;
        assert!(matches!(LabeledDataset::from_bytes(&bad), Err(Error::Version { .. })));
    }
}

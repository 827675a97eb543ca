//! Embedding datasets: in-memory representation, the `EMC1` file format and
//! a synthetic generator that stands in for a frozen encoder.

mod format;
mod synth;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use format::{read_dataset, read_dataset_with, sidecar_path, write_dataset, ReadOptions, MAGIC, VERSION};
pub use synth::{generate_synthetic, SyntheticSpec};

/// One split of a dataset: `len` vectors of dimension `d`, stored contiguously.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Split {
    d: usize,
    vectors: Vec<f32>,
    labels: Vec<u16>,
}

impl Split {
    pub fn new(d: usize) -> Self {
        Self {
            d,
            vectors: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn with_capacity(d: usize, n: usize) -> Self {
        Self {
            d,
            vectors: Vec::with_capacity(n * d),
            labels: Vec::with_capacity(n),
        }
    }

    pub fn push(&mut self, vector: &[f32], label: u16) {
        assert_eq!(vector.len(), self.d, "record dimension");
        self.vectors.extend_from_slice(vector);
        self.labels.push(label);
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn vector(&self, i: usize) -> &[f32] {
        &self.vectors[i * self.d..(i + 1) * self.d]
    }

    pub fn vector_f64(&self, i: usize) -> Vec<f64> {
        self.vector(i).iter().map(|&x| f64::from(x)).collect()
    }

    pub fn label(&self, i: usize) -> usize {
        usize::from(self.labels[i])
    }

    pub fn labels(&self) -> &[u16] {
        &self.labels
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f32], usize)> {
        self.vectors
            .chunks_exact(self.d.max(1))
            .zip(&self.labels)
            .map(|(v, &l)| (v, usize::from(l)))
    }

    pub fn class_counts(&self, m: usize) -> Vec<usize> {
        let mut counts = vec![0; m];
        for &l in &self.labels {
            if let Some(c) = counts.get_mut(usize::from(l)) {
                *c += 1;
            }
        }
        counts
    }
}

/// Provenance carried in the JSON sidecar next to a dataset file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub source: String,
    #[serde(default)]
    pub params: serde_json::Value,
    #[serde(default)]
    pub class_names: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingDataset {
    pub d: usize,
    pub m: usize,
    pub train: Split,
    pub test: Split,
    pub meta: DatasetMeta,
}

impl EmbeddingDataset {
    /// Checks every record and, when `require_all_classes`, that each class
    /// appears in both splits.
    pub fn validate(&self, require_all_classes: bool) -> Result<()> {
        if self.d == 0 || self.m == 0 {
            return Err(Error::Dataset(format!(
                "dimension and class count must be positive (d={}, m={})",
                self.d, self.m
            )));
        }
        if self.m > usize::from(u16::MAX) + 1 {
            return Err(Error::Dataset(format!("{} classes exceed the label range", self.m)));
        }
        for (name, split) in [("train", &self.train), ("test", &self.test)] {
            if split.d != self.d {
                return Err(Error::Dataset(format!(
                    "{name} split has dimension {}, dataset has {}",
                    split.d, self.d
                )));
            }
            for (i, (v, l)) in split.iter().enumerate() {
                if l >= self.m {
                    return Err(Error::Dataset(format!(
                        "{name} record {i} has label {l} >= {}",
                        self.m
                    )));
                }
                check_vector(v).map_err(|e| Error::Dataset(format!("{name} record {i}: {e}")))?;
            }
        }
        if require_all_classes {
            if let Some(msg) = self.missing_classes().into_iter().next() {
                return Err(Error::Dataset(msg));
            }
        }
        Ok(())
    }

    /// One message per (split, class) pair with no records.
    pub fn missing_classes(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (name, split) in [("train", &self.train), ("test", &self.test)] {
            for (c, &n) in split.class_counts(self.m).iter().enumerate() {
                if n == 0 {
                    let label = self
                        .meta
                        .class_names
                        .get(c)
                        .map(|s| format!(" ({s})"))
                        .unwrap_or_default();
                    out.push(format!("class {c}{label} has no {name} records"));
                }
            }
        }
        out
    }
}

pub(crate) fn check_vector(v: &[f32]) -> std::result::Result<(), String> {
    if let Some(j) = v.iter().position(|x| !x.is_finite()) {
        return Err(format!("component {j} is not finite"));
    }
    if v.iter().all(|&x| x == 0.0) {
        return Err("zero vector".into());
    }
    Ok(())
}

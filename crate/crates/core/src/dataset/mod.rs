//! `(x, y, I_d, w)` samples for width regression.
//!
//! One sample per power-grid interconnect: its midpoint, the switching current
//! attributed to it and its golden width. Also the single-feature /
//! combined least-squares scan, seeded train/test splitting, min-max
//! normalization and the γ-perturbation used to derive test instances.

mod extract;
mod io;
mod perturb;
mod scan;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use extract::{extract_features, ExtractOptions, GoldenWidths};
pub use io::{read_dataset_csv, read_normalizer_csv, write_dataset_csv, write_normalizer_csv};
pub use perturb::{perturb, perturb_in_place, PerturbMode, PerturbTarget, PerturbationSpec};
pub use scan::{feature_scan, ols_r2, r2_score, FeatureScan};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("node `{0}` has no layout coordinates")]
    NoCoordinates(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("target has zero variance")]
    DegenerateTarget,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("line {line}: {reason}")]
    MalformedCsv { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl DatasetError {
    pub fn code(&self) -> &'static str {
        match self {
            DatasetError::NoCoordinates(_) => "NoCoordinates",
            DatasetError::EmptyDataset => "EmptyDataset",
            DatasetError::DegenerateTarget => "DegenerateTarget",
            DatasetError::LengthMismatch(..) => "LengthMismatch",
            DatasetError::InvalidParameter(_) => "InvalidParameter",
            DatasetError::MalformedCsv { .. } => "MalformedCsv",
            DatasetError::Io(_) => "Io",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub x: f64,
    pub y: f64,
    /// Switching current, amperes.
    pub i_d: f64,
    /// Width, width units.
    pub w: f64,
}

impl Sample {
    pub fn features(&self) -> [f64; 3] {
        [self.x, self.y, self.i_d]
    }

    fn get(&self, k: usize) -> f64 {
        [self.x, self.y, self.i_d, self.w][k]
    }

    fn from_array(v: [f64; 4]) -> Self {
        Sample {
            x: v[0],
            y: v[1],
            i_d: v[2],
            w: v[3],
        }
    }
}

pub const FEATURE_NAMES: [&str; 4] = ["x", "y", "i_d", "w"];

/// Per-column `(min, max)` for `x, y, i_d, w`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub min: [f64; 4],
    pub max: [f64; 4],
}

impl Normalizer {
    pub fn fit(samples: &[Sample]) -> Result<Self, DatasetError> {
        if samples.is_empty() {
            return Err(DatasetError::EmptyDataset);
        }
        let mut min = [f64::INFINITY; 4];
        let mut max = [f64::NEG_INFINITY; 4];
        for s in samples {
            for k in 0..4 {
                min[k] = min[k].min(s.get(k));
                max[k] = max[k].max(s.get(k));
            }
        }
        Ok(Normalizer { min, max })
    }

    /// A constant column maps to 0 and back to its value.
    pub fn is_constant(&self, k: usize) -> bool {
        !(self.max[k] > self.min[k])
    }

    pub fn constant_features(&self) -> Vec<&'static str> {
        (0..4).filter(|&k| self.is_constant(k)).map(|k| FEATURE_NAMES[k]).collect()
    }

    pub fn scale(&self, k: usize, v: f64) -> f64 {
        if self.is_constant(k) {
            0.0
        } else {
            (v - self.min[k]) / (self.max[k] - self.min[k])
        }
    }

    pub fn unscale(&self, k: usize, v: f64) -> f64 {
        if self.is_constant(k) {
            self.min[k]
        } else {
            self.min[k] + v * (self.max[k] - self.min[k])
        }
    }

    pub fn normalize_sample(&self, s: &Sample) -> Sample {
        Sample::from_array(std::array::from_fn(|k| self.scale(k, s.get(k))))
    }

    pub fn denormalize_sample(&self, s: &Sample) -> Sample {
        Sample::from_array(std::array::from_fn(|k| self.unscale(k, s.get(k))))
    }

    pub fn normalize_features(&self, f: [f64; 3]) -> [f64; 3] {
        std::array::from_fn(|k| self.scale(k, f[k]))
    }

    pub fn denormalize_width(&self, w: f64) -> f64 {
        self.unscale(3, w)
    }

    pub fn normalize_width(&self, w: f64) -> f64 {
        self.scale(3, w)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    /// Resistor index each sample was extracted from, when known.
    pub origin: Vec<usize>,
    /// Set when `samples` are stored normalized.
    pub normalizer: Option<Normalizer>,
    pub source_tag: String,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>, source_tag: impl Into<String>) -> Self {
        Dataset {
            samples,
            origin: Vec::new(),
            normalizer: None,
            source_tag: source_tag.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalizer.is_some()
    }

    pub fn features(&self) -> Vec<[f64; 3]> {
        self.samples.iter().map(Sample::features).collect()
    }

    pub fn targets(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.w).collect()
    }

    pub fn currents(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.i_d).collect()
    }

    fn subset(&self, idx: &[usize], tag: &str) -> Dataset {
        Dataset {
            samples: idx.iter().map(|&i| self.samples[i]).collect(),
            origin: if self.origin.is_empty() {
                Vec::new()
            } else {
                idx.iter().map(|&i| self.origin[i]).collect()
            },
            normalizer: self.normalizer,
            source_tag: format!("{}:{tag}", self.source_tag),
        }
    }
}

/// Shuffled split; the first `round(fraction·n)` shuffled samples train.
pub fn split(dataset: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset), DatasetError> {
    if dataset.is_empty() {
        return Err(DatasetError::EmptyDataset);
    }
    if !(0.0..=1.0).contains(&fraction) {
        return Err(DatasetError::InvalidParameter(format!("split fraction {fraction} outside [0, 1]")));
    }
    let mut idx: Vec<usize> = (0..dataset.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = (fraction * dataset.len() as f64).round() as usize;
    Ok((dataset.subset(&idx[..n_train], "train"), dataset.subset(&idx[n_train..], "test")))
}

/// Min-max normalization fitted on `dataset` itself.
pub fn normalize(dataset: &Dataset) -> Result<Dataset, DatasetError> {
    if dataset.is_normalized() {
        return Ok(dataset.clone());
    }
    let norm = Normalizer::fit(&dataset.samples)?;
    Ok(normalize_with(dataset, &norm))
}

/// Normalization with a given (e.g. training-set) normalizer.
pub fn normalize_with(dataset: &Dataset, norm: &Normalizer) -> Dataset {
    let raw = denormalize(dataset);
    Dataset {
        samples: raw.samples.iter().map(|s| norm.normalize_sample(s)).collect(),
        normalizer: Some(*norm),
        ..raw
    }
}

pub fn denormalize(dataset: &Dataset) -> Dataset {
    match &dataset.normalizer {
        None => dataset.clone(),
        Some(norm) => Dataset {
            samples: dataset.samples.iter().map(|s| norm.denormalize_sample(s)).collect(),
            normalizer: None,
            origin: dataset.origin.clone(),
            source_tag: dataset.source_tag.clone(),
        },
    }
}

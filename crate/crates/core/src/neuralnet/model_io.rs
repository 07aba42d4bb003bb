use std::io::{Read, Write};

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{Layer, MlpConfig, MlpModel, NeuralError};
use crate::dataset::Normalizer;

pub const MODEL_FORMAT: &str = "pgplan-mlp";
pub const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct LayerDoc {
    fan_in: usize,
    fan_out: usize,
    /// Row-major `fan_out × fan_in`.
    weights: Vec<f64>,
    biases: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    format: String,
    version: u32,
    config: MlpConfig,
    normalizer: Option<Normalizer>,
    train_seed: Option<u64>,
    layers: Vec<LayerDoc>,
}

pub fn write_model_json<W: Write>(model: &MlpModel, out: W) -> Result<(), NeuralError> {
    let doc = ModelDoc {
        format: MODEL_FORMAT.to_string(),
        version: MODEL_VERSION,
        config: model.config,
        normalizer: model.normalizer,
        train_seed: model.train_seed,
        layers: model
            .layers
            .iter()
            .map(|l| LayerDoc {
                fan_in: l.weights.ncols(),
                fan_out: l.weights.nrows(),
                weights: l.weights.iter().copied().collect(),
                biases: l.biases.to_vec(),
            })
            .collect(),
    };
    serde_json::to_writer_pretty(out, &doc).map_err(|e| NeuralError::MalformedModel(e.to_string()))
}

pub fn read_model_json<R: Read>(input: R) -> Result<MlpModel, NeuralError> {
    let bad = |m: String| NeuralError::MalformedModel(m);
    let doc: ModelDoc = serde_json::from_reader(input).map_err(|e| bad(e.to_string()))?;
    if doc.format != MODEL_FORMAT {
        return Err(bad(format!("unknown format `{}`", doc.format)));
    }
    if doc.version != MODEL_VERSION {
        return Err(bad(format!("unsupported version {}", doc.version)));
    }
    doc.config.validate()?;
    let shapes = doc.config.shapes();
    if shapes.len() != doc.layers.len() {
        return Err(bad(format!("config implies {} layers, file has {}", shapes.len(), doc.layers.len())));
    }
    let mut layers = Vec::with_capacity(shapes.len());
    for (k, (l, (fan_in, fan_out))) in doc.layers.into_iter().zip(shapes).enumerate() {
        if (l.fan_in, l.fan_out) != (fan_in, fan_out) || l.biases.len() != fan_out {
            return Err(bad(format!("layer {k} has the wrong shape")));
        }
        let weights =
            Array2::from_shape_vec((fan_out, fan_in), l.weights).map_err(|e| bad(format!("layer {k}: {e}")))?;
        layers.push(Layer {
            weights,
            biases: Array1::from_vec(l.biases),
        });
    }
    let model = MlpModel {
        config: doc.config,
        layers,
        normalizer: doc.normalizer,
        train_seed: doc.train_seed,
    };
    if !model.is_finite() {
        return Err(bad("non-finite parameter".into()));
    }
    Ok(model)
}

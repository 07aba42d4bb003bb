//! Multilayer perceptron for width regression.
//!
//! Rectifier hidden layers, identity output, trained on normalized
//! `(x, y, I_d) → w` samples with an MSE objective plus an optional
//! electromigration penalty. [`predict_ir_drop`] turns predicted widths into
//! line resistances and IR drops without a global solve.

mod model_io;
mod predict;
mod train;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Normalizer;

pub use model_io::{read_model_json, write_model_json, MODEL_FORMAT, MODEL_VERSION};
pub use predict::{
    line_features, node_drop_estimate, predict_ir_drop, ExactWidths, IrPrediction, PredictOptions, WidthModel,
};
pub use train::{
    adam_step, backward, loss, resume, train, train_with_validation, write_history_csv, AdamState, Batch, EpochRecord,
    Gradients, LossParts, TrainConfig, TrainOutcome,
};

/// Features outside this band (after normalization) are refused.
pub const GUARD_BAND: (f64, f64) = (-0.5, 1.5);

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("feature {feature} = {value} is outside the normalized guard band")]
    NotNormalized { feature: usize, value: f64 },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("loss became non-finite at epoch {epoch}")]
    DivergedLoss { epoch: usize },
    #[error("model file: {0}")]
    MalformedModel(String),
    #[error(transparent)]
    Reliability(#[from] crate::reliability::ReliabilityError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl NeuralError {
    pub fn code(&self) -> &'static str {
        match self {
            NeuralError::InvalidConfig(_) => "InvalidConfig",
            NeuralError::NotNormalized { .. } => "NotNormalized",
            NeuralError::ShapeMismatch(_) => "ShapeMismatch",
            NeuralError::EmptyDataset => "EmptyDataset",
            NeuralError::DivergedLoss { .. } => "DivergedLoss",
            NeuralError::MalformedModel(_) => "MalformedModel",
            NeuralError::Reliability(e) => e.code(),
            NeuralError::Io(_) => "Io",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub input_dim: usize,
    pub hidden_layers: usize,
    pub hidden_width: usize,
    pub output_dim: usize,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            input_dim: 3,
            hidden_layers: 10,
            hidden_width: 64,
            output_dim: 1,
            seed: 0,
        }
    }
}

impl MlpConfig {
    pub fn validate(&self) -> Result<(), NeuralError> {
        if self.hidden_layers == 0 || self.hidden_width == 0 {
            return Err(NeuralError::InvalidConfig(format!(
                "need at least one hidden layer of one unit, got {}×{}",
                self.hidden_layers, self.hidden_width
            )));
        }
        if self.input_dim == 0 || self.output_dim == 0 {
            return Err(NeuralError::InvalidConfig("input and output dimensions must be positive".into()));
        }
        Ok(())
    }

    /// `(fan_in, fan_out)` per layer.
    pub fn shapes(&self) -> Vec<(usize, usize)> {
        let mut dims = vec![self.input_dim];
        dims.extend(std::iter::repeat_n(self.hidden_width, self.hidden_layers));
        dims.push(self.output_dim);
        dims.windows(2).map(|w| (w[0], w[1])).collect()
    }
}

/// Affine layer `z = a·Wᵀ + b`; `weights` is `fan_out × fan_in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub config: MlpConfig,
    pub layers: Vec<Layer>,
    pub normalizer: Option<Normalizer>,
    pub train_seed: Option<u64>,
}

/// He-normal weights (variance `2 / fan_in`), zero biases.
pub fn init(config: &MlpConfig) -> Result<MlpModel, NeuralError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let layers = config
        .shapes()
        .into_iter()
        .map(|(fan_in, fan_out)| {
            let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
            Layer {
                weights: Array2::from_shape_simple_fn((fan_out, fan_in), || normal.sample(&mut rng)),
                biases: Array1::zeros(fan_out),
            }
        })
        .collect();
    Ok(MlpModel {
        config: *config,
        layers,
        normalizer: None,
        train_seed: None,
    })
}

impl MlpModel {
    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.biases.iter()).all(|v| v.is_finite()))
    }

    /// Activations of every layer for a batch, input first.
    pub(crate) fn activations(&self, x: ArrayView2<f64>) -> Vec<Array2<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_owned());
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            let mut z = acts[k].dot(&layer.weights.t());
            z += &layer.biases.view().insert_axis(Axis(0));
            if k < last {
                z.mapv_inplace(|v| v.max(0.0));
            }
            acts.push(z);
        }
        acts
    }

    /// Batch forward on normalized features; one output row per sample.
    pub fn forward_batch(&self, x: ArrayView2<f64>) -> Result<Array2<f64>, NeuralError> {
        if x.ncols() != self.config.input_dim {
            return Err(NeuralError::ShapeMismatch(format!(
                "expected {} features, got {}",
                self.config.input_dim,
                x.ncols()
            )));
        }
        if let Some(((_, feature), &value)) = x
            .indexed_iter()
            .find(|(_, v)| !(GUARD_BAND.0..=GUARD_BAND.1).contains(*v))
        {
            return Err(NeuralError::NotNormalized { feature, value });
        }
        Ok(self.activations(x).pop().expect("at least one layer"))
    }

    /// Normalized width for one normalized feature vector.
    pub fn forward(&self, features: &[f64]) -> Result<f64, NeuralError> {
        let x = ArrayView2::from_shape((1, features.len()), features)
            .map_err(|e| NeuralError::ShapeMismatch(e.to_string()))?;
        Ok(self.forward_batch(x)?[(0, 0)])
    }

    /// Physical widths from raw `(x, y, I_d)` features.
    pub fn predict_widths_raw(&self, features: &[[f64; 3]]) -> Result<Vec<f64>, NeuralError> {
        let norm = self
            .normalizer
            .as_ref()
            .ok_or_else(|| NeuralError::InvalidConfig("model has no normalizer".into()))?;
        let x = Array2::from_shape_fn((features.len(), 3), |(i, k)| norm.scale(k, features[i][k]));
        let out = self.forward_batch(x.view())?;
        Ok(out.column(0).iter().map(|&v| norm.denormalize_width(v)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn parameter_count_default() {
        let m = init(&MlpConfig::default()).unwrap();
        assert_eq!(m.parameter_count(), 3 * 64 + 64 + 9 * (64 * 64 + 64) + 64 + 1);
        assert_eq!(m.parameter_count(), 37_761);
        assert_eq!(m.layers.len(), 11);
    }

    #[test]
    fn init_is_deterministic_and_validated() {
        let cfg = MlpConfig {
            seed: 5,
            ..Default::default()
        };
        assert_eq!(init(&cfg).unwrap(), init(&cfg).unwrap());
        assert_ne!(init(&cfg).unwrap(), init(&MlpConfig { seed: 6, ..cfg }).unwrap());
        assert!(init(&MlpConfig { hidden_layers: 0, ..cfg }).is_err());
        assert!(init(&MlpConfig { hidden_width: 0, ..cfg }).is_err());
        let m = init(&cfg).unwrap();
        assert!(m.layers.iter().all(|l| l.biases.iter().all(|&b| b == 0.0)));
    }

    #[test]
    fn zero_weights_output_final_bias() {
        let mut m = init(&MlpConfig::default()).unwrap();
        for l in &mut m.layers {
            l.weights.fill(0.0);
        }
        m.layers.last_mut().unwrap().biases[0] = 0.37;
        assert_eq!(m.forward(&[0.2, 0.9, 0.5]).unwrap(), 0.37);
    }

    #[test]
    fn hand_built_two_unit_model() {
        let m = MlpModel {
            config: MlpConfig {
                input_dim: 2,
                hidden_layers: 1,
                hidden_width: 2,
                output_dim: 1,
                seed: 0,
            },
            layers: vec![
                Layer {
                    weights: array![[1.0, 2.0], [-1.0, 1.0]],
                    biases: array![0.5, -0.25],
                },
                Layer {
                    weights: array![[3.0, -2.0]],
                    biases: array![0.1],
                },
            ],
            normalizer: None,
            train_seed: None,
        };
        // hidden: relu(0.2 + 1.0 + 0.5) = 1.7, relu(-0.2 + 0.5 - 0.25) = 0.05
        let out = m.forward(&[0.2, 0.5]).unwrap();
        assert!((out - (3.0 * 1.7 - 2.0 * 0.05 + 0.1)).abs() < 1e-12);
        // second unit clipped: relu(-0.9 + 0.1 - 0.25) = 0
        let out = m.forward(&[0.9, 0.1]).unwrap();
        assert!((out - (3.0 * (0.9 + 0.2 + 0.5) + 0.1)).abs() < 1e-12);
    }

    #[test]
    fn batch_equals_singles() {
        let m = init(&MlpConfig {
            seed: 2,
            ..Default::default()
        })
        .unwrap();
        let x = Array2::from_shape_fn((7, 3), |(i, k)| ((i * 3 + k) % 10) as f64 / 10.0);
        let batch = m.forward_batch(x.view()).unwrap();
        for i in 0..7 {
            let single = m.forward(x.row(i).as_slice().unwrap()).unwrap();
            assert!((single - batch[(i, 0)]).abs() <= 1e-12 * single.abs().max(1.0));
        }
    }

    #[test]
    fn guard_band() {
        let m = init(&MlpConfig::default()).unwrap();
        assert!(m.forward(&[1.5, -0.5, 0.0]).is_ok());
        assert!(matches!(
            m.forward(&[0.0, 1.6, 0.0]),
            Err(NeuralError::NotNormalized { feature: 1, .. })
        ));
        assert!(matches!(m.forward(&[0.0, 0.0]), Err(NeuralError::ShapeMismatch(_))));
    }
}

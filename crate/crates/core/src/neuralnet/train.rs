use std::io::Write;

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{init, Layer, MlpConfig, MlpModel, NeuralError};
use crate::dataset::{self, Dataset, Normalizer};
use crate::netlist::format_value;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Weight of the electromigration penalty.
    pub lambda: f64,
    /// Current-density limit used by the penalty, amperes per width unit.
    pub j_max: f64,
    pub shuffle_seed: u64,
    /// Epochs without validation improvement before stopping; `None` runs
    /// all epochs.
    pub patience: Option<usize>,
    /// Share of the training set held out for validation by [`train`].
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 128,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            lambda: 0.0,
            j_max: 1.0,
            shuffle_seed: 0,
            patience: Some(15),
            validation_fraction: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NeuralError> {
        let bad = |m: String| Err(NeuralError::InvalidConfig(m));
        if !(self.learning_rate > 0.0) {
            return bad(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad(format!("betas must lie in [0, 1), got {} and {}", self.beta1, self.beta2));
        }
        if !(self.epsilon > 0.0) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if !(self.lambda >= 0.0) {
            return bad(format!("lambda must be non-negative, got {}", self.lambda));
        }
        if !(self.j_max > 0.0 && self.j_max.is_finite()) {
            return bad(format!("j_max must be positive, got {}", self.j_max));
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive".into());
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return bad(format!("validation fraction {} outside [0, 1)", self.validation_fraction));
        }
        Ok(())
    }
}

/// Normalized features and targets plus the physical `I_d` the penalty needs.
#[derive(Debug, Clone)]
pub struct Batch {
    pub x: Array2<f64>,
    pub w: Array1<f64>,
    pub i_d: Array1<f64>,
}

impl Batch {
    pub fn from_dataset(data: &Dataset, idx: &[usize]) -> Batch {
        let norm = data.normalizer;
        let raw_current = |v: f64| norm.map_or(v, |n| n.unscale(2, v));
        Batch {
            x: Array2::from_shape_fn((idx.len(), 3), |(i, k)| data.samples[idx[i]].features()[k]),
            w: idx.iter().map(|&i| data.samples[i].w).collect(),
            i_d: idx.iter().map(|&i| raw_current(data.samples[i].i_d)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts {
    pub mse: f64,
    /// Mean squared density overshoot `max(0, I_d/ŵ − J_max)²`.
    pub penalty: f64,
    pub total: f64,
}

// smallest physical width the penalty divides by
fn width_floor(norm: &Normalizer) -> f64 {
    (0.01 * norm.min[3]).max(1e-12)
}

fn identity_normalizer() -> Normalizer {
    Normalizer {
        min: [0.0; 4],
        max: [1.0; 4],
    }
}

/// Objective `MSE + λ·C` on normalized predictions, with the
/// penalty evaluated on denormalized widths.
pub fn loss(pred: &[f64], target: &[f64], i_d: &[f64], norm: Option<&Normalizer>, cfg: &TrainConfig) -> LossParts {
    loss_and_grad(pred, target, i_d, norm, cfg, false).0
}

fn loss_and_grad(
    pred: &[f64],
    target: &[f64],
    i_d: &[f64],
    norm: Option<&Normalizer>,
    cfg: &TrainConfig,
    want_grad: bool,
) -> (LossParts, Vec<f64>) {
    let n = pred.len().max(1) as f64;
    let ident = identity_normalizer();
    let norm = norm.unwrap_or(&ident);
    let floor = width_floor(norm);
    let w_scale = if norm.is_constant(3) { 0.0 } else { norm.max[3] - norm.min[3] };
    let mut mse = 0.0;
    let mut penalty = 0.0;
    let mut grad = if want_grad { vec![0.0; pred.len()] } else { Vec::new() };
    for i in 0..pred.len() {
        let e = pred[i] - target[i];
        mse += e * e;
        let mut g = 2.0 * e / n;
        if cfg.lambda > 0.0 {
            let raw = norm.denormalize_width(pred[i]);
            let w = raw.max(floor);
            let d = i_d[i] / w - cfg.j_max;
            if d > 0.0 {
                penalty += d * d;
                if raw > floor {
                    g += cfg.lambda * 2.0 * d * (-i_d[i] / (w * w)) * w_scale / n;
                }
            }
        }
        if want_grad {
            grad[i] = g;
        }
    }
    let parts = LossParts {
        mse: mse / n,
        penalty: penalty / n,
        total: mse / n + cfg.lambda * penalty / n,
    };
    (parts, grad)
}

/// Per-layer parameter gradients, shaped like the model's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

/// Loss and exact reverse-mode gradients for one batch.
pub fn backward(
    model: &MlpModel,
    batch: &Batch,
    norm: Option<&Normalizer>,
    cfg: &TrainConfig,
) -> Result<(LossParts, Gradients), NeuralError> {
    if batch.x.nrows() != batch.w.len() || batch.w.len() != batch.i_d.len() {
        return Err(NeuralError::ShapeMismatch("batch columns differ in length".into()));
    }
    let acts = model.activations(batch.x.view());
    let out = acts.last().expect("output layer");
    let pred: Vec<f64> = out.column(0).to_vec();
    let (parts, g) = loss_and_grad(
        &pred,
        batch.w.as_slice().expect("contiguous"),
        batch.i_d.as_slice().expect("contiguous"),
        norm,
        cfg,
        true,
    );
    let mut delta = Array2::from_shape_vec((pred.len(), 1), g).expect("column");
    let mut layers = Vec::with_capacity(model.layers.len());
    for k in (0..model.layers.len()).rev() {
        let input = &acts[k];
        let weights = delta.t().dot(input);
        let biases = delta.sum_axis(Axis(0));
        if k > 0 {
            let mut prev = delta.dot(&model.layers[k].weights);
            prev.zip_mut_with(input, |d, &a| {
                if a <= 0.0 {
                    *d = 0.0
                }
            });
            delta = prev;
        }
        layers.push(Layer { weights, biases });
    }
    layers.reverse();
    Ok((parts, Gradients { layers }))
}

/// First and second moment estimates per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Layer>,
    pub v: Vec<Layer>,
    pub t: u64,
}

impl AdamState {
    pub fn new(model: &MlpModel) -> Self {
        let zeros = || {
            model
                .layers
                .iter()
                .map(|l| Layer {
                    weights: Array2::zeros(l.weights.raw_dim()),
                    biases: Array1::zeros(l.biases.raw_dim()),
                })
                .collect()
        };
        AdamState { m: zeros(), v: zeros(), t: 0 }
    }
}

/// Bias-corrected Adam update.
pub fn adam_step(
    model: &mut MlpModel,
    state: &mut AdamState,
    grads: &Gradients,
    cfg: &TrainConfig,
) -> Result<(), NeuralError> {
    let same = |a: &[Layer], b: &[Layer]| {
        a.len() == b.len()
            && a.iter()
                .zip(b)
                .all(|(x, y)| x.weights.shape() == y.weights.shape() && x.biases.len() == y.biases.len())
    };
    if !same(&model.layers, &grads.layers) || !same(&model.layers, &state.m) || !same(&model.layers, &state.v) {
        return Err(NeuralError::ShapeMismatch("gradients or optimizer state do not match the model".into()));
    }
    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    let (b1, b2, lr, eps) = (cfg.beta1, cfg.beta2, cfg.learning_rate, cfg.epsilon);
    let update = |p: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
    };
    for (((layer, g), m), v) in model.layers.iter_mut().zip(&grads.layers).zip(&mut state.m).zip(&mut state.v) {
        ndarray::Zip::from(&mut layer.weights)
            .and(&mut m.weights)
            .and(&mut v.weights)
            .and(&g.weights)
            .for_each(|p, m, v, &g| update(p, m, v, g));
        ndarray::Zip::from(&mut layer.biases)
            .and(&mut m.biases)
            .and(&mut v.biases)
            .and(&g.biases)
            .for_each(|p, m, v, &g| update(p, m, v, g));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: MlpModel,
    pub history: Vec<EpochRecord>,
    /// Epoch whose parameters were kept (best validation loss).
    pub best_epoch: Option<usize>,
}

fn normalized(data: &Dataset) -> Result<Dataset, NeuralError> {
    dataset::normalize(data).map_err(|_| NeuralError::EmptyDataset)
}

/// Holds out `validation_fraction` of `data` (seeded by `shuffle_seed`) and
/// trains on the rest.
pub fn train(data: &Dataset, mlp: &MlpConfig, cfg: &TrainConfig) -> Result<TrainOutcome, NeuralError> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(NeuralError::EmptyDataset);
    }
    let data = normalized(data)?;
    if cfg.validation_fraction == 0.0 || data.len() < 2 {
        return train_with_validation(&data, None, mlp, cfg);
    }
    let (tr, val) = dataset::split(&data, 1.0 - cfg.validation_fraction, cfg.shuffle_seed ^ 0x5eed)
        .map_err(|_| NeuralError::EmptyDataset)?;
    let val = (!val.is_empty()).then_some(val);
    train_with_validation(&tr, val.as_ref(), mlp, cfg)
}

/// Mini-batch Adam with seeded shuffling and early stopping on the
/// validation loss (training loss when no validation set is given). The
/// returned model carries the best parameters seen.
pub fn train_with_validation(
    data: &Dataset,
    validation: Option<&Dataset>,
    mlp: &MlpConfig,
    cfg: &TrainConfig,
) -> Result<TrainOutcome, NeuralError> {
    resume(init(mlp)?, data, validation, cfg)
}

/// Continues training `model` from its current parameters with a fresh
/// optimizer state. The model's normalizer is replaced by one fitted to `data`.
pub fn resume(
    mut model: MlpModel,
    data: &Dataset,
    validation: Option<&Dataset>,
    cfg: &TrainConfig,
) -> Result<TrainOutcome, NeuralError> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(NeuralError::EmptyDataset);
    }
    let data = normalized(data)?;
    let norm = data.normalizer.expect("normalized");
    let val = validation.map(|v| dataset::normalize_with(v, &norm));

    model.normalizer = Some(norm);
    model.train_seed = Some(cfg.shuffle_seed);
    let mut state = AdamState::new(&model);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.shuffle_seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let val_batch = val.as_ref().map(|v| Batch::from_dataset(v, &(0..v.len()).collect::<Vec<_>>()));

    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, Vec<Layer>)> = None;
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch = Batch::from_dataset(&data, chunk);
            let (parts, grads) = backward(&model, &batch, Some(&norm), cfg)?;
            if !parts.total.is_finite() {
                return Err(NeuralError::DivergedLoss { epoch });
            }
            sum += parts.total * chunk.len() as f64;
            adam_step(&mut model, &mut state, &grads, cfg)?;
        }
        let train_loss = sum / data.len() as f64;
        let val_loss = match &val_batch {
            Some(b) if b.w.len() > 0 => {
                let pred = model.activations(b.x.view()).pop().expect("output");
                let pred: Vec<f64> = pred.column(0).to_vec();
                let l = loss(&pred, b.w.as_slice().unwrap(), b.i_d.as_slice().unwrap(), Some(&norm), cfg).total;
                if !l.is_finite() {
                    return Err(NeuralError::DivergedLoss { epoch });
                }
                Some(l)
            }
            _ => None,
        };
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
        });
        let monitored = val_loss.unwrap_or(train_loss);
        if best.as_ref().is_none_or(|(b, _, _)| monitored < *b) {
            best = Some((monitored, epoch, model.layers.clone()));
        }
        if let (Some(patience), Some((_, best_epoch, _))) = (cfg.patience, &best) {
            if epoch - best_epoch >= patience {
                log::info!("early stop at epoch {epoch}, best epoch {best_epoch}");
                break;
            }
        }
    }
    let best_epoch = best.as_ref().map(|b| b.1);
    if let Some((_, _, layers)) = best {
        model.layers = layers;
    }
    Ok(TrainOutcome {
        model,
        history,
        best_epoch,
    })
}

/// `epoch,train_loss,val_loss`; the last column is empty without validation.
pub fn write_history_csv<W: Write>(history: &[EpochRecord], mut out: W) -> std::io::Result<()> {
    writeln!(out, "epoch,train_loss,val_loss")?;
    for r in history {
        let val = r.val_loss.map(format_value).unwrap_or_default();
        writeln!(out, "{},{},{}", r.epoch, format_value(r.train_loss), val)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Sample;
    use rand::Rng;

    fn toy_model(seed: u64) -> MlpModel {
        init(&MlpConfig {
            input_dim: 3,
            hidden_layers: 2,
            hidden_width: 5,
            output_dim: 1,
            seed,
        })
        .unwrap()
    }

    fn toy_batch(n: usize, seed: u64) -> Batch {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Batch {
            x: Array2::from_shape_fn((n, 3), |_| rng.random_range(0.0..1.0)),
            w: (0..n).map(|_| rng.random_range(0.0..1.0)).collect(),
            i_d: (0..n).map(|_| rng.random_range(0.0..2e-3)).collect(),
        }
    }

    fn norm() -> Normalizer {
        Normalizer {
            min: [0.0, 0.0, 0.0, 0.5],
            max: [1.0, 1.0, 2e-3, 3.0],
        }
    }

    fn flat(g: &[Layer]) -> Vec<f64> {
        g.iter().flat_map(|l| l.weights.iter().chain(l.biases.iter()).copied()).collect()
    }

    fn param_mut(model: &mut MlpModel, mut k: usize) -> &mut f64 {
        for l in &mut model.layers {
            if k < l.weights.len() {
                return l.weights.iter_mut().nth(k).unwrap();
            }
            k -= l.weights.len();
            if k < l.biases.len() {
                return &mut l.biases[k];
            }
            k -= l.biases.len();
        }
        unreachable!()
    }

    #[test]
    fn loss_examples() {
        let cfg = TrainConfig {
            lambda: 1.0,
            j_max: 1e-3,
            ..Default::default()
        };
        let n = Normalizer {
            min: [0.0; 4],
            max: [1.0, 1.0, 1.0, 2.0],
        };
        // ŵ normalized 0.5 → 1 width unit
        let l = loss(&[0.5], &[0.5], &[2e-3], Some(&n), &cfg);
        assert!((l.penalty - 1e-6).abs() < 1e-18);
        assert!((l.total - 1e-6).abs() < 1e-18);
        let plain = TrainConfig { lambda: 0.0, ..cfg };
        let l = loss(&[0.1, 0.4], &[0.3, 0.4], &[2e-3, 2e-3], Some(&n), &plain);
        assert!((l.total - 0.02).abs() < 1e-15);
        assert_eq!(l.total, l.mse);
        assert_eq!(loss(&[0.3], &[0.3], &[0.0], Some(&n), &cfg).total, 0.0);
    }

    #[test]
    fn gradients_match_central_differences() {
        let cfg = TrainConfig {
            lambda: 0.5,
            j_max: 1e-3,
            ..Default::default()
        };
        let n = norm();
        let batch = toy_batch(16, 1);
        let mut model = toy_model(3);
        let (_, grads) = backward(&model, &batch, Some(&n), &cfg).unwrap();
        let analytic = flat(&grads.layers);
        let h = 1e-5;
        for k in 0..model.parameter_count() {
            let orig = *param_mut(&mut model, k);
            *param_mut(&mut model, k) = orig + h;
            let up = backward(&model, &batch, Some(&n), &cfg).unwrap().0.total;
            *param_mut(&mut model, k) = orig - h;
            let down = backward(&model, &batch, Some(&n), &cfg).unwrap().0.total;
            *param_mut(&mut model, k) = orig;
            let numeric = (up - down) / (2.0 * h);
            let rel = (analytic[k] - numeric).abs() / (analytic[k].abs() + 1e-8);
            assert!(rel <= 1e-4, "param {k}: analytic {} numeric {numeric}", analytic[k]);
        }
    }

    #[test]
    fn zero_lambda_gradients_are_mse_gradients() {
        let batch = toy_batch(8, 2);
        let model = toy_model(4);
        let a = backward(&model, &batch, Some(&norm()), &TrainConfig::default()).unwrap();
        let b = backward(&model, &batch, None, &TrainConfig::default()).unwrap();
        assert_eq!(a.1, b.1);
    }

    #[test]
    fn perfect_prediction_has_zero_gradient() {
        let model = toy_model(5);
        let mut batch = toy_batch(6, 3);
        let pred = model.activations(batch.x.view()).pop().unwrap();
        batch.w = pred.column(0).to_owned();
        batch.i_d.fill(0.0);
        let (l, g) = backward(&model, &batch, Some(&norm()), &TrainConfig::default()).unwrap();
        assert_eq!(l.total, 0.0);
        assert!(flat(&g.layers).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn adam_first_step_and_zero_gradient() {
        let cfg = TrainConfig::default();
        let mut model = toy_model(6);
        let before = model.clone();
        let mut state = AdamState::new(&model);
        let (_, g) = backward(&model, &toy_batch(8, 4), None, &cfg).unwrap();
        adam_step(&mut model, &mut state, &g, &cfg).unwrap();
        assert_eq!(state.t, 1);
        for ((a, b), g) in flat(&before.layers).iter().zip(flat(&model.layers)).zip(flat(&g.layers)) {
            let step = b - a;
            let exact = -cfg.learning_rate * g / (g.abs() + cfg.epsilon);
            assert!((step - exact).abs() <= 1e-12 * cfg.learning_rate);
            if g.abs() > 1e-2 {
                assert!((step + cfg.learning_rate * g.signum()).abs() < 1e-5 * cfg.learning_rate);
            }
        }
        let zero = Gradients {
            layers: AdamState::new(&model).m,
        };
        let mut fresh = AdamState::new(&model);
        let snapshot = model.clone();
        adam_step(&mut model, &mut fresh, &zero, &cfg).unwrap();
        assert_eq!(model.layers, snapshot.layers);
        assert_eq!(fresh.t, 1);
        let wrong = Gradients {
            layers: toy_model(0).layers[..2].to_vec(),
        };
        assert!(matches!(
            adam_step(&mut model, &mut fresh, &wrong, &cfg),
            Err(NeuralError::ShapeMismatch(_))
        ));
    }

    fn linear_dataset(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Dataset::new(
            (0..n)
                .map(|_| {
                    let (x, y, i): (f64, f64, f64) =
                        (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
                    Sample {
                        x,
                        y,
                        i_d: i,
                        w: 0.5 * x + 0.3 * y + 1.2 * i + 0.01 * rng.random_range(-1.0..1.0),
                    }
                })
                .collect(),
            "linear",
        )
    }

    /// Widths 0 to 10% below what the density limit allows, so an
    /// unpenalized fit violates it almost everywhere.
    fn limit_dataset(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Dataset::new(
            (0..n)
                .map(|_| {
                    let i: f64 = rng.random_range(0.5..1.5);
                    Sample {
                        x: rng.random_range(0.0..1.0),
                        y: rng.random_range(0.0..1.0),
                        i_d: i,
                        w: i * (0.95 + 0.05 * rng.random_range(-1.0..1.0)),
                    }
                })
                .collect(),
            "limit",
        )
    }

    #[test]
    fn larger_lambda_never_adds_violations() {
        for seed in 0..5u64 {
            let data = limit_dataset(1000, seed);
            let features = data.features();
            let cfg = |lambda: f64| TrainConfig {
                epochs: 100,
                batch_size: 32,
                lambda,
                j_max: 1.0,
                shuffle_seed: seed,
                patience: None,
                validation_fraction: 0.0,
                ..Default::default()
            };
            // every λ continues from the same converged unpenalized fit
            let base = train(&data, &small_mlp(seed), &cfg(0.0)).unwrap().model;
            let violations = |lambda: f64| {
                let m = resume(base.clone(), &data, None, &cfg(lambda)).unwrap().model;
                let w = m.predict_widths_raw(&features).unwrap();
                data.samples.iter().zip(w).filter(|(s, w)| s.i_d / w > 1.0).count()
            };
            let counts: Vec<usize> = [0.0, 10.0, 100.0].into_iter().map(violations).collect();
            assert!(counts.windows(2).all(|c| c[1] <= c[0]), "seed {seed}: {counts:?}");
            assert!(counts[2] < counts[0], "seed {seed}: {counts:?}");
        }
    }

    fn small_mlp(seed: u64) -> MlpConfig {
        MlpConfig {
            hidden_layers: 2,
            hidden_width: 16,
            seed,
            ..Default::default()
        }
    }

    #[test]
    fn learns_linear_target() {
        let data = dataset::normalize(&linear_dataset(2000, 1)).unwrap();
        let (tr, val) = dataset::split(&data, 0.8, 1).unwrap();
        let cfg = TrainConfig {
            epochs: 200,
            batch_size: 32,
            patience: Some(30),
            ..Default::default()
        };
        let out = train_with_validation(&tr, Some(&val), &small_mlp(1), &cfg).unwrap();
        let pred: Vec<f64> = out
            .model
            .forward_batch(Batch::from_dataset(&val, &(0..val.len()).collect::<Vec<_>>()).x.view())
            .unwrap()
            .column(0)
            .to_vec();
        let r2 = dataset::r2_score(&val.targets(), &pred).unwrap();
        assert!(r2 >= 0.95, "r2 {r2}");
    }

    #[test]
    fn loss_decreases_and_is_deterministic() {
        for seed in 0..5 {
            let data = linear_dataset(500, 10 + seed);
            let cfg = TrainConfig {
                epochs: 50,
                patience: None,
                shuffle_seed: seed,
                ..Default::default()
            };
            let a = train(&data, &small_mlp(seed), &cfg).unwrap();
            assert!(a.history[49].train_loss < a.history[0].train_loss);
            if seed == 0 {
                let b = train(&data, &small_mlp(seed), &cfg).unwrap();
                assert_eq!(a.model, b.model);
            }
        }
    }

    #[test]
    fn resume_keeps_parameters_at_zero_epochs() {
        let data = linear_dataset(200, 3);
        let cfg = TrainConfig {
            epochs: 5,
            batch_size: 32,
            validation_fraction: 0.0,
            ..Default::default()
        };
        let m = train(&data, &small_mlp(2), &cfg).unwrap().model;
        let zero = TrainConfig { epochs: 0, ..cfg.clone() };
        let again = resume(m.clone(), &data, None, &zero).unwrap();
        assert_eq!(again.model.layers, m.layers);
        assert!(again.history.is_empty());
        let more = resume(m.clone(), &data, None, &cfg).unwrap();
        assert_ne!(more.model.layers, m.layers);
    }

    #[test]
    fn zero_epochs_returns_init() {
        let data = linear_dataset(50, 2);
        let cfg = TrainConfig {
            epochs: 0,
            ..Default::default()
        };
        let out = train(&data, &small_mlp(9), &cfg).unwrap();
        assert!(out.history.is_empty());
        assert_eq!(out.model.layers, init(&small_mlp(9)).unwrap().layers);
        assert!(matches!(
            train(&Dataset::default(), &small_mlp(9), &cfg),
            Err(NeuralError::EmptyDataset)
        ));
    }

    #[test]
    fn divergence_is_reported() {
        let mut data = linear_dataset(64, 3);
        data.samples[0].w = f64::INFINITY;
        let cfg = TrainConfig {
            epochs: 5,
            ..Default::default()
        };
        assert!(matches!(
            train(&data, &small_mlp(0), &cfg),
            Err(NeuralError::DivergedLoss { epoch: 1 })
        ));
    }

    #[test]
    fn history_csv() {
        let mut buf = Vec::new();
        write_history_csv(
            &[
                EpochRecord {
                    epoch: 1,
                    train_loss: 0.5,
                    val_loss: Some(0.25),
                },
                EpochRecord {
                    epoch: 2,
                    train_loss: 0.125,
                    val_loss: None,
                },
            ],
            &mut buf,
        )
        .unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "epoch,train_loss,val_loss\n1,0.5,0.25\n2,0.125,\n");
    }
}

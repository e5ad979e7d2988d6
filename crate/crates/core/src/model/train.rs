use rand::distributions::{Distribution, Uniform};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::batch_loss_and_grad;
use super::network::{backward, run, Layout};
use super::{forward_trace, ForecastSeries, ModelConfig, ModelError, TrainedForecaster};
use crate::linalg::Matrix;
use crate::scalar::Scalar;
use crate::timeseries::WindowedDataset;

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Min-max scaling to [0, 1] fitted on training data. A constant column
/// gets unit span so it maps to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer<T> {
    /// `(min, max)` per input feature, `min < max`.
    pub features: Vec<(T, T)>,
    pub target: (T, T),
}

fn span<T: Scalar>(values: impl Iterator<Item = T>) -> (T, T) {
    let (lo, hi) = values.fold((T::infinity(), T::neg_infinity()), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if hi > lo {
        (lo, hi)
    } else {
        (lo, lo + T::one())
    }
}

impl<T: Scalar> Normalizer<T> {
    pub fn fit(data: &WindowedDataset<T>) -> Result<Self, ModelError> {
        if data.is_empty() {
            return Err(ModelError::Domain("cannot fit a normalizer on no samples".into()));
        }
        let features = (0..data.n_features())
            .map(|j| span(data.inputs.iter().flat_map(|w| (0..w.rows()).map(move |i| w[(i, j)]))))
            .collect();
        Ok(Self { features, target: span(data.targets.iter().copied()) })
    }

    pub fn normalize_window(&self, window: &Matrix<T>) -> Matrix<T> {
        Matrix::from_fn(window.rows(), window.cols(), |i, j| {
            let (lo, hi) = self.features[j];
            (window[(i, j)] - lo) / (hi - lo)
        })
    }

    pub fn normalize_target(&self, v: T) -> T {
        (v - self.target.0) / (self.target.1 - self.target.0)
    }

    pub fn denormalize_target(&self, v: T) -> T {
        v * (self.target.1 - self.target.0) + self.target.0
    }
}

/// Uniform initialization in `±1/√hidden_size` from the configured seed.
pub fn init_weights<T: Scalar>(config: &ModelConfig) -> Vec<T> {
    let bound = 1.0 / (config.hidden_size as f64).sqrt();
    let dist = Uniform::new_inclusive(-bound, bound);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    (0..config.layout().len()).map(|_| T::lit(dist.sample(&mut rng))).collect()
}

/// Loss over `samples` and, when `grad` is given, its gradient added in.
fn batch<T: Scalar>(
    layout: &Layout,
    w: &[T],
    inputs: &[Matrix<T>],
    targets: &[T],
    quantiles: Option<&[T]>,
    grad: Option<&mut [T]>,
) -> T {
    let traces: Vec<_> = inputs.iter().map(|x| run(layout, w, x)).collect();
    let outputs: Vec<Vec<T>> = traces.iter().map(|t| t.output.clone()).collect();
    let (loss, d_out) = batch_loss_and_grad(&outputs, targets, quantiles);
    if let Some(grad) = grad {
        for (trace, d) in traces.iter().zip(&d_out) {
            backward(layout, w, trace, d, grad);
        }
    }
    loss
}

struct Adam<T> {
    lr: T,
    m: Vec<T>,
    v: Vec<T>,
    t: i32,
}

impl<T: Scalar> Adam<T> {
    fn new(lr: f64, n: usize) -> Self {
        Self { lr: T::lit(lr), m: vec![T::zero(); n], v: vec![T::zero(); n], t: 0 }
    }

    fn step(&mut self, w: &mut [T], g: &[T]) {
        self.t += 1;
        let (b1, b2, eps) = (T::lit(BETA1), T::lit(BETA2), T::lit(ADAM_EPS));
        let c1 = T::one() - b1.powi(self.t);
        let c2 = T::one() - b2.powi(self.t);
        for i in 0..w.len() {
            self.m[i] = b1 * self.m[i] + (T::one() - b1) * g[i];
            self.v[i] = b2 * self.v[i] + (T::one() - b2) * g[i] * g[i];
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            w[i] -= self.lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}

fn check_dataset<T: Scalar>(config: &ModelConfig, data: &WindowedDataset<T>) -> Result<(), ModelError> {
    if data.n_features() != config.input_size {
        return Err(ModelError::Shape(format!(
            "dataset has {} features, model expects {}",
            data.n_features(),
            config.input_size
        )));
    }
    if data.window_len != config.window_len {
        return Err(ModelError::Shape(format!(
            "dataset window {} differs from configured {}",
            data.window_len, config.window_len
        )));
    }
    Ok(())
}

/// Fits a forecaster with Adam over chronological mini-batches.
pub fn train<T: Scalar>(config: &ModelConfig, train_set: &WindowedDataset<T>) -> Result<TrainedForecaster<T>, ModelError> {
    config.validate()?;
    check_dataset(config, train_set)?;
    let normalizer = Normalizer::fit(train_set)?;
    let inputs: Vec<Matrix<T>> = train_set.inputs.iter().map(|w| normalizer.normalize_window(w)).collect();
    if inputs.iter().any(|m| !m.is_finite()) || train_set.targets.iter().any(|v| !v.is_finite()) {
        return Err(ModelError::NonFinite("training data".into()));
    }
    let targets: Vec<T> = train_set.targets.iter().map(|&v| normalizer.normalize_target(v)).collect();
    let quantiles = config.quantiles::<T>();
    let layout = config.layout();
    let n = inputs.len();

    let mut weights = init_weights::<T>(config);
    let mut adam = Adam::new(config.learning_rate, weights.len());
    let mut grad = vec![T::zero(); weights.len()];
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        let mut total = T::zero();
        for start in (0..n).step_by(config.batch_size) {
            let end = (start + config.batch_size).min(n);
            grad.iter_mut().for_each(|g| *g = T::zero());
            let loss = batch(&layout, &weights, &inputs[start..end], &targets[start..end], quantiles.as_deref(), Some(&mut grad));
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(ModelError::Diverged { epoch, loss: loss.as_f64() });
            }
            if let Some(clip) = config.grad_clip {
                let norm = grad.iter().map(|&g| g * g).sum::<T>().sqrt();
                let clip = T::lit(clip);
                if norm > clip {
                    grad.iter_mut().for_each(|g| *g *= clip / norm);
                }
            }
            adam.step(&mut weights, &grad);
            total += loss * T::from_usize_lossy(end - start);
        }
        history.push(total / T::from_usize_lossy(n));
    }
    Ok(TrainedForecaster { config: config.clone(), weights, normalizer, training_loss_history: history })
}

/// Forecasts every sample of `dataset` in price units.
pub fn predict<T: Scalar>(model: &TrainedForecaster<T>, dataset: &WindowedDataset<T>) -> Result<ForecastSeries<T>, ModelError> {
    check_dataset(&model.config, dataset)?;
    let point = model.config.loss.point_index();
    let mut predicted = Vec::with_capacity(dataset.len());
    for w in &dataset.inputs {
        let x = model.normalizer.normalize_window(w);
        let out = forward_trace(&model.config, &model.weights, &x)?.output;
        predicted.push(out.into_iter().map(|v| model.normalizer.denormalize_target(v)).collect::<Vec<T>>());
    }
    Ok(ForecastSeries {
        dates: dataset.sample_dates.clone(),
        point_estimate: predicted.iter().map(|p| p[point]).collect(),
        predicted,
        actual: dataset.targets.clone(),
        previous_close: dataset.previous_targets.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientCheck {
    pub max_relative_error: f64,
    pub max_absolute_error: f64,
    pub coordinates: usize,
}

pub const GRADIENT_CHECK_STEP: f64 = 1e-6;
/// Denominator floor for relative errors, so coordinates whose gradient is
/// essentially zero are judged on absolute agreement.
pub const GRADIENT_CHECK_FLOOR: f64 = 1e-4;
pub const GRADIENT_CHECK_COORDINATES: usize = 256;

/// Compares the BPTT gradient of the single-sample loss at (`window`,
/// `actual`) against central differences on a seeded subset of coordinates.
/// If a quantile output sits on the loss kink, `actual` is nudged off it.
pub fn gradient_check(
    config: &ModelConfig,
    weights: &[f64],
    window: &Matrix<f64>,
    actual: f64,
) -> Result<GradientCheck, ModelError> {
    config.validate()?;
    let layout = config.layout();
    let out = forward_trace(config, weights, window)?.output;
    let quantiles = config.quantiles::<f64>();
    let mut y = actual;
    if quantiles.is_some() {
        while out.iter().any(|&o| (y - o).abs() < 1e-4) {
            y += 1e-3;
        }
    }
    let (x, t) = (std::slice::from_ref(window), [y]);
    let qs = quantiles.as_deref();
    let mut grad = vec![0.0; weights.len()];
    batch(&layout, weights, x, &t, qs, Some(&mut grad));

    let coords: Vec<usize> = if weights.len() <= GRADIENT_CHECK_COORDINATES {
        (0..weights.len()).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x9e37_79b9_7f4a_7c15);
        let mut c = index::sample(&mut rng, weights.len(), GRADIENT_CHECK_COORDINATES).into_vec();
        c.sort_unstable();
        c
    };
    let mut w = weights.to_vec();
    let (mut max_rel, mut max_abs) = (0.0_f64, 0.0_f64);
    for &i in &coords {
        let orig = w[i];
        w[i] = orig + GRADIENT_CHECK_STEP;
        let up = batch(&layout, &w, x, &t, qs, None);
        w[i] = orig - GRADIENT_CHECK_STEP;
        let down = batch(&layout, &w, x, &t, qs, None);
        w[i] = orig;
        let numeric = (up - down) / (2.0 * GRADIENT_CHECK_STEP);
        let abs = (numeric - grad[i]).abs();
        max_abs = max_abs.max(abs);
        max_rel = max_rel.max(abs / numeric.abs().max(grad[i].abs()).max(GRADIENT_CHECK_FLOOR));
    }
    Ok(GradientCheck { max_relative_error: max_rel, max_absolute_error: max_abs, coordinates: coords.len() })
}

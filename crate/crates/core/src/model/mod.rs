//! The two-channel forecasting model: a recurrent channel over the node's
//! local window, a feed-forward channel over the global fleet snapshot, and
//! a dense head over their concatenation that emits per-metric horizon-max
//! predictions.

pub mod train;

pub use train::{evaluate, train, EvalReport, TrainConfig, TrainReport};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nn::{
    loss_grad, Activation, Dense, DenseCache, Dropout, GruCell, GruStepCache, LossKind, LstmCell,
    LstmStepCache, NnError, OptimizerKind, ParamTensors,
};
use crate::trace::ScalerParams;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(String),
    #[error("dataset is empty after the train/validation split")]
    EmptyDataset,
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// Numerical hyperparameters, every field within its declared range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericalHyperparams {
    pub recurrent_layers: usize,
    pub ff_layers_global: usize,
    pub ff_layers_head: usize,
    pub neurons_recurrent: usize,
    pub neurons_ff: usize,
    pub neurons_head: usize,
    pub lookback: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub dropout: f64,
    pub learning_rate: f64,
}

impl Default for NumericalHyperparams {
    fn default() -> Self {
        NumericalHyperparams {
            recurrent_layers: 1,
            ff_layers_global: 2,
            ff_layers_head: 1,
            neurons_recurrent: 16,
            neurons_ff: 16,
            neurons_head: 16,
            lookback: 8,
            epochs: 30,
            batch_size: 32,
            dropout: 0.1,
            learning_rate: 0.01,
        }
    }
}

impl NumericalHyperparams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let checks: [(&str, f64, f64, f64); 11] = [
            ("recurrent_layers", self.recurrent_layers as f64, 1.0, 2.0),
            ("ff_layers_global", self.ff_layers_global as f64, 1.0, 4.0),
            ("ff_layers_head", self.ff_layers_head as f64, 1.0, 4.0),
            ("neurons_recurrent", self.neurons_recurrent as f64, 4.0, 128.0),
            ("neurons_ff", self.neurons_ff as f64, 4.0, 128.0),
            ("neurons_head", self.neurons_head as f64, 4.0, 128.0),
            ("lookback", self.lookback as f64, 4.0, 32.0),
            ("epochs", self.epochs as f64, 5.0, 100.0),
            ("batch_size", self.batch_size as f64, 8.0, 128.0),
            ("dropout", self.dropout, 0.0, 0.5),
            ("learning_rate", self.learning_rate, 1e-4, 1e-1),
        ];
        for (name, value, lo, hi) in checks {
            if !(lo..=hi).contains(&value) {
                return Err(ModelError::InvalidHyperparams(format!(
                    "{name}={value} outside [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecurrentKind {
    Gru,
    Lstm,
}

/// Nominal hyperparameters, values from finite catalogs only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NominalHyperparams {
    pub recurrent_kind: RecurrentKind,
    pub activation: Activation,
    pub optimizer: OptimizerKind,
}

impl Default for NominalHyperparams {
    fn default() -> Self {
        NominalHyperparams {
            recurrent_kind: RecurrentKind::Gru,
            activation: Activation::Relu,
            optimizer: OptimizerKind::Adam,
        }
    }
}

impl NominalHyperparams {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.activation == Activation::Linear {
            return Err(ModelError::InvalidHyperparams(
                "activation must be one of relu/tanh/sigmoid".into(),
            ));
        }
        Ok(())
    }

    /// Exhaustive enumeration of the nominal catalog (2 x 3 x 2 = 12).
    pub fn catalog() -> Vec<NominalHyperparams> {
        let mut out = Vec::with_capacity(12);
        for kind in [RecurrentKind::Gru, RecurrentKind::Lstm] {
            for act in [Activation::Relu, Activation::Tanh, Activation::Sigmoid] {
                for opt in [OptimizerKind::Sgd, OptimizerKind::Adam] {
                    out.push(NominalHyperparams {
                        recurrent_kind: kind,
                        activation: act,
                        optimizer: opt,
                    });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RecurrentStack {
    Gru { layers: Vec<GruCell> },
    Lstm { layers: Vec<LstmCell> },
}

impl RecurrentStack {
    fn zeros_like(&self) -> Self {
        match self {
            RecurrentStack::Gru { layers } => RecurrentStack::Gru {
                layers: layers.iter().map(|c| c.zeros_like()).collect(),
            },
            RecurrentStack::Lstm { layers } => RecurrentStack::Lstm {
                layers: layers.iter().map(|c| c.zeros_like()).collect(),
            },
        }
    }

    fn hidden_dim(&self) -> usize {
        match self {
            RecurrentStack::Gru { layers } => layers[0].hidden_dim(),
            RecurrentStack::Lstm { layers } => layers[0].hidden_dim(),
        }
    }
}

impl ParamTensors for RecurrentStack {
    fn tensors(&mut self) -> Vec<&mut Vec<f64>> {
        match self {
            RecurrentStack::Gru { layers } => layers.iter_mut().flat_map(|c| c.tensors()).collect(),
            RecurrentStack::Lstm { layers } => {
                layers.iter_mut().flat_map(|c| c.tensors()).collect()
            }
        }
    }
}

/// Decoded phenotype plus everything needed to serve predictions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompositeModel {
    pub genotype: Option<Vec<f64>>,
    pub numerical: NumericalHyperparams,
    pub nominal: NominalHyperparams,
    pub recurrent: RecurrentStack,
    pub recurrent_dense: Dense,
    pub global_stack: Vec<Dense>,
    pub head_stack: Vec<Dense>,
    pub output: Dense,
    pub dropout_rate: f64,
    pub scaler: ScalerParams,
    pub metric_count: usize,
    pub global_dim: usize,
}

/// Caches from one training-mode forward pass, consumed by `backward`.
pub struct ForwardCache {
    gru_steps: Vec<Vec<GruStepCache>>,
    lstm_steps: Vec<Vec<LstmStepCache>>,
    recurrent_dense: DenseCache,
    global_caches: Vec<DenseCache>,
    global_masks: Vec<Option<Vec<bool>>>,
    head_caches: Vec<DenseCache>,
    head_masks: Vec<Option<Vec<bool>>>,
    output_cache: DenseCache,
    channel_a_width: usize,
    pub preds: Vec<f64>,
}

/// Gradient accumulator mirroring the model's parameter tensors.
pub struct ModelGrads {
    pub recurrent: RecurrentStack,
    pub recurrent_dense: Dense,
    pub global_stack: Vec<Dense>,
    pub head_stack: Vec<Dense>,
    pub output: Dense,
}

impl ParamTensors for ModelGrads {
    fn tensors(&mut self) -> Vec<&mut Vec<f64>> {
        let mut out = self.recurrent.tensors();
        out.extend(self.recurrent_dense.tensors());
        for d in &mut self.global_stack {
            out.extend(d.tensors());
        }
        for d in &mut self.head_stack {
            out.extend(d.tensors());
        }
        out.extend(self.output.tensors());
        out
    }
}

impl ParamTensors for CompositeModel {
    fn tensors(&mut self) -> Vec<&mut Vec<f64>> {
        let mut out = self.recurrent.tensors();
        out.extend(self.recurrent_dense.tensors());
        for d in &mut self.global_stack {
            out.extend(d.tensors());
        }
        for d in &mut self.head_stack {
            out.extend(d.tensors());
        }
        out.extend(self.output.tensors());
        out
    }
}

/// Builds the architecture deterministically from (params, seed).
pub fn build_model(
    numerical: &NumericalHyperparams,
    nominal: &NominalHyperparams,
    metric_count: usize,
    global_dim: usize,
    seed: u64,
) -> Result<CompositeModel, ModelError> {
    numerical.validate()?;
    nominal.validate()?;
    if metric_count == 0 || global_dim == 0 {
        return Err(ModelError::InvalidHyperparams(
            "io dimensions must be positive".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let act = nominal.activation;

    let recurrent = match nominal.recurrent_kind {
        RecurrentKind::Gru => RecurrentStack::Gru {
            layers: (0..numerical.recurrent_layers)
                .map(|k| {
                    let input = if k == 0 {
                        metric_count
                    } else {
                        numerical.neurons_recurrent
                    };
                    GruCell::new(numerical.neurons_recurrent, input, &mut rng)
                })
                .collect(),
        },
        RecurrentKind::Lstm => RecurrentStack::Lstm {
            layers: (0..numerical.recurrent_layers)
                .map(|k| {
                    let input = if k == 0 {
                        metric_count
                    } else {
                        numerical.neurons_recurrent
                    };
                    LstmCell::new(numerical.neurons_recurrent, input, &mut rng)
                })
                .collect(),
        },
    };
    let recurrent_dense = Dense::new(
        numerical.neurons_recurrent,
        numerical.neurons_recurrent,
        act,
        &mut rng,
    );

    let mut global_stack = Vec::with_capacity(numerical.ff_layers_global);
    let mut width = global_dim;
    for _ in 0..numerical.ff_layers_global {
        global_stack.push(Dense::new(numerical.neurons_ff, width, act, &mut rng));
        width = numerical.neurons_ff;
    }

    let concat = numerical.neurons_recurrent + numerical.neurons_ff;
    let mut head_stack = Vec::with_capacity(numerical.ff_layers_head);
    let mut width = concat;
    for _ in 0..numerical.ff_layers_head {
        head_stack.push(Dense::new(numerical.neurons_head, width, act, &mut rng));
        width = numerical.neurons_head;
    }
    let output = Dense::new(metric_count, width, Activation::Linear, &mut rng);

    Ok(CompositeModel {
        genotype: None,
        numerical: numerical.clone(),
        nominal: *nominal,
        recurrent,
        recurrent_dense,
        global_stack,
        head_stack,
        output,
        dropout_rate: numerical.dropout,
        scaler: ScalerParams::identity(metric_count),
        metric_count,
        global_dim,
    })
}

impl CompositeModel {
    pub fn zero_grads(&self) -> ModelGrads {
        ModelGrads {
            recurrent: self.recurrent.zeros_like(),
            recurrent_dense: self.recurrent_dense.zeros_like(),
            global_stack: self.global_stack.iter().map(|d| d.zeros_like()).collect(),
            head_stack: self.head_stack.iter().map(|d| d.zeros_like()).collect(),
            output: self.output.zeros_like(),
        }
    }

    fn check_shapes(&self, window: &[Vec<f64>], global: &[f64]) -> Result<(), NnError> {
        if window.len() != self.numerical.lookback {
            return Err(NnError::ShapeMismatch(format!(
                "window length {} != lookback {}",
                window.len(),
                self.numerical.lookback
            )));
        }
        if window.iter().any(|row| row.len() != self.metric_count) {
            return Err(NnError::ShapeMismatch(format!(
                "window rows must have {} metrics",
                self.metric_count
            )));
        }
        if global.len() != self.global_dim {
            return Err(NnError::ShapeMismatch(format!(
                "global features {} != expected {}",
                global.len(),
                self.global_dim
            )));
        }
        Ok(())
    }

    /// Recurrent channel output for a scaled window (eval mode helper).
    pub fn channel_a(&self, window: &[Vec<f64>]) -> Result<Vec<f64>, NnError> {
        let (out, _, _) = self.run_recurrent(window)?;
        let (a, _) = self.recurrent_dense.forward(&out)?;
        Ok(a)
    }

    /// Feed-forward channel output for a global feature vector (eval mode).
    pub fn channel_b(&self, global: &[f64]) -> Result<Vec<f64>, NnError> {
        let mut v = global.to_vec();
        for dense in &self.global_stack {
            let (out, _) = dense.forward(&v)?;
            v = out;
        }
        Ok(v)
    }

    #[allow(clippy::type_complexity)]
    fn run_recurrent(
        &self,
        window: &[Vec<f64>],
    ) -> Result<(Vec<f64>, Vec<Vec<GruStepCache>>, Vec<Vec<LstmStepCache>>), NnError> {
        match &self.recurrent {
            RecurrentStack::Gru { layers } => {
                let mut caches: Vec<Vec<GruStepCache>> = vec![Vec::new(); layers.len()];
                let mut hidden: Vec<Vec<f64>> =
                    layers.iter().map(|c| vec![0.0; c.hidden_dim()]).collect();
                for x in window {
                    let mut input = x.clone();
                    for (k, cell) in layers.iter().enumerate() {
                        let (h_new, cache) = cell.step(&input, &hidden[k])?;
                        caches[k].push(cache);
                        input = h_new.clone();
                        hidden[k] = h_new;
                    }
                }
                Ok((hidden.last().unwrap().clone(), caches, Vec::new()))
            }
            RecurrentStack::Lstm { layers } => {
                let mut caches: Vec<Vec<LstmStepCache>> = vec![Vec::new(); layers.len()];
                let mut hidden: Vec<Vec<f64>> =
                    layers.iter().map(|c| vec![0.0; c.hidden_dim()]).collect();
                let mut cell_state: Vec<Vec<f64>> = hidden.clone();
                for x in window {
                    let mut input = x.clone();
                    for (k, cell) in layers.iter().enumerate() {
                        let (h_new, c_new, cache) =
                            cell.step(&input, &hidden[k], &cell_state[k])?;
                        caches[k].push(cache);
                        input = h_new.clone();
                        hidden[k] = h_new;
                        cell_state[k] = c_new;
                    }
                }
                Ok((hidden.last().unwrap().clone(), Vec::new(), caches))
            }
        }
    }

    /// Training-mode forward pass (dropout active), caching intermediates.
    pub fn forward_train(
        &self,
        window: &[Vec<f64>],
        global: &[f64],
        rng: &mut ChaCha8Rng,
    ) -> Result<ForwardCache, NnError> {
        self.check_shapes(window, global)?;
        let dropout = Dropout {
            rate: self.dropout_rate,
            training: true,
        };

        let (h_top, gru_steps, lstm_steps) = self.run_recurrent(window)?;
        let (a, recurrent_dense_cache) = self.recurrent_dense.forward(&h_top)?;

        let mut v = global.to_vec();
        let mut global_caches = Vec::with_capacity(self.global_stack.len());
        let mut global_masks = Vec::with_capacity(self.global_stack.len());
        for dense in &self.global_stack {
            let (out, cache) = dense.forward(&v)?;
            let (dropped, mask) = dropout.apply(&out, rng);
            global_caches.push(cache);
            global_masks.push(mask);
            v = dropped;
        }

        let mut z: Vec<f64> = a.iter().chain(v.iter()).copied().collect();
        let channel_a_width = a.len();
        let mut head_caches = Vec::with_capacity(self.head_stack.len());
        let mut head_masks = Vec::with_capacity(self.head_stack.len());
        for dense in &self.head_stack {
            let (out, cache) = dense.forward(&z)?;
            let (dropped, mask) = dropout.apply(&out, rng);
            head_caches.push(cache);
            head_masks.push(mask);
            z = dropped;
        }
        let (preds, output_cache) = self.output.forward(&z)?;

        Ok(ForwardCache {
            gru_steps,
            lstm_steps,
            recurrent_dense: recurrent_dense_cache,
            global_caches,
            global_masks,
            head_caches,
            head_masks,
            output_cache,
            channel_a_width,
            preds,
        })
    }

    /// Inference forward pass (dropout is the identity); output in the
    /// scaled target space.
    pub fn forward_eval(&self, window: &[Vec<f64>], global: &[f64]) -> Result<Vec<f64>, NnError> {
        self.check_shapes(window, global)?;
        let (h_top, _, _) = self.run_recurrent(window)?;
        let (a, _) = self.recurrent_dense.forward(&h_top)?;
        let v = self.channel_b(global)?;
        let mut z: Vec<f64> = a.iter().chain(v.iter()).copied().collect();
        for dense in &self.head_stack {
            let (out, _) = dense.forward(&z)?;
            z = out;
        }
        let (preds, _) = self.output.forward(&z)?;
        Ok(preds)
    }

    /// Per-metric horizon-max prediction in original units. The window rows
    /// are raw metric values; scaling and un-scaling use the stored scaler.
    pub fn predict(&self, window_raw: &[Vec<f64>], global: &[f64]) -> Result<Vec<f64>, NnError> {
        let window: Vec<Vec<f64>> = window_raw
            .iter()
            .map(|row| self.scaler.apply(row))
            .collect();
        let preds = self.forward_eval(&window, &global.to_vec())?;
        Ok(self.scaler.invert(&preds))
    }

    /// Backpropagates a loss gradient through the cached forward pass,
    /// accumulating parameter gradients into `grads`.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        d_preds: &[f64],
        grads: &mut ModelGrads,
    ) -> Result<(), NnError> {
        if d_preds.len() != self.metric_count {
            return Err(NnError::StaleCache(format!(
                "loss gradient has {} entries, model has {} outputs",
                d_preds.len(),
                self.metric_count
            )));
        }
        let dropout = Dropout {
            rate: self.dropout_rate,
            training: true,
        };

        let mut dz = self
            .output
            .backward(&cache.output_cache, d_preds, &mut grads.output);
        for (k, dense) in self.head_stack.iter().enumerate().rev() {
            let d_after = dropout.backward(&cache.head_masks[k], &dz);
            dz = dense.backward(&cache.head_caches[k], &d_after, &mut grads.head_stack[k]);
        }

        let (da, dv) = dz.split_at(cache.channel_a_width);
        let mut dv = dv.to_vec();
        for (k, dense) in self.global_stack.iter().enumerate().rev() {
            let d_after = dropout.backward(&cache.global_masks[k], &dv);
            dv = dense.backward(&cache.global_caches[k], &d_after, &mut grads.global_stack[k]);
        }

        let dh_top = self
            .recurrent_dense
            .backward(&cache.recurrent_dense, da, &mut grads.recurrent_dense);

        match (&self.recurrent, &mut grads.recurrent) {
            (RecurrentStack::Gru { layers }, RecurrentStack::Gru { layers: g_layers }) => {
                let steps = cache.gru_steps[0].len();
                if steps == 0 {
                    return Err(NnError::StaleCache("empty recurrent cache".into()));
                }
                let top = layers.len() - 1;
                let mut dh_rec: Vec<Vec<f64>> =
                    layers.iter().map(|c| vec![0.0; c.hidden_dim()]).collect();
                for t in (0..steps).rev() {
                    let mut dx_above: Option<Vec<f64>> = None;
                    for k in (0..layers.len()).rev() {
                        let mut dh = dh_rec[k].clone();
                        if k == top && t == steps - 1 {
                            for (d, g) in dh.iter_mut().zip(dh_top.iter()) {
                                *d += g;
                            }
                        }
                        if let Some(dx) = dx_above.take() {
                            for (d, g) in dh.iter_mut().zip(dx.iter()) {
                                *d += g;
                            }
                        }
                        let (dx, dh_prev) =
                            layers[k].backward_step(&cache.gru_steps[k][t], &dh, &mut g_layers[k]);
                        dh_rec[k] = dh_prev;
                        if k > 0 {
                            dx_above = Some(dx);
                        }
                    }
                }
            }
            (RecurrentStack::Lstm { layers }, RecurrentStack::Lstm { layers: g_layers }) => {
                let steps = cache.lstm_steps[0].len();
                if steps == 0 {
                    return Err(NnError::StaleCache("empty recurrent cache".into()));
                }
                let top = layers.len() - 1;
                let mut dh_rec: Vec<Vec<f64>> =
                    layers.iter().map(|c| vec![0.0; c.hidden_dim()]).collect();
                let mut dc_rec: Vec<Vec<f64>> = dh_rec.clone();
                for t in (0..steps).rev() {
                    let mut dx_above: Option<Vec<f64>> = None;
                    for k in (0..layers.len()).rev() {
                        let mut dh = dh_rec[k].clone();
                        if k == top && t == steps - 1 {
                            for (d, g) in dh.iter_mut().zip(dh_top.iter()) {
                                *d += g;
                            }
                        }
                        if let Some(dx) = dx_above.take() {
                            for (d, g) in dh.iter_mut().zip(dx.iter()) {
                                *d += g;
                            }
                        }
                        let (dx, dh_prev, dc_prev) = layers[k].backward_step(
                            &cache.lstm_steps[k][t],
                            &dh,
                            &dc_rec[k],
                            &mut g_layers[k],
                        );
                        dh_rec[k] = dh_prev;
                        dc_rec[k] = dc_prev;
                        if k > 0 {
                            dx_above = Some(dx);
                        }
                    }
                }
            }
            _ => {
                return Err(NnError::StaleCache(
                    "gradient accumulator does not match the recurrent stack kind".into(),
                ))
            }
        }
        Ok(())
    }

    /// Computes the loss gradient and backpropagates in one call.
    pub fn backward_from_loss(
        &self,
        cache: &ForwardCache,
        target: &[f64],
        loss: LossKind,
        grads: &mut ModelGrads,
    ) -> Result<f64, NnError> {
        let value = crate::nn::loss(loss, &cache.preds, target);
        let d_preds = loss_grad(loss, &cache.preds, target)?;
        self.backward(cache, &d_preds, grads)?;
        Ok(value)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serialization")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    pub fn hidden_dim(&self) -> usize {
        self.recurrent.hidden_dim()
    }
}

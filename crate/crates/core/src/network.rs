//! Feed-forward networks: definition, training, activation capture and
//! JSON persistence.
//!
//! Layer `l` computes `a^l = f(W^l a^{l-1} + b^l)`; the last layer is the
//! output head. Training minimizes `E = 1/2 * sum (y - y_hat)^2` with
//! mini-batch gradient descent (plain SGD or Adam).

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
    Elu,
    Sigmoid,
    Identity,
}

impl Activation {
    pub const ALL: [Activation; 5] = [
        Activation::Tanh,
        Activation::Relu,
        Activation::Elu,
        Activation::Sigmoid,
        Activation::Identity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
            Activation::Elu => "elu",
            Activation::Sigmoid => "sigmoid",
            Activation::Identity => "identity",
        }
    }

    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
            Activation::Elu => {
                if z > 0.0 {
                    z
                } else {
                    z.exp_m1()
                }
            }
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Identity => z,
        }
    }

    /// Derivative at pre-activation `z`, given `a = apply(z)`.
    pub fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Elu => {
                if z > 0.0 {
                    1.0
                } else {
                    a + 1.0
                }
            }
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Identity => 1.0,
        }
    }

    /// Target values encoding (negative, positive) class membership.
    fn target_levels(self) -> (f64, f64) {
        match self {
            Activation::Tanh => (-1.0, 1.0),
            _ => (0.0, 1.0),
        }
    }

    /// Decision threshold for a single-node output head.
    pub fn decision_threshold(self) -> f64 {
        match self {
            Activation::Tanh => 0.0,
            _ => 0.5,
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Activation::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| {
                let valid: Vec<&str> = Activation::ALL.iter().map(|a| a.name()).collect();
                Error::Model(format!(
                    "unknown activation `{s}`; valid names are: {}",
                    valid.join(", ")
                ))
            })
    }
}

/// One dense layer. Weights are stored row-major, one row per node.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerSpec {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
    biases: Vec<f64>,
    activation: Activation,
}

impl LayerSpec {
    pub fn new(weights: Vec<Vec<f64>>, biases: Vec<f64>, activation: Activation) -> Result<Self> {
        let rows = weights.len();
        if rows == 0 {
            return Err(Error::Model("layer has no nodes".into()));
        }
        let cols = weights[0].len();
        if cols == 0 {
            return Err(Error::Model("layer has no inputs".into()));
        }
        if let Some(r) = weights.iter().position(|row| row.len() != cols) {
            return Err(Error::Model(format!(
                "weight row {r} has {} entries, expected {cols}",
                weights[r].len()
            )));
        }
        if biases.len() != rows {
            return Err(Error::Model(format!(
                "{} biases for {rows} nodes",
                biases.len()
            )));
        }
        let flat: Vec<f64> = weights.into_iter().flatten().collect();
        if flat.iter().chain(&biases).any(|v| !v.is_finite()) {
            return Err(Error::Model("non-finite parameter".into()));
        }
        Ok(LayerSpec {
            rows,
            cols,
            weights: flat,
            biases,
            activation,
        })
    }

    /// Node count.
    pub fn width(&self) -> usize {
        self.rows
    }

    pub fn input_width(&self) -> usize {
        self.cols
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weight(&self, node: usize, input: usize) -> f64 {
        self.weights[node * self.cols + input]
    }

    /// Row-major weight slice.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn biases_mut(&mut self) -> &mut [f64] {
        &mut self.biases
    }

    pub fn weight_rows(&self) -> Vec<Vec<f64>> {
        self.weights.chunks(self.cols).map(<[f64]>::to_vec).collect()
    }

    fn pre_activation(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.weights.chunks_exact(self.cols).zip(&self.biases).map(|(row, b)| {
            row.iter().zip(input).fold(*b, |acc, (w, x)| acc + w * x)
        }));
    }
}

/// A trained (or initialized) multilayer perceptron.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    input_dim: usize,
    layers: Vec<LayerSpec>,
}

/// Result of a forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Forward {
    /// Activation vector of every layer, output layer last.
    pub activations: Vec<Vec<f64>>,
    pub output: Vec<f64>,
}

/// Per-layer parameter gradients, same layout as the layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    fn zeros(model: &Mlp) -> Self {
        Gradients {
            weights: model.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            biases: model.layers.iter().map(|l| vec![0.0; l.rows]).collect(),
        }
    }
}

impl Mlp {
    pub fn new(input_dim: usize, layers: Vec<LayerSpec>) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::Model("input dimension must be positive".into()));
        }
        if layers.len() < 2 {
            return Err(Error::UnsupportedArchitecture(format!(
                "need at least one hidden layer and an output layer, got {} layer(s)",
                layers.len()
            )));
        }
        let mut prev = input_dim;
        for (i, layer) in layers.iter().enumerate() {
            if layer.cols != prev {
                return Err(Error::Model(format!(
                    "layer {i} expects {} inputs but previous width is {prev}",
                    layer.cols
                )));
            }
            prev = layer.rows;
        }
        Ok(Mlp { input_dim, layers })
    }

    /// Seeded initialization: weights uniform in (-1, 1) scaled by
    /// `1/sqrt(fan_in)`, biases zero. `arch` lists every layer including the
    /// output head.
    pub fn init(arch: &[(usize, Activation)], input_dim: usize, seed: u64) -> Result<Self> {
        if arch.is_empty() {
            return Err(Error::UnsupportedArchitecture("empty architecture".into()));
        }
        if input_dim == 0 {
            return Err(Error::Model("input dimension must be positive".into()));
        }
        if let Some(i) = arch.iter().position(|(w, _)| *w == 0) {
            return Err(Error::Model(format!("layer {i} has width 0")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fan_in = input_dim;
        let mut layers = Vec::with_capacity(arch.len());
        for &(width, activation) in arch {
            let scale = 1.0 / (fan_in as f64).sqrt();
            let weights = (0..width * fan_in)
                .map(|_| rng.gen_range(-1.0..1.0) * scale)
                .collect();
            layers.push(LayerSpec {
                rows: width,
                cols: fan_in,
                weights,
                biases: vec![0.0; width],
                activation,
            });
            fan_in = width;
        }
        Mlp::new(input_dim, layers)
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [LayerSpec] {
        &mut self.layers
    }

    /// Number of hidden layers `k`.
    pub fn hidden_count(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn hidden_widths(&self) -> Vec<usize> {
        self.layers[..self.hidden_count()].iter().map(|l| l.rows).collect()
    }

    pub fn output_layer(&self) -> &LayerSpec {
        self.layers.last().expect("at least two layers")
    }

    fn check_arity(&self, features: &[f64]) -> Result<()> {
        if features.len() != self.input_dim {
            return Err(Error::ArityMismatch {
                expected: self.input_dim,
                found: features.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, features: &[f64]) -> Result<Forward> {
        self.check_arity(features)?;
        let mut activations = Vec::with_capacity(self.layers.len());
        let mut z = Vec::new();
        let mut input = features.to_vec();
        for layer in &self.layers {
            layer.pre_activation(&input, &mut z);
            let a: Vec<f64> = z.iter().map(|&v| layer.activation.apply(v)).collect();
            activations.push(a.clone());
            input = a;
        }
        Ok(Forward {
            output: input,
            activations,
        })
    }

    /// Class decision: single output node thresholds at 0.5 (0.0 for a tanh
    /// head), inclusive; several output nodes take the argmax.
    pub fn predict(&self, features: &[f64]) -> Result<usize> {
        let out = self.forward(features)?.output;
        Ok(self.decide(&out))
    }

    fn decide(&self, output: &[f64]) -> usize {
        if output.len() == 1 {
            usize::from(output[0] >= self.output_layer().activation.decision_threshold())
        } else {
            let mut best = 0;
            for (i, &v) in output.iter().enumerate() {
                if v > output[best] {
                    best = i;
                }
            }
            best
        }
    }

    /// Percentage of instances whose predicted class matches the label.
    pub fn accuracy(&self, dataset: &Dataset) -> Result<f64> {
        if dataset.is_empty() {
            return Err(Error::EmptyData("accuracy of an empty dataset".into()));
        }
        let correct = dataset
            .instances()
            .iter()
            .map(|inst| self.predict(&inst.features).map(|p| p == inst.label))
            .collect::<Result<Vec<bool>>>()?
            .into_iter()
            .filter(|&ok| ok)
            .count();
        Ok(100.0 * correct as f64 / dataset.len() as f64)
    }

    /// Training target vector for `label`.
    pub fn target(&self, label: usize) -> Vec<f64> {
        let head = self.output_layer();
        let (lo, hi) = head.activation.target_levels();
        if head.rows == 1 {
            vec![if label == 1 { hi } else { lo }]
        } else {
            (0..head.rows).map(|i| if i == label { hi } else { lo }).collect()
        }
    }

    /// Loss `1/2 * sum (y - y_hat)^2` over the given samples and its exact
    /// gradient with respect to every weight and bias.
    pub fn loss_and_gradient(&self, inputs: &[&[f64]], targets: &[Vec<f64>]) -> Result<(f64, Gradients)> {
        let mut grads = Gradients::zeros(self);
        let mut loss = 0.0;
        let mut scratch = BackpropScratch::default();
        for (x, y) in inputs.iter().zip(targets) {
            self.check_arity(x)?;
            loss += self.accumulate_gradient(x, y, &mut grads, &mut scratch);
        }
        Ok((loss, grads))
    }

    fn accumulate_gradient(
        &self,
        x: &[f64],
        y: &[f64],
        grads: &mut Gradients,
        scratch: &mut BackpropScratch,
    ) -> f64 {
        let n = self.layers.len();
        scratch.pre.resize(n, Vec::new());
        scratch.act.resize(n, Vec::new());
        for l in 0..n {
            let layer = &self.layers[l];
            let (prev, rest) = scratch.act.split_at_mut(l);
            let input: &[f64] = if l == 0 { x } else { &prev[l - 1] };
            layer.pre_activation(input, &mut scratch.pre[l]);
            rest[0].clear();
            rest[0].extend(scratch.pre[l].iter().map(|&z| layer.activation.apply(z)));
        }
        let out = &scratch.act[n - 1];
        let mut loss = 0.0;
        scratch.delta.clear();
        for (i, (&o, &t)) in out.iter().zip(y).enumerate() {
            let diff = o - t;
            loss += 0.5 * diff * diff;
            let layer = &self.layers[n - 1];
            scratch
                .delta
                .push(diff * layer.activation.derivative(scratch.pre[n - 1][i], o));
        }
        for l in (0..n).rev() {
            let layer = &self.layers[l];
            let input: &[f64] = if l == 0 { x } else { &scratch.act[l - 1] };
            let gw = &mut grads.weights[l];
            let gb = &mut grads.biases[l];
            for (node, &d) in scratch.delta.iter().enumerate() {
                gb[node] += d;
                let row = &mut gw[node * layer.cols..(node + 1) * layer.cols];
                for (g, &a) in row.iter_mut().zip(input) {
                    *g += d * a;
                }
            }
            if l > 0 {
                let below = &self.layers[l - 1];
                scratch.next_delta.clear();
                scratch.next_delta.resize(layer.cols, 0.0);
                for (node, &d) in scratch.delta.iter().enumerate() {
                    let row = &layer.weights[node * layer.cols..(node + 1) * layer.cols];
                    for (acc, &w) in scratch.next_delta.iter_mut().zip(row) {
                        *acc += w * d;
                    }
                }
                for (j, acc) in scratch.next_delta.iter_mut().enumerate() {
                    *acc *= below
                        .activation
                        .derivative(scratch.pre[l - 1][j], scratch.act[l - 1][j]);
                }
                std::mem::swap(&mut scratch.delta, &mut scratch.next_delta);
            }
        }
        loss
    }

    /// Hidden-layer activations for every row of `rows`.
    pub fn capture_rows(&self, rows: &[Vec<f64>]) -> Result<ActivationTrace> {
        let per_row: Vec<Vec<Vec<f64>>> = rows
            .par_iter()
            .map(|x| {
                self.forward(x).map(|mut f| {
                    f.activations.truncate(self.hidden_count());
                    f.activations
                })
            })
            .collect::<Result<_>>()?;
        let mut layers: Vec<Vec<Vec<f64>>> = vec![Vec::with_capacity(rows.len()); self.hidden_count()];
        for row in per_row {
            for (l, a) in row.into_iter().enumerate() {
                layers[l].push(a);
            }
        }
        Ok(ActivationTrace {
            widths: self.hidden_widths(),
            layers,
        })
    }

    /// Hidden-layer activations for every instance of `dataset`.
    pub fn capture_activations(&self, dataset: &Dataset) -> Result<ActivationTrace> {
        let rows: Vec<Vec<f64>> = dataset.instances().iter().map(|i| i.features.clone()).collect();
        self.capture_rows(&rows)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ModelFile::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::Model(e.to_string()))?;
        file.try_into()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Mlp::from_json(&text)
    }
}

#[derive(Default)]
struct BackpropScratch {
    pre: Vec<Vec<f64>>,
    act: Vec<Vec<f64>>,
    delta: Vec<f64>,
    next_delta: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    input_dim: usize,
    layers: Vec<LayerFile>,
}

#[derive(Serialize, Deserialize)]
struct LayerFile {
    weights: Vec<Vec<f64>>,
    biases: Vec<f64>,
    activation: String,
}

impl From<&Mlp> for ModelFile {
    fn from(model: &Mlp) -> Self {
        ModelFile {
            input_dim: model.input_dim,
            layers: model
                .layers
                .iter()
                .map(|l| LayerFile {
                    weights: l.weight_rows(),
                    biases: l.biases.clone(),
                    activation: l.activation.name().to_string(),
                })
                .collect(),
        }
    }
}

impl TryFrom<ModelFile> for Mlp {
    type Error = Error;

    fn try_from(file: ModelFile) -> Result<Self> {
        let layers = file
            .layers
            .into_iter()
            .enumerate()
            .map(|(i, l)| {
                let activation: Activation = l.activation.parse()?;
                LayerSpec::new(l.weights, l.biases, activation)
                    .map_err(|e| Error::Model(format!("layer {i}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Mlp::new(file.input_dim, layers).map_err(|e| Error::Model(e.to_string()))
    }
}

/// Hidden-layer activation values captured over a dataset.
///
/// Levels are 1-based: level `i` is the `i`-th hidden layer. Each level is a
/// matrix with one row per instance and one column per node.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationTrace {
    widths: Vec<usize>,
    layers: Vec<Vec<Vec<f64>>>,
}

impl ActivationTrace {
    /// Builds a trace from explicit per-level matrices.
    pub fn from_layers(layers: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let rows = layers.first().map_or(0, Vec::len);
        let mut widths = Vec::with_capacity(layers.len());
        for (l, m) in layers.iter().enumerate() {
            if m.len() != rows {
                return Err(Error::InvalidArity(format!(
                    "level {} has {} rows, expected {rows}",
                    l + 1,
                    m.len()
                )));
            }
            let w = m.first().map_or(0, Vec::len);
            if m.iter().any(|r| r.len() != w) {
                return Err(Error::InvalidArity(format!("level {} is ragged", l + 1)));
            }
            widths.push(w);
        }
        Ok(ActivationTrace { widths, layers })
    }

    /// Number of hidden levels.
    pub fn levels(&self) -> usize {
        self.layers.len()
    }

    pub fn rows(&self) -> usize {
        self.layers.first().map_or(0, Vec::len)
    }

    pub fn width(&self, level: usize) -> usize {
        self.widths[level - 1]
    }

    /// Activation matrix of hidden level `level` (1-based).
    pub fn level(&self, level: usize) -> &[Vec<f64>] {
        &self.layers[level - 1]
    }

    pub fn value(&self, level: usize, row: usize, node: usize) -> f64 {
        self.layers[level - 1][row][node]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub optimizer: Optimizer,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 32,
            learning_rate: 0.05,
            seed: 0,
            optimizer: Optimizer::Sgd,
        }
    }
}

impl TrainConfig {
    fn validate(&self, train_size: usize) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        if self.batch_size > train_size {
            return Err(Error::Config(format!(
                "batch size {} exceeds training set size {train_size}",
                self.batch_size
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// A trained model together with its per-epoch mean loss.
#[derive(Debug, Clone)]
pub struct Trained {
    pub model: Mlp,
    pub loss_history: Vec<f64>,
}

struct AdamState {
    m: Gradients,
    v: Gradients,
    step: i32,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Mini-batch gradient descent on the squared-error loss.
///
/// Each epoch shuffles the instance order with a generator seeded from
/// `config.seed`, then walks the batches in order. The recorded loss of an
/// epoch is the mean per-instance loss observed during that epoch.
pub fn train(model: &Mlp, dataset: &Dataset, config: &TrainConfig) -> Result<Trained> {
    if dataset.is_empty() {
        return Err(Error::EmptyData("training set is empty".into()));
    }
    if dataset.feature_count() != model.input_dim {
        return Err(Error::ArityMismatch {
            expected: model.input_dim,
            found: dataset.feature_count(),
        });
    }
    config.validate(dataset.len())?;
    let mut model = model.clone();
    let targets: Vec<Vec<f64>> = dataset.instances().iter().map(|i| model.target(i.label)).collect();
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = AdamState {
        m: Gradients::zeros(&model),
        v: Gradients::zeros(&model),
        step: 0,
    };
    let mut grads = Gradients::zeros(&model);
    let mut scratch = BackpropScratch::default();
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            for g in grads.weights.iter_mut().chain(grads.biases.iter_mut()) {
                g.fill(0.0);
            }
            for &i in batch {
                epoch_loss += model.accumulate_gradient(
                    &dataset.instances()[i].features,
                    &targets[i],
                    &mut grads,
                    &mut scratch,
                );
            }
            let inv = 1.0 / batch.len() as f64;
            match config.optimizer {
                Optimizer::Sgd => apply_sgd(&mut model, &grads, config.learning_rate * inv),
                Optimizer::Adam => apply_adam(&mut model, &grads, inv, config.learning_rate, &mut adam),
            }
        }
        let mean_loss = epoch_loss / dataset.len() as f64;
        if !mean_loss.is_finite() || model_has_non_finite(&model) {
            return Err(Error::Divergence {
                epoch,
                loss: mean_loss,
            });
        }
        log::trace!("epoch {epoch}: loss {mean_loss:.6}");
        history.push(mean_loss);
    }
    Ok(Trained {
        model,
        loss_history: history,
    })
}

fn model_has_non_finite(model: &Mlp) -> bool {
    model
        .layers
        .iter()
        .any(|l| l.weights.iter().chain(&l.biases).any(|v| !v.is_finite()))
}

fn apply_sgd(model: &mut Mlp, grads: &Gradients, step: f64) {
    for (l, layer) in model.layers.iter_mut().enumerate() {
        for (w, g) in layer.weights.iter_mut().zip(&grads.weights[l]) {
            *w -= step * g;
        }
        for (b, g) in layer.biases.iter_mut().zip(&grads.biases[l]) {
            *b -= step * g;
        }
    }
}

fn apply_adam(model: &mut Mlp, grads: &Gradients, scale: f64, lr: f64, state: &mut AdamState) {
    state.step += 1;
    let bc1 = 1.0 - ADAM_BETA1.powi(state.step);
    let bc2 = 1.0 - ADAM_BETA2.powi(state.step);
    let update = |params: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
        for (((p, &g), m), v) in params.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
            let g = g * scale;
            *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
            *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
        }
    };
    for (l, layer) in model.layers.iter_mut().enumerate() {
        update(&mut layer.weights, &grads.weights[l], &mut state.m.weights[l], &mut state.v.weights[l]);
        update(&mut layer.biases, &grads.biases[l], &mut state.m.biases[l], &mut state.v.biases[l]);
    }
}

//! Feed-forward rating classifier.
//!
//! Hidden layers compute `act(W x + b)`; the output layer is affine with five
//! units (rating classes 1 to 5) followed by a softmax. Training is mini-batch
//! gradient descent on cross-entropy.

mod encode;
mod grid;

pub use encode::{EncodedExample, FeatureEncoder, InputField, Standardizer};
pub use grid::{grid_experiment, GridReport};

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{FeatureMatrix, ItemCatalog, RatingMatrix};
use crate::error::{Error, Result};
use crate::predictor::{Prediction, Predictor};

pub const N_CLASSES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Relu,
    Logistic,
    Identity,
    Tanh,
}

impl Activation {
    pub const ALL: [Activation; 4] = [
        Activation::Relu,
        Activation::Logistic,
        Activation::Identity,
        Activation::Tanh,
    ];

    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Logistic => 1.0 / (1.0 + (-x).exp()),
            Activation::Identity => x,
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a = apply(z)`.
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Logistic => a * (1.0 - a),
            Activation::Identity => 1.0,
            Activation::Tanh => 1.0 - a * a,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Logistic => "logistic",
            Activation::Identity => "identity",
            Activation::Tanh => "tanh",
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Activation::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown activation {s:?} (expected relu, logistic, identity or tanh)"
                ))
            })
    }
}

/// Scalar activation function by kind.
pub fn activation(kind: Activation, x: f64) -> f64 {
    kind.apply(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// One network for every user; the user id is an input.
    Global,
    /// One network per user.
    PerUser,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Global => "global",
            Mode::PerUser => "per-user",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlpConfig {
    pub hidden_layers: usize,
    pub hidden_nodes: usize,
    pub activation: Activation,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub mode: Mode,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            hidden_layers: 4,
            hidden_nodes: 12,
            activation: Activation::Tanh,
            learning_rate: 0.05,
            epochs: 200,
            batch_size: 16,
            seed: 0,
            mode: Mode::PerUser,
        }
    }
}

impl MlpConfig {
    pub fn validate(&self) -> Result<()> {
        let problem = if self.hidden_layers == 0 {
            "hidden layer count must be at least 1"
        } else if self.hidden_nodes == 0 {
            "hidden node count must be at least 1"
        } else if self.epochs == 0 {
            "epochs must be at least 1"
        } else if self.batch_size == 0 {
            "batch size must be at least 1"
        } else if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            "learning rate must be positive"
        } else {
            return Ok(());
        };
        Err(Error::Config(problem.into()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `outputs × inputs`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn new(inputs: usize, outputs: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if weights.len() != inputs * outputs {
            return Err(Error::Dimension {
                expected: inputs * outputs,
                actual: weights.len(),
            });
        }
        if bias.len() != outputs {
            return Err(Error::Dimension {
                expected: outputs,
                actual: bias.len(),
            });
        }
        Ok(Layer {
            inputs,
            outputs,
            weights,
            bias,
        })
    }

    fn affine(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.inputs)
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    layers: Vec<Layer>,
    activation: Activation,
    loss_trace: Vec<f64>,
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Pre-activations and outputs of every layer for one input.
struct Pass {
    pre: Vec<Vec<f64>>,
    post: Vec<Vec<f64>>,
}

impl MlpModel {
    /// Hidden layers of equal width, then a 5-unit output layer. Weights are
    /// uniform in `±1/sqrt(fan_in)`, biases zero.
    pub fn init<R: Rng>(inputs: usize, cfg: &MlpConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        if inputs == 0 {
            return Err(Error::Config("input dimension must be at least 1".into()));
        }
        let mut sizes = vec![inputs];
        sizes.extend(std::iter::repeat_n(cfg.hidden_nodes, cfg.hidden_layers));
        sizes.push(N_CLASSES);
        let layers = sizes
            .windows(2)
            .map(|w| {
                let bound = 1.0 / (w[0] as f64).sqrt();
                let weights = (0..w[0] * w[1])
                    .map(|_| rng.random_range(-bound..bound))
                    .collect();
                Layer::new(w[0], w[1], weights, vec![0.0; w[1]])
            })
            .collect::<Result<_>>()?;
        Ok(MlpModel {
            layers,
            activation: cfg.activation,
            loss_trace: Vec::new(),
        })
    }

    pub fn from_layers(layers: Vec<Layer>, activation: Activation) -> Result<Self> {
        if layers.len() < 2 {
            return Err(Error::Config("need at least one hidden and one output layer".into()));
        }
        for w in layers.windows(2) {
            if w[0].outputs != w[1].inputs {
                return Err(Error::Dimension {
                    expected: w[0].outputs,
                    actual: w[1].inputs,
                });
            }
        }
        let last = layers.last().unwrap().outputs;
        if last != N_CLASSES {
            return Err(Error::Dimension {
                expected: N_CLASSES,
                actual: last,
            });
        }
        Ok(MlpModel {
            layers,
            activation,
            loss_trace: Vec::new(),
        })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    /// Layer widths from input to output.
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.input_dim()];
        sizes.extend(self.layers.iter().map(|l| l.outputs));
        sizes
    }

    /// Mean cross-entropy per training epoch.
    pub fn loss_trace(&self) -> &[f64] {
        &self.loss_trace
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::Dimension {
                expected: self.input_dim(),
                actual: x.len(),
            });
        }
        Ok(())
    }

    fn pass(&self, x: &[f64]) -> Pass {
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let input = if l == 0 { x } else { &post[l - 1] };
            let z = layer.affine(input);
            let a = if l == last {
                softmax(&z)
            } else {
                z.iter().map(|&v| self.activation.apply(v)).collect()
            };
            pre.push(z);
            post.push(a);
        }
        Pass { pre, post }
    }

    /// Output-layer pre-softmax values.
    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(self.pass(x).pre.pop().unwrap())
    }

    /// Class probabilities for ratings 1 to 5.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(self.pass(x).post.pop().unwrap())
    }

    /// Most probable rating class (lowest class on ties).
    pub fn predict_class(&self, x: &[f64]) -> Result<u8> {
        let probs = self.forward(x)?;
        let mut best = 0;
        for (c, &p) in probs.iter().enumerate() {
            if p > probs[best] {
                best = c;
            }
        }
        Ok(best as u8 + 1)
    }

    /// Cross-entropy of one labelled example.
    pub fn loss(&self, x: &[f64], label: u8) -> Result<f64> {
        let class = class_index(label)?;
        Ok(-self.forward(x)?[class].ln())
    }

    /// All weights then biases, layer by layer.
    pub fn params(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
            .collect()
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        let total: usize = self
            .layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum();
        if params.len() != total {
            return Err(Error::Dimension {
                expected: total,
                actual: params.len(),
            });
        }
        let mut rest = params;
        for layer in &mut self.layers {
            let (w, tail) = rest.split_at(layer.weights.len());
            let (b, tail) = tail.split_at(layer.bias.len());
            layer.weights.copy_from_slice(w);
            layer.bias.copy_from_slice(b);
            rest = tail;
        }
        Ok(())
    }

    /// Cross-entropy and its gradient, flattened in [`MlpModel::params`] order.
    pub fn gradient(&self, x: &[f64], label: u8) -> Result<(f64, Vec<f64>)> {
        self.check_input(x)?;
        let class = class_index(label)?;
        let mut grads: Vec<(Vec<f64>, Vec<f64>)> = self
            .layers
            .iter()
            .map(|l| (vec![0.0; l.weights.len()], vec![0.0; l.bias.len()]))
            .collect();
        let loss = self.accumulate(x, class, &mut grads);
        Ok((
            loss,
            grads.into_iter().flat_map(|(w, b)| w.into_iter().chain(b)).collect(),
        ))
    }

    /// Backpropagates one example, adding its gradient into `grads`.
    fn accumulate(&self, x: &[f64], class: usize, grads: &mut [(Vec<f64>, Vec<f64>)]) -> f64 {
        let pass = self.pass(x);
        let probs = pass.post.last().unwrap();
        let loss = -probs[class].ln();
        let mut delta: Vec<f64> = probs.clone();
        delta[class] -= 1.0;
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let input = if l == 0 { x } else { &pass.post[l - 1] };
            let (gw, gb) = &mut grads[l];
            for (o, &d) in delta.iter().enumerate() {
                gb[o] += d;
                let row = &mut gw[o * layer.inputs..(o + 1) * layer.inputs];
                for (g, &v) in row.iter_mut().zip(input) {
                    *g += d * v;
                }
            }
            if l > 0 {
                let mut back = vec![0.0; layer.inputs];
                for (o, &d) in delta.iter().enumerate() {
                    let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    for (b, &w) in back.iter_mut().zip(row) {
                        *b += w * d;
                    }
                }
                let (z, a) = (&pass.pre[l - 1], &pass.post[l - 1]);
                delta = back
                    .iter()
                    .zip(z.iter().zip(a))
                    .map(|(&b, (&zv, &av))| b * self.activation.derivative(zv, av))
                    .collect();
            }
        }
        loss
    }
}

fn class_index(label: u8) -> Result<usize> {
    if (1..=N_CLASSES as u8).contains(&label) {
        Ok(label as usize - 1)
    } else {
        Err(Error::Config(format!("rating class {label} outside 1..=5")))
    }
}

/// Mini-batch gradient descent on softmax cross-entropy.
pub fn train_mlp(cfg: &MlpConfig, data: &[EncodedExample]) -> Result<MlpModel> {
    cfg.validate()?;
    let first = data
        .first()
        .ok_or_else(|| Error::Empty("no training examples".into()))?;
    let dim = first.input.len();
    for ex in data {
        if ex.input.len() != dim {
            return Err(Error::Dimension {
                expected: dim,
                actual: ex.input.len(),
            });
        }
        class_index(ex.label)?;
        if cfg.mode == Mode::PerUser && ex.user_id != first.user_id {
            return Err(Error::Config(format!(
                "per-user training got examples from users {} and {}",
                first.user_id, ex.user_id
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = MlpModel::init(dim, cfg, &mut rng)?;
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut grads: Vec<(Vec<f64>, Vec<f64>)> = model
        .layers
        .iter()
        .map(|l| (vec![0.0; l.weights.len()], vec![0.0; l.bias.len()]))
        .collect();

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            for (gw, gb) in grads.iter_mut() {
                gw.fill(0.0);
                gb.fill(0.0);
            }
            for &n in batch {
                let ex = &data[n];
                epoch_loss += model.accumulate(&ex.input, ex.label as usize - 1, &mut grads);
            }
            let step = cfg.learning_rate / batch.len() as f64;
            for (layer, (gw, gb)) in model.layers.iter_mut().zip(&grads) {
                for (w, g) in layer.weights.iter_mut().zip(gw) {
                    *w -= step * g;
                }
                for (b, g) in layer.bias.iter_mut().zip(gb) {
                    *b -= step * g;
                }
            }
        }
        let mean_loss = epoch_loss / data.len() as f64;
        if !mean_loss.is_finite() {
            return Err(Error::Training {
                epoch,
                message: format!("cross-entropy became {mean_loss}"),
            });
        }
        model.loss_trace.push(mean_loss);
    }
    Ok(model)
}

/// Mean squared distance between predicted and true rating classes.
pub fn mlp_mse(model: &MlpModel, data: &[EncodedExample]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Empty("no examples to score".into()));
    }
    let mut total = 0.0;
    for ex in data {
        let diff = f64::from(model.predict_class(&ex.input)?) - f64::from(ex.label);
        total += diff * diff;
    }
    Ok(total / data.len() as f64)
}

/// A globally trained network wrapped as a [`Predictor`].
pub struct MlpRater {
    model: MlpModel,
    encoder: FeatureEncoder,
    standardizer: Standardizer,
    global_mean: f64,
}

impl MlpRater {
    /// Encodes every training rating whose item has features and trains one network.
    pub fn fit(
        train: &RatingMatrix,
        features: &FeatureMatrix,
        catalog: Option<&ItemCatalog>,
        cfg: &MlpConfig,
    ) -> Result<Self> {
        let fields = InputField::defaults(Mode::Global);
        let encoder = FeatureEncoder::fit(features, catalog, train.users(), &fields);
        let mut examples = encoder.encode_ratings(train, |_| true);
        let standardizer = Standardizer::fit(&examples)?;
        standardizer.apply_all(&mut examples);
        let cfg = MlpConfig {
            mode: Mode::Global,
            ..*cfg
        };
        let model = train_mlp(&cfg, &examples)?;
        Ok(MlpRater {
            model,
            encoder,
            standardizer,
            global_mean: train.global_mean(),
        })
    }

    pub fn model(&self) -> &MlpModel {
        &self.model
    }
}

impl Predictor for MlpRater {
    fn name(&self) -> String {
        "mlp".into()
    }

    fn predict(&self, user_id: u64, item_id: u64) -> Result<Prediction> {
        let mut input = self.encoder.encode_input(user_id, item_id)?;
        self.standardizer.apply(&mut input);
        let class = self.model.predict_class(&input)?;
        Ok(Prediction {
            user_id,
            item_id,
            value: f64::from(class),
            support: 1,
        })
    }

    fn fallback(&self, _: u64, _: u64) -> f64 {
        self.global_mean
    }
}

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tokenizer::{TokenSequence, Tokenizer};
use super::ModelError;
use crate::corpus::NUM_GRADES;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation output.
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub hidden_dim: usize,
    #[serde(default)]
    pub activation: Activation,
    /// Half-width of the uniform initializer for the two heads.
    pub init_scale: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            vocab_size: 4096,
            hidden_dim: 16,
            activation: Activation::Tanh,
            init_scale: 0.1,
        }
    }
}

/// Trainable weights: token embeddings, one dense per-position transform,
/// a 5-way grade head and the scalar contrast head.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    /// vocab × d
    pub embedding: Array2<f64>,
    /// d × d, applied as `e · W + b`
    pub encoder_weight: Array2<f64>,
    pub encoder_bias: Array1<f64>,
    /// d × 5
    pub class_weight: Array2<f64>,
    pub class_bias: Array1<f64>,
    /// d × 1
    pub contrast_weight: Array1<f64>,
    pub contrast_bias: f64,
}

/// Block names in a fixed order, shared by checkpoints and error reports.
pub const BLOCK_NAMES: [&str; 7] = [
    "embedding",
    "encoder.weight",
    "encoder.bias",
    "class_head.weight",
    "class_head.bias",
    "contrast_head.weight",
    "contrast_head.bias",
];

impl ModelParams {
    pub fn zeros(config: ModelConfig) -> Self {
        let d = config.hidden_dim;
        Self {
            config,
            embedding: Array2::zeros((config.vocab_size, d)),
            encoder_weight: Array2::zeros((d, d)),
            encoder_bias: Array1::zeros(d),
            class_weight: Array2::zeros((d, NUM_GRADES)),
            class_bias: Array1::zeros(NUM_GRADES),
            contrast_weight: Array1::zeros(d),
            contrast_bias: 0.0,
        }
    }

    /// Unit-width uniform embeddings, Xavier-uniform encoder, small uniform
    /// heads, zero biases.
    pub fn init(config: ModelConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Self::zeros(config);
        let s = config.init_scale;
        let xavier = (6.0 / (2.0 * config.hidden_dim as f64)).sqrt();
        p.embedding.mapv_inplace(|_| rng.random_range(-1.0..=1.0));
        p.encoder_weight
            .mapv_inplace(|_| rng.random_range(-xavier..=xavier));
        p.class_weight.mapv_inplace(|_| rng.random_range(-s..=s));
        p.contrast_weight.mapv_inplace(|_| rng.random_range(-s..=s));
        p
    }

    pub fn tokenizer(&self) -> Tokenizer {
        Tokenizer::new(self.config.vocab_size)
    }

    pub fn hidden_dim(&self) -> usize {
        self.config.hidden_dim
    }

    pub fn blocks(&self) -> [(&'static str, &[f64]); 7] {
        [
            (
                BLOCK_NAMES[0],
                self.embedding.as_slice().expect("standard layout"),
            ),
            (
                BLOCK_NAMES[1],
                self.encoder_weight.as_slice().expect("standard layout"),
            ),
            (
                BLOCK_NAMES[2],
                self.encoder_bias.as_slice().expect("standard layout"),
            ),
            (
                BLOCK_NAMES[3],
                self.class_weight.as_slice().expect("standard layout"),
            ),
            (
                BLOCK_NAMES[4],
                self.class_bias.as_slice().expect("standard layout"),
            ),
            (
                BLOCK_NAMES[5],
                self.contrast_weight.as_slice().expect("standard layout"),
            ),
            (BLOCK_NAMES[6], std::slice::from_ref(&self.contrast_bias)),
        ]
    }

    pub fn blocks_mut(&mut self) -> [(&'static str, &mut [f64]); 7] {
        [
            (
                BLOCK_NAMES[0],
                self.embedding.as_slice_mut().expect("standard layout"),
            ),
            (
                BLOCK_NAMES[1],
                self.encoder_weight.as_slice_mut().expect("standard layout"),
            ),
            (
                BLOCK_NAMES[2],
                self.encoder_bias.as_slice_mut().expect("standard layout"),
            ),
            (
                BLOCK_NAMES[3],
                self.class_weight.as_slice_mut().expect("standard layout"),
            ),
            (
                BLOCK_NAMES[4],
                self.class_bias.as_slice_mut().expect("standard layout"),
            ),
            (
                BLOCK_NAMES[5],
                self.contrast_weight
                    .as_slice_mut()
                    .expect("standard layout"),
            ),
            (
                BLOCK_NAMES[6],
                std::slice::from_mut(&mut self.contrast_bias),
            ),
        ]
    }

    pub fn shapes(&self) -> [Vec<usize>; 7] {
        [
            self.embedding.shape().to_vec(),
            self.encoder_weight.shape().to_vec(),
            self.encoder_bias.shape().to_vec(),
            self.class_weight.shape().to_vec(),
            self.class_bias.shape().to_vec(),
            self.contrast_weight.shape().to_vec(),
            vec![],
        ]
    }

    /// Shapes agree with the config and every entry is finite.
    pub fn check(&self) -> Result<(), ModelError> {
        let d = self.config.hidden_dim;
        let expected: [Vec<usize>; 7] = [
            vec![self.config.vocab_size, d],
            vec![d, d],
            vec![d],
            vec![d, NUM_GRADES],
            vec![NUM_GRADES],
            vec![d],
            vec![],
        ];
        for ((name, got), want) in BLOCK_NAMES.iter().zip(self.shapes()).zip(expected) {
            if got != want {
                return Err(ModelError::ShapeMismatch(format!(
                    "{name}: expected {want:?}, found {got:?}"
                )));
            }
        }
        for (name, values) in self.blocks() {
            if values.iter().any(|v| !v.is_finite()) {
                return Err(ModelError::NonFinite(name.to_string()));
            }
        }
        Ok(())
    }

    pub fn num_parameters(&self) -> usize {
        self.blocks().iter().map(|(_, b)| b.len()).sum()
    }
}

/// Forward state of one document kept for the backward pass.
pub struct Encoded {
    pub(crate) ids: Vec<u32>,
    /// Gathered embedding rows, T × d.
    pub(crate) inputs: Array2<f64>,
    /// Post-activation positions, T × d.
    pub(crate) activations: Array2<f64>,
    pub hidden: Array1<f64>,
}

pub(crate) fn encode_full(
    tokens: &TokenSequence,
    params: &ModelParams,
) -> Result<Encoded, ModelError> {
    let vocab = params.config.vocab_size;
    let d = params.config.hidden_dim;
    if params.embedding.dim() != (vocab, d) || params.encoder_weight.dim() != (d, d) {
        return Err(ModelError::ShapeMismatch(
            "encoder blocks disagree with config".into(),
        ));
    }
    if let Some(&bad) = tokens.ids().iter().find(|&&id| id as usize >= vocab) {
        return Err(ModelError::TokenOutOfRange { id: bad, vocab });
    }
    let ids = tokens.ids().to_vec();
    let inputs = params.embedding.select(
        Axis(0),
        &ids.iter().map(|&i| i as usize).collect::<Vec<_>>(),
    );
    let act = params.config.activation;
    let mut activations = inputs.dot(&params.encoder_weight) + &params.encoder_bias;
    activations.mapv_inplace(|x| act.apply(x));
    let hidden = activations
        .mean_axis(Axis(0))
        .expect("token sequences are never empty");
    Ok(Encoded {
        ids,
        inputs,
        activations,
        hidden,
    })
}

/// Accumulates the gradient of a loss through one encoding, given dL/dh.
pub(crate) fn encode_backward(
    enc: &Encoded,
    grad_hidden: ArrayView1<f64>,
    params: &ModelParams,
    grads: &mut ModelParams,
) {
    let positions = enc.ids.len() as f64;
    let act = params.config.activation;
    let mut grad_pre = enc.activations.mapv(|y| act.derivative_from_output(y));
    grad_pre *= &(&grad_hidden / positions);
    grads.encoder_weight += &enc.inputs.t().dot(&grad_pre);
    grads.encoder_bias += &grad_pre.sum_axis(Axis(0));
    let grad_inputs = grad_pre.dot(&params.encoder_weight.t());
    for (row, &id) in grad_inputs.outer_iter().zip(&enc.ids) {
        let mut target = grads.embedding.row_mut(id as usize);
        target += &row;
    }
}

/// Document representation: embed, transform each position, mean-pool.
pub fn encode(tokens: &TokenSequence, params: &ModelParams) -> Result<Array1<f64>, ModelError> {
    encode_full(tokens, params).map(|e| e.hidden)
}

fn check_hidden(hidden: ArrayView1<f64>, params: &ModelParams) -> Result<(), ModelError> {
    if hidden.len() != params.config.hidden_dim {
        return Err(ModelError::ShapeMismatch(format!(
            "hidden has {} entries, model expects {}",
            hidden.len(),
            params.config.hidden_dim
        )));
    }
    if hidden.iter().any(|v| !v.is_finite()) {
        return Err(ModelError::NonFinite("hidden representation".into()));
    }
    Ok(())
}

pub(crate) fn class_logits(hidden: ArrayView1<f64>, params: &ModelParams) -> Array1<f64> {
    hidden.dot(&params.class_weight) + &params.class_bias
}

/// Probabilities over the five grades.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassDistribution {
    pub probabilities: [f64; NUM_GRADES],
}

impl ClassDistribution {
    pub fn new(probabilities: [f64; NUM_GRADES]) -> Result<Self, ModelError> {
        let sum: f64 = probabilities.iter().sum();
        if probabilities.iter().any(|p| !(0.0..=1.0).contains(p)) || (sum - 1.0).abs() > 1e-9 {
            return Err(ModelError::NotADistribution(probabilities.to_vec()));
        }
        Ok(Self { probabilities })
    }

    /// Max-subtracted softmax.
    pub fn from_logits(logits: &[f64]) -> Self {
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut probabilities = [0.0; NUM_GRADES];
        let mut total = 0.0;
        for (p, &z) in probabilities.iter_mut().zip(logits) {
            *p = (z - max).exp();
            total += *p;
        }
        for p in &mut probabilities {
            *p /= total;
        }
        Self { probabilities }
    }

    pub fn uniform() -> Self {
        Self {
            probabilities: [1.0 / NUM_GRADES as f64; NUM_GRADES],
        }
    }

    /// Most probable grade; ties go to the lower grade.
    pub fn argmax(&self) -> u8 {
        let mut best = 0;
        for (i, &p) in self.probabilities.iter().enumerate().skip(1) {
            if p > self.probabilities[best] {
                best = i;
            }
        }
        best as u8
    }
}

pub fn classify(
    hidden: ArrayView1<f64>,
    params: &ModelParams,
) -> Result<ClassDistribution, ModelError> {
    check_hidden(hidden, params)?;
    let logits = class_logits(hidden, params);
    Ok(ClassDistribution::from_logits(
        logits.as_slice().expect("contiguous"),
    ))
}

/// The contrast head: one affine map from the representation to a score.
pub fn contrast_score(hidden: ArrayView1<f64>, params: &ModelParams) -> Result<f64, ModelError> {
    check_hidden(hidden, params)?;
    Ok(hidden.dot(&params.contrast_weight) + params.contrast_bias)
}

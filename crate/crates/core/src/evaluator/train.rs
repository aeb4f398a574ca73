use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::{joint_loss_and_grad, LabeledExample, LossBreakdown, PairExample};
use super::model::{Activation, ModelConfig, ModelParams};
use super::tokenizer::Tokenizer;
use super::ModelError;
use crate::corpus::{ContrastivePair, Document};

/// Weight of the contrast term used in the reported experiments.
pub const DEFAULT_LOSS_RATIO: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Optimizer {
    Sgd,
    Momentum { beta: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Ratio `C` between the contrast and classification losses.
    #[serde(rename = "C")]
    pub c: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Pairs drawn per step; defaults to `batch_size` when zero.
    pub pair_batch_size: usize,
    pub seed: u64,
    pub hidden_dim: usize,
    pub vocab_size: usize,
    pub activation: Activation,
    pub init_scale: f64,
    pub optimizer: Optimizer,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            c: DEFAULT_LOSS_RATIO,
            learning_rate: 0.5,
            epochs: 30,
            batch_size: 16,
            pair_batch_size: 0,
            seed: 0,
            hidden_dim: 16,
            vocab_size: 4096,
            activation: Activation::Tanh,
            init_scale: 0.1,
            optimizer: Optimizer::Sgd,
        }
    }
}

impl TrainConfig {
    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            vocab_size: self.vocab_size,
            hidden_dim: self.hidden_dim,
            activation: self.activation,
            init_scale: self.init_scale,
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.to_string()));
        if !self.c.is_finite() || self.c < 0.0 {
            return bad("C must be finite and >= 0");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning rate must be positive");
        }
        if self.epochs == 0 || self.batch_size == 0 || self.hidden_dim == 0 {
            return bad("epochs, batch size and hidden dim must be positive");
        }
        if self.vocab_size < 2 {
            return bad("vocabulary needs at least two ids");
        }
        if let Optimizer::Momentum { beta } = self.optimizer {
            if !(0.0..1.0).contains(&beta) {
                return bad("momentum beta must lie in [0, 1)");
            }
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("no labeled documents to train on")]
    EmptyCorpus,
    #[error("document {0:?} has no grade")]
    MissingGrade(String),
    #[error("training diverged in epoch {epoch}: {source}")]
    Diverged {
        epoch: usize,
        #[source]
        source: ModelError,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    #[serde(rename = "L_cls")]
    pub cls: f64,
    #[serde(rename = "L_ctr")]
    pub ctr: f64,
    #[serde(rename = "L")]
    pub total: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub params: ModelParams,
    pub log: Vec<EpochLog>,
}

pub fn labeled_examples(
    docs: &[Document],
    tokenizer: &Tokenizer,
) -> Result<Vec<LabeledExample>, TrainError> {
    docs.iter()
        .map(|d| {
            let grade = d
                .grade
                .ok_or_else(|| TrainError::MissingGrade(d.id.clone()))?;
            Ok(LabeledExample {
                tokens: tokenizer.tokenize(&d.qa_text()),
                grade,
            })
        })
        .collect()
}

pub fn pair_examples(pairs: &[ContrastivePair], tokenizer: &Tokenizer) -> Vec<PairExample> {
    pairs
        .iter()
        .map(|p| PairExample {
            higher: tokenizer.tokenize(&p.higher().qa_text()),
            lower: tokenizer.tokenize(&p.lower().qa_text()),
        })
        .collect()
}

/// Cycles through a list in reshuffled passes.
struct Sampler {
    order: Vec<usize>,
    cursor: usize,
    rng: ChaCha8Rng,
}

impl Sampler {
    fn new(len: usize, rng: ChaCha8Rng) -> Self {
        Self {
            order: (0..len).collect(),
            cursor: len,
            rng,
        }
    }

    fn reshuffle(&mut self) {
        self.order.shuffle(&mut self.rng);
        self.cursor = 0;
    }

    fn take(&mut self, n: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(n);
        while out.len() < n && !self.order.is_empty() {
            if self.cursor == self.order.len() {
                self.reshuffle();
            }
            out.push(self.order[self.cursor]);
            self.cursor += 1;
        }
        out
    }
}

/// Mini-batch gradient training of the joint objective.
///
/// Each step takes one labeled mini-batch and one independently sampled
/// pair mini-batch. Labeled and pair sampling use separate RNG streams, so
/// the pairs never perturb the labeled batch sequence.
pub fn train(
    labeled: &[Document],
    pairs: &[ContrastivePair],
    config: &TrainConfig,
) -> Result<TrainOutput, TrainError> {
    config.validate()?;
    if labeled.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }
    let tokenizer = Tokenizer::new(config.vocab_size);
    let labeled = labeled_examples(labeled, &tokenizer)?;
    let pairs = pair_examples(pairs, &tokenizer);
    train_examples(&labeled, &pairs, config)
}

pub fn train_examples(
    labeled: &[LabeledExample],
    pairs: &[PairExample],
    config: &TrainConfig,
) -> Result<TrainOutput, TrainError> {
    config.validate()?;
    if labeled.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }
    let mut params = ModelParams::init(config.model_config(), config.seed);
    let mut velocity = ModelParams::zeros(config.model_config());
    let mut labeled_sampler = Sampler::new(labeled.len(), stream(config.seed, 1));
    let mut pair_sampler = Sampler::new(pairs.len(), stream(config.seed, 2));
    let pair_batch = if config.pair_batch_size == 0 {
        config.batch_size
    } else {
        config.pair_batch_size
    };
    let steps = labeled.len().div_ceil(config.batch_size);
    let mut log = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        labeled_sampler.reshuffle();
        let mut sum = LossBreakdown::default();
        for _ in 0..steps {
            let batch: Vec<LabeledExample> = labeled_sampler
                .take(
                    config
                        .batch_size
                        .min(labeled.len() - labeled_sampler.cursor),
                )
                .into_iter()
                .map(|i| labeled[i].clone())
                .collect();
            let pair_batch: Vec<PairExample> = pair_sampler
                .take(pair_batch)
                .into_iter()
                .map(|i| pairs[i].clone())
                .collect();
            let (loss, grads) = joint_loss_and_grad(&batch, &pair_batch, &params, config.c)
                .map_err(|source| TrainError::Diverged { epoch, source })?;
            apply_update(&mut params, &mut velocity, &grads, config);
            sum.cls += loss.cls;
            sum.ctr += loss.ctr;
            sum.total += loss.total;
        }
        let n = steps as f64;
        let entry = EpochLog {
            epoch,
            cls: sum.cls / n,
            ctr: sum.ctr / n,
            total: sum.total / n,
        };
        log::debug!(
            "epoch {epoch}: L_cls={:.5} L_ctr={:.5} L={:.5}",
            entry.cls,
            entry.ctr,
            entry.total
        );
        if let Err(source) = params.check() {
            return Err(TrainError::Diverged { epoch, source });
        }
        log.push(entry);
    }
    Ok(TrainOutput { params, log })
}

fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn apply_update(
    params: &mut ModelParams,
    velocity: &mut ModelParams,
    grads: &ModelParams,
    config: &TrainConfig,
) {
    let lr = config.learning_rate;
    let beta = match config.optimizer {
        Optimizer::Sgd => None,
        Optimizer::Momentum { beta } => Some(beta),
    };
    for (((_, p), (_, v)), (_, g)) in params
        .blocks_mut()
        .into_iter()
        .zip(velocity.blocks_mut())
        .zip(grads.blocks())
    {
        match beta {
            None => p.iter_mut().zip(g).for_each(|(p, g)| *p -= lr * g),
            Some(beta) => {
                for ((p, v), g) in p.iter_mut().zip(v.iter_mut()).zip(g) {
                    *v = beta * *v + g;
                    *p -= lr * *v;
                }
            }
        }
    }
}

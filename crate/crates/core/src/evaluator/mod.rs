//! A small trainable quality evaluator.
//!
//! Documents are hashed into token ids, embedded, passed position-wise
//! through one dense layer and mean-pooled into a representation `h`.
//! A linear head turns `h` into five grade logits; a separate linear
//! contrast head turns `h` into a scalar score that is only used by the
//! pairwise loss. Training minimizes `L_cls + C · L_ctr`.

mod checkpoint;
mod loss;
mod model;
pub(crate) mod tokenizer;
mod train;

use thiserror::Error;

pub use checkpoint::{
    load_checkpoint, save_checkpoint, Checkpoint, CheckpointError, CHECKPOINT_FORMAT,
};
pub use loss::{
    cls_loss, ctr_loss, joint_loss, joint_loss_and_grad, sigmoid, softplus, LabeledExample,
    LossBreakdown, PairExample,
};
pub use model::{
    classify, contrast_score, encode, Activation, ClassDistribution, ModelConfig, ModelParams,
    BLOCK_NAMES,
};
pub use tokenizer::{words, TokenSequence, Tokenizer, EMPTY_TOKEN};
pub use train::{
    labeled_examples, pair_examples, train, train_examples, EpochLog, Optimizer, TrainConfig,
    TrainError, TrainOutput, DEFAULT_LOSS_RATIO,
};

use crate::corpus::format_qa;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite values in {0}")]
    NonFinite(String),
    #[error("token id {id} outside vocabulary of {vocab}")]
    TokenOutOfRange { id: u32, vocab: usize },
    #[error("gold grade {0} outside [0,4]")]
    GoldOutOfRange(u8),
    #[error("both the labeled and the pair batch are empty")]
    EmptyBatches,
    #[error("loss ratio C = {0} must be finite and >= 0")]
    InvalidRatio(f64),
    #[error("loss is not finite")]
    NonFiniteLoss,
    #[error("non-finite gradient in block {0}")]
    NonFiniteGradient(String),
    #[error("not a probability distribution: {0:?}")]
    NotADistribution(Vec<f64>),
}

/// Predicted grade for an article (argmax, ties to the lower grade) and the
/// full distribution. The article is wrapped in the QA framing first.
pub fn predict_grade(
    title: &str,
    article: &str,
    params: &ModelParams,
) -> Result<(u8, ClassDistribution), ModelError> {
    let tokens = params.tokenizer().tokenize(&format_qa(title, article));
    let hidden = encode(&tokens, params)?;
    let dist = classify(hidden.view(), params)?;
    Ok((dist.argmax(), dist))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bias_shift_leaves_prediction_unchanged() {
        let p = ModelParams::init(
            ModelConfig {
                vocab_size: 97,
                hidden_dim: 6,
                init_scale: 1.0,
                ..ModelConfig::default()
            },
            21,
        );
        let mut shifted = p.clone();
        shifted.class_bias += 3.25;
        for text in ["alpha beta", "a much longer article about rivers", ""] {
            let (g0, d0) = predict_grade("t", text, &p).unwrap();
            let (g1, d1) = predict_grade("t", text, &shifted).unwrap();
            assert_eq!(g0, g1);
            for (a, b) in d0.probabilities.iter().zip(d1.probabilities) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }
}

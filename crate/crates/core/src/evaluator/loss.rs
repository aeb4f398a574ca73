//! Grade cross-entropy, pairwise logistic contrast loss, and their weighted
//! sum with exact gradients.

use ndarray::{Array1, Axis};

use super::model::{class_logits, encode_backward, encode_full, ClassDistribution, ModelParams};
use super::tokenizer::TokenSequence;
use super::ModelError;
use crate::corpus::MAX_GRADE;

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// `−ln p(gold)`.
pub fn cls_loss(distribution: &ClassDistribution, gold: u8) -> Result<f64, ModelError> {
    if gold > MAX_GRADE {
        return Err(ModelError::GoldOutOfRange(gold));
    }
    Ok(-distribution.probabilities[gold as usize].ln())
}

/// `−log σ(score_hi − score_lo)`, evaluated as `softplus(score_lo − score_hi)`.
pub fn ctr_loss(score_hi: f64, score_lo: f64) -> Result<f64, ModelError> {
    if !(score_hi.is_finite() && score_lo.is_finite()) {
        return Err(ModelError::NonFinite("contrast scores".into()));
    }
    Ok(softplus(score_lo - score_hi))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledExample {
    pub tokens: TokenSequence,
    pub grade: u8,
}

/// `higher` is the rewrite, `lower` the original document.
#[derive(Debug, Clone, PartialEq)]
pub struct PairExample {
    pub higher: TokenSequence,
    pub lower: TokenSequence,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize, serde::Deserialize)]
pub struct LossBreakdown {
    pub cls: f64,
    pub ctr: f64,
    pub total: f64,
}

fn check_batches(
    labeled: &[LabeledExample],
    pairs: &[PairExample],
    c: f64,
) -> Result<(), ModelError> {
    if labeled.is_empty() && pairs.is_empty() {
        return Err(ModelError::EmptyBatches);
    }
    if !c.is_finite() || c < 0.0 {
        return Err(ModelError::InvalidRatio(c));
    }
    if let Some(ex) = labeled.iter().find(|ex| ex.grade > MAX_GRADE) {
        return Err(ModelError::GoldOutOfRange(ex.grade));
    }
    Ok(())
}

/// Mean cross-entropy over `labeled` plus `c` times the mean contrast loss
/// over `pairs`. An empty batch contributes zero.
pub fn joint_loss(
    labeled: &[LabeledExample],
    pairs: &[PairExample],
    params: &ModelParams,
    c: f64,
) -> Result<LossBreakdown, ModelError> {
    check_batches(labeled, pairs, c)?;
    let mut cls = 0.0;
    for ex in labeled {
        let h = encode_full(&ex.tokens, params)?.hidden;
        let logits = class_logits(h.view(), params);
        let logits = logits.as_slice().expect("contiguous");
        cls += log_sum_exp(logits) - logits[ex.grade as usize];
    }
    let mut ctr = 0.0;
    for pair in pairs {
        let hi = encode_full(&pair.higher, params)?.hidden;
        let lo = encode_full(&pair.lower, params)?.hidden;
        let margin = (&hi - &lo).dot(&params.contrast_weight);
        ctr += softplus(-margin);
    }
    let cls = if labeled.is_empty() {
        0.0
    } else {
        cls / labeled.len() as f64
    };
    let ctr = if pairs.is_empty() {
        0.0
    } else {
        ctr / pairs.len() as f64
    };
    Ok(LossBreakdown {
        cls,
        ctr,
        total: cls + c * ctr,
    })
}

/// Loss and its exact gradient with respect to every parameter.
pub fn joint_loss_and_grad(
    labeled: &[LabeledExample],
    pairs: &[PairExample],
    params: &ModelParams,
    c: f64,
) -> Result<(LossBreakdown, ModelParams), ModelError> {
    check_batches(labeled, pairs, c)?;
    let mut grads = ModelParams::zeros(params.config);

    let mut cls = 0.0;
    if !labeled.is_empty() {
        let scale = 1.0 / labeled.len() as f64;
        for ex in labeled {
            let enc = encode_full(&ex.tokens, params)?;
            let logits = class_logits(enc.hidden.view(), params);
            let logits_s = logits.as_slice().expect("contiguous");
            cls += log_sum_exp(logits_s) - logits_s[ex.grade as usize];
            let dist = ClassDistribution::from_logits(logits_s);
            let mut grad_logits = Array1::from(dist.probabilities.to_vec());
            grad_logits[ex.grade as usize] -= 1.0;
            grad_logits *= scale;
            let outer = enc
                .hidden
                .view()
                .insert_axis(Axis(1))
                .dot(&grad_logits.view().insert_axis(Axis(0)));
            grads.class_weight += &outer;
            grads.class_bias += &grad_logits;
            let grad_hidden = params.class_weight.dot(&grad_logits);
            encode_backward(&enc, grad_hidden.view(), params, &mut grads);
        }
        cls *= scale;
    }

    let mut ctr = 0.0;
    if !pairs.is_empty() {
        let scale = 1.0 / pairs.len() as f64;
        for pair in pairs {
            let hi = encode_full(&pair.higher, params)?;
            let lo = encode_full(&pair.lower, params)?;
            let margin = (&hi.hidden - &lo.hidden).dot(&params.contrast_weight);
            ctr += softplus(-margin);
            // d softplus(-m) / dm = -σ(-m)
            let grad_margin = -sigmoid(-margin) * c * scale;
            grads.contrast_weight.scaled_add(grad_margin, &hi.hidden);
            grads.contrast_weight.scaled_add(-grad_margin, &lo.hidden);
            let grad_hi = &params.contrast_weight * grad_margin;
            let grad_lo = &params.contrast_weight * -grad_margin;
            encode_backward(&hi, grad_hi.view(), params, &mut grads);
            encode_backward(&lo, grad_lo.view(), params, &mut grads);
        }
        ctr *= scale;
    }

    let loss = LossBreakdown {
        cls,
        ctr,
        total: cls + c * ctr,
    };
    if !loss.total.is_finite() {
        return Err(ModelError::NonFiniteLoss);
    }
    for (name, values) in grads.blocks() {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFiniteGradient(name.to_string()));
        }
    }
    Ok((loss, grads))
}

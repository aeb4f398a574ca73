//! Agreement and diversity statistics: Spearman ρ, Kendall τ-b, quadratic
//! weighted kappa, accuracy, per-class and macro F1, type-token ratio and
//! Self-BLEU.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::NUM_GRADES;
use crate::evaluator::words;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("{metric}: empty input")]
    Empty { metric: &'static str },
    #[error("{metric}: gold has {gold} items but predictions have {pred}")]
    LengthMismatch {
        metric: &'static str,
        gold: usize,
        pred: usize,
    },
    #[error("{metric}: needs at least {min} items, got {got}")]
    TooShort {
        metric: &'static str,
        min: usize,
        got: usize,
    },
    #[error("{metric}: non-finite score")]
    NonFinite { metric: &'static str },
    #[error("{metric}: grade {grade} outside [0, {num_classes})")]
    OutOfRange {
        metric: &'static str,
        grade: usize,
        num_classes: usize,
    },
    #[error("{metric}: undefined ({reason})")]
    Undefined {
        metric: &'static str,
        reason: &'static str,
    },
}

impl MetricError {
    pub fn metric(&self) -> &'static str {
        match self {
            MetricError::Empty { metric }
            | MetricError::LengthMismatch { metric, .. }
            | MetricError::TooShort { metric, .. }
            | MetricError::NonFinite { metric }
            | MetricError::OutOfRange { metric, .. }
            | MetricError::Undefined { metric, .. } => metric,
        }
    }
}

/// Aligned gold and predicted scores.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedScores {
    gold: Vec<f64>,
    pred: Vec<f64>,
}

impl PairedScores {
    pub fn new(gold: Vec<f64>, pred: Vec<f64>) -> Result<Self, MetricError> {
        const M: &str = "paired scores";
        if gold.len() != pred.len() {
            return Err(MetricError::LengthMismatch {
                metric: M,
                gold: gold.len(),
                pred: pred.len(),
            });
        }
        if gold.is_empty() {
            return Err(MetricError::Empty { metric: M });
        }
        if gold.iter().chain(&pred).any(|v| !v.is_finite()) {
            return Err(MetricError::NonFinite { metric: M });
        }
        Ok(Self { gold, pred })
    }

    pub fn from_grades(gold: &[u8], pred: &[u8]) -> Result<Self, MetricError> {
        Self::new(
            gold.iter().map(|&g| f64::from(g)).collect(),
            pred.iter().map(|&g| f64::from(g)).collect(),
        )
    }

    pub fn gold(&self) -> &[f64] {
        &self.gold
    }

    pub fn pred(&self) -> &[f64] {
        &self.pred
    }

    pub fn len(&self) -> usize {
        self.gold.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gold.is_empty()
    }
}

/// 1-based ranks; tied values share the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start+1 ..= end
        let rank = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Pearson correlation of average ranks.
pub fn spearman(scores: &PairedScores) -> Result<f64, MetricError> {
    const M: &str = "spearman";
    if scores.len() < 2 {
        return Err(MetricError::TooShort {
            metric: M,
            min: 2,
            got: scores.len(),
        });
    }
    pearson(&average_ranks(&scores.gold), &average_ranks(&scores.pred)).ok_or(
        MetricError::Undefined {
            metric: M,
            reason: "one side is constant",
        },
    )
}

/// Inversions of `v` (pairs i < j with v[i] > v[j]), sorting `v` in place.
fn count_inversions(v: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = count_inversions(&mut v[..mid]) + count_inversions(&mut v[mid..]);
    let mut merged = Vec::with_capacity(n);
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[j] < v[i] {
            swaps += (mid - i) as u64;
            merged.push(v[j]);
            j += 1;
        } else {
            merged.push(v[i]);
            i += 1;
        }
    }
    merged.extend_from_slice(&v[i..mid]);
    merged.extend_from_slice(&v[j..]);
    v.copy_from_slice(&merged);
    swaps
}

fn tied_pairs<T: PartialEq>(sorted: &[T]) -> u64 {
    let mut total = 0;
    let mut start = 0;
    while start < sorted.len() {
        let mut end = start + 1;
        while end < sorted.len() && sorted[end] == sorted[start] {
            end += 1;
        }
        let t = (end - start) as u64;
        total += t * (t - 1) / 2;
        start = end;
    }
    total
}

/// Tie-corrected Kendall τ-b in O(n log n) (Knight's merge-sort method).
pub fn kendall_tau(scores: &PairedScores) -> Result<f64, MetricError> {
    const M: &str = "kendall_tau";
    let n = scores.len();
    if n < 2 {
        return Err(MetricError::TooShort {
            metric: M,
            min: 2,
            got: n,
        });
    }
    let mut joint: Vec<(f64, f64)> = scores
        .gold
        .iter()
        .copied()
        .zip(scores.pred.iter().copied())
        .collect();
    joint.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let gold_sorted: Vec<f64> = joint.iter().map(|p| p.0).collect();
    let ties_gold = tied_pairs(&gold_sorted);
    let ties_joint = tied_pairs(&joint);
    let mut pred_seq: Vec<f64> = joint.iter().map(|p| p.1).collect();
    let discordant = count_inversions(&mut pred_seq);
    let ties_pred = tied_pairs(&pred_seq);

    let total = (n * (n - 1) / 2) as u64;
    let denom_gold = total - ties_gold;
    let denom_pred = total - ties_pred;
    if denom_gold == 0 || denom_pred == 0 {
        return Err(MetricError::Undefined {
            metric: M,
            reason: "all pairs tied on one side",
        });
    }
    let numerator = total as f64 - ties_gold as f64 - ties_pred as f64 + ties_joint as f64
        - 2.0 * discordant as f64;
    let tau = numerator / ((denom_gold as f64) * (denom_pred as f64)).sqrt();
    Ok(tau.clamp(-1.0, 1.0))
}

fn check_grades(
    metric: &'static str,
    gold: &[u8],
    pred: &[u8],
    num_classes: usize,
) -> Result<(), MetricError> {
    if gold.len() != pred.len() {
        return Err(MetricError::LengthMismatch {
            metric,
            gold: gold.len(),
            pred: pred.len(),
        });
    }
    if gold.is_empty() {
        return Err(MetricError::Empty { metric });
    }
    if let Some(&g) = gold
        .iter()
        .chain(pred)
        .find(|&&g| g as usize >= num_classes)
    {
        return Err(MetricError::OutOfRange {
            metric,
            grade: g as usize,
            num_classes,
        });
    }
    Ok(())
}

/// Quadratic weighted kappa: `1 − Σ w·O / Σ w·E`.
pub fn qwk(gold: &[u8], pred: &[u8], num_classes: usize) -> Result<f64, MetricError> {
    const M: &str = "qwk";
    if num_classes < 2 {
        return Err(MetricError::Undefined {
            metric: M,
            reason: "fewer than two classes",
        });
    }
    check_grades(M, gold, pred, num_classes)?;
    let k = num_classes;
    let n = gold.len() as f64;
    let mut observed = vec![0.0; k * k];
    let mut hist_gold = vec![0.0; k];
    let mut hist_pred = vec![0.0; k];
    for (&g, &p) in gold.iter().zip(pred) {
        observed[g as usize * k + p as usize] += 1.0;
        hist_gold[g as usize] += 1.0;
        hist_pred[p as usize] += 1.0;
    }
    let scale = ((k - 1) * (k - 1)) as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..k {
        for j in 0..k {
            let w = ((i as f64) - (j as f64)).powi(2) / scale;
            num += w * observed[i * k + j];
            den += w * hist_gold[i] * hist_pred[j] / n;
        }
    }
    if den == 0.0 {
        return Err(MetricError::Undefined {
            metric: M,
            reason: "expected disagreement is zero",
        });
    }
    Ok(1.0 - num / den)
}

pub fn accuracy(gold: &[u8], pred: &[u8]) -> Result<f64, MetricError> {
    check_grades("accuracy", gold, pred, usize::MAX)?;
    let hits = gold.iter().zip(pred).filter(|(g, p)| g == p).count();
    Ok(hits as f64 / gold.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F1Scores {
    pub per_class: Vec<f64>,
    pub macro_f1: f64,
}

/// Per-class F1 and their unweighted mean. A class with no gold and no
/// predicted items scores 0.
pub fn f1_scores(gold: &[u8], pred: &[u8], num_classes: usize) -> Result<F1Scores, MetricError> {
    check_grades("f1", gold, pred, num_classes)?;
    let mut tp = vec![0u64; num_classes];
    let mut fp = vec![0u64; num_classes];
    let mut fn_ = vec![0u64; num_classes];
    for (&g, &p) in gold.iter().zip(pred) {
        if g == p {
            tp[g as usize] += 1;
        } else {
            fp[p as usize] += 1;
            fn_[g as usize] += 1;
        }
    }
    let per_class: Vec<f64> = (0..num_classes)
        .map(|c| {
            let denom = 2 * tp[c] + fp[c] + fn_[c];
            if denom == 0 {
                0.0
            } else {
                (2 * tp[c]) as f64 / denom as f64
            }
        })
        .collect();
    let macro_f1 = per_class.iter().sum::<f64>() / num_classes as f64;
    Ok(F1Scores {
        per_class,
        macro_f1,
    })
}

/// Distinct tokens over total tokens.
pub fn ttr(text: &str) -> Result<f64, MetricError> {
    let tokens = words(text);
    if tokens.is_empty() {
        return Err(MetricError::Empty { metric: "ttr" });
    }
    let distinct: std::collections::HashSet<&str> = tokens.iter().map(String::as_str).collect();
    Ok(distinct.len() as f64 / tokens.len() as f64)
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_default() += 1;
        }
    }
    counts
}

/// Sentence BLEU with add-one smoothed modified precisions, uniform weights
/// up to `max_n`, and the closest-reference-length brevity penalty.
pub fn bleu(hypothesis: &[String], references: &[Vec<String>], max_n: usize) -> f64 {
    let c = hypothesis.len();
    if c == 0 || references.is_empty() || max_n == 0 {
        return 0.0;
    }
    let mut log_precision = 0.0;
    for n in 1..=max_n {
        let hyp = ngram_counts(hypothesis, n);
        let mut max_ref: HashMap<&[String], usize> = HashMap::new();
        for r in references {
            for (gram, count) in ngram_counts(r, n) {
                let slot = max_ref.entry(gram).or_default();
                *slot = (*slot).max(count);
            }
        }
        let clipped: usize = hyp
            .iter()
            .map(|(gram, &count)| count.min(max_ref.get(gram).copied().unwrap_or(0)))
            .sum();
        let total = c.saturating_sub(n - 1);
        log_precision += ((clipped as f64 + 1.0) / (total as f64 + 1.0)).ln();
    }
    let r = references
        .iter()
        .map(Vec::len)
        .min_by_key(|&len| (len.abs_diff(c), len))
        .expect("references are non-empty");
    let brevity = if c > r {
        1.0
    } else {
        (1.0 - r as f64 / c as f64).exp()
    };
    brevity * (log_precision / max_n as f64).exp()
}

/// BLEU of each document against all the others.
pub fn self_bleu_per_document<S: AsRef<str>>(
    documents: &[S],
    max_n: usize,
) -> Result<Vec<f64>, MetricError> {
    const M: &str = "self_bleu";
    if documents.len() < 2 {
        return Err(MetricError::TooShort {
            metric: M,
            min: 2,
            got: documents.len(),
        });
    }
    if max_n == 0 {
        return Err(MetricError::Undefined {
            metric: M,
            reason: "max_n must be positive",
        });
    }
    let tokens: Vec<Vec<String>> = documents.iter().map(|d| words(d.as_ref())).collect();
    Ok((0..tokens.len())
        .map(|i| {
            let refs: Vec<Vec<String>> = tokens
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, t)| t.clone())
                .collect();
            bleu(&tokens[i], &refs, max_n)
        })
        .collect())
}

pub const DEFAULT_SELF_BLEU_N: usize = 4;

/// Mean of [`self_bleu_per_document`].
pub fn self_bleu<S: AsRef<str>>(documents: &[S], max_n: usize) -> Result<f64, MetricError> {
    let per_doc = self_bleu_per_document(documents, max_n)?;
    Ok(per_doc.iter().sum::<f64>() / per_doc.len() as f64)
}

/// Metric bundle for one prediction run. Correlations that are undefined
/// (constant input) are `None` and serialize as `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub spearman: Option<f64>,
    pub kendall: Option<f64>,
    pub qwk: Option<f64>,
    pub accuracy: f64,
    pub accuracy_percent: f64,
    pub f1_per_class: Vec<f64>,
    pub macro_f1: f64,
    pub n: usize,
}

fn undefined_as_none(result: Result<f64, MetricError>) -> Result<Option<f64>, MetricError> {
    match result {
        Ok(v) => Ok(Some(v)),
        Err(MetricError::Undefined { metric, reason }) => {
            log::info!("{metric} undefined: {reason}");
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

/// Every metric over aligned gold and predicted grades on the 5-point scale.
pub fn evaluate(gold: &[u8], pred: &[u8]) -> Result<EvalReport, MetricError> {
    check_grades("evaluate", gold, pred, NUM_GRADES)?;
    let scores = PairedScores::from_grades(gold, pred)?;
    let (spearman, kendall) = if scores.len() < 2 {
        (None, None)
    } else {
        (
            undefined_as_none(spearman(&scores))?,
            undefined_as_none(kendall_tau(&scores))?,
        )
    };
    let acc = accuracy(gold, pred)?;
    let f1 = f1_scores(gold, pred, NUM_GRADES)?;
    Ok(EvalReport {
        spearman,
        kendall,
        qwk: undefined_as_none(qwk(gold, pred, NUM_GRADES))?,
        accuracy: acc,
        accuracy_percent: acc * 100.0,
        f1_per_class: f1.per_class,
        macro_f1: f1.macro_f1,
        n: gold.len(),
    })
}

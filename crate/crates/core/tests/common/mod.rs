//! Brute-force reference implementations used as test oracles. They are
//! written independently of the library code and favour the most literal
//! form of each definition over speed.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

pub fn rank_oracle(values: &[f64]) -> Vec<f64> {
    values
        .iter()
        .map(|&v| {
            let below = values.iter().filter(|&&w| w < v).count() as f64;
            let equal = values.iter().filter(|&&w| w == v).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

pub fn spearman_oracle(x: &[f64], y: &[f64]) -> Option<f64> {
    let rx = rank_oracle(x);
    let ry = rank_oracle(y);
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx) * (a - mx)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my) * (b - my)).sum();
    if vx == 0.0 || vy == 0.0 {
        None
    } else {
        Some(cov / (vx.sqrt() * vy.sqrt()))
    }
}

/// τ-b from an explicit loop over all pairs.
pub fn kendall_oracle(x: &[f64], y: &[f64]) -> Option<f64> {
    let (mut concordant, mut discordant, mut only_x, mut only_y) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            let dx = x[i] - x[j];
            let dy = y[i] - y[j];
            if dx == 0.0 && dy == 0.0 {
                continue;
            } else if dx == 0.0 {
                only_x += 1;
            } else if dy == 0.0 {
                only_y += 1;
            } else if (dx > 0.0) == (dy > 0.0) {
                concordant += 1;
            } else {
                discordant += 1;
            }
        }
    }
    let a = (concordant + discordant + only_x) as f64;
    let b = (concordant + discordant + only_y) as f64;
    if a == 0.0 || b == 0.0 {
        None
    } else {
        Some((concordant - discordant) as f64 / (a * b).sqrt())
    }
}

/// Quadratic kappa in its pairwise form: observed squared disagreement over
/// the disagreement of all gold/prediction cross pairs.
pub fn qwk_oracle(gold: &[u8], pred: &[u8], k: usize) -> Option<f64> {
    let scale = ((k - 1) * (k - 1)) as f64;
    let sq = |a: u8, b: u8| (f64::from(a) - f64::from(b)).powi(2) / scale;
    let n = gold.len() as f64;
    let observed: f64 = gold.iter().zip(pred).map(|(&g, &p)| sq(g, p)).sum();
    let mut expected = 0.0;
    for &g in gold {
        for &p in pred {
            expected += sq(g, p);
        }
    }
    expected /= n;
    if expected == 0.0 {
        None
    } else {
        Some(1.0 - observed / expected)
    }
}

pub fn accuracy_oracle(gold: &[u8], pred: &[u8]) -> f64 {
    let mut hits = 0;
    for i in 0..gold.len() {
        if gold[i] == pred[i] {
            hits += 1;
        }
    }
    hits as f64 / gold.len() as f64
}

/// Per-class F1 through precision and recall; zero support gives 0.
pub fn f1_oracle(gold: &[u8], pred: &[u8], k: usize) -> (Vec<f64>, f64) {
    let mut per_class = Vec::new();
    for c in 0..k as u8 {
        let tp = gold
            .iter()
            .zip(pred)
            .filter(|&(&g, &p)| g == c && p == c)
            .count() as f64;
        let predicted = pred.iter().filter(|&&p| p == c).count() as f64;
        let actual = gold.iter().filter(|&&g| g == c).count() as f64;
        let precision = if predicted > 0.0 { tp / predicted } else { 0.0 };
        let recall = if actual > 0.0 { tp / actual } else { 0.0 };
        per_class.push(if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        });
    }
    let mean = per_class.iter().sum::<f64>() / k as f64;
    (per_class, mean)
}

/// Lower-cased maximal runs of alphanumeric characters.
pub fn words_oracle(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() {
            current.extend(c.to_lowercase());
        } else if !current.is_empty() {
            out.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        out.push(current);
    }
    out
}

pub fn ttr_oracle(text: &str) -> Option<f64> {
    let w = words_oracle(text);
    if w.is_empty() {
        return None;
    }
    let distinct: BTreeSet<&String> = w.iter().collect();
    Some(distinct.len() as f64 / w.len() as f64)
}

fn grams(tokens: &[String], n: usize) -> BTreeMap<String, usize> {
    let mut m = BTreeMap::new();
    if tokens.len() >= n {
        for i in 0..=tokens.len() - n {
            *m.entry(tokens[i..i + n].join(" ")).or_insert(0) += 1;
        }
    }
    m
}

/// Add-one smoothed BLEU, geometric mean taken as a root of the product.
pub fn bleu_oracle(hyp: &[String], refs: &[Vec<String>], max_n: usize) -> f64 {
    if hyp.is_empty() {
        return 0.0;
    }
    let mut product = 1.0;
    for n in 1..=max_n {
        let h = grams(hyp, n);
        let mut clipped = 0;
        for (g, &c) in &h {
            let best = refs
                .iter()
                .map(|r| grams(r, n).get(g).copied().unwrap_or(0))
                .max()
                .unwrap_or(0);
            clipped += c.min(best);
        }
        let total = if hyp.len() >= n { hyp.len() - n + 1 } else { 0 };
        product *= (clipped as f64 + 1.0) / (total as f64 + 1.0);
    }
    let c = hyp.len() as i64;
    let mut best_len = refs[0].len() as i64;
    for r in refs {
        let l = r.len() as i64;
        let (d, bd) = ((l - c).abs(), (best_len - c).abs());
        if d < bd || (d == bd && l < best_len) {
            best_len = l;
        }
    }
    let bp = if c > best_len {
        1.0
    } else {
        (1.0 - best_len as f64 / c as f64).exp()
    };
    bp * product.powf(1.0 / max_n as f64)
}

pub fn self_bleu_oracle(docs: &[String], max_n: usize) -> f64 {
    let tokens: Vec<Vec<String>> = docs.iter().map(|d| words_oracle(d)).collect();
    let mut total = 0.0;
    for i in 0..tokens.len() {
        let refs: Vec<Vec<String>> = (0..tokens.len())
            .filter(|&j| j != i)
            .map(|j| tokens[j].clone())
            .collect();
        total += bleu_oracle(&tokens[i], &refs, max_n);
    }
    total / tokens.len() as f64
}

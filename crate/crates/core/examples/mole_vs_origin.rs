//! Trains the evaluator with and without contrastive pairs on a synthetic
//! corpus and compares test rank correlation across seeds.
//!
//! cargo run --release --example mole_vs_origin -- [seeds]

use std::time::Instant;

use mole::counterfactual::{build_contrastive_dataset, GenerationConfig};
use mole::evaluator::{predict_grade, train, ModelParams, TrainConfig};
use mole::llm_client::{FacetMockTransport, LlmClient};
use mole::metrics::{evaluate, EvalReport};
use mole::synth::{synth_split, SynthConfig};

fn env<T: std::str::FromStr>(key: &str, default: T) -> T {
    std::env::var(key)
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(default)
}

fn report(params: &ModelParams, test: &[mole::corpus::Document]) -> EvalReport {
    let gold: Vec<u8> = test.iter().map(|d| d.grade.unwrap()).collect();
    let pred: Vec<u8> = test
        .iter()
        .map(|d| predict_grade(&d.title, &d.body, params).unwrap().0)
        .collect();
    evaluate(&gold, &pred).unwrap()
}

fn main() -> anyhow::Result<()> {
    let seeds: u64 = std::env::args()
        .nth(1)
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(5);
    let filler = env("FILLER", 8);
    let base = TrainConfig {
        epochs: env("EPOCHS", 30),
        learning_rate: env("LR", 0.5),
        hidden_dim: env("HIDDEN", 16),
        vocab_size: env("VOCAB", 4096),
        batch_size: env("BATCH", 16),
        ..TrainConfig::default()
    };
    let mut gains = Vec::new();
    for seed in 0..seeds {
        let start = Instant::now();
        let split = synth_split(
            &SynthConfig {
                size: 500,
                seed,
                filler_sentences: filler,
            },
            200,
        );
        let (train_set, test_set) = (split.train.documents, split.test.documents);
        let client = LlmClient::new(FacetMockTransport::new());
        let pairs = build_contrastive_dataset(
            &train_set,
            &client,
            &GenerationConfig {
                seed,
                ..GenerationConfig::default()
            },
        )?
        .pairs;

        let origin = train(
            &train_set,
            &[],
            &TrainConfig {
                seed,
                c: 0.0,
                ..base.clone()
            },
        )?;
        let mole = train(
            &train_set,
            &pairs,
            &TrainConfig {
                seed,
                ..base.clone()
            },
        )?;
        let r0 = report(&origin.params, &test_set);
        let r1 = report(&mole.params, &test_set);
        let rho0 = r0.spearman.unwrap_or(0.0);
        let rho1 = r1.spearman.unwrap_or(0.0);
        gains.push(rho1 - rho0);
        println!(
            "seed {seed}: origin rho {rho0:.4} acc {:.1}% | mole rho {rho1:.4} acc {:.1}% | {:.1}s",
            r0.accuracy_percent,
            r1.accuracy_percent,
            start.elapsed().as_secs_f64()
        );
    }
    let mean = gains.iter().sum::<f64>() / gains.len() as f64;
    println!("mean rho gain {mean:.4}");
    Ok(())
}

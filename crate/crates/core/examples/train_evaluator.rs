//! Trains the evaluator with the joint loss on a synthetic corpus, prints
//! the per-epoch losses, saves a checkpoint and scores the held-out split.
//!
//! cargo run --release --example train_evaluator -- [C] [epochs]

use mole::counterfactual::{build_contrastive_dataset, GenerationConfig};
use mole::evaluator::{load_checkpoint, predict_grade, save_checkpoint, train, TrainConfig};
use mole::llm_client::{FacetMockTransport, LlmClient};
use mole::metrics::evaluate;
use mole::synth::{synth_split, SynthConfig};

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let c = args.next().map(|s| s.parse()).transpose()?.unwrap_or(10.0);
    let epochs = args.next().map(|s| s.parse()).transpose()?.unwrap_or(15);

    let split = synth_split(
        &SynthConfig {
            size: 300,
            seed: 1,
            ..SynthConfig::default()
        },
        100,
    );
    let client = LlmClient::new(FacetMockTransport::new());
    let pairs = build_contrastive_dataset(
        &split.train.documents,
        &client,
        &GenerationConfig::default(),
    )?
    .pairs;

    let config = TrainConfig {
        c,
        epochs,
        seed: 1,
        ..TrainConfig::default()
    };
    let out = train(&split.train.documents, &pairs, &config)?;
    for e in &out.log {
        println!(
            "epoch {:>3}  L_cls {:.4}  L_ctr {:.4}  L {:.4}",
            e.epoch, e.cls, e.ctr, e.total
        );
    }

    let path = std::env::temp_dir().join(format!("mole-example-{}.json", std::process::id()));
    save_checkpoint(&path, &out.params, serde_json::json!({ "C": c }))?;
    let params = load_checkpoint(&path)?.to_params()?;
    std::fs::remove_file(&path)?;

    let gold: Vec<u8> = split
        .test
        .documents
        .iter()
        .map(|d| d.grade.unwrap())
        .collect();
    let pred = split
        .test
        .documents
        .iter()
        .map(|d| predict_grade(&d.title, &d.body, &params).map(|p| p.0))
        .collect::<Result<Vec<_>, _>>()?;
    println!(
        "{}",
        serde_json::to_string_pretty(&evaluate(&gold, &pred)?)?
    );
    Ok(())
}

//! Every metric on a small hand-made prediction set, including the
//! undefined cases and the diversity measures.
//!
//! cargo run --example metrics_suite

use mole::metrics::{evaluate, qwk, self_bleu, spearman, ttr, PairedScores};

fn main() -> anyhow::Result<()> {
    let gold = [0, 1, 2, 3, 4, 4, 2, 1];
    let pred = [0, 2, 2, 3, 3, 4, 1, 1];
    let report = evaluate(&gold, &pred)?;
    println!("{}", serde_json::to_string_pretty(&report)?);

    let constant = PairedScores::from_grades(&[1, 2, 3], &[2, 2, 2])?;
    println!(
        "spearman vs constant predictor: {}",
        spearman(&constant).unwrap_err()
    );
    println!(
        "qwk [0,0,4,4] vs [0,0,3,4]: {:.6}",
        qwk(&[0, 0, 4, 4], &[0, 0, 3, 4], 5)?
    );

    let rewrites = [
        "The river flows south past the mill.",
        "The river flows south past the old mill.",
        "Harbor cranes unload grain at dawn.",
    ];
    println!("TTR of first rewrite: {:.4}", ttr(rewrites[0])?);
    println!("Self-BLEU over rewrites: {:.4}", self_bleu(&rewrites, 4)?);
    Ok(())
}

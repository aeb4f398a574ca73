//! Generates a synthetic corpus and shows how planted degradations map to
//! grades and sub-scores.
//!
//! cargo run --example synth_corpus -- [size] [seed]

use std::collections::BTreeMap;

use mole::synth::{synth_corpus, SynthConfig};

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let size = args.next().map(|s| s.parse()).transpose()?.unwrap_or(200);
    let seed = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0);
    let corpus = synth_corpus(&SynthConfig {
        size,
        seed,
        ..SynthConfig::default()
    });

    let mut per_grade = BTreeMap::new();
    for d in &corpus.documents {
        *per_grade.entry(d.grade.unwrap()).or_insert(0usize) += 1;
    }
    println!("documents per grade: {per_grade:?}");

    let (doc, truth) = (&corpus.documents[0], &corpus.degradations[0]);
    println!("\n{} (grade {})", doc.title, truth.grade);
    println!("degraded: {:?}", truth.degraded);
    println!("sub-scores: {:?}", doc.sub_scores);
    println!("{}", doc.body);
    Ok(())
}

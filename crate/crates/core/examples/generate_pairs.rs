//! Builds contrastive pairs for a small synthetic corpus with the offline
//! facet mock and prints one pair plus the facet tallies.
//!
//! cargo run --example generate_pairs -- [documents] [seed]

use mole::counterfactual::{build_contrastive_dataset, GenerationConfig};
use mole::llm_client::{FacetMockTransport, LlmClient};
use mole::synth::{synth_corpus, SynthConfig};

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let size = args.next().map(|s| s.parse()).transpose()?.unwrap_or(20);
    let seed = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0);

    let docs = synth_corpus(&SynthConfig {
        size,
        seed,
        ..SynthConfig::default()
    })
    .documents;
    let client = LlmClient::new(FacetMockTransport::new()).with_max_in_flight(4);
    let config = GenerationConfig {
        seed,
        ..GenerationConfig::default()
    };
    let data = build_contrastive_dataset(&docs, &client, &config)?;

    if let Some(pair) = data.pairs.first() {
        println!("facet: {}", pair.facet.name());
        println!("grade: {:?}", pair.original.grade);
        println!("original:  {}", pair.original.body);
        println!("rewritten: {}", pair.rewritten.body);
        println!("provenance: {}", serde_json::to_string(&pair.provenance)?);
        println!();
    }
    println!("{}", serde_json::to_string_pretty(&data.summary)?);
    println!("{:?}", client.stats());
    Ok(())
}

//! Renders the issue-finding and rewrite prompts for one document on every
//! facet.
//!
//! cargo run --example prompts

use mole::corpus::{Document, QualityFacet};
use mole::counterfactual::{render_issue_prompt, render_rewrite_prompt};

fn main() -> anyhow::Result<()> {
    let doc = Document::new(
        "demo",
        "Tides",
        "The moon pulls on the ocean. Bakeries open early on Sundays.",
    )
    .with_grade(1);

    for facet in QualityFacet::ALL {
        println!("=== issue prompt: {} ===", facet.name());
        println!("{}\n", render_issue_prompt(&doc, facet)?);
    }

    let issues = "- The second sentence has nothing to do with tides.";
    println!("=== rewrite prompt ===");
    println!("{}", render_rewrite_prompt(&doc, issues)?);
    Ok(())
}

//! Seeded synthetic corpus with planted facet degradations.
//!
//! Each document holds one sentence slot per facet plus topical filler.
//! An intact facet gets a strong sentence from the lexicon and a degraded
//! facet a weak one. The grade is `4 − #degraded`, so more degradations
//! never give a higher grade. Sub-scores record 1 for intact facets and 0
//! for degraded ones.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Document, QualityFacet, MAX_GRADE};
use crate::lexicon::FacetLexicon;

const TOPICS: &[&str] = &[
    "river",
    "harbor",
    "orchard",
    "glacier",
    "bakery",
    "library",
    "railway",
    "garden",
    "market",
    "lighthouse",
    "volcano",
    "meadow",
    "workshop",
    "canyon",
    "festival",
    "museum",
    "island",
    "forest",
    "bridge",
    "vineyard",
];

const FILLER_FRAMES: &[&str] = &[
    "The {t} sits near the {u} on the edge of town.",
    "Visitors often compare the {t} with the {u}.",
    "Locals describe the {t} in terms of the old {u}.",
    "A path runs from the {t} toward the {u}.",
    "The {t} changes with the seasons like the {u}.",
    "Maps of the region mark the {t} and the {u}.",
    "Early records mention the {t} beside a {u}.",
    "Weekend crowds move between the {t} and the {u}.",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub size: usize,
    pub seed: u64,
    /// Topical sentences added to every document.
    pub filler_sentences: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            size: 500,
            seed: 0,
            filler_sentences: 8,
        }
    }
}

/// Ground truth for one generated document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Degradation {
    pub id: String,
    pub grade: u8,
    pub degraded: Vec<QualityFacet>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub documents: Vec<Document>,
    pub degradations: Vec<Degradation>,
}

pub fn grade_for(degraded: usize) -> u8 {
    MAX_GRADE - degraded.min(MAX_GRADE as usize) as u8
}

/// Generates `config.size` documents. The degradation count is drawn
/// uniformly from 0..=4 so every grade is equally likely.
pub fn synth_corpus(config: &SynthConfig) -> SynthCorpus {
    generate(config, config.size, "synth", 0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSplit {
    pub train: SynthCorpus,
    pub test: SynthCorpus,
}

/// A training corpus of `config.size` documents and a held-out corpus of
/// `test_size` documents drawn from an independent stream of the same seed.
pub fn synth_split(config: &SynthConfig, test_size: usize) -> SynthSplit {
    SynthSplit {
        train: generate(config, config.size, "train", 0),
        test: generate(config, test_size, "test", 1),
    }
}

fn generate(config: &SynthConfig, size: usize, prefix: &str, stream: u64) -> SynthCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(stream);
    let mut documents = Vec::with_capacity(size);
    let mut degradations = Vec::with_capacity(size);
    for i in 0..size {
        let count = rng.random_range(0..=MAX_GRADE as usize);
        let mut facets = QualityFacet::ALL.to_vec();
        facets.shuffle(&mut rng);
        let mut degraded: Vec<QualityFacet> = facets[..count].to_vec();
        degraded.sort();

        let topic = *TOPICS.choose(&mut rng).expect("topics");
        let mut sentences = Vec::with_capacity(5 + config.filler_sentences);
        let mut sub_scores = std::collections::BTreeMap::new();
        for facet in QualityFacet::ALL {
            let lex = FacetLexicon::get(facet);
            let is_degraded = degraded.contains(&facet);
            sentences.push(if is_degraded {
                lex.weak_sentence(rng.random_range(0..lex.weak_count()))
            } else {
                lex.strong_sentence(rng.random_range(0..lex.strong_count()))
            });
            sub_scores.insert(
                facet.name().to_string(),
                if is_degraded { 0.0 } else { 1.0 },
            );
        }
        for _ in 0..config.filler_sentences {
            let other = *TOPICS.choose(&mut rng).expect("topics");
            let frame = *FILLER_FRAMES.choose(&mut rng).expect("frames");
            sentences.push(frame.replace("{t}", topic).replace("{u}", other));
        }
        sentences.shuffle(&mut rng);

        let grade = grade_for(degraded.len());
        let id = format!("{prefix}-{i:05}");
        let mut doc = Document::new(
            id.clone(),
            format!("Notes on the {topic}"),
            sentences.join(" "),
        )
        .with_grade(grade);
        doc.sub_scores = sub_scores;
        documents.push(doc);
        degradations.push(Degradation {
            id,
            grade,
            degraded,
        });
    }
    SynthCorpus {
        documents,
        degradations,
    }
}

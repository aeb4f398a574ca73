//! Multi-facet counterfactual pairs for training document quality evaluators.
//!
//! The pipeline has three stages. [`counterfactual`] asks a language model
//! for the issues a document has on one quality facet and then for a
//! rewrite that fixes them, yielding (original, rewritten) pairs.
//! [`evaluator`] trains a small grade classifier on labeled documents with
//! an extra pairwise loss over those pairs. [`metrics`] scores predictions
//! against gold grades.

pub mod cli;
pub mod corpus;
pub mod counterfactual;
pub mod evaluator;
pub mod lexicon;
pub mod llm_client;
pub mod metrics;
pub mod synth;
pub mod template;

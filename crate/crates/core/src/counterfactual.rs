//! Counterfactual pair generation: pick a facet per document, ask the model
//! for that facet's issues, then ask it to rewrite the document fixing them.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{ContrastivePair, Document, Provenance, QualityFacet};
use crate::evaluator::words;
use crate::llm_client::{prompt_hash, split_sentences, CompletionClient, LlmError, LlmRequest};
use crate::template;

const ISSUE_TEMPLATE: &str = include_str!("../templates/issue_prompt.v1.txt");
const REWRITE_TEMPLATE: &str = include_str!("../templates/rewrite_prompt.v1.txt");
pub const TEMPLATE_VERSION: &str = "v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage {
    /// Issue identification.
    A,
    /// Rewrite.
    B,
}

#[derive(Debug, Error)]
pub enum GenerationError {
    #[error("document {0:?} has no grade")]
    MissingGrade(String),
    #[error("issues text is empty")]
    EmptyIssues,
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("invalid generation config: {0}")]
    Config(String),
    #[error("stage {stage:?} failed for {document_id:?}: {source}")]
    Llm {
        stage: Stage,
        document_id: String,
        #[source]
        source: LlmError,
    },
    #[error("stage B returned an empty rewrite for {0:?}")]
    EmptyRewrite(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FacetAssignment {
    pub document_id: String,
    pub facet: QualityFacet,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationConfig {
    pub model: String,
    pub seed: u64,
    pub stage_a_temperature: f64,
    pub stage_b_temperature: f64,
    /// Bodies longer than this many words are cut at a sentence boundary.
    pub max_body_tokens: usize,
    /// Completion budget per request.
    pub max_tokens: u32,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            model: "gpt-3.5-turbo".into(),
            seed: 0,
            stage_a_temperature: 0.0,
            stage_b_temperature: 0.7,
            max_body_tokens: 2048,
            max_tokens: 2048,
        }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<(), GenerationError> {
        for (name, t) in [
            ("stage_a_temperature", self.stage_a_temperature),
            ("stage_b_temperature", self.stage_b_temperature),
        ] {
            if !t.is_finite() || t < 0.0 {
                return Err(GenerationError::Config(format!("{name} = {t}")));
            }
        }
        if self.max_body_tokens == 0 || self.max_tokens == 0 {
            return Err(GenerationError::Config(
                "token limits must be positive".into(),
            ));
        }
        if self.model.is_empty() {
            return Err(GenerationError::Config("model name is empty".into()));
        }
        Ok(())
    }
}

/// Prompt asking for the issues a document has on one facet.
pub fn render_issue_prompt(
    document: &Document,
    facet: QualityFacet,
) -> Result<String, GenerationError> {
    let grade = document
        .grade
        .ok_or_else(|| GenerationError::MissingGrade(document.id.clone()))?;
    let label = grade.to_string();
    Ok(template::fill(
        ISSUE_TEMPLATE,
        &[
            ("dim_name", facet.name()),
            ("dim_description", facet.description()),
            ("article", &document.body),
            ("label", &label),
        ],
    ))
}

/// Prompt asking for a rewrite that addresses `issues`.
pub fn render_rewrite_prompt(document: &Document, issues: &str) -> Result<String, GenerationError> {
    if issues.trim().is_empty() {
        return Err(GenerationError::EmptyIssues);
    }
    Ok(template::fill(
        REWRITE_TEMPLATE,
        &[("article", &document.body), ("issues", issues)],
    ))
}

/// One uniformly drawn facet per document, in corpus order.
pub fn assign_facets(
    corpus: &[Document],
    seed: u64,
) -> Result<Vec<FacetAssignment>, GenerationError> {
    if corpus.is_empty() {
        return Err(GenerationError::EmptyCorpus);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(corpus
        .iter()
        .map(|doc| FacetAssignment {
            document_id: doc.id.clone(),
            facet: QualityFacet::ALL[rng.random_range(0..QualityFacet::ALL.len())],
            seed,
        })
        .collect())
}

/// Keeps whole sentences while the running word count stays within
/// `max_tokens`. A first sentence that alone is too long is cut by words.
pub fn truncate_body(body: &str, max_tokens: usize) -> (String, bool) {
    if words(body).len() <= max_tokens {
        return (body.to_string(), false);
    }
    let mut kept = Vec::new();
    let mut used = 0;
    for s in split_sentences(body) {
        let n = words(&s).len();
        if used + n > max_tokens {
            break;
        }
        used += n;
        kept.push(s);
    }
    if kept.is_empty() {
        let cut: Vec<&str> = body.split_whitespace().take(max_tokens).collect();
        return (cut.join(" "), true);
    }
    (kept.join(" "), true)
}

fn llm_err(stage: Stage, doc: &Document) -> impl FnOnce(LlmError) -> GenerationError + '_ {
    move |source| GenerationError::Llm {
        stage,
        document_id: doc.id.clone(),
        source,
    }
}

/// Runs both stages for one document. Never returns a partial pair.
pub fn generate_pair(
    document: &Document,
    facet: QualityFacet,
    client: &dyn CompletionClient,
    config: &GenerationConfig,
) -> Result<ContrastivePair, GenerationError> {
    let (body, truncated) = truncate_body(&document.body, config.max_body_tokens);
    let prompted = Document {
        body,
        ..document.clone()
    };

    let prompt_a = render_issue_prompt(&prompted, facet)?;
    let request_a = LlmRequest::new(
        &config.model,
        prompt_a,
        config.stage_a_temperature,
        config.max_tokens,
    )
    .map_err(llm_err(Stage::A, document))?;
    let issues = client
        .complete(&request_a)
        .map_err(llm_err(Stage::A, document))?
        .text;

    let prompt_b = render_rewrite_prompt(&prompted, &issues)?;
    let request_b = LlmRequest::new(
        &config.model,
        prompt_b,
        config.stage_b_temperature,
        config.max_tokens,
    )
    .map_err(llm_err(Stage::B, document))?;
    let response_b = client
        .complete(&request_b)
        .map_err(llm_err(Stage::B, document))?;
    if response_b.text.trim().is_empty() {
        return Err(GenerationError::EmptyRewrite(document.id.clone()));
    }

    let rewritten = Document {
        id: format!("{}::rewrite-{}", document.id, facet),
        title: document.title.clone(),
        body: response_b.text,
        grade: None,
        sub_scores: BTreeMap::new(),
    };
    Ok(ContrastivePair {
        original: document.clone(),
        rewritten,
        facet,
        issues,
        provenance: Provenance {
            model: config.model.clone(),
            stage_a_prompt_sha256: prompt_hash(&request_a.prompt),
            stage_b_prompt_sha256: prompt_hash(&request_b.prompt),
            timestamp: response_b.created_at,
            stage_a_temperature: config.stage_a_temperature,
            stage_b_temperature: config.stage_b_temperature,
            max_tokens: config.max_tokens,
            template_version: TEMPLATE_VERSION.into(),
            seed: config.seed,
            truncated,
            config_hash: None,
        },
    })
}

/// A document for which no pair could be built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkipRecord {
    pub document_id: String,
    pub facet: QualityFacet,
    /// Failing stage, absent when the failure was not an LLM call.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage: Option<Stage>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub documents: usize,
    pub pairs_built: usize,
    pub skipped: usize,
    /// Facet counts over all assignments.
    pub assigned_per_facet: BTreeMap<QualityFacet, usize>,
    /// Facet counts over the pairs actually built.
    pub built_per_facet: BTreeMap<QualityFacet, usize>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContrastiveDataset {
    pub pairs: Vec<ContrastivePair>,
    pub skips: Vec<SkipRecord>,
    pub assignments: Vec<FacetAssignment>,
    pub summary: DatasetSummary,
}

fn facet_counts<'a>(
    facets: impl Iterator<Item = &'a QualityFacet>,
) -> BTreeMap<QualityFacet, usize> {
    let mut counts: BTreeMap<QualityFacet, usize> =
        QualityFacet::ALL.iter().map(|&f| (f, 0)).collect();
    for f in facets {
        *counts.entry(*f).or_default() += 1;
    }
    counts
}

/// One pair per labeled document, generated concurrently up to the client's
/// in-flight bound. Output order follows the corpus.
pub fn build_contrastive_dataset(
    corpus: &[Document],
    client: &dyn CompletionClient,
    config: &GenerationConfig,
) -> Result<ContrastiveDataset, GenerationError> {
    config.validate()?;
    if corpus.is_empty() {
        return Err(GenerationError::EmptyCorpus);
    }
    if let Some(doc) = corpus.iter().find(|d| d.grade.is_none()) {
        return Err(GenerationError::MissingGrade(doc.id.clone()));
    }
    let assignments = assign_facets(corpus, config.seed)?;

    let slots: Vec<Mutex<Option<Result<ContrastivePair, GenerationError>>>> =
        corpus.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = client.max_in_flight().clamp(1, corpus.len());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= corpus.len() {
                    break;
                }
                let result = generate_pair(&corpus[i], assignments[i].facet, client, config);
                *slots[i].lock().unwrap() = Some(result);
            });
        }
    });

    let mut pairs = Vec::new();
    let mut skips = Vec::new();
    for (slot, assignment) in slots.into_iter().zip(&assignments) {
        match slot
            .into_inner()
            .unwrap()
            .expect("every index is processed")
        {
            Ok(pair) => pairs.push(pair),
            Err(e) => {
                log::warn!("skipping {}: {e}", assignment.document_id);
                let stage = match &e {
                    GenerationError::Llm { stage, .. } => Some(*stage),
                    GenerationError::EmptyIssues => Some(Stage::A),
                    GenerationError::EmptyRewrite(_) => Some(Stage::B),
                    _ => None,
                };
                skips.push(SkipRecord {
                    document_id: assignment.document_id.clone(),
                    facet: assignment.facet,
                    stage,
                    reason: e.to_string(),
                });
            }
        }
    }
    let summary = DatasetSummary {
        documents: corpus.len(),
        pairs_built: pairs.len(),
        skipped: skips.len(),
        assigned_per_facet: facet_counts(assignments.iter().map(|a| &a.facet)),
        built_per_facet: facet_counts(pairs.iter().map(|p| &p.facet)),
        seed: config.seed,
    };
    Ok(ContrastiveDataset {
        pairs,
        skips,
        assignments,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm_client::{
        LlmClient, MockTransport, RetryPolicy, ScriptedTransport, TransportError,
    };
    use std::collections::HashMap;
    use std::time::Duration;

    fn doc(id: &str, grade: u8) -> Document {
        Document::new(id, "Title", format!("Body of {id}. It has two sentences.")).with_grade(grade)
    }

    #[test]
    fn issue_prompt_fills_slots() {
        let p = render_issue_prompt(&doc("a", 2), QualityFacet::Coherence).unwrap();
        assert!(p.contains("at the level of coherence of the content"));
        assert!(p.contains("only need to analyze the coherence of the article."));
        assert!(p.contains("**Article Quality Grades:**\n\n2\n\n**Issues:**"));
        assert!(p.contains("each article has a quality grade of 0-4 grades"));
        assert!(p.contains(QualityFacet::Coherence.description()));
    }

    #[test]
    fn issue_prompt_ignores_title_and_needs_grade() {
        let mut d = doc("a", 2);
        let with_title = render_issue_prompt(&d, QualityFacet::Usefulness).unwrap();
        d.title.clear();
        assert_eq!(
            render_issue_prompt(&d, QualityFacet::Usefulness).unwrap(),
            with_title
        );
        d.grade = None;
        assert!(matches!(
            render_issue_prompt(&d, QualityFacet::Usefulness),
            Err(GenerationError::MissingGrade(_))
        ));
    }

    #[test]
    fn rewrite_prompt_layout() {
        let p = render_rewrite_prompt(&doc("a", 1), "lacks transitions").unwrap();
        assert!(p.contains("**Issues:**\n\nlacks transitions"));
        assert!(p.ends_with("**Rewritten Article:**"));
        assert!(matches!(
            render_rewrite_prompt(&doc("a", 1), "  \n"),
            Err(GenerationError::EmptyIssues)
        ));
    }

    #[test]
    fn rewrite_prompt_single_pass() {
        let d = doc("a", 1);
        let p = render_rewrite_prompt(&d, "see {article} and {issues}").unwrap();
        assert_eq!(p.matches(&d.body).count(), 1);
        assert!(p.contains("**Issues:**\n\nsee {article} and {issues}\n\n"));
    }

    #[test]
    fn rendering_is_pure() {
        let d = doc("a", 3);
        assert_eq!(
            render_issue_prompt(&d, QualityFacet::Engagingness).unwrap(),
            render_issue_prompt(&d, QualityFacet::Engagingness).unwrap()
        );
        assert_eq!(
            render_rewrite_prompt(&d, "x").unwrap(),
            render_rewrite_prompt(&d, "x").unwrap()
        );
    }

    #[test]
    fn facet_assignment_is_seeded() {
        let corpus: Vec<_> = (0..50).map(|i| doc(&i.to_string(), 1)).collect();
        let a = assign_facets(&corpus, 11).unwrap();
        assert_eq!(a, assign_facets(&corpus, 11).unwrap());
        assert_ne!(a, assign_facets(&corpus, 12).unwrap());
        let one = assign_facets(&corpus[..1], 5).unwrap();
        assert_eq!(one.len(), 1);
        assert!(QualityFacet::ALL.contains(&one[0].facet));
        assert!(matches!(
            assign_facets(&[], 0),
            Err(GenerationError::EmptyCorpus)
        ));
    }

    #[test]
    fn truncation_keeps_sentence_boundaries() {
        let body = "One two three. Four five six. Seven eight nine.";
        assert_eq!(truncate_body(body, 100), (body.to_string(), false));
        assert_eq!(
            truncate_body(body, 7),
            ("One two three. Four five six.".to_string(), true)
        );
        assert_eq!(truncate_body(body, 2), ("One two".to_string(), true));
    }

    #[test]
    fn mock_outputs_pass_through_verbatim() {
        let d = doc("a", 2);
        let facet = QualityFacet::Creativeness;
        let prompt_a = render_issue_prompt(&d, facet).unwrap();
        let prompt_b = render_rewrite_prompt(&d, "ISSUES").unwrap();
        let client = LlmClient::new(MockTransport::from_mapping(HashMap::from([
            (prompt_a, "ISSUES".to_string()),
            (prompt_b, "REWRITE".to_string()),
        ])));
        let pair = generate_pair(&d, facet, &client, &GenerationConfig::default()).unwrap();
        assert_eq!(pair.issues, "ISSUES");
        assert_eq!(pair.rewritten.body, "REWRITE");
        assert_eq!(pair.rewritten.grade, None);
        assert_eq!(pair.original, d);
        assert_ne!(pair.original.id, pair.rewritten.id);
        assert!(!pair.provenance.truncated);
        pair.validate().unwrap();
    }

    #[test]
    fn stage_a_failure_yields_no_pair() {
        let client = LlmClient::new(ScriptedTransport::new(vec![]))
            .with_retry(RetryPolicy::new(3, Duration::ZERO))
            .with_sleep(|_| {});
        let err = generate_pair(
            &doc("a", 2),
            QualityFacet::Coherence,
            &client,
            &GenerationConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(
            err,
            GenerationError::Llm {
                stage: Stage::A,
                ..
            }
        ));
        assert_eq!(client.transport().calls(), 3);
    }

    #[test]
    fn empty_stage_b_output_is_an_error() {
        let client = LlmClient::new(ScriptedTransport::new(vec![
            Ok("issues".into()),
            Ok("  ".into()),
        ]));
        let err = generate_pair(
            &doc("a", 2),
            QualityFacet::Coherence,
            &client,
            &GenerationConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, GenerationError::EmptyRewrite(_)));
    }

    #[test]
    fn skip_record_names_failing_stage() {
        let corpus = vec![doc("a", 2)];
        let client = LlmClient::new(ScriptedTransport::new(vec![Err(TransportError::Fatal(
            "nope".into(),
        ))]));
        let ds = build_contrastive_dataset(&corpus, &client, &GenerationConfig::default()).unwrap();
        assert!(ds.pairs.is_empty());
        assert_eq!(ds.skips.len(), 1);
        assert_eq!(ds.skips[0].stage, Some(Stage::A));
        assert_eq!(ds.summary.skipped, 1);
    }

    #[test]
    fn unlabeled_corpus_is_rejected() {
        let corpus = vec![doc("a", 2), Document::new("b", "t", "x")];
        let client = LlmClient::new(MockTransport::echo());
        assert!(matches!(
            build_contrastive_dataset(&corpus, &client, &GenerationConfig::default()),
            Err(GenerationError::MissingGrade(id)) if id == "b"
        ));
    }

    #[test]
    fn negative_temperature_is_a_config_error() {
        let cfg = GenerationConfig {
            stage_b_temperature: -1.0,
            ..GenerationConfig::default()
        };
        let client = LlmClient::new(MockTransport::echo());
        assert!(matches!(
            build_contrastive_dataset(&[doc("a", 1)], &client, &cfg),
            Err(GenerationError::Config(_))
        ));
    }
}

//! Offline transports. None of these perform network IO.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use super::{LlmRequest, Transport, TransportError};
use crate::corpus::{Document, QualityFacet};
use crate::evaluator::tokenizer::fnv1a;
use crate::lexicon::FacetLexicon;

/// Fixed prompt → completion table, or an echo of the prompt.
pub struct MockTransport {
    mapping: Option<HashMap<String, String>>,
    calls: AtomicUsize,
}

impl MockTransport {
    pub fn from_mapping(mapping: HashMap<String, String>) -> Self {
        Self {
            mapping: Some(mapping),
            calls: AtomicUsize::new(0),
        }
    }

    pub fn echo() -> Self {
        Self {
            mapping: None,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl Transport for MockTransport {
    fn send(&self, request: &LlmRequest) -> Result<String, TransportError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        match &self.mapping {
            None => Ok(request.prompt.clone()),
            Some(map) => map
                .get(&request.prompt)
                .cloned()
                .ok_or_else(|| TransportError::Fatal("prompt not in mock mapping".into())),
        }
    }
}

/// Replays a fixed sequence of outcomes, one per call. Once the script runs
/// out every further call fails transiently.
pub struct ScriptedTransport {
    script: Mutex<std::collections::VecDeque<Result<String, TransportError>>>,
    calls: AtomicUsize,
}

impl ScriptedTransport {
    pub fn new(script: Vec<Result<String, TransportError>>) -> Self {
        Self {
            script: Mutex::new(script.into()),
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl Transport for ScriptedTransport {
    fn send(&self, _request: &LlmRequest) -> Result<String, TransportError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.script
            .lock()
            .unwrap()
            .pop_front()
            .unwrap_or_else(|| Err(TransportError::Transient("script exhausted".into())))
    }
}

const ISSUE_PREFIX: &str = "Given an article quality assessment system";
const REWRITE_PREFIX: &str = "The given article has some content quality issues";
const FACET_LINE: &str = "Facet: ";

/// Stand-in for a real model that understands both generation prompts.
///
/// Issue prompts get a bullet list naming the weak sentences for the
/// requested facet. Rewrite prompts get [`mock_rewriter`] applied to the
/// article, with the facet read back from the issues text.
#[derive(Default)]
pub struct FacetMockTransport {
    calls: AtomicUsize,
}

impl FacetMockTransport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    fn issues(prompt: &str) -> Result<String, TransportError> {
        let facet_name = between(prompt, "at the level of ", " of the content")
            .ok_or_else(|| TransportError::Fatal("issue prompt without a facet".into()))?;
        let facet: QualityFacet = facet_name.parse().map_err(TransportError::Fatal)?;
        let article = between(
            prompt,
            "**Article:**\n\n",
            "\n\n**Article Quality Grades:**",
        )
        .ok_or_else(|| TransportError::Fatal("issue prompt without an article".into()))?;
        let lex = FacetLexicon::get(facet);
        let sentences = split_sentences(article);
        let mut lines = vec![format!("{FACET_LINE}{facet}")];
        lines.extend(
            sentences
                .iter()
                .filter(|s| lex.is_weak(s))
                .map(|s| format!("- Weak {facet}: \"{s}\"")),
        );
        if !sentences.iter().any(|s| lex.is_strong(s)) {
            lines.push(format!("- Nothing in the article supports its {facet}."));
        }
        if lines.len() == 1 {
            lines.push(format!("- No major {facet} issue; minor polish only."));
        }
        Ok(lines.join("\n"))
    }

    fn rewrite(prompt: &str) -> Result<String, TransportError> {
        let middle = prompt
            .split_once("**Article:**\n\n")
            .and_then(|(_, rest)| rest.strip_suffix("\n\n**Rewritten Article:**"))
            .ok_or_else(|| TransportError::Fatal("malformed rewrite prompt".into()))?;
        let (article, issues) = middle
            .rsplit_once("\n\n**Issues:**\n\n")
            .ok_or_else(|| TransportError::Fatal("rewrite prompt without issues".into()))?;
        let facet = issues
            .lines()
            .find_map(|l| l.strip_prefix(FACET_LINE))
            .ok_or_else(|| TransportError::Fatal("issues do not name a facet".into()))?
            .parse::<QualityFacet>()
            .map_err(TransportError::Fatal)?;
        Ok(mock_rewriter(facet, &Document::new("", "", article)))
    }
}

impl Transport for FacetMockTransport {
    fn send(&self, request: &LlmRequest) -> Result<String, TransportError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let prompt = request.prompt.as_str();
        if prompt.starts_with(ISSUE_PREFIX) {
            Self::issues(prompt)
        } else if prompt.starts_with(REWRITE_PREFIX) {
            Self::rewrite(prompt)
        } else {
            Err(TransportError::Fatal("unrecognized prompt".into()))
        }
    }
}

fn between<'a>(text: &'a str, start: &str, end: &str) -> Option<&'a str> {
    let from = text.find(start)? + start.len();
    let len = text[from..].find(end)?;
    Some(&text[from..from + len])
}

/// Splits on `.`, `!` or `?` followed by whitespace or end of text.
pub fn split_sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if matches!(c, '.' | '!' | '?') {
            let boundary = chars.peek().is_none_or(|(_, next)| next.is_whitespace());
            if boundary {
                let end = i + c.len_utf8();
                let s = text[start..end].trim();
                if !s.is_empty() {
                    out.push(s.to_string());
                }
                start = end;
            }
        }
    }
    let tail = text[start..].trim();
    if !tail.is_empty() {
        out.push(tail.to_string());
    }
    out
}

/// Deterministic facet-specific improvement of a document body.
///
/// Sentences flagged weak for the facet are dropped. If no sentence is
/// strong for the facet, one strong sentence chosen by a hash of the body is
/// appended. For coherence the sentences are then put in canonical (sorted)
/// order. The transform is idempotent, and an empty body stays empty.
pub fn mock_rewriter(facet: QualityFacet, document: &Document) -> String {
    let sentences = split_sentences(&document.body);
    if sentences.is_empty() {
        return String::new();
    }
    let lex = FacetLexicon::get(facet);
    let mut kept: Vec<String> = sentences.into_iter().filter(|s| !lex.is_weak(s)).collect();
    if !kept.iter().any(|s| lex.is_strong(s)) {
        let pick = fnv1a(document.body.as_bytes()) as usize % lex.strong_count();
        kept.push(lex.strong_sentence(pick));
    }
    if facet == QualityFacet::Coherence {
        kept.sort();
    }
    kept.join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counterfactual::{render_issue_prompt, render_rewrite_prompt};

    fn doc(body: &str) -> Document {
        Document::new("d", "T", body).with_grade(2)
    }

    #[test]
    fn sentence_splitting() {
        assert_eq!(
            split_sentences("One. Two!  Three? 3.5 stays whole. tail"),
            vec!["One.", "Two!", "Three?", "3.5 stays whole.", "tail"]
        );
        assert!(split_sentences("   ").is_empty());
    }

    #[test]
    fn coherence_sorts_into_canonical_order() {
        let body =
            "Thus the ideas connect in a clear sequence. Beta comes second. Alpha comes first.";
        let out = mock_rewriter(QualityFacet::Coherence, &doc(body));
        assert_eq!(
            out,
            "Alpha comes first. Beta comes second. Thus the ideas connect in a clear sequence."
        );
        let again = mock_rewriter(QualityFacet::Coherence, &doc(&out));
        assert_eq!(again, out);
    }

    #[test]
    fn weak_sentences_are_replaced() {
        let lex = FacetLexicon::get(QualityFacet::Informativeness);
        let weak = lex.weak_sentence(0);
        let body = format!("The lake is cold. {weak}");
        let out = mock_rewriter(QualityFacet::Informativeness, &doc(&body));
        assert!(!out.contains(&weak));
        assert!(split_sentences(&out).iter().any(|s| lex.is_strong(s)));
        assert!(out.starts_with("The lake is cold."));
    }

    #[test]
    fn empty_body_is_noop_for_every_facet() {
        for f in QualityFacet::ALL {
            assert_eq!(mock_rewriter(f, &doc("")), "");
        }
    }

    #[test]
    fn rewriter_is_deterministic_and_idempotent() {
        let body = "Some plain text here. Another line follows. Dull stuff.";
        for f in QualityFacet::ALL {
            let a = mock_rewriter(f, &doc(body));
            assert_eq!(a, mock_rewriter(f, &doc(body)));
            assert_eq!(mock_rewriter(f, &doc(&a)), a);
        }
    }

    #[test]
    fn facet_mock_answers_both_stages() {
        let lex = FacetLexicon::get(QualityFacet::Engagingness);
        let d = doc(&format!("Rivers flow. {}", lex.weak_sentence(2)));
        let t = FacetMockTransport::new();
        let prompt_a = render_issue_prompt(&d, QualityFacet::Engagingness).unwrap();
        let issues = t
            .send(&LlmRequest::new("m", prompt_a, 0.0, 64).unwrap())
            .unwrap();
        assert!(issues.starts_with("Facet: engagingness\n"));
        assert!(issues.contains(&lex.weak_sentence(2)));
        let prompt_b = render_rewrite_prompt(&d, &issues).unwrap();
        let rewritten = t
            .send(&LlmRequest::new("m", prompt_b, 0.7, 64).unwrap())
            .unwrap();
        assert_eq!(rewritten, mock_rewriter(QualityFacet::Engagingness, &d));
        assert_eq!(t.calls(), 2);
    }

    #[test]
    fn facet_mock_rejects_unknown_prompts() {
        let t = FacetMockTransport::new();
        let r = t.send(&LlmRequest::new("m", "hello", 0.0, 8).unwrap());
        assert!(matches!(r, Err(TransportError::Fatal(_))));
    }

    #[test]
    fn mapping_mock_misses_are_fatal() {
        let t = MockTransport::from_mapping(HashMap::new());
        assert!(t.send(&LlmRequest::new("m", "p", 0.0, 8).unwrap()).is_err());
        assert_eq!(t.calls(), 1);
    }
}

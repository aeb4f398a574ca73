//! Facet vocabulary for the offline rewriter and the synthetic corpus.
//!
//! Each facet has a pool of strong sentences and a pool of weak sentences.
//! Every weak sentence contains exactly one of the facet's weak markers and
//! every strong sentence exactly one of its strong markers. Marker words are
//! unique to their facet and polarity.

use crate::corpus::QualityFacet;

pub struct FacetLexicon {
    pub facet: QualityFacet,
    pub strong_markers: &'static [&'static str],
    pub weak_markers: &'static [&'static str],
    /// Fragments combined with a strong marker to form a strong sentence.
    pub strong_frames: &'static [&'static str],
    /// Fragments combined with a weak marker to form a weak sentence.
    pub weak_frames: &'static [&'static str],
}

impl FacetLexicon {
    pub fn get(facet: QualityFacet) -> &'static FacetLexicon {
        &LEXICONS[facet.index()]
    }

    /// Number of distinct strong sentences.
    pub fn strong_count(&self) -> usize {
        self.strong_markers.len() * self.strong_frames.len()
    }

    pub fn weak_count(&self) -> usize {
        self.weak_markers.len() * self.weak_frames.len()
    }

    pub fn strong_sentence(&self, index: usize) -> String {
        let m = self.strong_markers[index % self.strong_markers.len()];
        let f = self.strong_frames[(index / self.strong_markers.len()) % self.strong_frames.len()];
        capitalize(&fill(f, m))
    }

    pub fn weak_sentence(&self, index: usize) -> String {
        let m = self.weak_markers[index % self.weak_markers.len()];
        let f = self.weak_frames[(index / self.weak_markers.len()) % self.weak_frames.len()];
        capitalize(&fill(f, m))
    }

    pub fn is_weak(&self, sentence: &str) -> bool {
        contains_any(sentence, self.weak_markers)
    }

    pub fn is_strong(&self, sentence: &str) -> bool {
        contains_any(sentence, self.strong_markers)
    }
}

/// Substitutes the marker, turning "a" into "an" before a vowel.
fn fill(frame: &str, marker: &str) -> String {
    let vowel = marker.starts_with(['a', 'e', 'i', 'o', 'u']);
    let frame = if vowel {
        frame.replace("a {m}", "an {m}").replace("A {m}", "An {m}")
    } else {
        frame.to_string()
    };
    frame.replace("{m}", marker)
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

fn contains_any(sentence: &str, markers: &[&str]) -> bool {
    sentence
        .split(|c: char| !c.is_alphanumeric())
        .any(|w| markers.iter().any(|m| m.eq_ignore_ascii_case(w)))
}

static LEXICONS: [FacetLexicon; 5] = [
    FacetLexicon {
        facet: QualityFacet::Coherence,
        strong_markers: &[
            "therefore",
            "consequently",
            "accordingly",
            "hence",
            "thus",
            "subsequently",
        ],
        weak_markers: &[
            "unrelatedly",
            "randomly",
            "anyway",
            "whatever",
            "meanwhile",
            "somehow",
        ],
        strong_frames: &[
            "{m} each section builds on the point before it.",
            "{m} the argument moves step by step toward its conclusion.",
            "{m} the ideas connect in a clear sequence.",
        ],
        weak_frames: &[
            "{m} the text jumps to another matter without warning.",
            "{m} this paragraph does not connect to anything above.",
            "{m} a different thread starts and then stops.",
        ],
    },
    FacetLexicon {
        facet: QualityFacet::Usefulness,
        strong_markers: &[
            "checklist",
            "practical",
            "actionable",
            "howto",
            "tips",
            "solution",
        ],
        weak_markers: &[
            "pointless",
            "vague",
            "useless",
            "hollow",
            "irrelevant",
            "impractical",
        ],
        strong_frames: &[
            "A {m} guide helps readers apply the advice today.",
            "The closing {m} section answers the main reader question.",
            "Each step comes with a {m} example for the audience.",
        ],
        weak_frames: &[
            "The advice here stays {m} and offers nothing to do.",
            "Readers get only {m} remarks with no next step.",
            "The section ends on a {m} note without any answer.",
        ],
    },
    FacetLexicon {
        facet: QualityFacet::Creativeness,
        strong_markers: &[
            "original",
            "inventive",
            "fresh",
            "imaginative",
            "novel",
            "unexpected",
        ],
        weak_markers: &[
            "cliche",
            "stale",
            "derivative",
            "generic",
            "trite",
            "boilerplate",
        ],
        strong_frames: &[
            "An {m} angle reframes the familiar story.",
            "The author offers a {m} perspective nobody expected.",
            "A {m} metaphor turns the topic into a small adventure.",
        ],
        weak_frames: &[
            "The piece repeats a {m} framing seen everywhere.",
            "Every paragraph leans on {m} phrasing.",
            "The story follows a {m} template from start to end.",
        ],
    },
    FacetLexicon {
        facet: QualityFacet::Informativeness,
        strong_markers: &[
            "statistics",
            "measured",
            "evidence",
            "percent",
            "survey",
            "documented",
        ],
        weak_markers: &[
            "filler",
            "padding",
            "fluff",
            "rambling",
            "unsourced",
            "handwaving",
        ],
        strong_frames: &[
            "Recent {m} figures give the reader concrete numbers.",
            "The article cites {m} findings from several sources.",
            "A table of {m} results backs up each claim.",
        ],
        weak_frames: &[
            "Most of this part is {m} with no facts.",
            "The claims rest on {m} rather than data.",
            "Several lines are pure {m} around a thin point.",
        ],
    },
    FacetLexicon {
        facet: QualityFacet::Engagingness,
        strong_markers: &[
            "vivid",
            "captivating",
            "lively",
            "gripping",
            "anecdote",
            "photos",
        ],
        weak_markers: &["monotone", "dull", "tedious", "dry", "flat", "lifeless"],
        strong_frames: &[
            "A {m} opening pulls the reader straight in.",
            "The writer adds a {m} scene that keeps attention high.",
            "Short {m} moments keep the pace moving.",
        ],
        weak_frames: &[
            "The tone stays {m} from the first line.",
            "Long {m} passages lose the reader quickly.",
            "The delivery feels {m} and hard to finish.",
        ],
    },
];

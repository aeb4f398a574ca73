//! Documents, quality facets, contrastive pairs and their JSONL persistence.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::template;

/// Highest grade on the 5-point scale.
pub const MAX_GRADE: u8 = 4;
/// Number of grade classes.
pub const NUM_GRADES: usize = 5;

const QA_TEMPLATE: &str = include_str!("../templates/qa_format.v1.txt");

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("corpus file not found: {}", .0.display())]
    MissingFile(PathBuf),
    #[error("{}: line {line}: {message}", path.display())]
    Schema {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{}: line {line}: grade {grade} outside the range [0,4]", path.display())]
    GradeOutOfRange {
        path: PathBuf,
        line: usize,
        grade: i64,
    },
    #[error("record {index} violates an invariant: {message}")]
    Invariant { index: usize, message: String },
    #[error("raw score {raw} outside [{min}, {max}]")]
    RawOutOfRange { raw: f64, min: f64, max: f64 },
    #[error("invalid grade bins: {0}")]
    InvalidBins(String),
    #[error("io error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// One labeled (or unlabeled) article.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub title: String,
    pub body: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grade: Option<u8>,
    /// Optional per-dimension gold scores (e.g. rubric sub-scores).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub sub_scores: BTreeMap<String, f64>,
}

impl Document {
    pub fn new(id: impl Into<String>, title: impl Into<String>, body: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            title: title.into(),
            body: body.into(),
            grade: None,
            sub_scores: BTreeMap::new(),
        }
    }

    pub fn with_grade(mut self, grade: u8) -> Self {
        self.grade = Some(grade);
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.body.trim().is_empty() {
            return Err(format!("document {:?} has an empty body", self.id));
        }
        if let Some(g) = self.grade {
            if g > MAX_GRADE {
                return Err(format!("document {:?} grade {g} outside [0,4]", self.id));
            }
        }
        Ok(())
    }

    /// The document as the evaluator sees it.
    pub fn qa_text(&self) -> String {
        format_qa(&self.title, &self.body)
    }
}

/// The five content-quality facets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QualityFacet {
    Coherence,
    Usefulness,
    Creativeness,
    Informativeness,
    Engagingness,
}

impl QualityFacet {
    pub const ALL: [QualityFacet; 5] = [
        QualityFacet::Coherence,
        QualityFacet::Usefulness,
        QualityFacet::Creativeness,
        QualityFacet::Informativeness,
        QualityFacet::Engagingness,
    ];

    pub fn name(self) -> &'static str {
        match self {
            QualityFacet::Coherence => "coherence",
            QualityFacet::Usefulness => "usefulness",
            QualityFacet::Creativeness => "creativeness",
            QualityFacet::Informativeness => "informativeness",
            QualityFacet::Engagingness => "engagingness",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            QualityFacet::Coherence => "A coherent article is characterized by a logical and organized structure, clear and concise language, smooth transitions between ideas, and a seamless flow of information, ensuring that readers can easily follow and comprehend the content.",
            QualityFacet::Usefulness => "An article is considered useful when it provides reliable, well-researched information, presents a comprehensive and balanced perspective, addresses relevant issues or questions, and offers practical insights or solutions for its intended audience.",
            QualityFacet::Creativeness => "An article is considered creative when it demonstrates originality in its approach, offering unique perspectives, innovative ideas, and engaging storytelling that captivates and inspires the reader.",
            QualityFacet::Informativeness => "An informative article is characterized by its ability to provide accurate, well-researched, and relevant information in a clear and engaging manner, catering to the needs of its target audience.",
            QualityFacet::Engagingness => "Engaging articles captivate readers through a compelling combination of well-researched and relevant content, a clear and coherent structure, an accessible writing style, and the incorporation of multimedia elements that enhance understanding and maintain reader interest.",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_description(description: &str) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.description() == description)
    }
}

impl fmt::Display for QualityFacet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for QualityFacet {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown quality facet {s:?}"))
    }
}

/// How a pair was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub model: String,
    pub stage_a_prompt_sha256: String,
    pub stage_b_prompt_sha256: String,
    /// RFC 3339 time at which the rewrite completion was produced.
    pub timestamp: String,
    pub stage_a_temperature: f64,
    pub stage_b_temperature: f64,
    pub max_tokens: u32,
    pub template_version: String,
    pub seed: u64,
    /// Set when the document body was cut at a sentence boundary before prompting.
    #[serde(default)]
    pub truncated: bool,
    /// Hash of the run configuration that produced the pair, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

/// An (original, rewritten) pair. The rewrite is the higher-quality member:
/// in the contrastive loss `rewritten` plays x₁ and `original` plays x₂.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastivePair {
    pub original: Document,
    pub rewritten: Document,
    pub facet: QualityFacet,
    pub issues: String,
    pub provenance: Provenance,
}

impl ContrastivePair {
    pub fn higher(&self) -> &Document {
        &self.rewritten
    }

    pub fn lower(&self) -> &Document {
        &self.original
    }

    pub fn validate(&self) -> Result<(), String> {
        self.original.validate()?;
        // The rewrite may legitimately be short, but never blank.
        if self.rewritten.body.trim().is_empty() {
            return Err(format!("rewrite of {:?} is empty", self.original.id));
        }
        if self.original.id == self.rewritten.id {
            return Err(format!("pair ids are not distinct: {:?}", self.original.id));
        }
        if self.rewritten.grade.is_some() {
            return Err(format!("rewrite {:?} carries a grade", self.rewritten.id));
        }
        Ok(())
    }
}

/// Records that can be stored one-per-line in a JSONL file.
pub trait JsonlRecord: Serialize + DeserializeOwned {
    fn check(&self) -> Result<(), String>;
    /// Grade to range-check before deserialization errors mask it.
    fn raw_grades(value: &serde_json::Value) -> Vec<i64>;
}

fn grade_of(value: &serde_json::Value) -> Option<i64> {
    value.get("grade").and_then(serde_json::Value::as_i64)
}

impl JsonlRecord for Document {
    fn check(&self) -> Result<(), String> {
        self.validate()
    }

    fn raw_grades(value: &serde_json::Value) -> Vec<i64> {
        grade_of(value).into_iter().collect()
    }
}

impl JsonlRecord for ContrastivePair {
    fn check(&self) -> Result<(), String> {
        self.validate()
    }

    fn raw_grades(value: &serde_json::Value) -> Vec<i64> {
        ["original", "rewritten"]
            .iter()
            .filter_map(|k| value.get(*k).and_then(grade_of))
            .collect()
    }
}

/// Which record type a JSONL file holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schema {
    Labeled,
    Pairs,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Records {
    Labeled(Vec<Document>),
    Pairs(Vec<ContrastivePair>),
}

pub fn load_corpus(path: &Path, schema: Schema) -> Result<Records, CorpusError> {
    Ok(match schema {
        Schema::Labeled => Records::Labeled(load_jsonl(path)?),
        Schema::Pairs => Records::Pairs(load_jsonl(path)?),
    })
}

pub fn load_documents(path: &Path) -> Result<Vec<Document>, CorpusError> {
    load_jsonl(path)
}

pub fn load_pairs(path: &Path) -> Result<Vec<ContrastivePair>, CorpusError> {
    load_jsonl(path)
}

/// Reads records in file order. Blank lines are skipped; the first bad line
/// aborts the load with its 1-based line number.
pub fn load_jsonl<T: JsonlRecord>(path: &Path) -> Result<Vec<T>, CorpusError> {
    let file = File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CorpusError::MissingFile(path.to_path_buf()),
        _ => CorpusError::Io {
            path: path.to_path_buf(),
            source: e,
        },
    })?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| CorpusError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let schema_err = |message: String| CorpusError::Schema {
            path: path.to_path_buf(),
            line: lineno,
            message,
        };
        let value: serde_json::Value =
            serde_json::from_str(&line).map_err(|e| schema_err(e.to_string()))?;
        if let Some(grade) = T::raw_grades(&value)
            .into_iter()
            .find(|g| !(0..=i64::from(MAX_GRADE)).contains(g))
        {
            return Err(CorpusError::GradeOutOfRange {
                path: path.to_path_buf(),
                line: lineno,
                grade,
            });
        }
        let record: T = serde_json::from_value(value).map_err(|e| schema_err(e.to_string()))?;
        record.check().map_err(schema_err)?;
        records.push(record);
    }
    Ok(records)
}

pub fn save_corpus(records: &Records, path: &Path) -> Result<(), CorpusError> {
    match records {
        Records::Labeled(docs) => save_jsonl(docs, path),
        Records::Pairs(pairs) => save_jsonl(pairs, path),
    }
}

/// Writes one record per line. Every record is validated before the file
/// is created, so an invalid list never produces a partial file.
pub fn save_jsonl<T: JsonlRecord>(records: &[T], path: &Path) -> Result<(), CorpusError> {
    for (index, r) in records.iter().enumerate() {
        r.check()
            .map_err(|message| CorpusError::Invariant { index, message })?;
    }
    let io_err = |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut out = BufWriter::new(File::create(path).map_err(io_err)?);
    for r in records {
        let line = serde_json::to_string(r).expect("records serialize to JSON");
        writeln!(out, "{line}").map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

/// Equal-width mapping from a raw score range onto `num_bins` grades.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradeBins {
    pub source_min: f64,
    pub source_max: f64,
    pub num_bins: u8,
}

impl GradeBins {
    pub fn new(source_min: f64, source_max: f64) -> Result<Self, CorpusError> {
        let bins = Self {
            source_min,
            source_max,
            num_bins: NUM_GRADES as u8,
        };
        bins.check()?;
        Ok(bins)
    }

    fn check(&self) -> Result<(), CorpusError> {
        if !(self.source_min.is_finite() && self.source_max.is_finite()) {
            return Err(CorpusError::InvalidBins("non-finite bounds".into()));
        }
        if self.source_min >= self.source_max {
            return Err(CorpusError::InvalidBins(format!(
                "min {} is not below max {}",
                self.source_min, self.source_max
            )));
        }
        if self.num_bins == 0 {
            return Err(CorpusError::InvalidBins("zero bins".into()));
        }
        Ok(())
    }
}

/// Maps a raw score onto `[0, num_bins)`; the top endpoint lands in the last bin.
pub fn bin_grade(raw: f64, bins: &GradeBins) -> Result<u8, CorpusError> {
    bins.check()?;
    if !(bins.source_min..=bins.source_max).contains(&raw) {
        return Err(CorpusError::RawOutOfRange {
            raw,
            min: bins.source_min,
            max: bins.source_max,
        });
    }
    let top = f64::from(bins.num_bins - 1);
    let width = bins.source_max - bins.source_min;
    let bin = ((raw - bins.source_min) / width * f64::from(bins.num_bins)).floor();
    Ok(bin.min(top) as u8)
}

/// Wraps a document in the question/answer framing the evaluator reads.
pub fn format_qa(title: &str, article: &str) -> String {
    template::fill(
        QA_TEMPLATE,
        &[("title", title), ("article_to_be_evaluated", article)],
    )
}

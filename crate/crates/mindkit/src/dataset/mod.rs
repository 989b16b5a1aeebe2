//! Domain types, pool persistence, and integrity validation for
//! multi-rationale datasets.
//!
//! A [`Sample`] is one QA instance; a [`RadSample`] is a sample plus its
//! generated positive and negative rationale pools. All types are immutable
//! after construction and safe to share across threads.

mod features;
mod pool;

pub use features::{read_feature_vec, resolve_feature, write_feature_vec};
pub use pool::{read_dataset, read_pool, write_dataset, write_pool, PoolWriter};

use crate::protocol::{BATCH_DELIMITER, NEGATIVE_LABEL, POSITIVE_LABEL};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::fmt;
use std::path::PathBuf;

/// Whether a rationale supports the correct answer or inverts it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarity {
    #[serde(rename = "pos")]
    Positive,
    #[serde(rename = "neg")]
    Negative,
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Polarity::Positive => write!(f, "pos"),
            Polarity::Negative => write!(f, "neg"),
        }
    }
}

/// One QA instance: feature reference, question, options, caption, answer,
/// and the original ground-truth rationale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    /// Locator of the precomputed feature vector sidecar. Empty string means
    /// "no image": an all-zeros vector of the configured dimension.
    pub image_feature_ref: String,
    pub question: String,
    pub options: Vec<String>,
    pub caption: String,
    pub answer_index: usize,
    pub rationale_gt: String,
}

impl Sample {
    /// Letter label for option `index` ("A", "B", ...).
    pub fn option_letter(index: usize) -> char {
        (b'A' + index as u8) as char
    }

    /// The letter of the correct option.
    pub fn answer_letter(&self) -> char {
        Self::option_letter(self.answer_index)
    }

    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.question.trim().is_empty() {
            out.push(Violation::new(ViolationCode::EmptyQuestion, &self.id, ""));
        }
        if self.rationale_gt.trim().is_empty() {
            out.push(Violation::new(
                ViolationCode::EmptyGroundTruth,
                &self.id,
                "",
            ));
        }
        if self.options.len() < 2 || self.options.len() > 5 {
            out.push(Violation::new(
                ViolationCode::OptionCountOutOfRange,
                &self.id,
                format!("{} options", self.options.len()),
            ));
        }
        if self.answer_index >= self.options.len() {
            out.push(Violation::new(
                ViolationCode::AnswerIndexOutOfRange,
                &self.id,
                format!("index {} of {}", self.answer_index, self.options.len()),
            ));
        }
        let mut seen = HashSet::new();
        for (i, opt) in self.options.iter().enumerate() {
            if !seen.insert(opt.as_str()) {
                out.push(Violation::new(
                    ViolationCode::DuplicateOption,
                    &self.id,
                    format!("option {} ({:?})", i, opt),
                ));
            }
        }
        out
    }
}

/// Where a rationale came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub generator_id: String,
    pub prompt_digest: String,
    pub created_at: String,
}

/// A single generated explanation with polarity and provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rationale {
    pub text: String,
    pub polarity: Polarity,
    pub parent_id: String,
    pub provenance: Provenance,
}

impl Rationale {
    pub fn validate(&self, location: &str) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.text.is_empty() {
            out.push(Violation::new(ViolationCode::EmptyText, location, ""));
            return out;
        }
        if self.text.trim() != self.text {
            out.push(Violation::new(ViolationCode::UntrimmedText, location, ""));
        }
        if self.text.contains(BATCH_DELIMITER) {
            out.push(Violation::new(ViolationCode::DelimiterLeak, location, ""));
        }
        if self.text.starts_with(POSITIVE_LABEL) || self.text.starts_with(NEGATIVE_LABEL) {
            out.push(Violation::new(
                ViolationCode::LabelPrefix,
                location,
                format!("{:?}...", &self.text[..self.text.len().min(24)]),
            ));
        }
        out
    }
}

/// A sample plus its positive and negative rationale pools.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadSample {
    pub sample: Sample,
    pub positives: Vec<Rationale>,
    pub negatives: Vec<Rationale>,
}

impl RadSample {
    pub fn new(sample: Sample) -> Self {
        RadSample {
            sample,
            positives: Vec::new(),
            negatives: Vec::new(),
        }
    }

    /// Texts usable as positive supervision: the ground-truth rationale is a
    /// member of the positive pool for all downstream sampling.
    pub fn positive_texts(&self) -> Vec<&str> {
        let mut texts = vec![self.sample.rationale_gt.as_str()];
        texts.extend(self.positives.iter().map(|r| r.text.as_str()));
        texts
    }

    pub fn negative_texts(&self) -> Vec<&str> {
        self.negatives.iter().map(|r| r.text.as_str()).collect()
    }

    /// Total rationales per sample, counting the ground truth.
    pub fn rationale_count(&self) -> usize {
        1 + self.positives.len() + self.negatives.len()
    }
}

/// Handle to a written pool file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolFile {
    pub path: PathBuf,
    pub polarity: Polarity,
    pub record_count: usize,
}

/// Machine-readable integrity violation codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ViolationCode {
    AnswerIndexOutOfRange,
    EmptyQuestion,
    EmptyGroundTruth,
    OptionCountOutOfRange,
    DuplicateOption,
    EmptyText,
    UntrimmedText,
    DelimiterLeak,
    LabelPrefix,
    ParentMismatch,
    PolarityMismatch,
    DuplicateRationale,
    CrossPolarityCollision,
}

impl ViolationCode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ViolationCode::AnswerIndexOutOfRange => "ANSWER_INDEX_OUT_OF_RANGE",
            ViolationCode::EmptyQuestion => "EMPTY_QUESTION",
            ViolationCode::EmptyGroundTruth => "EMPTY_GROUND_TRUTH",
            ViolationCode::OptionCountOutOfRange => "OPTION_COUNT_OUT_OF_RANGE",
            ViolationCode::DuplicateOption => "DUPLICATE_OPTION",
            ViolationCode::EmptyText => "EMPTY_TEXT",
            ViolationCode::UntrimmedText => "UNTRIMMED_TEXT",
            ViolationCode::DelimiterLeak => "DELIMITER_LEAK",
            ViolationCode::LabelPrefix => "LABEL_PREFIX",
            ViolationCode::ParentMismatch => "PARENT_MISMATCH",
            ViolationCode::PolarityMismatch => "POLARITY_MISMATCH",
            ViolationCode::DuplicateRationale => "DUPLICATE_RATIONALE",
            ViolationCode::CrossPolarityCollision => "CROSS_POLARITY_COLLISION",
        }
    }
}

impl fmt::Display for ViolationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_str())
    }
}

/// One detected integrity violation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub location: String,
    pub detail: String,
}

impl Violation {
    fn new(code: ViolationCode, location: impl Into<String>, detail: impl Into<String>) -> Self {
        Violation {
            code,
            location: location.into(),
            detail: detail.into(),
        }
    }
}

/// Outcome of [`validate_rad_sample`]: ok, or the list of violations found.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check every type invariant of a [`RadSample`]. Violations are data, not
/// faults; this never errors.
pub fn validate_rad_sample(rs: &RadSample) -> ValidationReport {
    let mut violations = rs.sample.validate();

    for (list, polarity, name) in [
        (&rs.positives, Polarity::Positive, "positives"),
        (&rs.negatives, Polarity::Negative, "negatives"),
    ] {
        let mut seen = HashSet::new();
        for (i, r) in list.iter().enumerate() {
            let location = format!("{}[{}]", name, i);
            violations.extend(r.validate(&location));
            if r.parent_id != rs.sample.id {
                violations.push(Violation::new(
                    ViolationCode::ParentMismatch,
                    &location,
                    format!("parent {:?} != sample {:?}", r.parent_id, rs.sample.id),
                ));
            }
            if r.polarity != polarity {
                violations.push(Violation::new(
                    ViolationCode::PolarityMismatch,
                    &location,
                    format!("{} in {} list", r.polarity, name),
                ));
            }
            if !seen.insert(r.text.as_str()) {
                violations.push(Violation::new(
                    ViolationCode::DuplicateRationale,
                    &location,
                    "",
                ));
            }
        }
    }

    let positive_texts: HashSet<&str> = rs.positives.iter().map(|r| r.text.as_str()).collect();
    for (j, r) in rs.negatives.iter().enumerate() {
        if positive_texts.contains(r.text.as_str()) {
            violations.push(Violation::new(
                ViolationCode::CrossPolarityCollision,
                format!("negatives[{}]", j),
                "",
            ));
        }
    }

    ValidationReport { violations }
}

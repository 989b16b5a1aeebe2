//! Filtering and cleaning of split rationale segments.

use crate::dataset::{Polarity, Provenance, Rationale, Sample};
use crate::protocol::{BATCH_DELIMITER, NEGATIVE_LABEL, POSITIVE_LABEL};
use serde::{Deserialize, Serialize};

/// Why a segment was rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RejectReason {
    Empty,
    TooShort,
    TooLong,
    VerbatimCopy,
    DelimiterLeak,
}

impl RejectReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            RejectReason::Empty => "EMPTY",
            RejectReason::TooShort => "TOO_SHORT",
            RejectReason::TooLong => "TOO_LONG",
            RejectReason::VerbatimCopy => "VERBATIM_COPY",
            RejectReason::DelimiterLeak => "DELIMITER_LEAK",
        }
    }
}

/// Character-length bounds applied during cleaning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanBounds {
    pub min_chars: usize,
    pub max_chars: usize,
}

impl Default for CleanBounds {
    fn default() -> Self {
        CleanBounds {
            min_chars: 10,
            max_chars: 2000,
        }
    }
}

/// Clean one segment into a [`Rationale`], or reject it with a reason.
///
/// Accepts iff the segment, after label stripping and whitespace trimming, is
/// nonempty, within the length bounds, free of the batch delimiter, and not a
/// verbatim copy of the source solution. For negative polarity the text must
/// additionally differ from the source at the token level.
pub fn clean_rationale(
    segment: &str,
    polarity: Polarity,
    source_solution: &str,
    parent: &Sample,
    provenance: Provenance,
    bounds: CleanBounds,
) -> Result<Rationale, RejectReason> {
    let text = normalize(segment);
    if text.is_empty() {
        return Err(RejectReason::Empty);
    }
    if text.contains(BATCH_DELIMITER) {
        return Err(RejectReason::DelimiterLeak);
    }
    let chars = text.chars().count();
    if chars < bounds.min_chars {
        return Err(RejectReason::TooShort);
    }
    if chars > bounds.max_chars {
        return Err(RejectReason::TooLong);
    }
    let source = source_solution.trim();
    if text == source {
        return Err(RejectReason::VerbatimCopy);
    }
    if polarity == Polarity::Negative && token_edit_distance_is_zero(&text, source) {
        return Err(RejectReason::VerbatimCopy);
    }
    Ok(Rationale {
        text,
        polarity,
        parent_id: parent.id.clone(),
        provenance,
    })
}

/// Trim surrounding whitespace and strip any leading output labels. Labels
/// are matched case-sensitively; repeated labels are all removed.
fn normalize(segment: &str) -> String {
    let mut s = segment.trim();
    loop {
        let mut stripped = false;
        for label in [POSITIVE_LABEL, NEGATIVE_LABEL] {
            if let Some(rest) = s.strip_prefix(label) {
                s = rest.trim_start();
                stripped = true;
            }
        }
        if !stripped {
            break;
        }
    }
    s.trim_end().to_string()
}

fn token_edit_distance_is_zero(a: &str, b: &str) -> bool {
    a.split_whitespace().eq(b.split_whitespace())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::test_sample;
    use proptest::prelude::*;

    fn prov() -> Provenance {
        Provenance {
            generator_id: "mock".into(),
            prompt_digest: "00".into(),
            created_at: "1970-01-01T00:00:00Z".into(),
        }
    }

    fn clean(segment: &str, polarity: Polarity, source: &str) -> Result<Rationale, RejectReason> {
        clean_rationale(
            segment,
            polarity,
            source,
            &test_sample("s1"),
            prov(),
            CleanBounds::default(),
        )
    }

    #[test]
    fn trims_whitespace() {
        let r = clean("  The force increases.  ", Polarity::Positive, "src text").unwrap();
        assert_eq!(r.text, "The force increases.");
    }

    #[test]
    fn verbatim_copy_of_source_is_rejected() {
        let source = "The caption states that the ball has color red.";
        assert_eq!(
            clean(source, Polarity::Positive, source).unwrap_err(),
            RejectReason::VerbatimCopy
        );
    }

    #[test]
    fn empty_segment_is_rejected() {
        assert_eq!(
            clean("", Polarity::Positive, "src").unwrap_err(),
            RejectReason::Empty
        );
        assert_eq!(
            clean("   \n ", Polarity::Positive, "src").unwrap_err(),
            RejectReason::Empty
        );
    }

    #[test]
    fn length_bounds_are_enforced() {
        assert_eq!(
            clean("short", Polarity::Positive, "src").unwrap_err(),
            RejectReason::TooShort
        );
        let long = "x".repeat(2001);
        assert_eq!(
            clean(&long, Polarity::Positive, "src").unwrap_err(),
            RejectReason::TooLong
        );
    }

    #[test]
    fn delimiter_leak_is_rejected() {
        assert_eq!(
            clean("left part\n\n~~~\n\nright part", Polarity::Positive, "src").unwrap_err(),
            RejectReason::DelimiterLeak
        );
    }

    #[test]
    fn negative_differing_only_in_whitespace_is_rejected() {
        let source = "The ball is red.";
        assert_eq!(
            clean("The  ball \t is red.", Polarity::Negative, source).unwrap_err(),
            RejectReason::VerbatimCopy
        );
        // A real token edit passes.
        assert!(clean("The ball is not red.", Polarity::Negative, source).is_ok());
    }

    #[test]
    fn leading_labels_are_stripped() {
        let r = clean(
            "Adjusted Solution: Adjusted Solution: The answer follows.",
            Polarity::Positive,
            "src",
        )
        .unwrap();
        assert_eq!(r.text, "The answer follows.");
    }

    proptest! {
        #[test]
        fn cleaning_is_idempotent(segment in "[ a-zA-Z0-9.,]{0,60}") {
            if let Ok(first) = clean(&segment, Polarity::Positive, "a source solution") {
                let second = clean(&first.text, Polarity::Positive, "a source solution").unwrap();
                prop_assert_eq!(first.text, second.text);
            }
        }
    }
}

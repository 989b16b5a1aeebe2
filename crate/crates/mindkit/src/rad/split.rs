//! Splitting batched generator output into individual rationale segments.

use crate::protocol::{BATCH_DELIMITER, NEGATIVE_LABEL, POSITIVE_LABEL};

/// One raw, untrusted generator response.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawBatch {
    pub prompt_digest: String,
    pub text: String,
}

/// Split a raw batch on the exact delimiter, strip each segment's leading
/// output label (case-sensitive, optional following whitespace) and
/// surrounding whitespace, and drop empty segments.
pub fn split_batch(raw: &RawBatch) -> Vec<String> {
    raw.text
        .split(BATCH_DELIMITER)
        .map(strip_segment)
        .filter(|s| !s.is_empty())
        .collect()
}

fn strip_segment(segment: &str) -> String {
    let mut s = segment.trim();
    for label in [POSITIVE_LABEL, NEGATIVE_LABEL] {
        if let Some(rest) = s.strip_prefix(label) {
            s = rest.trim_start();
            break;
        }
    }
    s.trim_end().to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn batch(text: &str) -> RawBatch {
        RawBatch {
            prompt_digest: "00".into(),
            text: text.into(),
        }
    }

    #[test]
    fn splits_labeled_segments() {
        let raw = batch("Adjusted Solution: A\n\n~~~\n\nAdjusted Solution: B");
        assert_eq!(split_batch(&raw), vec!["A", "B"]);
    }

    #[test]
    fn passes_through_text_without_delimiter() {
        let raw = batch("just one rationale");
        assert_eq!(split_batch(&raw), vec!["just one rationale"]);
    }

    #[test]
    fn drops_empty_segments() {
        let raw = batch("\n\n~~~\n\n\n\n~~~\n\nX");
        assert_eq!(split_batch(&raw), vec!["X"]);
    }

    #[test]
    fn label_stripping_is_case_sensitive() {
        let raw = batch("adjusted solution: kept as-is");
        assert_eq!(split_batch(&raw), vec!["adjusted solution: kept as-is"]);
    }

    #[test]
    fn negative_label_is_stripped() {
        let raw = batch("Negative Solution:   tilted text  ");
        assert_eq!(split_batch(&raw), vec!["tilted text"]);
    }

    /// Brute-force reference splitter: scan for delimiter occurrences by hand.
    fn reference_split(text: &str) -> Vec<String> {
        let bytes = text.as_bytes();
        let delim = BATCH_DELIMITER.as_bytes();
        let mut segments = Vec::new();
        let mut start = 0;
        let mut i = 0;
        while i + delim.len() <= bytes.len() {
            if &bytes[i..i + delim.len()] == delim {
                segments.push(text[start..i].to_string());
                i += delim.len();
                start = i;
            } else {
                i += 1;
            }
        }
        segments.push(text[start..].to_string());
        segments
            .into_iter()
            .map(|s| strip_segment(&s))
            .filter(|s| !s.is_empty())
            .collect()
    }

    fn arb_segment() -> impl Strategy<Value = String> {
        // Segment contents including near-delimiters, but never the delimiter
        // itself and never label prefixes (those are covered separately).
        let word = prop_oneof![
            Just("alpha".to_string()),
            Just("beta gamma".to_string()),
            Just("\n~~~\n".to_string()),
            Just("~~~".to_string()),
            Just("\n\n~~\n\n".to_string()),
            Just("a\nb".to_string()),
            Just("~".to_string()),
        ];
        proptest::collection::vec(word, 1..4).prop_map(|ws| ws.join(" "))
    }

    proptest! {
        #[test]
        fn recovers_joined_segments(segments in proptest::collection::vec(arb_segment(), 1..6),
                                    labeled in any::<bool>()) {
            let joined = segments
                .iter()
                .map(|s| if labeled { format!("Adjusted Solution: {}", s) } else { s.clone() })
                .collect::<Vec<_>>()
                .join(BATCH_DELIMITER);
            let raw = batch(&joined);
            let expected: Vec<String> = segments
                .iter()
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .collect();
            prop_assert_eq!(split_batch(&raw), expected);
        }

        #[test]
        fn agrees_with_reference_splitter(text in "[a-z~\n ]{0,120}") {
            let raw = batch(&text);
            prop_assert_eq!(split_batch(&raw), reference_split(&text));
        }
    }
}

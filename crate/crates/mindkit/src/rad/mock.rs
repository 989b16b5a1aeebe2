//! Deterministic rule-based generator backend.
//!
//! The mock behaves like a completion model that always follows the batch
//! protocol: it parses the solution, polarity, and repeat count out of the
//! rendered prompt, then emits labeled, delimiter-joined variants. Positive
//! variants are rule-based paraphrases (openers and connective swaps);
//! negative variants are rule-based semantic inversions (negation insertion
//! and contradiction suffixes). Output is a pure function of the prompt and
//! the per-prompt call index, so reruns are byte-identical.

use crate::dataset::Polarity;
use crate::error::{MindError, Result};
use crate::protocol::{BATCH_DELIMITER, NEGATIVE_LABEL, POSITIVE_LABEL};
use crate::rad::generator::Generator;
use crate::rng::text_seed;
use std::collections::HashMap;
use std::sync::Mutex;

const OPENERS_POS: [&str; 6] = [
    "",
    "In other words, ",
    "Put differently, ",
    "To restate, ",
    "As noted, ",
    "Simply put, ",
];

const CONNECTIVES: [&str; 4] = ["Therefore", "Hence", "Thus", "So"];

const OPENERS_NEG: [&str; 5] = ["", "Supposedly, ", "Allegedly, ", "Curiously, ", "Oddly, "];

/// Rule-based paraphrase: variant `i` picks an opener and a connective swap.
/// Variant indices skip the identity combination, so every output differs
/// from the source text.
pub fn paraphrase_variant(text: &str, i: usize) -> String {
    let idx = i + 1; // skip (opener 0, connective 0) == identity
    let opener = OPENERS_POS[idx % OPENERS_POS.len()];
    let connective = CONNECTIVES[(idx / OPENERS_POS.len()) % CONNECTIVES.len()];
    let body = if text.contains("Therefore") {
        text.replacen("Therefore", connective, 1)
    } else {
        match (idx / OPENERS_POS.len()) % CONNECTIVES.len() {
            0 => text.to_string(),
            1 => format!("{} The conclusion follows directly.", text),
            2 => format!("{} This reasoning is straightforward.", text),
            _ => format!("{} Overall, the conclusion stands.", text),
        }
    };
    apply_opener(opener, &body)
}

/// Rule-based semantic inversion: variant `i` picks an opener and an
/// inversion strategy (negation insertion or answer-entity swap) while
/// keeping most of the original words intact.
pub fn invert_variant(text: &str, i: usize) -> String {
    let opener = OPENERS_NEG[i % OPENERS_NEG.len()];
    let strategy = (i / OPENERS_NEG.len()) % 5;
    let body = match strategy {
        0 => negate_last_is(text, " is not "),
        1 => negate_last_is(text, " is never "),
        2 => {
            if text.contains("Therefore") {
                text.replacen("Therefore", "Therefore it is wrong that", 1)
            } else {
                format!("It is false that {}", lowercase_first(text))
            }
        }
        3 => format!("{} However, this conclusion is false.", text),
        _ => swap_final_entity(text),
    };
    apply_opener(opener, &body)
}

/// Replace whatever follows the last " is " with a placeholder entity, so
/// the stated conclusion no longer supports the answer.
fn swap_final_entity(text: &str) -> String {
    match text.rfind(" is ") {
        Some(pos) => {
            let tail = &text[pos + 4..];
            let end = tail.find('.').unwrap_or(tail.len());
            format!(
                "{} is something else entirely{}",
                &text[..pos],
                &tail[end..]
            )
        }
        None => format!("{} The true value is something else entirely.", text),
    }
}

fn negate_last_is(text: &str, replacement: &str) -> String {
    match text.rfind(" is ") {
        Some(pos) => {
            let mut out = String::with_capacity(text.len() + replacement.len());
            out.push_str(&text[..pos]);
            out.push_str(replacement);
            out.push_str(&text[pos + 4..]);
            out
        }
        None => format!("{} This is not the case.", text),
    }
}

fn apply_opener(opener: &str, body: &str) -> String {
    if opener.is_empty() {
        body.to_string()
    } else {
        format!("{}{}", opener, lowercase_first(body))
    }
}

fn lowercase_first(text: &str) -> String {
    let mut chars = text.chars();
    match chars.next() {
        Some(first) => first.to_lowercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Deterministic completion backend for offline runs and tests.
pub struct MockGenerator {
    /// Per-prompt call counter so repeated calls with the same prompt yield
    /// fresh variants. Keyed by prompt hash; reset with each new instance.
    call_index: Mutex<HashMap<u64, usize>>,
}

impl MockGenerator {
    pub fn new() -> Self {
        MockGenerator {
            call_index: Mutex::new(HashMap::new()),
        }
    }
}

impl Default for MockGenerator {
    fn default() -> Self {
        Self::new()
    }
}

impl Generator for MockGenerator {
    fn complete(&self, prompt: &str) -> Result<String> {
        let parsed = parse_prompt(prompt)?;
        let call = {
            let mut map = self.call_index.lock().unwrap();
            let entry = map.entry(text_seed(prompt)).or_insert(0);
            let current = *entry;
            *entry += 1;
            current
        };
        let offset = call * parsed.repeat_number;
        let segments: Vec<String> = (0..parsed.repeat_number)
            .map(|i| {
                let variant = match parsed.polarity {
                    Polarity::Positive => paraphrase_variant(&parsed.solution, offset + i),
                    Polarity::Negative => invert_variant(&parsed.solution, offset + i),
                };
                let label = match parsed.polarity {
                    Polarity::Positive => POSITIVE_LABEL,
                    Polarity::Negative => NEGATIVE_LABEL,
                };
                format!("{} {}", label, variant)
            })
            .collect();
        Ok(segments.join(BATCH_DELIMITER))
    }

    fn id(&self) -> String {
        "mock".to_string()
    }
}

struct ParsedPrompt {
    solution: String,
    repeat_number: usize,
    polarity: Polarity,
}

/// Recover the slots from a rendered template prompt. The anchors are the
/// fixed fragments surrounding each slot.
fn parse_prompt(prompt: &str) -> Result<ParsedPrompt> {
    let polarity = if prompt.contains("\"Adjusted Solution:\"") {
        Polarity::Positive
    } else if prompt.contains("\"Negative Solution:\"") {
        Polarity::Negative
    } else {
        return Err(MindError::BadResponse(
            "mock generator: prompt has no recognizable output label".into(),
        ));
    };

    let solution = match polarity {
        Polarity::Positive => between(prompt, "content adjustments to \"", "\" within a range"),
        Polarity::Negative => between(prompt, "abilities. \"", "\" is the explanation"),
    }
    .ok_or_else(|| MindError::BadResponse("mock generator: no solution slot found".into()))?;

    let repeat_number = between(prompt, "Please output ", " different solutions")
        .and_then(|s| s.parse::<usize>().ok())
        .ok_or_else(|| MindError::BadResponse("mock generator: no repeat count found".into()))?;

    Ok(ParsedPrompt {
        solution,
        repeat_number,
        polarity,
    })
}

fn between(text: &str, left: &str, right: &str) -> Option<String> {
    let start = text.find(left)? + left.len();
    let end = text[start..].find(right)? + start;
    Some(text[start..end].to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rad::prompt::{build_negative_prompt, build_positive_prompt};
    use crate::rad::split::{split_batch, RawBatch};
    use crate::testutil::test_sample;
    use std::collections::HashSet;

    #[test]
    fn paraphrases_are_distinct_and_never_identity() {
        let text = "The caption states that the ball has color red. Therefore the color of the ball is red.";
        let variants: Vec<String> = (0..20).map(|i| paraphrase_variant(text, i)).collect();
        let unique: HashSet<&String> = variants.iter().collect();
        assert_eq!(unique.len(), 20);
        assert!(!variants.iter().any(|v| v == text));
    }

    #[test]
    fn inversions_are_distinct_and_contain_a_reversal_marker() {
        let text = "The caption states that the ball has color red. Therefore the color of the ball is red.";
        let variants: Vec<String> = (0..20).map(|i| invert_variant(text, i)).collect();
        let unique: HashSet<&String> = variants.iter().collect();
        assert_eq!(unique.len(), 20);
        for v in &variants {
            let lower = v.to_lowercase();
            assert!(
                lower.contains("not")
                    || lower.contains("never")
                    || lower.contains("wrong")
                    || lower.contains("false")
                    || lower.contains("something else"),
                "no reversal marker in {:?}",
                v
            );
        }
    }

    #[test]
    fn mock_emits_exactly_repeat_number_labeled_segments() {
        let sample = test_sample("s1");
        let prompt = build_positive_prompt(&sample, &sample.rationale_gt.clone(), 7).unwrap();
        let mock = MockGenerator::new();
        let text = mock.complete(&prompt).unwrap();
        let segments = split_batch(&RawBatch {
            prompt_digest: "00".into(),
            text,
        });
        assert_eq!(segments.len(), 7);
    }

    #[test]
    fn repeated_calls_yield_fresh_variants_and_reruns_match() {
        let sample = test_sample("s1");
        let prompt = build_negative_prompt(&sample, &sample.rationale_gt.clone(), 3).unwrap();

        let mock = MockGenerator::new();
        let first = mock.complete(&prompt).unwrap();
        let second = mock.complete(&prompt).unwrap();
        assert_ne!(first, second);

        let mock2 = MockGenerator::new();
        assert_eq!(mock2.complete(&prompt).unwrap(), first);
        assert_eq!(mock2.complete(&prompt).unwrap(), second);
    }

    #[test]
    fn unparseable_prompt_is_a_bad_response() {
        let mock = MockGenerator::new();
        assert!(mock.complete("free-form prompt").is_err());
    }
}

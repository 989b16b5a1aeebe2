//! Shared fixtures for unit tests.

use crate::dataset::{Polarity, Provenance, RadSample, Rationale, Sample};

pub(crate) fn test_sample(id: &str) -> Sample {
    Sample {
        id: id.to_string(),
        image_feature_ref: String::new(),
        question: "What is the color of the ball?".to_string(),
        options: vec!["red".into(), "blue".into(), "green".into()],
        caption: "The image shows a ball. The ball has color red.".to_string(),
        answer_index: 0,
        rationale_gt:
            "The caption states that the ball has color red. Therefore the color of the ball is red."
                .to_string(),
    }
}

pub(crate) fn test_rationale(parent: &str, text: &str, polarity: Polarity) -> Rationale {
    Rationale {
        text: text.to_string(),
        polarity,
        parent_id: parent.to_string(),
        provenance: Provenance {
            generator_id: "mock".into(),
            prompt_digest: "00".into(),
            created_at: "1970-01-01T00:00:00Z".into(),
        },
    }
}

/// A rad sample with `pos` generated positives and `neg` negatives.
pub(crate) fn test_rad_sample(id: &str, pos: usize, neg: usize) -> RadSample {
    let mut rs = RadSample::new(test_sample(id));
    for i in 0..pos {
        rs.positives.push(test_rationale(
            id,
            &format!("Hence the ball is red (wording {}).", i),
            Polarity::Positive,
        ));
    }
    for j in 0..neg {
        rs.negatives.push(test_rationale(
            id,
            &format!("Supposedly the ball is not red (wording {}).", j),
            Polarity::Negative,
        ));
    }
    rs
}

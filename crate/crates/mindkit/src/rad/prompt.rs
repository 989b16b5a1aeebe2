//! Structured prompt construction for batch rationale generation.
//!
//! Both templates are fixed text with three slots: the task-related
//! information block, the solution being perturbed, and the number of
//! solutions requested per call.

use crate::dataset::{Polarity, Sample};
use crate::error::{MindError, Result};
use crate::protocol::SEPARATOR_INSTRUCTION;
use sha2::{Digest, Sha256};

/// Inputs of one rendered generation prompt.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptSpec {
    pub task_info: String,
    pub solution: String,
    pub repeat_number: u32,
    pub polarity: Polarity,
}

impl PromptSpec {
    pub fn new(
        sample: &Sample,
        solution: &str,
        repeat_number: u32,
        polarity: Polarity,
    ) -> Result<Self> {
        if solution.trim().is_empty() {
            return Err(MindError::InvalidRecord {
                index: 0,
                code: "EMPTY_SOLUTION".to_string(),
                detail: format!("sample {}", sample.id),
            });
        }
        if repeat_number < 1 {
            return Err(MindError::Config(
                "repeat_number must be at least 1".to_string(),
            ));
        }
        Ok(PromptSpec {
            task_info: render_task_info(sample),
            solution: solution.to_string(),
            repeat_number,
            polarity,
        })
    }

    pub fn render(&self) -> String {
        match self.polarity {
            Polarity::Positive => format!(
                "\"{}\"\nYou are an intelligent agent with both perception and reasoning \
                 abilities. Based on the given context, please make random content adjustments \
                 to \"{}\" within a range of 10% to 50% while ensuring that the semantics \
                 remain unchanged. Please output {} different solutions. Each output format is \
                 \"Adjusted Solution:\". {} The output must be in the required format.",
                self.task_info, self.solution, self.repeat_number, SEPARATOR_INSTRUCTION
            ),
            Polarity::Negative => format!(
                "\"{}\"\nYou are an intelligent agent with both perception and reasoning \
                 abilities. \"{}\" is the explanation for the above problem. Based on the given \
                 context, please make minor edits to \"{}\" to reverse its meaning and ensure \
                 the correct answer cannot be logically derived, while keeping most of the \
                 original words and structure intact. Please output {} different solutions. \
                 Each output format is \"Negative Solution:\". {} The output must be in the \
                 required format.",
                self.task_info,
                self.solution,
                self.solution,
                self.repeat_number,
                SEPARATOR_INSTRUCTION
            ),
        }
    }

    /// Hex digest identifying the rendered prompt, recorded as provenance.
    pub fn digest(&self) -> String {
        let digest = Sha256::digest(self.render().as_bytes());
        hex_string(&digest[..16])
    }
}

/// The task-related information block: question, options, caption, answer.
pub fn render_task_info(sample: &Sample) -> String {
    let options = sample
        .options
        .iter()
        .enumerate()
        .map(|(i, o)| format!("({}) {}", Sample::option_letter(i), o))
        .collect::<Vec<_>>()
        .join(" ");
    format!(
        "Question: {}\nOptions: {}\nContext: {}\nAnswer: ({}) {}",
        sample.question,
        options,
        sample.caption,
        sample.answer_letter(),
        sample.options[sample.answer_index]
    )
}

/// Render the positive-adjustment prompt for `sample` around `solution`.
pub fn build_positive_prompt(sample: &Sample, solution: &str, repeat_number: u32) -> Result<String> {
    Ok(PromptSpec::new(sample, solution, repeat_number, Polarity::Positive)?.render())
}

/// Render the meaning-reversal prompt for `sample` around `solution`.
pub fn build_negative_prompt(sample: &Sample, solution: &str, repeat_number: u32) -> Result<String> {
    Ok(PromptSpec::new(sample, solution, repeat_number, Polarity::Negative)?.render())
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{:02x}", b)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{NEGATIVE_LABEL, POSITIVE_LABEL};
    use crate::testutil::test_sample;

    #[test]
    fn positive_prompt_contains_fixed_fragments_once() {
        let s = test_sample("s1");
        let prompt = build_positive_prompt(&s, &s.rationale_gt.clone(), 10).unwrap();
        assert_eq!(prompt.matches(POSITIVE_LABEL).count(), 1);
        assert_eq!(prompt.matches(SEPARATOR_INSTRUCTION).count(), 1);
        assert!(prompt.contains("within a range of 10% to 50%"));
        assert!(prompt.contains("semantics remain unchanged"));
        assert!(prompt.contains("Please output 10 different solutions."));
    }

    #[test]
    fn negative_prompt_contains_fixed_fragments() {
        let s = test_sample("s1");
        let prompt = build_negative_prompt(&s, &s.rationale_gt.clone(), 10).unwrap();
        assert_eq!(prompt.matches(NEGATIVE_LABEL).count(), 1);
        assert_eq!(prompt.matches(SEPARATOR_INSTRUCTION).count(), 1);
        assert!(prompt.contains("reverse its meaning and ensure the correct answer cannot be logically derived"));
        assert!(prompt.contains("keeping most of the original words and structure intact"));
    }

    #[test]
    fn repeat_number_is_substituted_as_given() {
        let s = test_sample("s1");
        let prompt = build_positive_prompt(&s, "Some solution.", 1).unwrap();
        assert!(prompt.contains("Please output 1 different solutions."));
        let prompt = build_negative_prompt(&s, "Some solution.", 1).unwrap();
        assert!(prompt.contains("Please output 1 different solutions."));
    }

    #[test]
    fn prompts_differ_only_in_slots() {
        // Template-diff oracle: substituting one sample's slot values for the
        // other's must reproduce the other rendering exactly.
        let a = test_sample("a");
        let mut b = test_sample("b");
        b.question = "What is the material of the cube?".to_string();
        b.options = vec!["wood".into(), "metal".into()];
        b.caption = "The cube has material wood.".to_string();
        b.rationale_gt = "The cube is made of wood. Therefore the material is wood.".to_string();

        for build in [build_positive_prompt, build_negative_prompt] {
            let pa = build(&a, &a.rationale_gt.clone(), 10).unwrap();
            let pb = build(&b, &b.rationale_gt.clone(), 10).unwrap();
            let rebuilt = pa
                .replace(&render_task_info(&a), &render_task_info(&b))
                .replace(a.rationale_gt.as_str(), b.rationale_gt.as_str());
            assert_eq!(rebuilt, pb);
        }
    }

    #[test]
    fn task_info_carries_question_options_caption_answer() {
        let s = test_sample("s1");
        let info = render_task_info(&s);
        assert!(info.contains("Question: What is the color of the ball?"));
        assert!(info.contains("Options: (A) red (B) blue (C) green"));
        assert!(info.contains("Context: The image shows a ball."));
        assert!(info.contains("Answer: (A) red"));
    }

    #[test]
    fn empty_solution_is_rejected() {
        let s = test_sample("s1");
        assert!(build_positive_prompt(&s, "  ", 10).is_err());
    }

    #[test]
    fn digest_is_stable_and_content_dependent() {
        let s = test_sample("s1");
        let p1 = PromptSpec::new(&s, "Solution one.", 10, Polarity::Positive).unwrap();
        let p2 = PromptSpec::new(&s, "Solution one.", 10, Polarity::Positive).unwrap();
        let p3 = PromptSpec::new(&s, "Solution two.", 10, Polarity::Positive).unwrap();
        assert_eq!(p1.digest(), p2.digest());
        assert_ne!(p1.digest(), p3.digest());
    }
}

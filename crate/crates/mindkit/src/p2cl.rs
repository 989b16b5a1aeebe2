//! Progressive two-stage correction learning: assembling phase-one and
//! phase-two training examples and scheduling the two stages.
//!
//! Phase one supervises rationale generation from the positive pool. Phase
//! two conditions the input on a positive or negative rationale and
//! supervises answer (or answer-plus-rationale) generation; the conditioning
//! policy decides the polarity mix and the supervision form. Negative
//! rationales only ever appear in inputs, never as supervision targets.

use crate::dataset::{Polarity, RadSample, Sample};
use crate::error::{MindError, Result};
use crate::rng::substream;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// The conditioning/supervision rule for phase-two examples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyVariant {
    /// Positive conditioner, answer-only supervision.
    PosToNa,
    /// Negative conditioner, answer-only supervision.
    NegToNa,
    /// Positive conditioner, answer plus positive rationale.
    PosToPos,
    /// Negative conditioner, answer plus positive rationale.
    NegToPos,
    /// Mixed conditioner, answer-only supervision.
    MixNa,
    /// Mixed conditioner; positive branch also supervises a rationale.
    MixPosOrNa,
    /// Mixed conditioner; negative branch also supervises a rationale.
    MixNegCorrected,
    /// Mixed conditioner, answer plus positive rationale on both branches.
    FullMix,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditioningPolicy {
    pub variant: PolicyVariant,
    /// Probability of drawing a negative conditioner in mixed variants.
    pub mix_ratio: f64,
}

impl Default for ConditioningPolicy {
    fn default() -> Self {
        ConditioningPolicy {
            variant: PolicyVariant::FullMix,
            mix_ratio: 0.5,
        }
    }
}

impl ConditioningPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.mix_ratio) {
            return Err(MindError::Config(format!(
                "mix_ratio must be in [0, 1], got {}",
                self.mix_ratio
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    I,
    II,
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Phase::I => write!(f, "I"),
            Phase::II => write!(f, "II"),
        }
    }
}

/// One phase-tagged input/target pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingExample {
    pub phase: Phase,
    pub input_text: String,
    pub feature_ref: String,
    pub target_text: String,
    pub cond_polarity: Option<Polarity>,
}

/// Fixed input layout shared by both phases.
pub fn render_phase1_input(sample: &Sample) -> String {
    let options = sample
        .options
        .iter()
        .enumerate()
        .map(|(i, o)| format!("({}) {}", Sample::option_letter(i), o))
        .collect::<Vec<_>>()
        .join(" ");
    format!(
        "Question: {}\nOptions: {}\nContext: {}",
        sample.question, options, sample.caption
    )
}

/// Phase-two input: the phase-one layout plus the conditioning rationale.
pub fn render_phase2_input(sample: &Sample, conditioner: &str) -> String {
    format!("{}\nRationale: {}", render_phase1_input(sample), conditioner)
}

/// Surface form of the answer: "The answer is (X)."
pub fn answer_sentence(sample: &Sample) -> String {
    format!("The answer is ({}).", sample.answer_letter())
}

/// Assemble a phase-one example: the target is a uniformly sampled positive
/// rationale (the ground truth counts as a pool member).
pub fn assemble_phase1(rs: &RadSample, rng: &mut ChaCha8Rng) -> Result<TrainingExample> {
    let pool = rs.positive_texts();
    if pool.is_empty() || pool.iter().all(|t| t.trim().is_empty()) {
        return Err(MindError::Assembly(format!(
            "sample {}: no positive rationale available for phase-one supervision",
            rs.sample.id
        )));
    }
    let target = pool[rng.gen_range(0..pool.len())].to_string();
    Ok(TrainingExample {
        phase: Phase::I,
        input_text: render_phase1_input(&rs.sample),
        feature_ref: rs.sample.image_feature_ref.clone(),
        target_text: target,
        cond_polarity: None,
    })
}

/// Supervision form of a resolved phase-two branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Supervision {
    AnswerOnly,
    AnswerPlusPositive,
}

fn resolve_branch(
    policy: &ConditioningPolicy,
    rng: &mut ChaCha8Rng,
) -> (Polarity, Supervision) {
    use PolicyVariant::*;
    let draw_negative = |rng: &mut ChaCha8Rng| rng.gen_bool(policy.mix_ratio);
    match policy.variant {
        PosToNa => (Polarity::Positive, Supervision::AnswerOnly),
        NegToNa => (Polarity::Negative, Supervision::AnswerOnly),
        PosToPos => (Polarity::Positive, Supervision::AnswerPlusPositive),
        NegToPos => (Polarity::Negative, Supervision::AnswerPlusPositive),
        MixNa => {
            let pol = if draw_negative(rng) {
                Polarity::Negative
            } else {
                Polarity::Positive
            };
            (pol, Supervision::AnswerOnly)
        }
        MixPosOrNa => {
            if draw_negative(rng) {
                (Polarity::Negative, Supervision::AnswerOnly)
            } else {
                (Polarity::Positive, Supervision::AnswerPlusPositive)
            }
        }
        MixNegCorrected => {
            if draw_negative(rng) {
                (Polarity::Negative, Supervision::AnswerPlusPositive)
            } else {
                (Polarity::Positive, Supervision::AnswerOnly)
            }
        }
        FullMix => {
            let pol = if draw_negative(rng) {
                Polarity::Negative
            } else {
                Polarity::Positive
            };
            (pol, Supervision::AnswerPlusPositive)
        }
    }
}

/// Assemble a phase-two example under `policy`. The conditioning rationale
/// is drawn from the polarity the policy selects; the supervision rationale,
/// when present, is sampled independently from the positive pool.
pub fn assemble_phase2(
    rs: &RadSample,
    policy: &ConditioningPolicy,
    rng: &mut ChaCha8Rng,
) -> Result<TrainingExample> {
    let (cond_polarity, supervision) = resolve_branch(policy, rng);

    let conditioner = match cond_polarity {
        Polarity::Positive => {
            let pool = rs.positive_texts();
            if pool.is_empty() {
                return Err(MindError::Assembly(format!(
                    "sample {}: positive conditioning pool is empty",
                    rs.sample.id
                )));
            }
            pool[rng.gen_range(0..pool.len())].to_string()
        }
        Polarity::Negative => {
            let pool = rs.negative_texts();
            if pool.is_empty() {
                return Err(MindError::Assembly(format!(
                    "sample {}: negative conditioning pool is empty",
                    rs.sample.id
                )));
            }
            pool[rng.gen_range(0..pool.len())].to_string()
        }
    };

    let target_text = match supervision {
        Supervision::AnswerOnly => answer_sentence(&rs.sample),
        Supervision::AnswerPlusPositive => {
            let pool = rs.positive_texts();
            if pool.is_empty() {
                return Err(MindError::Assembly(format!(
                    "sample {}: positive supervision pool is empty",
                    rs.sample.id
                )));
            }
            let rationale = pool[rng.gen_range(0..pool.len())];
            format!("{} {}", answer_sentence(&rs.sample), rationale)
        }
    };

    Ok(TrainingExample {
        phase: Phase::II,
        input_text: render_phase2_input(&rs.sample, &conditioner),
        feature_ref: rs.sample.image_feature_ref.clone(),
        target_text,
        cond_polarity: Some(cond_polarity),
    })
}

/// Stage lengths and policy of one training run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleConfig {
    pub phase1_epochs: usize,
    pub phase2_epochs: usize,
    pub policy: ConditioningPolicy,
    pub seed: u64,
}

impl ScheduleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.phase1_epochs == 0 && self.phase2_epochs == 0 {
            return Err(MindError::Config(
                "at least one phase must have a nonzero epoch count".into(),
            ));
        }
        self.policy.validate()
    }
}

/// A scheduled example plus its origin in the dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduledItem {
    pub epoch: usize,
    pub dataset_index: usize,
    pub example: TrainingExample,
}

/// Ordered stream realizing the two-stage curriculum: all phase-one epochs
/// before any phase-two example, each epoch visiting every sample once in a
/// seeded permutation.
pub struct Schedule<'a> {
    dataset: &'a [RadSample],
    cfg: ScheduleConfig,
    epoch: usize,
    position: usize,
    permutation: Vec<usize>,
    assemble_rng: ChaCha8Rng,
}

impl<'a> Schedule<'a> {
    pub fn new(dataset: &'a [RadSample], cfg: ScheduleConfig) -> Result<Self> {
        cfg.validate()?;
        if dataset.is_empty() {
            return Err(MindError::Config("schedule over an empty dataset".into()));
        }
        let mut schedule = Schedule {
            dataset,
            cfg,
            epoch: 0,
            position: 0,
            permutation: Vec::new(),
            assemble_rng: substream(cfg.seed, "schedule/assemble/0"),
        };
        schedule.load_epoch(0);
        Ok(schedule)
    }

    pub fn total_epochs(&self) -> usize {
        self.cfg.phase1_epochs + self.cfg.phase2_epochs
    }

    pub fn len(&self) -> usize {
        self.total_epochs() * self.dataset.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn phase_of(&self, epoch: usize) -> Phase {
        if epoch < self.cfg.phase1_epochs {
            Phase::I
        } else {
            Phase::II
        }
    }

    fn load_epoch(&mut self, epoch: usize) {
        let mut perm: Vec<usize> = (0..self.dataset.len()).collect();
        let mut rng = substream(self.cfg.seed, &format!("schedule/perm/{}", epoch));
        // Fisher-Yates via rand's shuffle.
        use rand::seq::SliceRandom;
        perm.shuffle(&mut rng);
        self.permutation = perm;
        self.assemble_rng = substream(self.cfg.seed, &format!("schedule/assemble/{}", epoch));
        self.position = 0;
        self.epoch = epoch;
    }
}

impl<'a> Iterator for Schedule<'a> {
    type Item = Result<ScheduledItem>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.epoch >= self.total_epochs() {
            return None;
        }
        if self.position >= self.permutation.len() {
            let next_epoch = self.epoch + 1;
            if next_epoch >= self.total_epochs() {
                self.epoch = next_epoch;
                return None;
            }
            self.load_epoch(next_epoch);
        }
        let dataset_index = self.permutation[self.position];
        self.position += 1;
        let rs = &self.dataset[dataset_index];
        let assembled = match self.phase_of(self.epoch) {
            Phase::I => assemble_phase1(rs, &mut self.assemble_rng),
            Phase::II => assemble_phase2(rs, &self.cfg.policy, &mut self.assemble_rng),
        };
        Some(assembled.map(|example| ScheduledItem {
            epoch: self.epoch,
            dataset_index,
            example,
        }))
    }
}

/// Convenience wrapper collecting the whole stream.
pub fn schedule(dataset: &[RadSample], cfg: &ScheduleConfig) -> Result<Vec<ScheduledItem>> {
    Schedule::new(dataset, *cfg)?.collect()
}

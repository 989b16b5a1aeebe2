//! Per-sample augmentation: batched generation, splitting, cleaning,
//! deduplication, and assembly into rad samples.

use crate::dataset::{Polarity, Provenance, RadSample, Rationale, Sample};
use crate::error::Result;
use crate::rad::clean::{clean_rationale, CleanBounds};
use crate::rad::generator::{generate, Generator, GeneratorConfig};
use crate::rad::prompt::PromptSpec;
use crate::rad::split::{split_batch, RawBatch};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet};

/// How many rationales to request per sample and per generation call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentConfig {
    pub pos_count: usize,
    pub neg_count: usize,
    pub repeat_number: u32,
    pub bounds: CleanBounds,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            pos_count: 10,
            neg_count: 10,
            repeat_number: 10,
            bounds: CleanBounds::default(),
        }
    }
}

/// Acceptance and rejection tallies for one polarity of one sample.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolarityYield {
    pub requested: usize,
    pub accepted: usize,
    pub duplicates_dropped: usize,
    pub rejected: BTreeMap<String, usize>,
    pub calls: usize,
}

/// Per-sample augmentation statistics.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct YieldReport {
    pub sample_id: String,
    pub positive: PolarityYield,
    pub negative: PolarityYield,
}

impl YieldReport {
    /// Rationales per sample after augmentation, counting the ground truth.
    pub fn rationale_count(&self) -> usize {
        1 + self.positive.accepted + self.negative.accepted
    }
}

/// Augment one sample: issue ceil(count / repeat_number) generation calls per
/// polarity, split and clean the batches, drop duplicates, and assemble a
/// [`RadSample`]. The source solution for every call is the sample's
/// ground-truth rationale. Transport errors propagate; a zero usable yield is
/// reported, not raised.
pub fn augment_sample(
    sample: &Sample,
    generator: &dyn Generator,
    gen_cfg: &GeneratorConfig,
    aug_cfg: &AugmentConfig,
    created_at: &str,
) -> Result<(RadSample, YieldReport)> {
    let mut rad = RadSample::new(sample.clone());
    let mut report = YieldReport {
        sample_id: sample.id.clone(),
        positive: PolarityYield {
            requested: aug_cfg.pos_count,
            ..PolarityYield::default()
        },
        negative: PolarityYield {
            requested: aug_cfg.neg_count,
            ..PolarityYield::default()
        },
    };

    let positives = run_polarity(
        sample,
        Polarity::Positive,
        aug_cfg.pos_count,
        generator,
        gen_cfg,
        aug_cfg,
        created_at,
        &mut report.positive,
    )?;
    let negatives = run_polarity(
        sample,
        Polarity::Negative,
        aug_cfg.neg_count,
        generator,
        gen_cfg,
        aug_cfg,
        created_at,
        &mut report.negative,
    )?;

    // Cross-polarity collisions keep the positive and drop the negative.
    let positive_texts: HashSet<&str> = positives.iter().map(|r| r.text.as_str()).collect();
    let mut kept_negatives = Vec::with_capacity(negatives.len());
    for r in negatives {
        if positive_texts.contains(r.text.as_str()) {
            log::warn!(
                "sample {}: dropping negative colliding with a positive",
                sample.id
            );
            report.negative.accepted -= 1;
            report.negative.duplicates_dropped += 1;
        } else {
            kept_negatives.push(r);
        }
    }

    if aug_cfg.pos_count > 0 && report.positive.accepted == 0 {
        log::warn!("sample {}: zero usable positive rationales", sample.id);
    }
    if aug_cfg.neg_count > 0 && report.negative.accepted == 0 {
        log::warn!("sample {}: zero usable negative rationales", sample.id);
    }

    rad.positives = positives;
    rad.negatives = kept_negatives;
    Ok((rad, report))
}

#[allow(clippy::too_many_arguments)]
fn run_polarity(
    sample: &Sample,
    polarity: Polarity,
    count: usize,
    generator: &dyn Generator,
    gen_cfg: &GeneratorConfig,
    aug_cfg: &AugmentConfig,
    created_at: &str,
    tally: &mut PolarityYield,
) -> Result<Vec<Rationale>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    let calls = count.div_ceil(aug_cfg.repeat_number as usize);
    let mut accepted: Vec<Rationale> = Vec::with_capacity(count);
    let mut seen: HashSet<String> = HashSet::new();

    for _ in 0..calls {
        let spec = PromptSpec::new(sample, &sample.rationale_gt, aug_cfg.repeat_number, polarity)?;
        let prompt = spec.render();
        let digest = spec.digest();
        let text = generate(generator, &prompt, gen_cfg)?;
        tally.calls += 1;

        let raw = RawBatch {
            prompt_digest: digest.clone(),
            text,
        };
        for segment in split_batch(&raw) {
            let provenance = Provenance {
                generator_id: generator.id(),
                prompt_digest: digest.clone(),
                created_at: created_at.to_string(),
            };
            match clean_rationale(
                &segment,
                polarity,
                &sample.rationale_gt,
                sample,
                provenance,
                aug_cfg.bounds,
            ) {
                Ok(rationale) => {
                    if !seen.insert(rationale.text.clone()) {
                        log::warn!("sample {}: dropping duplicate {} rationale", sample.id, polarity);
                        tally.duplicates_dropped += 1;
                    } else if accepted.len() < count {
                        accepted.push(rationale);
                        tally.accepted += 1;
                    }
                }
                Err(reason) => {
                    *tally.rejected.entry(reason.as_str().to_string()).or_insert(0) += 1;
                }
            }
        }
    }
    Ok(accepted)
}

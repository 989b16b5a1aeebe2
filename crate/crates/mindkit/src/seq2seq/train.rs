//! The two-stage training loop.
//!
//! Phase-one steps optimize the token NLL of a sampled positive rationale
//! plus the alpha-weighted contrastive term; phase-two steps optimize the
//! NLL of the answer(-plus-rationale) target. Updates are plain gradient
//! descent with global-norm clipping. Everything is deterministic given the
//! seed: schedule, contrastive sampling, and initialization draw from named
//! substreams.

use crate::dataset::{resolve_feature, RadSample};
use crate::error::{MindError, Result};
use crate::mca::{mca_loss_and_gradient, sample_indices, MiningConfig};
use crate::p2cl::{render_phase2_input, Phase, Schedule, ScheduleConfig};
use crate::rng::substream;
use crate::seq2seq::model::{clip_global_norm, nll_backward, nll_forward, ModelConfig, ModelParams};
use crate::seq2seq::model::encode_pooled;
use crate::seq2seq::vocab::Vocab;
use ndarray::Array1;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Everything a training run needs beyond the data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainSettings {
    pub model: ModelConfig,
    pub schedule: ScheduleConfig,
    pub mining: MiningConfig,
    pub seed: u64,
}

/// Per-epoch record written to the metrics log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub phase: String,
    pub mean_nll: f64,
    pub mean_mca: f64,
    pub combined: f64,
}

/// Model parameters plus run position.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub params: ModelParams,
    pub step: u64,
    pub phase: Phase,
}

pub struct TrainOutput {
    pub state: TrainState,
    pub metrics: Vec<EpochMetrics>,
}

/// Train over the scheduled stream. `on_epoch` runs after every completed
/// epoch (checkpointing hook); a numeric fault aborts the run, leaving the
/// last epoch's checkpoint as the most recent good state.
pub fn train(
    dataset: &[RadSample],
    vocab: &Vocab,
    settings: &TrainSettings,
    base_dir: &Path,
    mut on_epoch: impl FnMut(&TrainState, &EpochMetrics) -> Result<()>,
) -> Result<TrainOutput> {
    settings.model.validate()?;
    settings.mining.validate()?;

    let features: Vec<Array1<f64>> = dataset
        .iter()
        .map(|rs| {
            resolve_feature(
                &rs.sample.image_feature_ref,
                settings.model.feat_dim,
                base_dir,
            )
            .map(Array1::from_vec)
        })
        .collect::<Result<_>>()?;

    let mut init_rng = substream(settings.seed, "init");
    let mut state = TrainState {
        params: ModelParams::init(&settings.model, vocab.len(), &mut init_rng),
        step: 0,
        phase: if settings.schedule.phase1_epochs > 0 {
            Phase::I
        } else {
            Phase::II
        },
    };
    let mut mca_rng = substream(settings.seed, "mca");
    let mut truncation_warned = false;
    let mut empty_pool_warned = false;

    let mut metrics = Vec::new();
    let mut epoch_acc = EpochAccumulator::new(0);

    let stream = Schedule::new(dataset, settings.schedule)?;
    for item in stream {
        let item = item?;
        if item.epoch != epoch_acc.epoch {
            let record = epoch_acc.finish(settings.mining.alpha);
            on_epoch(&state, &record)?;
            metrics.push(record);
            epoch_acc = EpochAccumulator::new(item.epoch);
        }
        state.phase = item.example.phase;

        let rs = &dataset[item.dataset_index];
        let feat = &features[item.dataset_index];
        let input_ids = encode_capped(
            vocab,
            &item.example.input_text,
            settings.model.max_seq_len.saturating_sub(1),
            &mut truncation_warned,
        );
        let target_ids = encode_capped(
            vocab,
            &item.example.target_text,
            settings.model.max_seq_len,
            &mut truncation_warned,
        );

        let fwd = nll_forward(&state.params, feat, &input_ids, &target_ids)?;

        let mut mca_loss = 0.0;
        let mut grads = if item.example.phase == Phase::I {
            let pos_texts = rs.positive_texts();
            let neg_texts = rs.negative_texts();
            if pos_texts.is_empty() || neg_texts.is_empty() {
                if !empty_pool_warned {
                    log::warn!(
                        "sample {}: a rationale pool is empty; contrastive term skipped",
                        rs.sample.id
                    );
                    empty_pool_warned = true;
                }
                nll_backward(&state.params, &fwd, None)
            } else {
                let n = settings.mining.sample_count;
                let pos_pick = sample_indices(pos_texts.len(), n, &mut mca_rng);
                let neg_pick = sample_indices(neg_texts.len(), n, &mut mca_rng);
                let encode_rationale = |text: &str, params: &ModelParams| {
                    let rendered = render_phase2_input(&rs.sample, text);
                    let ids = encode_silent(vocab, &rendered, settings.model.max_seq_len - 1);
                    encode_pooled(params, feat, &ids)
                };
                let pos_hidden: Vec<Array1<f64>> = pos_pick
                    .iter()
                    .map(|&i| encode_rationale(pos_texts[i], &state.params))
                    .collect();
                let neg_hidden: Vec<Array1<f64>> = neg_pick
                    .iter()
                    .map(|&j| encode_rationale(neg_texts[j], &state.params))
                    .collect();

                let mca = mca_loss_and_gradient(
                    &fwd.pooled,
                    &pos_hidden,
                    &neg_hidden,
                    &state.params.head,
                    &settings.mining,
                )?;
                mca_loss = mca.loss;
                let alpha = settings.mining.alpha;
                let extra = mca.grad_pred_hidden.mapv(|v| alpha * v);
                let mut grads = nll_backward(&state.params, &fwd, Some(&extra));
                grads.head.weight = &grads.head.weight + &mca.grad_weight.mapv(|v| alpha * v);
                grads.head.bias = &grads.head.bias + &mca.grad_bias.mapv(|v| alpha * v);
                grads
            }
        } else {
            nll_backward(&state.params, &fwd, None)
        };

        let norm = clip_global_norm(&mut grads, settings.model.grad_clip);
        if !norm.is_finite() {
            return Err(MindError::NumericFault(format!(
                "gradient norm {} at step {}",
                norm, state.step
            )));
        }
        state
            .params
            .add_scaled(&grads, -settings.model.step_size);
        state.step += 1;

        epoch_acc.push(item.example.phase, fwd.nll, mca_loss);
    }

    let record = epoch_acc.finish(settings.mining.alpha);
    on_epoch(&state, &record)?;
    metrics.push(record);

    Ok(TrainOutput { state, metrics })
}

struct EpochAccumulator {
    epoch: usize,
    phase: Phase,
    sum_nll: f64,
    sum_mca: f64,
    count: usize,
}

impl EpochAccumulator {
    fn new(epoch: usize) -> Self {
        EpochAccumulator {
            epoch,
            phase: Phase::I,
            sum_nll: 0.0,
            sum_mca: 0.0,
            count: 0,
        }
    }

    fn push(&mut self, phase: Phase, nll: f64, mca: f64) {
        self.phase = phase;
        self.sum_nll += nll;
        self.sum_mca += mca;
        self.count += 1;
    }

    fn finish(&self, alpha: f64) -> EpochMetrics {
        let n = self.count.max(1) as f64;
        let mean_nll = self.sum_nll / n;
        let mean_mca = self.sum_mca / n;
        EpochMetrics {
            epoch: self.epoch,
            phase: self.phase.to_string(),
            mean_nll,
            mean_mca,
            combined: mean_nll + alpha * mean_mca,
        }
    }
}

fn encode_capped(vocab: &Vocab, text: &str, limit: usize, warned: &mut bool) -> Vec<usize> {
    let mut ids = vocab.encode(text);
    if ids.len() > limit {
        if !*warned {
            log::warn!(
                "sequence of {} tokens truncated to {}; further truncations are silent",
                ids.len(),
                limit
            );
            *warned = true;
        }
        ids.truncate(limit);
    }
    ids
}

fn encode_silent(vocab: &Vocab, text: &str, limit: usize) -> Vec<usize> {
    let mut ids = vocab.encode(text);
    ids.truncate(limit);
    ids
}

/// Build the training vocabulary from every rendered surface the model can
/// see: inputs, rationale pools, and answer sentences.
pub fn build_vocab(dataset: &[RadSample], cap: usize) -> Vocab {
    let mut texts: Vec<String> = Vec::new();
    for rs in dataset {
        texts.push(crate::p2cl::render_phase1_input(&rs.sample));
        texts.push(crate::p2cl::answer_sentence(&rs.sample));
        texts.push("Rationale:".to_string());
        texts.push(rs.sample.rationale_gt.clone());
        for r in rs.positives.iter().chain(rs.negatives.iter()) {
            texts.push(r.text.clone());
        }
    }
    Vocab::build(texts.iter().map(String::as_str), cap)
}

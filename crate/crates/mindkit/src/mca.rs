//! Multi-rationale contrastive alignment: embedding projection, cosine
//! similarities, dual hard mining, and the margin loss with exact analytic
//! gradients.
//!
//! Hard positives are the Bottom-k lowest-similarity positives, hard
//! negatives the Top-k highest-similarity negatives, both measured against
//! the predicted embedding. The loss is ReLU(mean_neg + margin - mean_pos).
//! Differentiation treats the mined index sets as fixed at the current
//! point; the subgradient at the ReLU kink is zero.

use crate::error::{MindError, Result};
use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// A point in the shared contrastive space.
pub type Embedding = Array1<f64>;

/// Linear map from model hidden states into the contrastive space.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionHead {
    /// Shape (out_dim, in_dim): applied as weight . hidden + bias.
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl ProjectionHead {
    pub fn new(weight: Array2<f64>, bias: Array1<f64>) -> Result<Self> {
        if weight.nrows() != bias.len() {
            return Err(MindError::Shape {
                expected: format!("bias of length {}", weight.nrows()),
                got: format!("{}", bias.len()),
            });
        }
        if !weight.iter().chain(bias.iter()).all(|v| v.is_finite()) {
            return Err(MindError::NumericFault("non-finite projection head".into()));
        }
        Ok(ProjectionHead { weight, bias })
    }

    pub fn identity(dim: usize) -> Self {
        ProjectionHead {
            weight: Array2::eye(dim),
            bias: Array1::zeros(dim),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.nrows()
    }
}

/// Hard-mining and loss hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiningConfig {
    /// Rationales sampled per polarity each iteration (N).
    pub sample_count: usize,
    /// Hard rationales kept per polarity (k).
    pub top_k: usize,
    /// Margin m of the contrastive loss.
    pub margin: f64,
    /// Weight of the contrastive term in the combined objective.
    pub alpha: f64,
    pub seed: u64,
}

impl Default for MiningConfig {
    fn default() -> Self {
        MiningConfig {
            sample_count: 5,
            top_k: 1,
            margin: 0.2,
            alpha: 1.0,
            seed: 0,
        }
    }
}

impl MiningConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sample_count < 1 || self.top_k < 1 {
            return Err(MindError::Config(
                "sample_count and top_k must be at least 1".into(),
            ));
        }
        if self.top_k > self.sample_count {
            return Err(MindError::Config(format!(
                "top_k ({}) must not exceed sample_count ({})",
                self.top_k, self.sample_count
            )));
        }
        if self.margin < 0.0 || self.alpha < 0.0 {
            return Err(MindError::Config("margin and alpha must be >= 0".into()));
        }
        Ok(())
    }
}

/// Predicted embedding plus the sampled positive/negative embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastiveBatch {
    pub pred: Embedding,
    pub positives: Vec<Embedding>,
    pub negatives: Vec<Embedding>,
}

/// Mined hard sets and their mean similarities.
#[derive(Debug, Clone, PartialEq)]
pub struct HardSets {
    pub hard_pos_indices: Vec<usize>,
    pub hard_neg_indices: Vec<usize>,
    pub mean_pos: f64,
    pub mean_neg: f64,
}

/// Affine projection into the contrastive space: weight . hidden + bias.
pub fn project(hidden: &Array1<f64>, head: &ProjectionHead) -> Result<Embedding> {
    if hidden.len() != head.in_dim() {
        return Err(MindError::Shape {
            expected: format!("hidden of length {}", head.in_dim()),
            got: format!("{}", hidden.len()),
        });
    }
    Ok(head.weight.dot(hidden) + &head.bias)
}

/// Cosine similarity of two nonzero vectors.
pub fn cosine_similarity(a: &Embedding, b: &Embedding) -> Result<f64> {
    if a.len() != b.len() {
        return Err(MindError::Shape {
            expected: format!("vectors of equal length ({})", a.len()),
            got: format!("{}", b.len()),
        });
    }
    let norm_a = a.dot(a).sqrt();
    let norm_b = b.dot(b).sqrt();
    if norm_a == 0.0 || norm_b == 0.0 {
        return Err(MindError::DegenerateInput(
            "cosine similarity of a zero vector".into(),
        ));
    }
    Ok(a.dot(b) / (norm_a * norm_b))
}

/// Select the k lowest-similarity positives and k highest-similarity
/// negatives against the predicted embedding. Ties break toward the lower
/// index; when fewer than k are available, all are selected. Returned index
/// lists are in ascending index order.
pub fn mine_hard(batch: &ContrastiveBatch, cfg: &MiningConfig) -> Result<HardSets> {
    if batch.positives.is_empty() || batch.negatives.is_empty() {
        return Err(MindError::DegenerateInput(
            "hard mining needs at least one positive and one negative".into(),
        ));
    }
    let pos_sims = similarities(&batch.pred, &batch.positives)?;
    let neg_sims = similarities(&batch.pred, &batch.negatives)?;

    let hard_pos_indices = select_k(&pos_sims, cfg.top_k, SelectEnd::Bottom);
    let hard_neg_indices = select_k(&neg_sims, cfg.top_k, SelectEnd::Top);
    let mean_pos = mean_over(&pos_sims, &hard_pos_indices);
    let mean_neg = mean_over(&neg_sims, &hard_neg_indices);

    Ok(HardSets {
        hard_pos_indices,
        hard_neg_indices,
        mean_pos,
        mean_neg,
    })
}

fn similarities(pred: &Embedding, others: &[Embedding]) -> Result<Vec<f64>> {
    others.iter().map(|v| cosine_similarity(pred, v)).collect()
}

#[derive(Clone, Copy)]
enum SelectEnd {
    Bottom,
    Top,
}

fn select_k(sims: &[f64], k: usize, end: SelectEnd) -> Vec<usize> {
    let mut order: Vec<usize> = (0..sims.len()).collect();
    order.sort_by(|&a, &b| {
        let primary = match end {
            SelectEnd::Bottom => sims[a].total_cmp(&sims[b]),
            SelectEnd::Top => sims[b].total_cmp(&sims[a]),
        };
        primary.then(a.cmp(&b))
    });
    let mut selected: Vec<usize> = order.into_iter().take(k.min(sims.len())).collect();
    selected.sort_unstable();
    selected
}

fn mean_over(sims: &[f64], indices: &[usize]) -> f64 {
    indices.iter().map(|&i| sims[i]).sum::<f64>() / indices.len() as f64
}

/// Margin loss over mined means: max(0, mean_neg + m - mean_pos).
pub fn contrastive_loss(hard: &HardSets, margin: f64) -> f64 {
    (hard.mean_neg + margin - hard.mean_pos).max(0.0)
}

/// Combined first-phase objective: l_pos + alpha * l_mca.
pub fn combined_phase1_loss(l_pos: f64, l_mca: f64, alpha: f64) -> f64 {
    l_pos + alpha * l_mca
}

/// Sample up to `n` indices without replacement.
pub fn sample_indices<R: Rng>(len: usize, n: usize, rng: &mut R) -> Vec<usize> {
    let mut all: Vec<usize> = (0..len).collect();
    all.shuffle(rng);
    all.truncate(n.min(len));
    all
}

/// Loss and exact gradients of the contrastive objective, taken at the
/// hidden level: inputs are pre-projection vectors, and gradients cover the
/// projection head plus the predicted hidden state. The sampled rationale
/// hidden states are treated as constants of the step.
#[derive(Debug, Clone)]
pub struct McaGrad {
    pub loss: f64,
    pub hard: HardSets,
    pub grad_weight: Array2<f64>,
    pub grad_bias: Array1<f64>,
    pub grad_pred_hidden: Array1<f64>,
}

pub fn mca_loss_and_gradient(
    pred_hidden: &Array1<f64>,
    pos_hidden: &[Array1<f64>],
    neg_hidden: &[Array1<f64>],
    head: &ProjectionHead,
    cfg: &MiningConfig,
) -> Result<McaGrad> {
    let pred = project(pred_hidden, head)?;
    let positives: Vec<Embedding> = pos_hidden
        .iter()
        .map(|h| project(h, head))
        .collect::<Result<_>>()?;
    let negatives: Vec<Embedding> = neg_hidden
        .iter()
        .map(|h| project(h, head))
        .collect::<Result<_>>()?;

    let batch = ContrastiveBatch {
        pred,
        positives,
        negatives,
    };
    let hard = mine_hard(&batch, cfg)?;
    let loss = contrastive_loss(&hard, cfg.margin);

    let mut grad_weight = Array2::zeros(head.weight.raw_dim());
    let mut grad_bias = Array1::zeros(head.bias.len());
    let mut grad_pred_hidden = Array1::zeros(pred_hidden.len());

    if loss > 0.0 {
        let k_pos = hard.hard_pos_indices.len() as f64;
        let k_neg = hard.hard_neg_indices.len() as f64;
        let mut grad_pred_emb: Array1<f64> = Array1::zeros(batch.pred.len());

        for &j in &hard.hard_neg_indices {
            let (d_pred, d_other) = cosine_grads(&batch.pred, &batch.negatives[j]);
            grad_pred_emb = grad_pred_emb + d_pred.mapv(|v| v / k_neg);
            let g_other = d_other.mapv(|v| v / k_neg);
            accumulate_projection_grads(&g_other, &neg_hidden[j], &mut grad_weight, &mut grad_bias);
        }
        for &i in &hard.hard_pos_indices {
            let (d_pred, d_other) = cosine_grads(&batch.pred, &batch.positives[i]);
            grad_pred_emb = grad_pred_emb - d_pred.mapv(|v| v / k_pos);
            let g_other = d_other.mapv(|v| -v / k_pos);
            accumulate_projection_grads(&g_other, &pos_hidden[i], &mut grad_weight, &mut grad_bias);
        }

        accumulate_projection_grads(&grad_pred_emb, pred_hidden, &mut grad_weight, &mut grad_bias);
        grad_pred_hidden = head.weight.t().dot(&grad_pred_emb);
    }

    Ok(McaGrad {
        loss,
        hard,
        grad_weight,
        grad_bias,
        grad_pred_hidden,
    })
}

/// d cos(u, v) with respect to u and to v.
fn cosine_grads(u: &Embedding, v: &Embedding) -> (Array1<f64>, Array1<f64>) {
    let norm_u = u.dot(u).sqrt();
    let norm_v = v.dot(v).sqrt();
    let cos = u.dot(v) / (norm_u * norm_v);
    let du = v.mapv(|x| x / (norm_u * norm_v)) - u.mapv(|x| x * cos / (norm_u * norm_u));
    let dv = u.mapv(|x| x / (norm_u * norm_v)) - v.mapv(|x| x * cos / (norm_v * norm_v));
    (du, dv)
}

/// Backprop an output-space gradient through the affine projection of one
/// input vector: grad_W += outer(g, input), grad_b += g.
fn accumulate_projection_grads(
    g_out: &Array1<f64>,
    input: &Array1<f64>,
    grad_weight: &mut Array2<f64>,
    grad_bias: &mut Array1<f64>,
) {
    for (r, &g) in g_out.iter().enumerate() {
        for (c, &x) in input.iter().enumerate() {
            grad_weight[[r, c]] += g * x;
        }
        grad_bias[r] += g;
    }
}

/// Loss-only evaluation of the same objective, for numerical checking.
pub fn mca_loss_only(
    pred_hidden: &Array1<f64>,
    pos_hidden: &[Array1<f64>],
    neg_hidden: &[Array1<f64>],
    head: &ProjectionHead,
    cfg: &MiningConfig,
) -> Result<f64> {
    let pred = project(pred_hidden, head)?;
    let positives: Vec<Embedding> = pos_hidden
        .iter()
        .map(|h| project(h, head))
        .collect::<Result<_>>()?;
    let negatives: Vec<Embedding> = neg_hidden
        .iter()
        .map(|h| project(h, head))
        .collect::<Result<_>>()?;
    let batch = ContrastiveBatch {
        pred,
        positives,
        negatives,
    };
    let hard = mine_hard(&batch, cfg)?;
    Ok(contrastive_loss(&hard, cfg.margin))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::Rng as _;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rand_vec(rng: &mut ChaCha8Rng, dim: usize) -> Array1<f64> {
        Array1::from_iter((0..dim).map(|_| rng.gen_range(-1.0..1.0)))
    }

    #[test]
    fn identity_projection_is_identity() {
        let head = ProjectionHead::identity(3);
        let h = array![1.0, -2.0, 3.0];
        assert_eq!(project(&h, &head).unwrap(), h);
    }

    #[test]
    fn zero_weight_projects_to_bias() {
        let head = ProjectionHead::new(Array2::zeros((2, 3)), array![0.5, -0.5]).unwrap();
        let out = project(&array![1.0, 2.0, 3.0], &head).unwrap();
        assert_eq!(out, array![0.5, -0.5]);
    }

    #[test]
    fn projection_matches_naive_triple_loop() {
        // Independent oracle: naive matrix-vector multiply by index.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let weight = Array2::from_shape_fn((4, 3), |_| rng.gen_range(-1.0..1.0));
        let bias = Array1::from_shape_fn(4, |_| rng.gen_range(-1.0..1.0));
        let hidden = rand_vec(&mut rng, 3);

        let mut expected = vec![0.0; 4];
        for r in 0..4 {
            let mut acc = bias[r];
            for c in 0..3 {
                acc += weight[[r, c]] * hidden[c];
            }
            expected[r] = acc;
        }
        let head = ProjectionHead::new(weight, bias).unwrap();
        let out = project(&hidden, &head).unwrap();
        for r in 0..4 {
            assert!((out[r] - expected[r]).abs() < 1e-12);
        }
    }

    #[test]
    fn projection_shape_mismatch_errors() {
        let head = ProjectionHead::identity(3);
        assert!(project(&array![1.0, 2.0], &head).is_err());
    }

    #[test]
    fn cosine_basics() {
        let a = array![1.0, 2.0, 3.0];
        assert!((cosine_similarity(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        let e1 = array![1.0, 0.0];
        let e2 = array![0.0, 1.0];
        assert!(cosine_similarity(&e1, &e2).unwrap().abs() < 1e-12);
        assert!(cosine_similarity(&e1, &Array1::zeros(2)).is_err());
    }

    #[test]
    fn cosine_matches_scalar_oracle() {
        // Direct formula evaluation in an isolated reference routine.
        let a = array![1.0, 2.0, 3.0];
        let b = array![4.0, 5.0, 6.0];
        let dot = 1.0 * 4.0 + 2.0 * 5.0 + 3.0 * 6.0;
        let na = (1.0f64 + 4.0 + 9.0).sqrt();
        let nb = (16.0f64 + 25.0 + 36.0).sqrt();
        let expected = dot / (na * nb);
        assert!((cosine_similarity(&a, &b).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn cosine_is_symmetric_and_scale_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let a = rand_vec(&mut rng, 6);
            let b = rand_vec(&mut rng, 6);
            if a.dot(&a) == 0.0 || b.dot(&b) == 0.0 {
                continue;
            }
            let s1 = cosine_similarity(&a, &b).unwrap();
            let s2 = cosine_similarity(&b, &a).unwrap();
            let s3 = cosine_similarity(&a.mapv(|x| 3.5 * x), &b).unwrap();
            assert!((s1 - s2).abs() < 1e-12);
            assert!((s1 - s3).abs() < 1e-12);
            assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&s1));
        }
    }

    /// Embeddings engineered so cos(pred, v_i) equals sims[i]: pred = e0 and
    /// v_i = cos*e0 + sin*e1.
    fn batch_with_sims(pos: &[f64], neg: &[f64]) -> ContrastiveBatch {
        let mk = |s: f64| array![s, (1.0 - s * s).sqrt(), 0.0];
        ContrastiveBatch {
            pred: array![1.0, 0.0, 0.0],
            positives: pos.iter().map(|&s| mk(s)).collect(),
            negatives: neg.iter().map(|&s| mk(s)).collect(),
        }
    }

    #[test]
    fn mine_hard_picks_forced_minimum_positive() {
        let batch = batch_with_sims(&[0.9, 0.1, 0.5], &[0.0]);
        let cfg = MiningConfig {
            sample_count: 3,
            top_k: 1,
            ..MiningConfig::default()
        };
        let hard = mine_hard(&batch, &cfg).unwrap();
        assert_eq!(hard.hard_pos_indices, vec![1]);
        assert!((hard.mean_pos - 0.1).abs() < 1e-12);
    }

    #[test]
    fn mine_hard_breaks_ties_toward_lower_index() {
        let batch = batch_with_sims(&[0.5], &[0.2, 0.8, 0.8]);
        let cfg = MiningConfig {
            sample_count: 3,
            top_k: 2,
            ..MiningConfig::default()
        };
        let hard = mine_hard(&batch, &cfg).unwrap();
        assert_eq!(hard.hard_neg_indices, vec![1, 2]);
        assert!((hard.mean_neg - 0.8).abs() < 1e-12);
    }

    #[test]
    fn mine_hard_with_short_lists_selects_all() {
        let batch = batch_with_sims(&[0.3, 0.6], &[0.4]);
        let cfg = MiningConfig {
            sample_count: 5,
            top_k: 4,
            ..MiningConfig::default()
        };
        let hard = mine_hard(&batch, &cfg).unwrap();
        assert_eq!(hard.hard_pos_indices, vec![0, 1]);
        assert_eq!(hard.hard_neg_indices, vec![0]);
    }

    /// Brute-force oracle: repeated linear extraction of the extremum.
    fn oracle_select(sims: &[f64], k: usize, lowest: bool) -> Vec<usize> {
        let mut remaining: Vec<usize> = (0..sims.len()).collect();
        let mut picked = Vec::new();
        for _ in 0..k.min(sims.len()) {
            let mut best = 0;
            for cand in 1..remaining.len() {
                let (a, b) = (sims[remaining[cand]], sims[remaining[best]]);
                let better = if lowest { a < b } else { a > b };
                if better {
                    best = cand;
                }
            }
            picked.push(remaining.remove(best));
        }
        picked.sort_unstable();
        picked
    }

    #[test]
    fn mining_matches_brute_force_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..300 {
            let n = rng.gen_range(1..=16);
            let pos: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let neg: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let batch = batch_with_sims(&pos, &neg);
            for k in 1..=n {
                let cfg = MiningConfig {
                    sample_count: n,
                    top_k: k,
                    ..MiningConfig::default()
                };
                let hard = mine_hard(&batch, &cfg).unwrap();
                assert_eq!(hard.hard_pos_indices, oracle_select(&pos, k, true));
                assert_eq!(hard.hard_neg_indices, oracle_select(&neg, k, false));
            }
        }
    }

    #[test]
    fn loss_algebra() {
        let hard = |p: f64, n: f64| HardSets {
            hard_pos_indices: vec![0],
            hard_neg_indices: vec![0],
            mean_pos: p,
            mean_neg: n,
        };
        assert_eq!(contrastive_loss(&hard(1.0, 0.0), 0.2), 0.0);
        assert!((contrastive_loss(&hard(0.3, 0.4), 0.2) - 0.3).abs() < 1e-12);
        assert_eq!(contrastive_loss(&hard(0.5, 0.5), 0.0), 0.0);
    }

    #[test]
    fn combined_loss_is_affine_in_alpha() {
        assert_eq!(combined_phase1_loss(2.0, 0.3, 0.0), 2.0);
        assert!((combined_phase1_loss(2.0, 0.3, 1.0) - 2.3).abs() < 1e-12);
        assert_eq!(combined_phase1_loss(1.5, 0.0, 5.0), 1.5);
    }

    #[test]
    fn empty_lists_are_degenerate() {
        let batch = ContrastiveBatch {
            pred: array![1.0, 0.0],
            positives: vec![],
            negatives: vec![array![0.5, 0.5]],
        };
        assert!(mine_hard(&batch, &MiningConfig::default()).is_err());
    }

    #[test]
    fn zero_loss_region_has_exactly_zero_gradients() {
        // Positives aligned with pred, negatives opposed: margin satisfied.
        let head = ProjectionHead::identity(3);
        let pred = array![1.0, 0.0, 0.0];
        let pos = vec![array![2.0, 0.0, 0.0]];
        let neg = vec![array![-1.0, 0.0, 0.0]];
        let g = mca_loss_and_gradient(&pred, &pos, &neg, &head, &MiningConfig::default()).unwrap();
        assert_eq!(g.loss, 0.0);
        assert!(g.grad_weight.iter().all(|&v| v == 0.0));
        assert!(g.grad_bias.iter().all(|&v| v == 0.0));
        assert!(g.grad_pred_hidden.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn scaling_pred_hidden_with_identity_head_keeps_loss() {
        let head = ProjectionHead {
            weight: Array2::eye(4),
            bias: Array1::zeros(4),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pred = rand_vec(&mut rng, 4);
        let pos: Vec<_> = (0..3).map(|_| rand_vec(&mut rng, 4)).collect();
        let neg: Vec<_> = (0..3).map(|_| rand_vec(&mut rng, 4)).collect();
        let cfg = MiningConfig {
            sample_count: 3,
            top_k: 2,
            ..MiningConfig::default()
        };
        let l1 = mca_loss_only(&pred, &pos, &neg, &head, &cfg).unwrap();
        let l2 = mca_loss_only(&pred.mapv(|v| 2.0 * v), &pos, &neg, &head, &cfg).unwrap();
        assert!((l1 - l2).abs() < 1e-12);
    }

    #[test]
    fn common_scaling_preserves_mined_sets_and_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let batch = ContrastiveBatch {
                pred: rand_vec(&mut rng, 5),
                positives: (0..4).map(|_| rand_vec(&mut rng, 5)).collect(),
                negatives: (0..4).map(|_| rand_vec(&mut rng, 5)).collect(),
            };
            let cfg = MiningConfig {
                sample_count: 4,
                top_k: 2,
                ..MiningConfig::default()
            };
            let scaled = ContrastiveBatch {
                pred: batch.pred.mapv(|v| 7.25 * v),
                positives: batch.positives.iter().map(|v| v.mapv(|x| 7.25 * x)).collect(),
                negatives: batch.negatives.iter().map(|v| v.mapv(|x| 7.25 * x)).collect(),
            };
            let h1 = mine_hard(&batch, &cfg).unwrap();
            let h2 = mine_hard(&scaled, &cfg).unwrap();
            assert_eq!(h1.hard_pos_indices, h2.hard_pos_indices);
            assert_eq!(h1.hard_neg_indices, h2.hard_neg_indices);
            let l1 = contrastive_loss(&h1, cfg.margin);
            let l2 = contrastive_loss(&h2, cfg.margin);
            assert!((l1 - l2).abs() < 1e-9);
        }
    }

    #[test]
    fn loss_is_monotone_in_margin_and_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..200 {
            let hard = HardSets {
                hard_pos_indices: vec![0],
                hard_neg_indices: vec![0],
                mean_pos: rng.gen_range(-1.0..1.0),
                mean_neg: rng.gen_range(-1.0..1.0),
            };
            let m1 = rng.gen_range(0.0..1.0);
            let m2 = m1 + rng.gen_range(0.0..1.0);
            let l1 = contrastive_loss(&hard, m1);
            let l2 = contrastive_loss(&hard, m2);
            assert!(l2 >= l1);
            assert!(l1 >= 0.0 && l1 <= 2.0 + m1 + 1e-12);
        }
    }

    #[test]
    fn gradients_match_central_finite_differences() {
        let step = 1e-3;
        let tol = 1e-4;
        let cfg = MiningConfig {
            sample_count: 5,
            top_k: 1,
            margin: 0.2,
            alpha: 1.0,
            seed: 0,
        };
        let mut checked = 0;
        let mut seed = 0u64;
        while checked < 10 {
            seed += 1;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let head = ProjectionHead::new(
                Array2::from_shape_fn((4, 8), |_| rng.gen_range(-0.8..0.8)),
                Array1::from_shape_fn(4, |_| rng.gen_range(-0.2..0.2)),
            )
            .unwrap();
            let pred = rand_vec(&mut rng, 8);
            let pos: Vec<_> = (0..5).map(|_| rand_vec(&mut rng, 8)).collect();
            let neg: Vec<_> = (0..5).map(|_| rand_vec(&mut rng, 8)).collect();

            let g = mca_loss_and_gradient(&pred, &pos, &neg, &head, &cfg).unwrap();
            if g.loss < 0.05 {
                continue; // stay away from the ReLU kink
            }
            checked += 1;

            let loss_at = |head: &ProjectionHead, pred: &Array1<f64>| {
                mca_loss_only(pred, &pos, &neg, head, &cfg).unwrap()
            };
            let rel = |a: f64, f: f64| (a - f).abs() / a.abs().max(f.abs()).max(1e-2);

            for r in 0..4 {
                for c in 0..8 {
                    let mut hp = head.clone();
                    let mut hm = head.clone();
                    hp.weight[[r, c]] += step;
                    hm.weight[[r, c]] -= step;
                    let fd = (loss_at(&hp, &pred) - loss_at(&hm, &pred)) / (2.0 * step);
                    assert!(
                        rel(g.grad_weight[[r, c]], fd) < tol,
                        "weight[{r},{c}]: analytic {} vs fd {}",
                        g.grad_weight[[r, c]],
                        fd
                    );
                }
            }
            for r in 0..4 {
                let mut hp = head.clone();
                let mut hm = head.clone();
                hp.bias[r] += step;
                hm.bias[r] -= step;
                let fd = (loss_at(&hp, &pred) - loss_at(&hm, &pred)) / (2.0 * step);
                assert!(rel(g.grad_bias[r], fd) < tol);
            }
            for i in 0..8 {
                let mut pp = pred.clone();
                let mut pm = pred.clone();
                pp[i] += step;
                pm[i] -= step;
                let fd = (loss_at(&head, &pp) - loss_at(&head, &pm)) / (2.0 * step);
                assert!(rel(g.grad_pred_hidden[i], fd) < tol);
            }
        }
    }

    #[test]
    fn sample_indices_is_without_replacement() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let picked = sample_indices(10, 6, &mut rng);
        assert_eq!(picked.len(), 6);
        let unique: std::collections::HashSet<_> = picked.iter().collect();
        assert_eq!(unique.len(), 6);
        assert_eq!(sample_indices(3, 10, &mut rng).len(), 3);
    }
}

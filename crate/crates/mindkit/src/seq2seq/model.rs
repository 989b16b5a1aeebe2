//! A small attention-based encoder-decoder with feature fusion, written
//! directly against ndarray with hand-derived gradients.
//!
//! Conventions: sequences are row matrices (T, d_model). The image feature
//! vector is fused as one learned encoder position prepended to the token
//! rows. Positional encodings are sinusoidal and carry no parameters. The
//! feedforward activation is tanh, so every loss path is smooth except the
//! explicitly handled contrastive ReLU.

use crate::error::{MindError, Result};
use crate::mca::ProjectionHead;
use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Model shape and optimization settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub d_model: usize,
    pub layers: usize,
    pub d_ff: usize,
    pub proj_dim: usize,
    pub feat_dim: usize,
    pub vocab_cap: usize,
    pub max_seq_len: usize,
    pub max_gen_len: usize,
    pub step_size: f64,
    pub grad_clip: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            d_model: 32,
            layers: 1,
            d_ff: 64,
            proj_dim: 16,
            feat_dim: 16,
            vocab_cap: 2000,
            max_seq_len: 160,
            max_gen_len: 48,
            step_size: 0.3,
            grad_clip: 1.0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d_model == 0 || self.layers == 0 || self.d_ff == 0 || self.proj_dim == 0 {
            return Err(MindError::Config("model dimensions must be nonzero".into()));
        }
        if self.step_size <= 0.0 {
            return Err(MindError::Config("step_size must be positive".into()));
        }
        if self.max_seq_len < 4 {
            return Err(MindError::Config("max_seq_len too small".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Attention {
    pub wq: Array2<f64>,
    pub wk: Array2<f64>,
    pub wv: Array2<f64>,
    pub wo: Array2<f64>,
}

impl Attention {
    fn init(d: usize, rng: &mut ChaCha8Rng, scale: f64) -> Self {
        Attention {
            wq: rand_matrix(d, d, rng, scale),
            wk: rand_matrix(d, d, rng, scale),
            wv: rand_matrix(d, d, rng, scale),
            wo: rand_matrix(d, d, rng, scale),
        }
    }

    fn zeros(d: usize) -> Self {
        Attention {
            wq: Array2::zeros((d, d)),
            wk: Array2::zeros((d, d)),
            wv: Array2::zeros((d, d)),
            wo: Array2::zeros((d, d)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeedForward {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

impl FeedForward {
    fn init(d: usize, ff: usize, rng: &mut ChaCha8Rng, scale: f64) -> Self {
        FeedForward {
            w1: rand_matrix(d, ff, rng, scale),
            b1: Array1::zeros(ff),
            w2: rand_matrix(ff, d, rng, scale),
            b2: Array1::zeros(d),
        }
    }

    fn zeros(d: usize, ff: usize) -> Self {
        FeedForward {
            w1: Array2::zeros((d, ff)),
            b1: Array1::zeros(ff),
            w2: Array2::zeros((ff, d)),
            b2: Array1::zeros(d),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderLayer {
    pub attn: Attention,
    pub ff: FeedForward,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderLayer {
    pub self_attn: Attention,
    pub cross_attn: Attention,
    pub ff: FeedForward,
}

/// All learnable parameters, including the contrastive projection head.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub d_model: usize,
    pub d_ff: usize,
    pub vocab_size: usize,
    pub feat_dim: usize,
    pub proj_dim: usize,
    pub embed: Array2<f64>,
    pub feat_w: Array2<f64>,
    pub feat_b: Array1<f64>,
    pub enc: Vec<EncoderLayer>,
    pub dec: Vec<DecoderLayer>,
    pub w_out: Array2<f64>,
    pub b_out: Array1<f64>,
    pub head: ProjectionHead,
}

fn rand_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng, scale: f64) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-scale..scale))
}

impl ModelParams {
    pub fn init(cfg: &ModelConfig, vocab_size: usize, rng: &mut ChaCha8Rng) -> Self {
        let d = cfg.d_model;
        let scale = 0.08;
        ModelParams {
            d_model: d,
            d_ff: cfg.d_ff,
            vocab_size,
            feat_dim: cfg.feat_dim,
            proj_dim: cfg.proj_dim,
            embed: rand_matrix(vocab_size, d, rng, 0.1),
            feat_w: rand_matrix(cfg.feat_dim, d, rng, scale),
            feat_b: Array1::zeros(d),
            enc: (0..cfg.layers)
                .map(|_| EncoderLayer {
                    attn: Attention::init(d, rng, scale),
                    ff: FeedForward::init(d, cfg.d_ff, rng, scale),
                })
                .collect(),
            dec: (0..cfg.layers)
                .map(|_| DecoderLayer {
                    self_attn: Attention::init(d, rng, scale),
                    cross_attn: Attention::init(d, rng, scale),
                    ff: FeedForward::init(d, cfg.d_ff, rng, scale),
                })
                .collect(),
            w_out: rand_matrix(d, vocab_size, rng, scale),
            b_out: Array1::zeros(vocab_size),
            head: ProjectionHead {
                weight: rand_matrix(cfg.proj_dim, d, rng, scale),
                bias: Array1::zeros(cfg.proj_dim),
            },
        }
    }

    /// All-zeros parameters with explicit shapes (checkpoint loading).
    pub fn zeros(
        d_model: usize,
        d_ff: usize,
        layers: usize,
        vocab_size: usize,
        feat_dim: usize,
        proj_dim: usize,
    ) -> Self {
        ModelParams {
            d_model,
            d_ff,
            vocab_size,
            feat_dim,
            proj_dim,
            embed: Array2::zeros((vocab_size, d_model)),
            feat_w: Array2::zeros((feat_dim, d_model)),
            feat_b: Array1::zeros(d_model),
            enc: (0..layers)
                .map(|_| EncoderLayer {
                    attn: Attention::zeros(d_model),
                    ff: FeedForward::zeros(d_model, d_ff),
                })
                .collect(),
            dec: (0..layers)
                .map(|_| DecoderLayer {
                    self_attn: Attention::zeros(d_model),
                    cross_attn: Attention::zeros(d_model),
                    ff: FeedForward::zeros(d_model, d_ff),
                })
                .collect(),
            w_out: Array2::zeros((d_model, vocab_size)),
            b_out: Array1::zeros(vocab_size),
            head: ProjectionHead {
                weight: Array2::zeros((proj_dim, d_model)),
                bias: Array1::zeros(proj_dim),
            },
        }
    }

    pub fn zeros_like(&self) -> Self {
        ModelParams {
            d_model: self.d_model,
            d_ff: self.d_ff,
            vocab_size: self.vocab_size,
            feat_dim: self.feat_dim,
            proj_dim: self.proj_dim,
            embed: Array2::zeros(self.embed.raw_dim()),
            feat_w: Array2::zeros(self.feat_w.raw_dim()),
            feat_b: Array1::zeros(self.feat_b.len()),
            enc: self
                .enc
                .iter()
                .map(|_| EncoderLayer {
                    attn: Attention::zeros(self.d_model),
                    ff: FeedForward::zeros(self.d_model, self.d_ff),
                })
                .collect(),
            dec: self
                .dec
                .iter()
                .map(|_| DecoderLayer {
                    self_attn: Attention::zeros(self.d_model),
                    cross_attn: Attention::zeros(self.d_model),
                    ff: FeedForward::zeros(self.d_model, self.d_ff),
                })
                .collect(),
            w_out: Array2::zeros(self.w_out.raw_dim()),
            b_out: Array1::zeros(self.b_out.len()),
            head: ProjectionHead {
                weight: Array2::zeros(self.head.weight.raw_dim()),
                bias: Array1::zeros(self.head.bias.len()),
            },
        }
    }

    /// Visit every scalar parameter in a fixed traversal order.
    pub fn for_each(&self, mut f: impl FnMut(f64)) {
        let mut visit2 = |a: &Array2<f64>| a.iter().for_each(|v| f(*v));
        visit2(&self.embed);
        visit2(&self.feat_w);
        self.feat_b.iter().for_each(|v| f(*v));
        for layer in &self.enc {
            for m in [&layer.attn.wq, &layer.attn.wk, &layer.attn.wv, &layer.attn.wo] {
                m.iter().for_each(|v| f(*v));
            }
            layer.ff.w1.iter().for_each(|v| f(*v));
            layer.ff.b1.iter().for_each(|v| f(*v));
            layer.ff.w2.iter().for_each(|v| f(*v));
            layer.ff.b2.iter().for_each(|v| f(*v));
        }
        for layer in &self.dec {
            for attn in [&layer.self_attn, &layer.cross_attn] {
                for m in [&attn.wq, &attn.wk, &attn.wv, &attn.wo] {
                    m.iter().for_each(|v| f(*v));
                }
            }
            layer.ff.w1.iter().for_each(|v| f(*v));
            layer.ff.b1.iter().for_each(|v| f(*v));
            layer.ff.w2.iter().for_each(|v| f(*v));
            layer.ff.b2.iter().for_each(|v| f(*v));
        }
        self.w_out.iter().for_each(|v| f(*v));
        self.b_out.iter().for_each(|v| f(*v));
        self.head.weight.iter().for_each(|v| f(*v));
        self.head.bias.iter().for_each(|v| f(*v));
    }

    /// Mutable visit in the same traversal order as [`Self::for_each`].
    pub fn for_each_mut(&mut self, mut f: impl FnMut(&mut f64)) {
        self.embed.iter_mut().for_each(&mut f);
        self.feat_w.iter_mut().for_each(&mut f);
        self.feat_b.iter_mut().for_each(&mut f);
        for layer in &mut self.enc {
            for m in [
                &mut layer.attn.wq,
                &mut layer.attn.wk,
                &mut layer.attn.wv,
                &mut layer.attn.wo,
            ] {
                m.iter_mut().for_each(&mut f);
            }
            layer.ff.w1.iter_mut().for_each(&mut f);
            layer.ff.b1.iter_mut().for_each(&mut f);
            layer.ff.w2.iter_mut().for_each(&mut f);
            layer.ff.b2.iter_mut().for_each(&mut f);
        }
        for layer in &mut self.dec {
            for attn in [&mut layer.self_attn, &mut layer.cross_attn] {
                for m in [&mut attn.wq, &mut attn.wk, &mut attn.wv, &mut attn.wo] {
                    m.iter_mut().for_each(&mut f);
                }
            }
            layer.ff.w1.iter_mut().for_each(&mut f);
            layer.ff.b1.iter_mut().for_each(&mut f);
            layer.ff.w2.iter_mut().for_each(&mut f);
            layer.ff.b2.iter_mut().for_each(&mut f);
        }
        self.w_out.iter_mut().for_each(&mut f);
        self.b_out.iter_mut().for_each(&mut f);
        self.head.weight.iter_mut().for_each(&mut f);
        self.head.bias.iter_mut().for_each(&mut f);
    }

    pub fn param_count(&self) -> usize {
        let mut n = 0;
        self.for_each(|_| n += 1);
        n
    }

    pub fn global_norm(&self) -> f64 {
        let mut acc = 0.0;
        self.for_each(|v| acc += v * v);
        acc.sqrt()
    }

    /// self += c * other (elementwise, matching traversal order).
    pub fn add_scaled(&mut self, other: &ModelParams, c: f64) {
        let mut flat = Vec::with_capacity(other.param_count());
        other.for_each(|v| flat.push(v));
        let mut i = 0;
        self.for_each_mut(|v| {
            *v += c * flat[i];
            i += 1;
        });
    }

    /// Scale every parameter in place.
    pub fn scale(&mut self, c: f64) {
        self.for_each_mut(|v| *v *= c);
    }

    pub fn is_finite(&self) -> bool {
        let mut ok = true;
        self.for_each(|v| ok &= v.is_finite());
        ok
    }
}

/// Clip gradient global norm to `max_norm`; returns the pre-clip norm.
pub fn clip_global_norm(grads: &mut ModelParams, max_norm: f64) -> f64 {
    let norm = grads.global_norm();
    if norm > max_norm && norm > 0.0 {
        grads.scale(max_norm / norm);
    }
    norm
}

// ---------------------------------------------------------------------------
// Forward / backward
// ---------------------------------------------------------------------------

struct AttnCache {
    xq: Array2<f64>,
    xkv: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    attn: Array2<f64>,
    ctx: Array2<f64>,
}

fn attn_forward(w: &Attention, xq: &Array2<f64>, xkv: &Array2<f64>, causal: bool) -> (Array2<f64>, AttnCache) {
    let d = xq.ncols() as f64;
    let scale = 1.0 / d.sqrt();
    let q = xq.dot(&w.wq);
    let k = xkv.dot(&w.wk);
    let v = xkv.dot(&w.wv);
    let mut scores = q.dot(&k.t());
    scores.mapv_inplace(|s| s * scale);
    if causal {
        for i in 0..scores.nrows() {
            for j in (i + 1)..scores.ncols() {
                scores[[i, j]] = f64::NEG_INFINITY;
            }
        }
    }
    let attn = softmax_rows(&scores);
    let ctx = attn.dot(&v);
    let out = ctx.dot(&w.wo);
    (
        out,
        AttnCache {
            xq: xq.clone(),
            xkv: xkv.clone(),
            q,
            k,
            v,
            attn,
            ctx,
        },
    )
}

/// Returns (d_xq, d_xkv) and accumulates weight gradients.
fn attn_backward(
    w: &Attention,
    cache: &AttnCache,
    d_out: &Array2<f64>,
    grads: &mut Attention,
) -> (Array2<f64>, Array2<f64>) {
    let d = cache.xq.ncols() as f64;
    let scale = 1.0 / d.sqrt();

    let d_ctx = d_out.dot(&w.wo.t());
    grads.wo = &grads.wo + &cache.ctx.t().dot(d_out);

    let d_attn = d_ctx.dot(&cache.v.t());
    let d_v = cache.attn.t().dot(&d_ctx);

    // Row-wise softmax backward; masked positions have attn == 0 and
    // therefore zero score gradient.
    let mut d_scores = Array2::zeros(d_attn.raw_dim());
    for i in 0..d_attn.nrows() {
        let a = cache.attn.row(i);
        let da = d_attn.row(i);
        let dot = a.dot(&da);
        for j in 0..d_attn.ncols() {
            d_scores[[i, j]] = a[j] * (da[j] - dot);
        }
    }

    let d_q = d_scores.dot(&cache.k).mapv(|v| v * scale);
    let d_k = d_scores.t().dot(&cache.q).mapv(|v| v * scale);

    grads.wq = &grads.wq + &cache.xq.t().dot(&d_q);
    grads.wk = &grads.wk + &cache.xkv.t().dot(&d_k);
    grads.wv = &grads.wv + &cache.xkv.t().dot(&d_v);

    let d_xq = d_q.dot(&w.wq.t());
    let d_xkv = d_k.dot(&w.wk.t()) + d_v.dot(&w.wv.t());
    (d_xq, d_xkv)
}

struct FfCache {
    x: Array2<f64>,
    h: Array2<f64>,
}

fn ff_forward(w: &FeedForward, x: &Array2<f64>) -> (Array2<f64>, FfCache) {
    let pre = x.dot(&w.w1) + &w.b1;
    let h = pre.mapv(f64::tanh);
    let out = h.dot(&w.w2) + &w.b2;
    (
        out,
        FfCache {
            x: x.clone(),
            h,
        },
    )
}

fn ff_backward(
    w: &FeedForward,
    cache: &FfCache,
    d_out: &Array2<f64>,
    grads: &mut FeedForward,
) -> Array2<f64> {
    grads.w2 = &grads.w2 + &cache.h.t().dot(d_out);
    grads.b2 = &grads.b2 + &d_out.sum_axis(Axis(0));
    let d_h = d_out.dot(&w.w2.t());
    let d_pre = &d_h * &cache.h.mapv(|h| 1.0 - h * h);
    grads.w1 = &grads.w1 + &cache.x.t().dot(&d_pre);
    grads.b1 = &grads.b1 + &d_pre.sum_axis(Axis(0));
    d_pre.dot(&w.w1.t())
}

fn softmax_rows(scores: &Array2<f64>) -> Array2<f64> {
    let mut out = scores.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Sinusoidal positional encodings for `t` positions.
fn positional(t: usize, d: usize) -> Array2<f64> {
    let mut pe = Array2::zeros((t, d));
    for pos in 0..t {
        for i in 0..d {
            let angle = pos as f64 / 10_000f64.powf((2 * (i / 2)) as f64 / d as f64);
            pe[[pos, i]] = if i % 2 == 0 { angle.sin() } else { angle.cos() };
        }
    }
    pe
}

struct EncLayerCache {
    attn: AttnCache,
    ff: FfCache,
}

struct EncPass {
    layers: Vec<EncLayerCache>,
    out: Array2<f64>,
}

fn encode_pass(params: &ModelParams, feat: &Array1<f64>, input_ids: &[usize]) -> EncPass {
    let d = params.d_model;
    let t = input_ids.len() + 1;
    let mut rows = Array2::zeros((t, d));
    let feat_row = feat.dot(&params.feat_w) + &params.feat_b;
    rows.row_mut(0).assign(&feat_row);
    for (i, &id) in input_ids.iter().enumerate() {
        rows.row_mut(i + 1).assign(&params.embed.row(id));
    }
    let mut x = rows + positional(t, d);
    let mut layers = Vec::with_capacity(params.enc.len());
    for layer in &params.enc {
        let (attn_out, attn_cache) = attn_forward(&layer.attn, &x, &x, false);
        let y = &x + &attn_out;
        let (ff_out, ff_cache) = ff_forward(&layer.ff, &y);
        x = &y + &ff_out;
        layers.push(EncLayerCache {
            attn: attn_cache,
            ff: ff_cache,
        });
    }
    EncPass { layers, out: x }
}

struct DecLayerCache {
    self_attn: AttnCache,
    cross_attn: AttnCache,
    ff: FfCache,
}

struct DecPass {
    layers: Vec<DecLayerCache>,
    out: Array2<f64>,
}

fn decode_pass(params: &ModelParams, enc_out: &Array2<f64>, dec_in: &[usize]) -> DecPass {
    let d = params.d_model;
    let t = dec_in.len();
    let mut rows = Array2::zeros((t, d));
    for (i, &id) in dec_in.iter().enumerate() {
        rows.row_mut(i).assign(&params.embed.row(id));
    }
    let mut x = rows + positional(t, d);

    let mut layers = Vec::with_capacity(params.dec.len());
    for layer in &params.dec {
        let (self_out, self_cache) = attn_forward(&layer.self_attn, &x, &x, true);
        let y1 = &x + &self_out;
        let (cross_out, cross_cache) = attn_forward(&layer.cross_attn, &y1, enc_out, false);
        let y2 = &y1 + &cross_out;
        let (ff_out, ff_cache) = ff_forward(&layer.ff, &y2);
        x = &y2 + &ff_out;
        layers.push(DecLayerCache {
            self_attn: self_cache,
            cross_attn: cross_cache,
            ff: ff_cache,
        });
    }
    DecPass { layers, out: x }
}

/// Everything needed to run the backward pass of one teacher-forced example.
pub struct NllForward {
    input_ids: Vec<usize>,
    dec_in: Vec<usize>,
    target_ids: Vec<usize>,
    feat: Array1<f64>,
    enc: EncPass,
    dec: DecPass,
    probs: Array2<f64>,
    /// Token-mean negative log-likelihood of the target.
    pub nll: f64,
    /// Mean of the decoder's final hidden states over target positions; the
    /// pre-projection input of the predicted contrastive embedding.
    pub pooled: Array1<f64>,
}

/// Teacher-forced forward pass: decoder input is BOS followed by the target
/// prefix; supervision is the target followed by EOS.
pub fn nll_forward(
    params: &ModelParams,
    feat: &Array1<f64>,
    input_ids: &[usize],
    target_ids: &[usize],
) -> Result<NllForward> {
    if target_ids.is_empty() {
        return Err(MindError::Assembly("empty target sequence".into()));
    }
    if feat.len() != params.feat_dim {
        return Err(MindError::Shape {
            expected: format!("feature of length {}", params.feat_dim),
            got: format!("{}", feat.len()),
        });
    }
    let mut targets = target_ids.to_vec();
    targets.push(super::vocab::EOS);
    let mut dec_in = Vec::with_capacity(targets.len());
    dec_in.push(super::vocab::BOS);
    dec_in.extend_from_slice(&targets[..targets.len() - 1]);

    let enc = encode_pass(params, feat, input_ids);
    let dec = decode_pass(params, &enc.out, &dec_in);

    let logits = dec.out.dot(&params.w_out) + &params.b_out;
    let probs = softmax_rows(&logits);
    let t = targets.len() as f64;
    let mut nll = 0.0;
    for (i, &tok) in targets.iter().enumerate() {
        nll -= probs[[i, tok]].max(1e-300).ln();
    }
    nll /= t;
    if !nll.is_finite() {
        return Err(MindError::NumericFault(format!("nll = {}", nll)));
    }
    let pooled = dec.out.mean_axis(Axis(0)).expect("nonempty decoder output");

    Ok(NllForward {
        input_ids: input_ids.to_vec(),
        dec_in,
        target_ids: targets,
        feat: feat.clone(),
        enc,
        dec,
        probs,
        nll,
        pooled,
    })
}

/// Backward pass for the token-mean NLL. `extra_pooled_grad`, when given, is
/// an additional gradient on the pooled decoder hidden state (the
/// contrastive path); it is distributed uniformly over target positions.
/// Projection-head gradients are not produced here; the contrastive loss
/// owns them.
pub fn nll_backward(
    params: &ModelParams,
    fwd: &NllForward,
    extra_pooled_grad: Option<&Array1<f64>>,
) -> ModelParams {
    let mut grads = params.zeros_like();
    let t = fwd.target_ids.len();

    // d nll / d logits = (softmax - onehot) / T
    let mut d_logits = fwd.probs.clone();
    for (i, &tok) in fwd.target_ids.iter().enumerate() {
        d_logits[[i, tok]] -= 1.0;
    }
    d_logits.mapv_inplace(|v| v / t as f64);

    grads.w_out = fwd.dec.out.t().dot(&d_logits);
    grads.b_out = d_logits.sum_axis(Axis(0));
    let mut d_dec = d_logits.dot(&params.w_out.t());

    if let Some(g) = extra_pooled_grad {
        let per_row = g.mapv(|v| v / t as f64);
        for mut row in d_dec.rows_mut() {
            row += &per_row;
        }
    }

    // Decoder layers, last to first.
    let mut d_enc_out: Array2<f64> = Array2::zeros(fwd.enc.out.raw_dim());
    for i in (0..params.dec.len()).rev() {
        let layer = &params.dec[i];
        let cache = &fwd.dec.layers[i];
        let g = &mut grads.dec[i];

        let d_y2 = &d_dec + &ff_backward(&layer.ff, &cache.ff, &d_dec, &mut g.ff);
        let (d_y1_q, d_e) = attn_backward(&layer.cross_attn, &cache.cross_attn, &d_y2, &mut g.cross_attn);
        d_enc_out = d_enc_out + d_e;
        let d_y1 = &d_y2 + &d_y1_q;
        let (d_xq, d_xkv) = attn_backward(&layer.self_attn, &cache.self_attn, &d_y1, &mut g.self_attn);
        d_dec = &d_y1 + &d_xq + &d_xkv;
    }

    // Decoder input embeddings.
    for (i, &id) in fwd.dec_in.iter().enumerate() {
        let mut row = grads.embed.row_mut(id);
        row += &d_dec.row(i);
    }

    // Encoder layers, last to first.
    let mut d_x = d_enc_out;
    for i in (0..params.enc.len()).rev() {
        let layer = &params.enc[i];
        let cache = &fwd.enc.layers[i];
        let g = &mut grads.enc[i];

        let d_y = &d_x + &ff_backward(&layer.ff, &cache.ff, &d_x, &mut g.ff);
        let (d_xq, d_xkv) = attn_backward(&layer.attn, &cache.attn, &d_y, &mut g.attn);
        d_x = &d_y + &d_xq + &d_xkv;
    }

    // Feature fusion row and encoder token embeddings.
    let d_row0 = d_x.row(0).to_owned();
    for a in 0..params.feat_dim {
        for b in 0..params.d_model {
            grads.feat_w[[a, b]] += fwd.feat[a] * d_row0[b];
        }
    }
    grads.feat_b = &grads.feat_b + &d_row0;
    for (i, &id) in fwd.input_ids.iter().enumerate() {
        let mut row = grads.embed.row_mut(id);
        row += &d_x.row(i + 1);
    }

    grads
}

/// Encoder output pooled by mean; the hidden-level embedding of a rendered
/// input, used for rationale encodings.
pub fn encode_pooled(params: &ModelParams, feat: &Array1<f64>, input_ids: &[usize]) -> Array1<f64> {
    let pass = encode_pass(params, feat, input_ids);
    pass.out.mean_axis(Axis(0)).expect("nonempty encoder output")
}

/// Greedy decode: argmax tokens until EOS or `max_gen_len`.
pub fn greedy_decode(
    params: &ModelParams,
    feat: &Array1<f64>,
    input_ids: &[usize],
    max_gen_len: usize,
) -> Vec<usize> {
    let enc = encode_pass(params, feat, input_ids);
    let mut generated: Vec<usize> = Vec::new();
    for _ in 0..max_gen_len {
        let mut dec_in = Vec::with_capacity(generated.len() + 1);
        dec_in.push(super::vocab::BOS);
        dec_in.extend_from_slice(&generated);
        let dec = decode_pass(params, &enc.out, &dec_in);
        let logits = dec.out.row(dec_in.len() - 1).dot(&params.w_out) + &params.b_out;
        let next = argmax(&logits);
        if next == super::vocab::EOS {
            break;
        }
        generated.push(next);
    }
    generated
}

fn argmax(v: &Array1<f64>) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] > v[best] {
            best = i;
        }
    }
    best
}

//! A small from-scratch attention encoder-decoder with feature fusion and
//! the contrastive projection head, plus its training loop, two-phase
//! inference, checkpointing, and finite-difference verification.

pub mod checkpoint;
pub mod gradcheck;
pub mod infer;
pub mod model;
pub mod train;
pub mod vocab;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use gradcheck::{check_mca, check_phase1_combined, check_phase2_nll, GradCheckOutcome};
pub use infer::{answer_with_conditioner, evaluate, extract_answer, infer, EvalReport, Inference};
pub use model::{clip_global_norm, greedy_decode, nll_backward, nll_forward, ModelConfig, ModelParams, NllForward};
pub use train::{build_vocab, train, EpochMetrics, TrainOutput, TrainSettings, TrainState};
pub use vocab::{tokenize, Vocab};

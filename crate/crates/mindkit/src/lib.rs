//! Multi-rationale dataset augmentation, two-phase correction training, and
//! contrastive alignment, end to end at desk scale.
//!
//! The pipeline has three mechanisms: rationale augmentation builds positive
//! and negative rationale pools through a batched generator protocol; the
//! two-stage curriculum first trains rationale generation from diverse
//! positives, then answer generation conditioned on positive or negative
//! rationales; contrastive alignment separates hard positive and hard
//! negative rationale embeddings around the predicted embedding during the
//! first stage.

pub mod corpus;
pub mod dataset;
pub mod error;
pub mod mca;
pub mod p2cl;
pub mod protocol;
pub mod rad;
pub mod rng;
pub mod seq2seq;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{MindError, Result};

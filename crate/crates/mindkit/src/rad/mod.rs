//! The rationale augmentation pipeline: prompt construction, batched
//! generation through a pluggable backend, delimiter splitting, cleaning,
//! and assembly into rad samples.

pub mod augment;
pub mod clean;
pub mod generator;
pub mod mock;
pub mod prompt;
pub mod split;

pub use augment::{augment_sample, AugmentConfig, PolarityYield, YieldReport};
pub use clean::{clean_rationale, CleanBounds, RejectReason};
pub use generator::{backend_for, generate, Generator, GeneratorConfig, ScriptedGenerator, WireProfile};
pub use mock::{invert_variant, paraphrase_variant, MockGenerator};
pub use prompt::{build_negative_prompt, build_positive_prompt, render_task_info, PromptSpec};
pub use split::{split_batch, RawBatch};

//! Fixed strings of the batch-generation protocol.
//!
//! These constants are shared by prompt construction, response splitting,
//! and rationale validation; they must stay byte-identical across all three.

/// Exact delimiter separating rationales inside one generator response.
pub const BATCH_DELIMITER: &str = "\n\n~~~\n\n";

/// Output label prefixing each positively-adjusted rationale.
pub const POSITIVE_LABEL: &str = "Adjusted Solution:";

/// Output label prefixing each semantically-inverted rationale.
pub const NEGATIVE_LABEL: &str = "Negative Solution:";

/// Instruction sentence telling the generator how to separate outputs.
/// The delimiter is spelled with escaped newlines because the prompt
/// describes it rather than contains it.
pub const SEPARATOR_INSTRUCTION: &str = "Use \"\\n\\n~~~\\n\\n\" to separate them.";

//! Offline stand-ins for the language model and the embedding service.

mod embed;
mod llm;

pub use embed::{fnv1a64, HashEmbedder, FNV_OFFSET_BASIS, FNV_PRIME};
pub use llm::{builtin_template, fill_template, MockEntry, MockLlm, MockScript};

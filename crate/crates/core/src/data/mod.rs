//! Instance representation, tokenization, vocabularies, placeholder
//! substitution, distant-supervision labeling, dataset statistics,
//! splitting, and synthetic corpus generation.

pub mod dates;
pub mod instance;
pub mod label;
pub mod placeholder;
pub mod split;
pub mod stats;
pub mod synth;
pub mod tokenize;
pub mod vocab;

pub use dates::{format_timestamp, parse_date_str, parse_date_tokens, Date};
pub use instance::{read_instances, write_instances, Instance};
pub use label::{label_positions, LabelResult};
pub use placeholder::{apply_placeholders, resolve_placeholders, PlaceholderEncoding};
pub use split::split_dataset;
pub use stats::{
    answer_entropy, answer_entropy_from_counts, classify_property, corpus_stats, property_stats,
    CorpusStats, PropertyClass, PropertyStats,
};
pub use synth::{generate_synthetic, CategoricalSpec, DateSpec, GenSpec, PropertyTruth, RelationalSpec};
pub use tokenize::tokenize;
pub use vocab::{AnswerVocab, CharVocab, Vocabulary, EOS, GO, OOV, PAD, RESERVED, SEP};

/// First `limit` elements of a sequence; shorter sequences pass through.
pub fn truncate<T>(seq: &[T], limit: usize) -> &[T] {
    &seq[..seq.len().min(limit)]
}

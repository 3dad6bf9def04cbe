//! Placeholder substitution for out-of-vocabulary words.
//!
//! Every OOV occurrence in the document draws a distinct placeholder id at
//! random without replacement (the same surface word occurring twice gets
//! two different placeholders). OOV answer tokens that appear in the
//! document take the placeholder of their first document occurrence; OOV
//! answer tokens absent from the document stay plain OOV. When the pool is
//! exhausted, excess occurrences fall back to plain OOV and are counted.

use std::collections::BTreeMap;
use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::data::vocab::{Vocabulary, OOV};

#[derive(Debug, Clone, PartialEq)]
pub struct PlaceholderEncoding {
    pub doc_ids: Vec<usize>,
    pub answer_ids: Vec<usize>,
    /// placeholder id → the document surface word it stands for.
    pub map: BTreeMap<usize, String>,
    /// OOV occurrences that did not fit in the placeholder pool.
    pub overflow: usize,
}

pub fn apply_placeholders(
    doc_tokens: &[String],
    answer_tokens: &[String],
    vocab: &Vocabulary,
    rng: &mut impl Rng,
) -> PlaceholderEncoding {
    let mut pool: Vec<usize> = (0..vocab.n_doc()).collect();
    pool.shuffle(rng);
    pool.reverse(); // pop() now draws in shuffled order

    let mut map = BTreeMap::new();
    let mut first_for_word: HashMap<&str, usize> = HashMap::new();
    let mut overflow = 0usize;

    let doc_ids = doc_tokens
        .iter()
        .map(|tok| {
            if vocab.contains(tok) {
                vocab.id_of(tok)
            } else {
                match pool.pop() {
                    Some(k) => {
                        let id = vocab.placeholder_id(k);
                        map.insert(id, tok.clone());
                        first_for_word.entry(tok.as_str()).or_insert(id);
                        id
                    }
                    None => {
                        overflow += 1;
                        OOV
                    }
                }
            }
        })
        .collect();

    let answer_ids = answer_tokens
        .iter()
        .map(|tok| {
            if vocab.contains(tok) {
                vocab.id_of(tok)
            } else {
                first_for_word.get(tok.as_str()).copied().unwrap_or(OOV)
            }
        })
        .collect();

    PlaceholderEncoding {
        doc_ids,
        answer_ids,
        map,
        overflow,
    }
}

/// Map a decoded id sequence back to surface tokens, resolving placeholder
/// ids through the encoding map. Placeholders missing from the map resolve
/// to the OOV marker.
pub fn resolve_placeholders(
    ids: &[usize],
    vocab: &Vocabulary,
    map: &BTreeMap<usize, String>,
) -> Vec<String> {
    ids.iter()
        .map(|&id| {
            if vocab.placeholder_index(id).is_some() {
                map.get(&id)
                    .cloned()
                    .unwrap_or_else(|| vocab.decode(OOV).to_string())
            } else {
                vocab.decode(id).to_string()
            }
        })
        .collect()
}

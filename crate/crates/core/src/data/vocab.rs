//! Frequency-ranked vocabularies with reserved control ids.
//!
//! Word id layout: [PAD, OOV, GO, EOS, SEP], then `n_doc` placeholder ids,
//! then word ids in frequency rank order (ties broken lexicographically).
//! Character ids reserve [PAD, OOV, GO, EOS] ahead of the fixed inventory.

use std::collections::HashMap;

use crate::data::tokenize::tokenize;
use crate::data::Instance;
use crate::{Error, Result};

pub const PAD: usize = 0;
pub const OOV: usize = 1;
pub const GO: usize = 2;
pub const EOS: usize = 3;
pub const SEP: usize = 4;
pub const RESERVED: usize = 5;

const MARKERS: [&str; RESERVED] = ["<pad>", "<oov>", "<go>", "<eos>", "<sep>"];

#[derive(Debug, Clone)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, usize>,
    n_doc: usize,
    placeholder_names: Vec<String>,
}

impl Vocabulary {
    /// Count tokens over documents, properties, and answers, keep the
    /// `n_w` most frequent, and reserve `n_doc` placeholder ids.
    pub fn build(corpus: &[Instance], n_w: usize, n_doc: usize) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::Data("cannot build vocabulary from empty corpus".into()));
        }
        if n_w == 0 {
            return Err(Error::Data("vocabulary size must be at least 1".into()));
        }
        let mut counts: HashMap<String, usize> = HashMap::new();
        for inst in corpus {
            for field in [&inst.document, &inst.property]
                .into_iter()
                .chain(inst.answers.iter())
            {
                for tok in tokenize(field) {
                    *counts.entry(tok).or_insert(0) += 1;
                }
            }
        }
        let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked.truncate(n_w);
        Ok(Self::from_words(
            ranked.into_iter().map(|(w, _)| w).collect(),
            n_doc,
        ))
    }

    /// Rebuild from an already-ranked word list (checkpoint restore).
    pub fn from_words(words: Vec<String>, n_doc: usize) -> Self {
        let index = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
        let placeholder_names = (0..n_doc).map(|k| format!("<ph{k}>")).collect();
        Vocabulary {
            words,
            index,
            n_doc,
            placeholder_names,
        }
    }

    pub fn size(&self) -> usize {
        RESERVED + self.n_doc + self.words.len()
    }

    pub fn word_count(&self) -> usize {
        self.words.len()
    }

    pub fn n_doc(&self) -> usize {
        self.n_doc
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn id_of(&self, token: &str) -> usize {
        match self.index.get(token) {
            Some(rank) => RESERVED + self.n_doc + rank,
            None => OOV,
        }
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn placeholder_id(&self, k: usize) -> usize {
        debug_assert!(k < self.n_doc);
        RESERVED + k
    }

    pub fn placeholder_index(&self, id: usize) -> Option<usize> {
        if (RESERVED..RESERVED + self.n_doc).contains(&id) {
            Some(id - RESERVED)
        } else {
            None
        }
    }

    pub fn encode(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.id_of(t)).collect()
    }

    /// Surface form for an id; control and placeholder ids decode to their
    /// markers.
    pub fn decode(&self, id: usize) -> &str {
        if id < RESERVED {
            MARKERS[id]
        } else if id < RESERVED + self.n_doc {
            &self.placeholder_names[id - RESERVED]
        } else {
            &self.words[id - RESERVED - self.n_doc]
        }
    }

    pub fn decode_tokens(&self, ids: &[usize]) -> Vec<String> {
        ids.iter().map(|&id| self.decode(id).to_string()).collect()
    }
}

/// Answer-string table for classifier heads: the `n_ans` most frequent
/// training answers, ties lexicographic.
#[derive(Debug, Clone)]
pub struct AnswerVocab {
    answers: Vec<String>,
    index: HashMap<String, usize>,
}

impl AnswerVocab {
    pub fn build(corpus: &[Instance], n_ans: usize) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::Data("cannot build answer table from empty corpus".into()));
        }
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for inst in corpus {
            for a in &inst.answers {
                *counts.entry(a.as_str()).or_insert(0) += 1;
            }
        }
        let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        ranked.truncate(n_ans);
        Ok(Self::from_answers(
            ranked.into_iter().map(|(a, _)| a.to_string()).collect(),
        ))
    }

    pub fn from_answers(answers: Vec<String>) -> Self {
        let index = answers
            .iter()
            .enumerate()
            .map(|(i, a)| (a.clone(), i))
            .collect();
        AnswerVocab { answers, index }
    }

    pub fn len(&self) -> usize {
        self.answers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.answers.is_empty()
    }

    pub fn id_of(&self, answer: &str) -> Option<usize> {
        self.index.get(answer).copied()
    }

    pub fn answer(&self, id: usize) -> &str {
        &self.answers[id]
    }

    pub fn answers(&self) -> &[String] {
        &self.answers
    }
}

pub const CHAR_PAD: usize = 0;
pub const CHAR_OOV: usize = 1;
pub const CHAR_GO: usize = 2;
pub const CHAR_EOS: usize = 3;
pub const CHAR_RESERVED: usize = 4;

/// Fixed 76-character inventory: a-z, A-Z, 0-9, space and common
/// punctuation. Characters outside the set map to the OOV character.
#[derive(Debug, Clone)]
pub struct CharVocab {
    chars: Vec<char>,
    index: HashMap<char, usize>,
}

impl CharVocab {
    pub fn standard() -> Self {
        let mut chars: Vec<char> = ('a'..='z').collect();
        chars.extend('A'..='Z');
        chars.extend('0'..='9');
        chars.extend(" .,;:!?'\"()-/&".chars());
        debug_assert_eq!(chars.len(), 76);
        let index = chars.iter().enumerate().map(|(i, c)| (*c, i)).collect();
        CharVocab { chars, index }
    }

    /// Total id count including the reserved control ids.
    pub fn size(&self) -> usize {
        CHAR_RESERVED + self.chars.len()
    }

    pub fn inventory_len(&self) -> usize {
        self.chars.len()
    }

    pub fn id_of(&self, ch: char) -> usize {
        match self.index.get(&ch) {
            Some(i) => CHAR_RESERVED + i,
            None => CHAR_OOV,
        }
    }

    pub fn encode(&self, text: &str) -> Vec<usize> {
        text.chars().map(|c| self.id_of(c)).collect()
    }

    pub fn decode(&self, id: usize) -> Option<char> {
        if id >= CHAR_RESERVED {
            self.chars.get(id - CHAR_RESERVED).copied()
        } else {
            None
        }
    }

    pub fn decode_string(&self, ids: &[usize]) -> String {
        ids.iter().filter_map(|&id| self.decode(id)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(docs: &[&str]) -> Vec<Instance> {
        docs.iter()
            .map(|d| Instance::new(*d, "p", vec!["x".into()]).unwrap())
            .collect()
    }

    #[test]
    fn frequency_cut_maps_rare_words_to_oov() {
        // corpus {"a a b"}, N_w=1 → words=["a"], "b" maps to OOV
        // (counts include the property "p" and answer "x", each freq 1; "a"
        // has freq 2 so it wins the single slot)
        let c = corpus(&["a a b"]);
        let v = Vocabulary::build(&c, 1, 10).unwrap();
        assert_eq!(v.words(), &["a".to_string()]);
        assert_ne!(v.id_of("a"), OOV);
        assert_eq!(v.id_of("b"), OOV);
    }

    #[test]
    fn ties_break_lexicographically() {
        // every token ("b", "a", property "p", answer "x") occurs once;
        // the single slot goes to the lexicographically first
        let c = corpus(&["b a"]);
        let v = Vocabulary::build(&c, 1, 0).unwrap();
        assert!(v.contains("a"));
        assert!(!v.contains("b"));
    }

    #[test]
    fn oversized_limit_keeps_all_tokens() {
        let c = corpus(&["a b c"]);
        let v = Vocabulary::build(&c, 1000, 0).unwrap();
        for t in ["a", "b", "c", "p", "x"] {
            assert!(v.contains(t), "missing {t}");
        }
    }

    #[test]
    fn stable_under_corpus_reordering() {
        let c1 = corpus(&["a a b", "c d"]);
        let mut c2 = c1.clone();
        c2.reverse();
        let v1 = Vocabulary::build(&c1, 4, 2).unwrap();
        let v2 = Vocabulary::build(&c2, 4, 2).unwrap();
        assert_eq!(v1.words(), v2.words());
    }

    #[test]
    fn empty_corpus_rejected() {
        assert!(Vocabulary::build(&[], 5, 0).is_err());
    }

    #[test]
    fn ids_are_dense_and_reserved_disjoint() {
        let c = corpus(&["alpha beta"]);
        let v = Vocabulary::build(&c, 100, 3).unwrap();
        let mut seen = std::collections::HashSet::new();
        for id in 0..v.size() {
            assert!(seen.insert(v.decode(id).to_string()), "dup at {id}");
        }
        assert!(v.id_of("alpha") >= RESERVED + 3);
        assert_eq!(v.placeholder_id(0), RESERVED);
        assert_eq!(v.placeholder_index(RESERVED + 2), Some(2));
        assert_eq!(v.placeholder_index(RESERVED + 3), None);
    }

    #[test]
    fn round_trip_in_vocab_tokens() {
        let c = corpus(&["alpha beta gamma"]);
        let v = Vocabulary::build(&c, 100, 2).unwrap();
        let toks: Vec<String> = ["alpha", "beta", "gamma"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let ids = v.encode(&toks);
        assert_eq!(v.decode_tokens(&ids), toks);
        // OOV decodes to the marker
        let ids = v.encode(&["nope".to_string()]);
        assert_eq!(v.decode_tokens(&ids), vec!["<oov>"]);
    }

    #[test]
    fn answer_vocab_ranks_by_frequency_then_lex() {
        let insts = vec![
            Instance::new("d", "p", vec!["b".into()]).unwrap(),
            Instance::new("d", "p", vec!["b".into()]).unwrap(),
            Instance::new("d", "p", vec!["a".into()]).unwrap(),
            Instance::new("d", "p", vec!["c".into()]).unwrap(),
        ];
        let av = AnswerVocab::build(&insts, 2).unwrap();
        assert_eq!(av.answers(), &["b".to_string(), "a".to_string()]);
        assert_eq!(av.id_of("b"), Some(0));
        assert_eq!(av.id_of("c"), None);
    }

    #[test]
    fn char_inventory_is_76() {
        let cv = CharVocab::standard();
        assert_eq!(cv.inventory_len(), 76);
        assert_eq!(cv.size(), 80);
        let ids = cv.encode("Ab 9?");
        assert_eq!(cv.decode_string(&ids), "Ab 9?");
        assert_eq!(cv.id_of('€'), CHAR_OOV);
    }
}

//! Distant-supervision labeling: mark every document position inside a
//! full-sequence match of any gold answer. Date answers additionally match
//! any surface form that parses to the same (day, month, year).

use crate::data::dates::{parse_date_str, parse_date_tokens};
use crate::data::tokenize::tokenize;

#[derive(Debug, Clone, PartialEq)]
pub struct LabelResult {
    /// One 0/1 flag per document token.
    pub labels: Vec<u8>,
    /// False when no answer appears in the document; such instances are
    /// dropped from extraction training.
    pub any_answer: bool,
}

pub fn label_positions(doc_tokens: &[String], answers: &[String]) -> LabelResult {
    let mut labels = vec![0u8; doc_tokens.len()];
    for answer in answers {
        let answer_tokens = tokenize(answer);
        if !answer_tokens.is_empty() && answer_tokens.len() <= doc_tokens.len() {
            for start in 0..=(doc_tokens.len() - answer_tokens.len()) {
                if doc_tokens[start..start + answer_tokens.len()]
                    .iter()
                    .zip(&answer_tokens)
                    .all(|(a, b)| a == b)
                {
                    for l in &mut labels[start..start + answer_tokens.len()] {
                        *l = 1;
                    }
                }
            }
        }
        // semantic date matching over the recognized window sizes
        if let Some(date) = parse_date_str(answer) {
            for width in 3..=5usize {
                if width > doc_tokens.len() {
                    break;
                }
                for start in 0..=(doc_tokens.len() - width) {
                    if parse_date_tokens(&doc_tokens[start..start + width]) == Some(date) {
                        for l in &mut labels[start..start + width] {
                            *l = 1;
                        }
                    }
                }
            }
        }
    }
    let any_answer = labels.iter().any(|&l| l == 1);
    LabelResult { labels, any_answer }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        tokenize(s)
    }

    #[test]
    fn contiguous_match_marks_span() {
        let r = label_positions(&toks("a b c"), &["b c".to_string()]);
        assert_eq!(r.labels, vec![0, 1, 1]);
        assert!(r.any_answer);
    }

    #[test]
    fn order_matters_for_full_match() {
        let r = label_positions(&toks("a b"), &["b a".to_string()]);
        assert_eq!(r.labels, vec![0, 0]);
        assert!(!r.any_answer);
    }

    #[test]
    fn date_surface_forms_match_semantically() {
        // document says "January 20, 2008", gold is "20 January 2008"
        let doc = toks("aired from January 20, 2008 on the network");
        let r = label_positions(&doc, &["20 January 2008".to_string()]);
        // tokens: aired from January 20 , 2008 on the network
        assert_eq!(r.labels, vec![0, 0, 1, 1, 1, 1, 0, 0, 0]);
        assert!(r.any_answer);
    }

    #[test]
    fn multiple_answers_union_their_spans() {
        let doc = toks("the Atlantic and the Pacific");
        let r = label_positions(
            &doc,
            &["Atlantic".to_string(), "Pacific".to_string(), "Indian".to_string()],
        );
        assert_eq!(r.labels, vec![0, 1, 0, 0, 1]);
    }

    #[test]
    fn repeated_occurrences_all_marked() {
        let r = label_positions(&toks("x y x"), &["x".to_string()]);
        assert_eq!(r.labels, vec![1, 0, 1]);
    }
}

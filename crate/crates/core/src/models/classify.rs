//! Softmax answer head: P(i|x) = e^{y·a_i} / Σ_j e^{y·a_j} over a learned
//! vector per answer. No bias term.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use tapegrad::{init, NodeId, ParamId, ParamSet, Tape};

use crate::data::vocab::AnswerVocab;
use crate::models::Prediction;
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct AnswerTable {
    pub table: ParamId,
    pub dim: usize,
}

impl AnswerTable {
    pub fn new(
        ps: &mut ParamSet,
        name: &str,
        answers: &AnswerVocab,
        dim: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        if answers.is_empty() {
            return Err(Error::Model("answer table is empty (N_ans = 0)".into()));
        }
        let table = ps.add(name, init::xavier_uniform(rng, answers.len(), dim))?;
        Ok(AnswerTable { table, dim })
    }

    /// Dot product of the joint representation with every answer vector.
    pub fn logits(&self, tape: &mut Tape, ps: &ParamSet, y: NodeId) -> Result<NodeId> {
        let t = tape.param(ps, self.table);
        Ok(tape.matmul(t, y)?)
    }

    /// The normalized answer distribution.
    pub fn distribution(&self, tape: &mut Tape, ps: &ParamSet, y: NodeId) -> Result<NodeId> {
        let logits = self.logits(tape, ps, y)?;
        Ok(tape.softmax(logits)?)
    }

    /// Cross-entropy of the gold answer index.
    pub fn loss(&self, tape: &mut Tape, ps: &ParamSet, y: NodeId, target: usize) -> Result<NodeId> {
        let logits = self.logits(tape, ps, y)?;
        Ok(tape.cross_entropy(logits, target)?)
    }
}

/// Highest-probability answer with its probability.
pub fn argmax_prediction(probs: &[f64], answers: &AnswerVocab) -> Prediction {
    let (best, p) = probs
        .iter()
        .enumerate()
        .fold((0usize, f64::NEG_INFINITY), |(bi, bp), (i, &p)| {
            if p > bp {
                (i, p)
            } else {
                (bi, bp)
            }
        });
    Prediction {
        answer: Some(answers.answer(best).to_string()),
        confidence: p,
    }
}

/// Geometric mean of per-step probabilities, the confidence of a decoded
/// sequence.
pub fn sequence_confidence(step_probs: &[f64]) -> f64 {
    if step_probs.is_empty() {
        return 0.0;
    }
    let log_sum: f64 = step_probs.iter().map(|p| p.max(1e-300).ln()).sum();
    (log_sum / step_probs.len() as f64).exp()
}

/// Seeded rng for prediction-time encoding (placeholder assignment).
pub fn predict_rng(seed: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}

/// Draw from `0..n` excluding `avoid`, used by negative samplers.
pub fn sample_excluding(rng: &mut ChaCha8Rng, n: usize, avoid: usize) -> usize {
    debug_assert!(n > 1);
    loop {
        let j = rng.gen_range(0..n);
        if j != avoid {
            return j;
        }
    }
}

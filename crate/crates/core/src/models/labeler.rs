//! RNN Labeler: a GRU reads property ++ SEP ++ document and estimates per
//! document position whether the word is part of an answer (sigmoid).
//! Training targets come from distant supervision; instances where no
//! answer appears in the document are discarded for training. Inference
//! chunks consecutive above-threshold positions and returns the chunk with
//! the highest harmonic-mean score.

use std::any::Any;

use rand_chacha::ChaCha8Rng;
use tapegrad::{init, GruCell, NodeId, ParamId, ParamSet, Tape};

use crate::data::instance::Instance;
use crate::data::label::label_positions;
use crate::data::vocab::SEP;
use crate::eval::MethodClass;
use crate::models::{word_inputs, Architecture, Model, ModelConfig, ModelContext, Prediction};
use crate::{Error, Result};

pub const CHUNK_THRESHOLD: f64 = 0.5;

pub struct RnnLabelerModel {
    config: ModelConfig,
    ctx: ModelContext,
    params: ParamSet,
    embedding: ParamId,
    cell: GruCell,
    w_out: ParamId,
    b_out: ParamId,
}

impl RnnLabelerModel {
    pub fn new(config: &ModelConfig, ctx: ModelContext, rng: &mut ChaCha8Rng) -> Result<Self> {
        let mut params = ParamSet::new();
        let embedding = params.add(
            "labeler.embedding",
            init::normal_embedding(rng, ctx.vocab.size(), config.d_in, 0.1),
        )?;
        let cell = GruCell::new(&mut params, "labeler.gru", config.d_in, config.hidden, rng)?;
        let w_out = params.add(
            "labeler.w_out",
            init::xavier_uniform(rng, 1, config.hidden),
        )?;
        let b_out = params.add("labeler.b_out", init::zeros_vector(1))?;
        Ok(RnnLabelerModel {
            config: config.clone(),
            ctx,
            params,
            embedding,
            cell,
            w_out,
            b_out,
        })
    }

    /// Per-document-position logits (property positions conditioned on but
    /// not scored).
    fn doc_logits(&self, tape: &mut Tape, inst: &Instance) -> Result<(NodeId, Vec<String>)> {
        let (prop_ids, doc_ids, doc_tokens) = word_inputs(&self.ctx, &self.config, inst);
        if doc_ids.is_empty() {
            return Err(Error::Model("labeler requires a non-empty document".into()));
        }
        let mut ids = prop_ids;
        ids.push(SEP);
        let doc_start = ids.len();
        ids.extend(doc_ids);

        let table = tape.param(&self.params, self.embedding);
        let embedded = tape.embed(table, &ids)?;
        let inputs: Vec<NodeId> = (0..ids.len())
            .map(|t| tape.row(embedded, t))
            .collect::<tapegrad::Result<_>>()?;
        let h0 = self.cell.zero_state(tape);
        let states = self.cell.run(tape, &self.params, &inputs, h0)?;

        let w = tape.param(&self.params, self.w_out);
        let b = tape.param(&self.params, self.b_out);
        let logits: Vec<NodeId> = states[doc_start..]
            .iter()
            .map(|&h| {
                let wh = tape.matmul(w, h)?;
                tape.add(wh, b)
            })
            .collect::<tapegrad::Result<_>>()?;
        let logits = tape.concat(&logits)?;
        Ok((logits, doc_tokens))
    }

    /// Per-position probabilities that a document word is part of an answer.
    pub fn position_probabilities(&self, inst: &Instance) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let (logits, _) = self.doc_logits(&mut tape, inst)?;
        let probs = tape.sigmoid(logits);
        Ok(tape.value(probs).data().to_vec())
    }
}

/// Greedy chunk decoding: maximal runs of positions strictly above the
/// threshold; a chunk scores the harmonic mean of its probabilities; the
/// top-scoring chunk (leftmost on ties) becomes the answer.
pub fn decode_chunks(probs: &[f64], doc_tokens: &[String], threshold: f64) -> Prediction {
    let mut best: Option<(f64, usize, usize)> = None;
    let mut start = None;
    let flush = |best: &mut Option<(f64, usize, usize)>, s: usize, e: usize, probs: &[f64]| {
        let n = (e - s) as f64;
        let denom: f64 = probs[s..e].iter().map(|p| 1.0 / p).sum();
        let score = n / denom;
        if best.as_ref().map_or(true, |(b, _, _)| score > *b) {
            *best = Some((score, s, e));
        }
    };
    for (i, &p) in probs.iter().enumerate() {
        if p > threshold {
            if start.is_none() {
                start = Some(i);
            }
        } else if let Some(s) = start.take() {
            flush(&mut best, s, i, probs);
        }
    }
    if let Some(s) = start {
        flush(&mut best, s, probs.len(), probs);
    }
    match best {
        Some((score, s, e)) => Prediction {
            answer: Some(doc_tokens[s..e].join(" ")),
            confidence: score,
        },
        None => Prediction::none(),
    }
}

impl Model for RnnLabelerModel {
    fn arch(&self) -> Architecture {
        Architecture::RnnLabeler
    }

    fn config(&self) -> &ModelConfig {
        &self.config
    }

    fn context(&self) -> &ModelContext {
        &self.ctx
    }

    fn params(&self) -> &ParamSet {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    fn trainable_on(&self, inst: &Instance) -> bool {
        let (_, _, doc_tokens) = word_inputs(&self.ctx, &self.config, inst);
        !doc_tokens.is_empty() && label_positions(&doc_tokens, &inst.answers).any_answer
    }

    fn instance_loss(
        &self,
        tape: &mut Tape,
        inst: &Instance,
        _rng: &mut ChaCha8Rng,
    ) -> Result<NodeId> {
        let (logits, doc_tokens) = self.doc_logits(tape, inst)?;
        let labels = label_positions(&doc_tokens, &inst.answers);
        let targets: Vec<f64> = labels.labels.iter().map(|&l| l as f64).collect();
        Ok(tape.bce_with_logits(logits, &targets)?)
    }

    fn predict(&self, inst: &Instance, _rng: &mut ChaCha8Rng) -> Result<Prediction> {
        let (_, _, doc_tokens) = word_inputs(&self.ctx, &self.config, inst);
        if doc_tokens.is_empty() {
            return Ok(Prediction::none());
        }
        let probs = self.position_probabilities(inst)?;
        Ok(decode_chunks(&probs, &doc_tokens, CHUNK_THRESHOLD))
    }

    fn method_class(&self) -> MethodClass {
        MethodClass::Extraction
    }

    fn as_any(&self) -> &dyn Any {
        self
    }

    fn as_any_mut(&mut self) -> &mut dyn Any {
        self
    }
}

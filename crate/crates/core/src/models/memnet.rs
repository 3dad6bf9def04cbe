//! End-to-end memory network, single hop by default:
//!   I(x, W) = Σ_j ℓ_j ⊙ W·x_j          (position-encoded input)
//!   u   = I(p, U)
//!   m_i = I(x_i, M),  c_i = I(x_i, C)
//!   p   = softmax(uᵀ m_i)
//!   y   = u + Σ_i p_i c_i
//! with position-encoding weights ℓ_kj = (1 − j/J) − (k/d)·(1 − 2j/J) for
//! word j of J and dimension k of d (both 1-based). The training loss adds
//! λ·Σ_i p_i log p_i over the attention distribution.

use std::any::Any;

use rand_chacha::ChaCha8Rng;
use tapegrad::{init, NodeId, ParamId, ParamSet, Tape, Tensor};

use crate::data::instance::Instance;
use crate::data::tokenize::tokenize;
use crate::data::truncate;
use crate::eval::MethodClass;
use crate::models::classify::{argmax_prediction, AnswerTable};
use crate::models::{Architecture, Model, ModelConfig, ModelContext, Prediction};
use crate::{Error, Result};

pub struct MemoryNetworkModel {
    config: ModelConfig,
    ctx: ModelContext,
    params: ParamSet,
    emb_u: ParamId,
    emb_m: ParamId,
    emb_c: ParamId,
    head: AnswerTable,
}

/// Position-encoding weight matrix for a sentence of `len` words embedded
/// in `dim` dimensions.
pub fn position_encoding(len: usize, dim: usize) -> Tensor {
    let mut data = Vec::with_capacity(len * dim);
    let j_total = len as f64;
    let d = dim as f64;
    for j in 1..=len {
        for k in 1..=dim {
            let jj = j as f64;
            let kk = k as f64;
            data.push((1.0 - jj / j_total) - (kk / d) * (1.0 - 2.0 * jj / j_total));
        }
    }
    Tensor::matrix(len, dim, data).expect("consistent shape")
}

/// Split document tokens into sentences at sentence-final punctuation,
/// keeping the punctuation token, capped at `max_sentences`.
pub fn split_sentences(doc_tokens: &[String], max_sentences: usize) -> Vec<Vec<String>> {
    let mut sentences = Vec::new();
    let mut current = Vec::new();
    for tok in doc_tokens {
        current.push(tok.clone());
        if tok == "." || tok == "!" || tok == "?" {
            sentences.push(std::mem::take(&mut current));
            if sentences.len() == max_sentences {
                return sentences;
            }
        }
    }
    if !current.is_empty() {
        sentences.push(current);
    }
    sentences
}

impl MemoryNetworkModel {
    pub fn new(config: &ModelConfig, ctx: ModelContext, rng: &mut ChaCha8Rng) -> Result<Self> {
        let mut params = ParamSet::new();
        let v = ctx.vocab.size();
        let emb_u = params.add("mem.u", init::normal_embedding(rng, v, config.d_in, 0.1))?;
        let emb_m = params.add("mem.m", init::normal_embedding(rng, v, config.d_in, 0.1))?;
        let emb_c = params.add("mem.c", init::normal_embedding(rng, v, config.d_in, 0.1))?;
        let head = AnswerTable::new(&mut params, "mem.answers", &ctx.answers, config.d_in, rng)?;
        Ok(MemoryNetworkModel {
            config: config.clone(),
            ctx,
            params,
            emb_u,
            emb_m,
            emb_c,
            head,
        })
    }

    fn encode(&self, tape: &mut Tape, table: ParamId, ids: &[usize]) -> Result<NodeId> {
        let t = tape.param(&self.params, table);
        let rows = tape.embed(t, ids)?;
        let pe = tape.constant(position_encoding(ids.len(), self.config.d_in));
        let weighted = tape.mul(rows, pe)?;
        Ok(tape.sum_rows(weighted)?)
    }

    /// Joint representation plus the attention distribution node.
    pub fn forward(&self, tape: &mut Tape, inst: &Instance) -> Result<(NodeId, NodeId)> {
        let prop_tokens = tokenize(&inst.property);
        let doc_tokens: Vec<String> = {
            let toks = tokenize(&inst.document);
            truncate(&toks, self.config.doc_words).to_vec()
        };
        let sentences = split_sentences(&doc_tokens, self.config.max_sentences);
        if sentences.is_empty() {
            return Err(Error::Model(
                "memory network rejects documents with zero sentences".into(),
            ));
        }
        let prop_ids = if prop_tokens.is_empty() {
            vec![crate::data::vocab::SEP]
        } else {
            self.ctx
                .vocab
                .encode(truncate(&prop_tokens, self.config.prop_words))
        };

        let mut u = self.encode(tape, self.emb_u, &prop_ids)?;
        let mut attention = None;
        for _ in 0..self.config.hops.max(1) {
            let mut memories = Vec::with_capacity(sentences.len());
            let mut outputs = Vec::with_capacity(sentences.len());
            for sent in &sentences {
                let ids = self.ctx.vocab.encode(sent);
                memories.push(self.encode(tape, self.emb_m, &ids)?);
                outputs.push(self.encode(tape, self.emb_c, &ids)?);
            }
            let scores: Vec<NodeId> = memories
                .iter()
                .map(|&m| tape.dot(u, m))
                .collect::<tapegrad::Result<_>>()?;
            let logits = tape.concat(&scores)?;
            let p = tape.softmax(logits)?;
            let c_mat = tape.stack_rows(&outputs)?;
            let o = tape.matmul(p, c_mat)?;
            u = tape.add(u, o)?;
            attention = Some(p);
        }
        Ok((u, attention.expect("at least one hop")))
    }

    pub fn attention_weights(&self, inst: &Instance) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let (_, p) = self.forward(&mut tape, inst)?;
        Ok(tape.value(p).data().to_vec())
    }
}

impl Model for MemoryNetworkModel {
    fn arch(&self) -> Architecture {
        Architecture::MemoryNetwork
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
        self.ctx.answers.id_of(inst.first_answer()).is_some()
            && !tokenize(&inst.document).is_empty()
    }

    fn instance_loss(
        &self,
        tape: &mut Tape,
        inst: &Instance,
        _rng: &mut ChaCha8Rng,
    ) -> Result<NodeId> {
        let target = self
            .ctx
            .answers
            .id_of(inst.first_answer())
            .ok_or_else(|| crate::Error::Model("target answer outside table".into()))?;
        let (y, p) = self.forward(tape, inst)?;
        let ce = self.head.loss(tape, &self.params, y, target)?;
        if self.config.entropy_reg != 0.0 {
            let reg = tape.neg_entropy(p)?;
            let scaled = tape.scale(reg, self.config.entropy_reg);
            Ok(tape.add(ce, scaled)?)
        } else {
            Ok(ce)
        }
    }

    fn predict(&self, inst: &Instance, _rng: &mut ChaCha8Rng) -> Result<Prediction> {
        let mut tape = Tape::new();
        let (y, _) = self.forward(&mut tape, inst)?;
        let probs = self.head.distribution(&mut tape, &self.params, y)?;
        Ok(argmax_prediction(tape.value(probs).data(), &self.ctx.answers))
    }

    fn method_class(&self) -> MethodClass {
        MethodClass::Classifier {
            n_ans: self.ctx.answers.len(),
        }
    }

    fn as_any(&self) -> &dyn Any {
        self
    }

    fn as_any_mut(&mut self) -> &mut dyn Any {
        self
    }
}

//! Attentive Reader: a property LSTM produces u, a document LSTM produces
//! z_t per token, then
//!   m_t = tanh(W1·concat(z_t, u))
//!   α_t ∝ exp(v·m_t)
//!   r   = Σ_t α̂_t·z_t
//!   y   = tanh(W2·concat(r, u)).
//! The document LSTM is unidirectional by default with a bidirectional
//! flag; attention weights are exposed for inspection.

use std::any::Any;

use rand_chacha::ChaCha8Rng;
use tapegrad::{init, LstmCell, NodeId, ParamId, ParamSet, Tape, Tensor};

use crate::data::instance::Instance;
use crate::eval::MethodClass;
use crate::models::classify::{argmax_prediction, AnswerTable};
use crate::models::{word_inputs, Architecture, Model, ModelConfig, ModelContext, Prediction};
use crate::{Error, Result};

pub struct AttentiveReaderModel {
    config: ModelConfig,
    ctx: ModelContext,
    params: ParamSet,
    embedding: ParamId,
    prop_cell: LstmCell,
    doc_cell: LstmCell,
    doc_cell_rev: Option<LstmCell>,
    w1: ParamId,
    v: ParamId,
    w2: ParamId,
    head: AnswerTable,
}

pub struct AttentiveForward {
    pub y: NodeId,
    pub attention: Vec<f64>,
}

impl AttentiveReaderModel {
    pub fn new(config: &ModelConfig, ctx: ModelContext, rng: &mut ChaCha8Rng) -> Result<Self> {
        let mut params = ParamSet::new();
        let embedding = params.add(
            "att.embedding",
            init::normal_embedding(rng, ctx.vocab.size(), config.d_in, 0.1),
        )?;
        let prop_cell = LstmCell::new(&mut params, "att.prop_lstm", config.d_in, config.hidden, rng)?;
        let doc_cell = LstmCell::new(&mut params, "att.doc_lstm", config.d_in, config.hidden, rng)?;
        let doc_cell_rev = if config.bidirectional {
            Some(LstmCell::new(
                &mut params,
                "att.doc_lstm_rev",
                config.d_in,
                config.hidden,
                rng,
            )?)
        } else {
            None
        };
        let z_dim = if config.bidirectional {
            2 * config.hidden
        } else {
            config.hidden
        };
        let w1 = params.add(
            "att.w1",
            init::xavier_uniform(rng, config.d_out, z_dim + config.hidden),
        )?;
        let v = {
            let t = init::xavier_uniform(rng, 1, config.d_out);
            params.add("att.v", Tensor::vector(t.data().to_vec()))?
        };
        let w2 = params.add(
            "att.w2",
            init::xavier_uniform(rng, config.d_out, z_dim + config.hidden),
        )?;
        let head = AnswerTable::new(&mut params, "att.answers", &ctx.answers, config.d_out, rng)?;
        Ok(AttentiveReaderModel {
            config: config.clone(),
            ctx,
            params,
            embedding,
            prop_cell,
            doc_cell,
            doc_cell_rev,
            w1,
            v,
            w2,
            head,
        })
    }

    fn embed_rows(&self, tape: &mut Tape, ids: &[usize]) -> Result<Vec<NodeId>> {
        let table = tape.param(&self.params, self.embedding);
        let embedded = tape.embed(table, ids)?;
        Ok((0..ids.len())
            .map(|t| tape.row(embedded, t))
            .collect::<tapegrad::Result<_>>()?)
    }

    pub fn forward(&self, tape: &mut Tape, inst: &Instance) -> Result<AttentiveForward> {
        let (prop_ids, doc_ids, _) = word_inputs(&self.ctx, &self.config, inst);
        if doc_ids.is_empty() {
            return Err(Error::Model(
                "attentive reader rejects zero-length documents (attention undefined)".into(),
            ));
        }
        // property encoding u: final state of the property LSTM
        let prop_inputs = if prop_ids.is_empty() {
            self.embed_rows(tape, &[crate::data::vocab::SEP])?
        } else {
            self.embed_rows(tape, &prop_ids)?
        };
        let s0 = self.prop_cell.zero_state(tape);
        let prop_states = self.prop_cell.run(tape, &self.params, &prop_inputs, s0)?;
        let u = prop_states.last().expect("non-empty").0;

        // per-token document representations z_t
        let doc_inputs = self.embed_rows(tape, &doc_ids)?;
        let d0 = self.doc_cell.zero_state(tape);
        let fwd_states = self.doc_cell.run(tape, &self.params, &doc_inputs, d0)?;
        let zs: Vec<NodeId> = match &self.doc_cell_rev {
            None => fwd_states.iter().map(|(h, _)| *h).collect(),
            Some(rev) => {
                let r0 = rev.zero_state(tape);
                let rev_inputs: Vec<NodeId> = doc_inputs.iter().rev().copied().collect();
                let mut rev_states = rev.run(tape, &self.params, &rev_inputs, r0)?;
                rev_states.reverse();
                fwd_states
                    .iter()
                    .zip(rev_states.iter())
                    .map(|((hf, _), (hr, _))| tape.concat(&[*hf, *hr]))
                    .collect::<tapegrad::Result<_>>()?
            }
        };

        let (y, attention) = attention_combine(
            tape,
            &self.params,
            &zs,
            u,
            self.w1,
            self.v,
            self.w2,
        )?;
        Ok(AttentiveForward { y, attention })
    }

    /// Attention weights over document positions for inspection.
    pub fn attention_weights(&self, inst: &Instance) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        Ok(self.forward(&mut tape, inst)?.attention)
    }
}

/// The four-equation attention block, separated so it can be driven with
/// hand-set inputs.
pub fn attention_combine(
    tape: &mut Tape,
    params: &ParamSet,
    zs: &[NodeId],
    u: NodeId,
    w1: ParamId,
    v: ParamId,
    w2: ParamId,
) -> Result<(NodeId, Vec<f64>)> {
    let w1n = tape.param(params, w1);
    let vn = tape.param(params, v);
    let w2n = tape.param(params, w2);
    let scores: Vec<NodeId> = zs
        .iter()
        .map(|&z| {
            let zu = tape.concat(&[z, u])?;
            let pre = tape.matmul(w1n, zu)?;
            let m = tape.tanh(pre);
            tape.dot(vn, m)
        })
        .collect::<tapegrad::Result<_>>()?;
    let logits = tape.concat(&scores)?;
    let alpha = tape.softmax(logits)?;
    let attention = tape.value(alpha).data().to_vec();
    let z_mat = tape.stack_rows(zs)?;
    let r = tape.matmul(alpha, z_mat)?;
    let ru = tape.concat(&[r, u])?;
    let pre = tape.matmul(w2n, ru)?;
    let y = tape.tanh(pre);
    Ok((y, attention))
}

impl Model for AttentiveReaderModel {
    fn arch(&self) -> Architecture {
        Architecture::AttentiveReader
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
            && !crate::data::tokenize(&inst.document).is_empty()
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
        let fwd = self.forward(tape, inst)?;
        self.head.loss(tape, &self.params, fwd.y, target)
    }

    fn predict(&self, inst: &Instance, _rng: &mut ChaCha8Rng) -> Result<Prediction> {
        let mut tape = Tape::new();
        let fwd = self.forward(&mut tape, inst)?;
        let probs = self.head.distribution(&mut tape, &self.params, fwd.y)?;
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

//! Averaged embeddings: the document and property embeddings are averaged
//! separately and concatenated into a joint representation of size 2·d_in.

use std::any::Any;

use rand_chacha::ChaCha8Rng;
use tapegrad::{init, NodeId, ParamId, ParamSet, Tape, Tensor};

use crate::data::instance::Instance;
use crate::eval::MethodClass;
use crate::models::classify::{argmax_prediction, AnswerTable};
use crate::models::{word_inputs, Architecture, Model, ModelConfig, ModelContext, Prediction};
use crate::Result;

pub struct AveragedEmbeddingsModel {
    config: ModelConfig,
    ctx: ModelContext,
    params: ParamSet,
    embedding: ParamId,
    head: AnswerTable,
}

impl AveragedEmbeddingsModel {
    pub fn new(config: &ModelConfig, ctx: ModelContext, rng: &mut ChaCha8Rng) -> Result<Self> {
        let mut params = ParamSet::new();
        let embedding = params.add(
            "avg.embedding",
            init::normal_embedding(rng, ctx.vocab.size(), config.d_in, 0.1),
        )?;
        let head = AnswerTable::new(&mut params, "avg.answers", &ctx.answers, 2 * config.d_in, rng)?;
        Ok(AveragedEmbeddingsModel {
            config: config.clone(),
            ctx,
            params,
            embedding,
            head,
        })
    }

    fn mean_or_zero(&self, tape: &mut Tape, table: NodeId, ids: &[usize]) -> Result<NodeId> {
        if ids.is_empty() {
            return Ok(tape.constant(Tensor::vector(vec![0.0; self.config.d_in])));
        }
        let rows = tape.embed(table, ids)?;
        Ok(tape.mean_rows(rows)?)
    }

    /// concat(mean document embedding, mean property embedding)
    pub fn joint(&self, tape: &mut Tape, inst: &Instance) -> Result<NodeId> {
        let (prop_ids, doc_ids, _) = word_inputs(&self.ctx, &self.config, inst);
        let table = tape.param(&self.params, self.embedding);
        let doc_mean = self.mean_or_zero(tape, table, &doc_ids)?;
        let prop_mean = self.mean_or_zero(tape, table, &prop_ids)?;
        Ok(tape.concat(&[doc_mean, prop_mean])?)
    }
}

impl Model for AveragedEmbeddingsModel {
    fn arch(&self) -> Architecture {
        Architecture::AveragedEmbeddings
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
        let y = self.joint(tape, inst)?;
        self.head.loss(tape, &self.params, y, target)
    }

    fn predict(&self, inst: &Instance, _rng: &mut ChaCha8Rng) -> Result<Prediction> {
        let mut tape = Tape::new();
        let y = self.joint(&mut tape, inst)?;
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

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn setup() -> (AveragedEmbeddingsModel, Vec<Instance>) {
        let corpus = vec![
            Instance::new("alpha beta", "kind", vec!["one".into()]).unwrap(),
            Instance::new("beta alpha gamma", "kind", vec!["two".into()]).unwrap(),
        ];
        let config = ModelConfig::toy(Architecture::AveragedEmbeddings);
        let ctx = ModelContext::build(&corpus, &config).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let model = AveragedEmbeddingsModel::new(&config, ctx, &mut rng).unwrap();
        (model, corpus)
    }

    #[test]
    fn single_token_document_half_equals_embedding_row() {
        let (model, _) = setup();
        let inst = Instance::new("alpha", "kind", vec!["one".into()]).unwrap();
        let mut tape = Tape::new();
        let y = model.joint(&mut tape, &inst).unwrap();
        let yv = tape.value(y).data().to_vec();
        let id = model.ctx.vocab.id_of("alpha");
        let table = model.params.value(model.embedding);
        let d = model.config.d_in;
        let row = &table.data()[id * d..(id + 1) * d];
        assert_eq!(&yv[..d], row);
    }

    #[test]
    fn document_permutation_invariance() {
        let (model, _) = setup();
        let a = Instance::new("alpha beta gamma", "kind", vec!["one".into()]).unwrap();
        let b = Instance::new("gamma alpha beta", "kind", vec!["one".into()]).unwrap();
        let mut tape = Tape::new();
        let ya = model.joint(&mut tape, &a).unwrap();
        let yb = model.joint(&mut tape, &b).unwrap();
        for (x, y) in tape.value(ya).data().iter().zip(tape.value(yb).data()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn two_hot_embeddings_average_to_half() {
        let (mut model, _) = setup();
        let d = model.config.d_in;
        let ia = model.ctx.vocab.id_of("alpha");
        let ib = model.ctx.vocab.id_of("beta");
        let emb = model.params.id_of("avg.embedding").unwrap();
        let t = model.params.get_mut(emb);
        for v in t.value.data_mut().iter_mut() {
            *v = 0.0;
        }
        t.value.data_mut()[ia * d] = 1.0; // alpha -> e_0
        t.value.data_mut()[ib * d + 1] = 1.0; // beta -> e_1
        let inst = Instance::new("alpha beta", "kind", vec!["one".into()]).unwrap();
        let mut tape = Tape::new();
        let y = model.joint(&mut tape, &inst).unwrap();
        let yv = tape.value(y).data();
        assert!((yv[0] - 0.5).abs() < 1e-12);
        assert!((yv[1] - 0.5).abs() < 1e-12);
    }
}

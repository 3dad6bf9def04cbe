//! Sparse bag-of-words baseline: multinomial logistic regression over the
//! concatenation of a property BoW vector and a document BoW vector
//! (feature space 2V, weights looked up per occurring token so repeated
//! tokens contribute their counts).

use std::any::Any;

use rand_chacha::ChaCha8Rng;
use tapegrad::{init, NodeId, ParamId, ParamSet, Tape, Tensor};

use crate::data::instance::Instance;
use crate::eval::MethodClass;
use crate::models::classify::argmax_prediction;
use crate::models::{word_inputs, Architecture, Model, ModelConfig, ModelContext, Prediction};
use crate::Result;

pub struct SparseBowModel {
    config: ModelConfig,
    ctx: ModelContext,
    params: ParamSet,
    weights: ParamId,
    bias: ParamId,
}

impl SparseBowModel {
    pub fn new(config: &ModelConfig, ctx: ModelContext, _rng: &mut ChaCha8Rng) -> Result<Self> {
        let mut params = ParamSet::new();
        let v = ctx.vocab.size();
        let n_ans = ctx.answers.len();
        // zero init keeps the untrained model exactly uniform
        let weights = params.add("bow.weights", Tensor::zeros(vec![2 * v, n_ans]))?;
        let bias = params.add("bow.bias", init::zeros_vector(n_ans))?;
        Ok(SparseBowModel {
            config: config.clone(),
            ctx,
            params,
            weights,
            bias,
        })
    }

    fn feature_ids(&self, inst: &Instance) -> Vec<usize> {
        let v = self.ctx.vocab.size();
        let (prop_ids, doc_ids, _) = word_inputs(&self.ctx, &self.config, inst);
        prop_ids
            .into_iter()
            .chain(doc_ids.into_iter().map(|id| v + id))
            .collect()
    }

    fn logits(&self, tape: &mut Tape, inst: &Instance) -> Result<NodeId> {
        let w = tape.param(&self.params, self.weights);
        let b = tape.param(&self.params, self.bias);
        let fids = self.feature_ids(inst);
        let node = if fids.is_empty() {
            b
        } else {
            let rows = tape.embed(w, &fids)?;
            let summed = tape.sum_rows(rows)?;
            tape.add(summed, b)?
        };
        Ok(node)
    }
}

impl Model for SparseBowModel {
    fn arch(&self) -> Architecture {
        Architecture::SparseBow
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
        let logits = self.logits(tape, inst)?;
        Ok(tape.cross_entropy(logits, target)?)
    }

    fn predict(&self, inst: &Instance, _rng: &mut ChaCha8Rng) -> Result<Prediction> {
        let mut tape = Tape::new();
        let logits = self.logits(&mut tape, inst)?;
        let probs = tape.softmax(logits)?;
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

    fn tiny_corpus() -> Vec<Instance> {
        vec![
            Instance::new("red apples grow here", "color", vec!["red".into()]).unwrap(),
            Instance::new("blue sky above", "color", vec!["blue".into()]).unwrap(),
        ]
    }

    #[test]
    fn zero_weights_give_uniform_distribution() {
        let corpus = tiny_corpus();
        let config = ModelConfig::toy(Architecture::SparseBow);
        let ctx = ModelContext::build(&corpus, &config).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let model = SparseBowModel::new(&config, ctx, &mut rng).unwrap();
        let pred = model.predict(&corpus[0], &mut rng).unwrap();
        let n = model.ctx.answers.len() as f64;
        assert!((pred.confidence - 1.0 / n).abs() < 1e-12);
    }

    #[test]
    fn document_permutation_leaves_output_unchanged() {
        let corpus = tiny_corpus();
        let config = ModelConfig::toy(Architecture::SparseBow);
        let ctx = ModelContext::build(&corpus, &config).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut model = SparseBowModel::new(&config, ctx, &mut rng).unwrap();
        // non-trivial weights so the check is meaningful
        let w = model.params.id_of("bow.weights").unwrap();
        for (i, v) in model.params.get_mut(w).value.data_mut().iter_mut().enumerate() {
            *v = ((i % 13) as f64 - 6.0) * 0.05;
        }
        let a = Instance::new("red apples grow here", "color", vec!["red".into()]).unwrap();
        let b = Instance::new("here grow apples red", "color", vec!["red".into()]).unwrap();
        let pa = model.predict(&a, &mut rng).unwrap();
        let pb = model.predict(&b, &mut rng).unwrap();
        assert_eq!(pa, pb);
    }

    #[test]
    fn hand_set_weights_match_scalar_computation() {
        // two answers, weight only on the "red" document feature
        let corpus = tiny_corpus();
        let config = ModelConfig::toy(Architecture::SparseBow);
        let ctx = ModelContext::build(&corpus, &config).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut model = SparseBowModel::new(&config, ctx, &mut rng).unwrap();
        let v = model.ctx.vocab.size();
        let red_doc_feature = v + model.ctx.vocab.id_of("red");
        let n_ans = model.ctx.answers.len();
        let red_ans = model.ctx.answers.id_of("red").unwrap();
        let w = model.params.id_of("bow.weights").unwrap();
        model.params.get_mut(w).value.data_mut()[red_doc_feature * n_ans + red_ans] = 2.0;

        let inst = Instance::new("red red", "color", vec!["red".into()]).unwrap();
        let pred = model.predict(&inst, &mut rng).unwrap();
        // logits: red answer gets 2+2=4 (two occurrences), others 0
        let z: f64 = (n_ans - 1) as f64 + 4.0f64.exp();
        assert_eq!(pred.answer.as_deref(), Some("red"));
        assert!((pred.confidence - 4.0f64.exp() / z).abs() < 1e-9);
    }
}

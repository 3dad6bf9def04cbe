//! LSTM Reader: one LSTM reads the property, a separator, then the document
//! word-by-word; the final hidden state is the joint representation.

use std::any::Any;

use rand_chacha::ChaCha8Rng;
use tapegrad::{init, LstmCell, NodeId, ParamId, ParamSet, Tape};

use crate::data::instance::Instance;
use crate::data::vocab::SEP;
use crate::eval::MethodClass;
use crate::models::classify::{argmax_prediction, AnswerTable};
use crate::models::{word_inputs, Architecture, Model, ModelConfig, ModelContext, Prediction};
use crate::Result;

pub struct LstmReaderModel {
    config: ModelConfig,
    ctx: ModelContext,
    params: ParamSet,
    embedding: ParamId,
    cell: LstmCell,
    head: AnswerTable,
}

impl LstmReaderModel {
    pub fn new(config: &ModelConfig, ctx: ModelContext, rng: &mut ChaCha8Rng) -> Result<Self> {
        let mut params = ParamSet::new();
        let embedding = params.add(
            "reader.embedding",
            init::normal_embedding(rng, ctx.vocab.size(), config.d_in, 0.1),
        )?;
        let cell = LstmCell::new(&mut params, "reader.lstm", config.d_in, config.hidden, rng)?;
        let head = AnswerTable::new(&mut params, "reader.answers", &ctx.answers, config.hidden, rng)?;
        Ok(LstmReaderModel {
            config: config.clone(),
            ctx,
            params,
            embedding,
            cell,
            head,
        })
    }

    /// Final LSTM state over property ++ SEP ++ document.
    pub fn joint(&self, tape: &mut Tape, inst: &Instance) -> Result<NodeId> {
        let (prop_ids, doc_ids, _) = word_inputs(&self.ctx, &self.config, inst);
        let mut ids = prop_ids;
        ids.push(SEP);
        ids.extend(doc_ids);
        self.read(tape, &ids)
    }

    pub(crate) fn read(&self, tape: &mut Tape, ids: &[usize]) -> Result<NodeId> {
        let table = tape.param(&self.params, self.embedding);
        let embedded = tape.embed(table, ids)?;
        let inputs: Vec<NodeId> = (0..ids.len())
            .map(|t| tape.row(embedded, t))
            .collect::<tapegrad::Result<_>>()?;
        let state = self.cell.zero_state(tape);
        let states = self.cell.run(tape, &self.params, &inputs, state)?;
        Ok(states.last().expect("sequence non-empty").0)
    }
}

impl Model for LstmReaderModel {
    fn arch(&self) -> Architecture {
        Architecture::LstmReader
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

    fn setup() -> LstmReaderModel {
        let corpus = vec![
            Instance::new("alpha beta gamma", "kind", vec!["one".into()]).unwrap(),
            Instance::new("delta beta", "kind", vec!["two".into()]).unwrap(),
        ];
        let config = ModelConfig::toy(Architecture::LstmReader);
        let ctx = ModelContext::build(&corpus, &config).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        LstmReaderModel::new(&config, ctx, &mut rng).unwrap()
    }

    #[test]
    fn empty_document_reads_property_alone() {
        let model = setup();
        let inst = Instance::new("", "kind", vec!["one".into()]).unwrap();
        let mut tape = Tape::new();
        let y = model.joint(&mut tape, &inst).unwrap();
        // manual read of property ++ SEP
        let mut ids = model.ctx.vocab.encode(&["kind".to_string()]);
        ids.push(SEP);
        let manual = model.read(&mut tape, &ids).unwrap();
        assert_eq!(tape.value(y).data(), tape.value(manual).data());
    }

    #[test]
    fn truncation_applies_before_reading() {
        let model = setup();
        let long_doc = vec!["alpha"; 40].join(" ");
        let short_doc = vec!["alpha"; model.config.doc_words].join(" ");
        let a = Instance::new(long_doc, "kind", vec!["one".into()]).unwrap();
        let b = Instance::new(short_doc, "kind", vec!["one".into()]).unwrap();
        let mut tape = Tape::new();
        let ya = model.joint(&mut tape, &a).unwrap();
        let yb = model.joint(&mut tape, &b).unwrap();
        assert_eq!(tape.value(ya).data(), tape.value(yb).data());
    }

    #[test]
    fn word_order_changes_the_encoding() {
        let model = setup();
        let a = Instance::new("alpha beta", "kind", vec!["one".into()]).unwrap();
        let b = Instance::new("beta alpha", "kind", vec!["one".into()]).unwrap();
        let mut tape = Tape::new();
        let ya = model.joint(&mut tape, &a).unwrap();
        let yb = model.joint(&mut tape, &b).unwrap();
        let diff: f64 = tape
            .value(ya)
            .data()
            .iter()
            .zip(tape.value(yb).data())
            .map(|(x, y)| (x - y).abs())
            .sum();
        assert!(diff > 1e-9, "order-sensitive encoder collapsed: {diff}");
    }
}

//! Word-level sequence to sequence: a GRU encoder reads property ++ SEP ++
//! document (the LSTM-Reader reading order), a GRU decoder emits answer
//! tokens until EOS. The embedding matrix is shared between encoder and
//! decoder; their state-to-state transition matrices are separate. Greedy
//! decoding, teacher forcing with per-step mean cross-entropy.
//!
//! In placeholder mode, OOV document words are substituted by placeholder
//! ids before encoding (and in the target sequence), and decoded
//! placeholders are resolved back to surface words through the instance's
//! placeholder map.

use std::any::Any;
use std::collections::BTreeMap;

use rand_chacha::ChaCha8Rng;
use tapegrad::{init, GruCell, NodeId, ParamId, ParamSet, Tape};

use crate::data::instance::Instance;
use crate::data::placeholder::{apply_placeholders, resolve_placeholders};
use crate::data::tokenize::tokenize;
use crate::data::truncate;
use crate::data::vocab::{EOS, GO, PAD, SEP};
#[cfg(test)]
use crate::data::vocab::OOV;
use crate::eval::MethodClass;
use crate::models::classify::sequence_confidence;
use crate::models::{word_inputs, Architecture, Model, ModelConfig, ModelContext, Prediction};
use crate::Result;

pub struct Seq2SeqModel {
    config: ModelConfig,
    ctx: ModelContext,
    params: ParamSet,
    embedding: ParamId,
    encoder: GruCell,
    decoder: GruCell,
    w_out: ParamId,
    b_out: ParamId,
    placeholder_mode: bool,
}

struct Encoded {
    input_ids: Vec<usize>,
    target_ids: Vec<usize>,
    map: BTreeMap<usize, String>,
}

impl Seq2SeqModel {
    pub fn new(
        config: &ModelConfig,
        ctx: ModelContext,
        placeholder_mode: bool,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let mut params = ParamSet::new();
        let v = ctx.vocab.size();
        let embedding = params.add(
            "seq2seq.embedding",
            init::normal_embedding(rng, v, config.d_in, 0.1),
        )?;
        let encoder = GruCell::new(&mut params, "seq2seq.encoder", config.d_in, config.hidden, rng)?;
        let decoder = GruCell::new(&mut params, "seq2seq.decoder", config.d_in, config.hidden, rng)?;
        let w_out = params.add("seq2seq.w_out", init::xavier_uniform(rng, v, config.hidden))?;
        let b_out = params.add("seq2seq.b_out", init::zeros_vector(v))?;
        Ok(Seq2SeqModel {
            config: config.clone(),
            ctx,
            params,
            embedding,
            encoder,
            decoder,
            w_out,
            b_out,
            placeholder_mode,
        })
    }

    pub fn is_placeholder_mode(&self) -> bool {
        self.placeholder_mode
    }

    fn encode_instance(&self, inst: &Instance, rng: &mut ChaCha8Rng) -> Encoded {
        let answer_tokens = tokenize(inst.first_answer());
        let answer_tokens = truncate(&answer_tokens, self.config.answer_words).to_vec();
        if self.placeholder_mode {
            let prop_tokens = tokenize(&inst.property);
            let doc_tokens = tokenize(&inst.document);
            let doc_tokens = truncate(&doc_tokens, self.config.doc_words).to_vec();
            let enc = apply_placeholders(&doc_tokens, &answer_tokens, &self.ctx.vocab, rng);
            if enc.overflow > 0 {
                log::debug!(
                    "placeholder pool exhausted: {} OOV occurrences fell back to OOV",
                    enc.overflow
                );
            }
            let mut input_ids = self
                .ctx
                .vocab
                .encode(truncate(&prop_tokens, self.config.prop_words));
            input_ids.push(SEP);
            input_ids.extend(&enc.doc_ids);
            Encoded {
                input_ids,
                target_ids: enc.answer_ids,
                map: enc.map,
            }
        } else {
            let (prop_ids, doc_ids, _) = word_inputs(&self.ctx, &self.config, inst);
            let mut input_ids = prop_ids;
            input_ids.push(SEP);
            input_ids.extend(doc_ids);
            Encoded {
                input_ids,
                target_ids: self.ctx.vocab.encode(&answer_tokens),
                map: BTreeMap::new(),
            }
        }
    }

    fn embed_one(&self, tape: &mut Tape, id: usize) -> Result<NodeId> {
        let table = tape.param(&self.params, self.embedding);
        let e = tape.embed(table, &[id])?;
        Ok(tape.row(e, 0)?)
    }

    fn run_encoder(&self, tape: &mut Tape, input_ids: &[usize]) -> Result<NodeId> {
        let table = tape.param(&self.params, self.embedding);
        let embedded = tape.embed(table, input_ids)?;
        let inputs: Vec<NodeId> = (0..input_ids.len())
            .map(|t| tape.row(embedded, t))
            .collect::<tapegrad::Result<_>>()?;
        let h0 = self.encoder.zero_state(tape);
        let states = self.encoder.run(tape, &self.params, &inputs, h0)?;
        Ok(*states.last().expect("input non-empty"))
    }

    fn step_logits(&self, tape: &mut Tape, h: NodeId) -> Result<NodeId> {
        let w = tape.param(&self.params, self.w_out);
        let b = tape.param(&self.params, self.b_out);
        let wh = tape.matmul(w, h)?;
        Ok(tape.add(wh, b)?)
    }
}

impl Model for Seq2SeqModel {
    fn arch(&self) -> Architecture {
        if self.placeholder_mode {
            Architecture::PlaceholderSeq2Seq
        } else {
            Architecture::Seq2Seq
        }
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

    fn trainable_on(&self, _inst: &Instance) -> bool {
        true
    }

    fn instance_loss(
        &self,
        tape: &mut Tape,
        inst: &Instance,
        rng: &mut ChaCha8Rng,
    ) -> Result<NodeId> {
        let enc = self.encode_instance(inst, rng);
        let mut h = self.run_encoder(tape, &enc.input_ids)?;
        // teacher forcing: inputs GO ++ target, predict target ++ EOS
        let mut targets = enc.target_ids.clone();
        targets.push(EOS);
        let mut step_losses = Vec::with_capacity(targets.len());
        let mut prev = GO;
        for &target in &targets {
            let x = self.embed_one(tape, prev)?;
            h = self.decoder.step(tape, &self.params, x, h)?;
            let logits = self.step_logits(tape, h)?;
            step_losses.push(tape.cross_entropy(logits, target)?);
            prev = target;
        }
        let total = step_losses
            .into_iter()
            .reduce(|a, b| tape.add(a, b).expect("scalar add"))
            .expect("at least the EOS step");
        Ok(tape.scale(total, 1.0 / targets.len() as f64))
    }

    fn predict(&self, inst: &Instance, rng: &mut ChaCha8Rng) -> Result<Prediction> {
        let enc = self.encode_instance(inst, rng);
        let mut tape = Tape::new();
        let mut h = self.run_encoder(&mut tape, &enc.input_ids)?;
        let mut ids = Vec::new();
        let mut step_probs = Vec::new();
        let mut prev = GO;
        for _ in 0..self.config.answer_words + 1 {
            let x = self.embed_one(&mut tape, prev)?;
            h = self.decoder.step(&mut tape, &self.params, x, h)?;
            let logits = self.step_logits(&mut tape, h)?;
            let probs = tape.softmax(logits)?;
            let data = tape.value(probs).data();
            let (best, p) = data
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |(bi, bp), (i, &q)| {
                    if q > bp {
                        (i, q)
                    } else {
                        (bi, bp)
                    }
                });
            step_probs.push(p);
            if best == EOS {
                break;
            }
            ids.push(best);
            prev = best;
        }
        if ids.is_empty() {
            return Ok(Prediction {
                answer: Some(String::new()),
                confidence: sequence_confidence(&step_probs),
            });
        }
        let tokens = if self.placeholder_mode {
            resolve_placeholders(&ids, &self.ctx.vocab, &enc.map)
        } else {
            ids.iter()
                .filter(|&&id| id != PAD && id != GO && id != SEP)
                .map(|&id| self.ctx.vocab.decode(id).to_string())
                .collect()
        };
        Ok(Prediction {
            answer: Some(tokens.join(" ")),
            confidence: sequence_confidence(&step_probs),
        })
    }

    fn method_class(&self) -> MethodClass {
        MethodClass::SingleValueGeneration
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

    fn setup(placeholder: bool) -> (Seq2SeqModel, Vec<Instance>) {
        let corpus = vec![
            Instance::new("the name is Kelrav .", "owner", vec!["Kelrav".into()]).unwrap(),
            Instance::new("the name is Tomar .", "owner", vec!["Tomar".into()]).unwrap(),
            Instance::new("alpha beta gamma", "kind", vec!["alpha".into()]).unwrap(),
        ];
        let config = ModelConfig::toy(if placeholder {
            Architecture::PlaceholderSeq2Seq
        } else {
            Architecture::Seq2Seq
        });
        let ctx = ModelContext::build(&corpus, &config).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        (
            Seq2SeqModel::new(&config, ctx, placeholder, &mut rng).unwrap(),
            corpus,
        )
    }

    #[test]
    fn shared_embedding_is_one_parameter() {
        let (model, _) = setup(false);
        // encoder and decoder lookups go through the same parameter id, so
        // the same token id always embeds identically
        assert_eq!(model.params.id_of("seq2seq.embedding"), Some(model.embedding));
        let mut tape = Tape::new();
        let a = model.embed_one(&mut tape, 7).unwrap();
        let b = model.embed_one(&mut tape, 7).unwrap();
        assert_eq!(tape.value(a).data(), tape.value(b).data());
    }

    #[test]
    fn forced_eos_first_gives_empty_answer() {
        let (mut model, corpus) = setup(false);
        // bias the output layer overwhelmingly toward EOS
        let b = model.params.id_of("seq2seq.b_out").unwrap();
        model.params.get_mut(b).value.data_mut()[EOS] = 1e3;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = model.predict(&corpus[0], &mut rng).unwrap();
        assert_eq!(p.answer.as_deref(), Some(""));
    }

    #[test]
    fn loss_is_finite_and_positive() {
        for placeholder in [false, true] {
            let (model, corpus) = setup(placeholder);
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            let mut tape = Tape::new();
            let loss = model.instance_loss(&mut tape, &corpus[0], &mut rng).unwrap();
            let v = tape.value(loss).item();
            assert!(v.is_finite() && v > 0.0, "{v}");
        }
    }

    #[test]
    fn placeholder_targets_reference_document_placeholders() {
        let (model, _) = setup(true);
        // OOV name in both document and answer must share a placeholder id
        let inst = Instance::new("the name is Zyxwv .", "owner", vec!["Zyxwv".into()]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let enc = model.encode_instance(&inst, &mut rng);
        assert_eq!(enc.target_ids.len(), 1);
        let ph = enc.target_ids[0];
        assert!(model.ctx.vocab.placeholder_index(ph).is_some());
        assert!(enc.input_ids.contains(&ph));
        assert_eq!(enc.map[&ph], "Zyxwv");
    }

    #[test]
    fn basic_mode_maps_oov_answers_to_oov() {
        let (model, _) = setup(false);
        let inst = Instance::new("the name is Zyxwv .", "owner", vec!["Zyxwv".into()]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let enc = model.encode_instance(&inst, &mut rng);
        assert_eq!(enc.target_ids, vec![OOV]);
    }

    #[test]
    fn placeholder_resolution_round_trip() {
        let (model, _) = setup(true);
        let inst = Instance::new("the name is Zyxwv .", "owner", vec!["Zyxwv".into()]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let enc = model.encode_instance(&inst, &mut rng);
        // resolving then re-encoding is the identity on placeholder positions
        let resolved = resolve_placeholders(&enc.input_ids, &model.ctx.vocab, &enc.map);
        for (i, &id) in enc.input_ids.iter().enumerate() {
            if model.ctx.vocab.placeholder_index(id).is_some() {
                assert_eq!(resolved[i], enc.map[&id]);
            }
        }
    }
}

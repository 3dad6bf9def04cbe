//! Character language model pretraining: next-character prediction over
//! the training-set input sequences (property then document characters; no
//! new data). The trained recurrent weights initialize the first layer of
//! the character encoder and the decoder; everything else stays freshly
//! initialized.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tapegrad::{init, GruCell, NodeId, ParamId, ParamSet, Tape};

use crate::data::instance::Instance;
use crate::data::truncate;
use crate::data::vocab::{CharVocab, CHAR_GO};
use crate::models::char_seq2seq::CharSeq2SeqModel;
use crate::models::{Model, ModelConfig};
use crate::train::{clip_gradients, Adam};
use crate::{Error, Result};

pub struct CharLm {
    pub params: ParamSet,
    pub cell: GruCell,
    pub embedding: ParamId,
    pub w_out: ParamId,
    pub b_out: ParamId,
    chars: CharVocab,
    config: ModelConfig,
}

impl CharLm {
    pub fn new(config: &ModelConfig, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let chars = CharVocab::standard();
        let mut params = ParamSet::new();
        let c = chars.size();
        let embedding = params.add(
            "lm.embedding",
            init::normal_embedding(&mut rng, c, config.char_dim, 0.1),
        )?;
        let cell = GruCell::new(&mut params, "lm.gru", config.char_dim, config.hidden, &mut rng)?;
        let w_out = params.add("lm.w_out", init::xavier_uniform(&mut rng, c, config.hidden))?;
        let b_out = params.add("lm.b_out", init::zeros_vector(c))?;
        Ok(CharLm {
            params,
            cell,
            embedding,
            w_out,
            b_out,
            chars,
            config: config.clone(),
        })
    }

    /// The model-input character stream for one instance: property then
    /// document, both truncated as the seq2seq encoder would see them.
    fn input_chars(&self, inst: &Instance) -> Vec<usize> {
        let mut ids: Vec<usize> = {
            let p = self.chars.encode(&inst.property);
            truncate(&p, self.config.prop_chars).to_vec()
        };
        let d = self.chars.encode(&inst.document);
        ids.extend(truncate(&d, self.config.doc_chars).iter());
        ids
    }

    /// Mean next-character cross-entropy over one instance's stream.
    pub fn sequence_loss(&self, tape: &mut Tape, inst: &Instance) -> Result<NodeId> {
        let chars = self.input_chars(inst);
        if chars.is_empty() {
            return Err(Error::Model("empty character stream".into()));
        }
        let table = tape.param(&self.params, self.embedding);
        let w = tape.param(&self.params, self.w_out);
        let b = tape.param(&self.params, self.b_out);
        let mut h = self.cell.zero_state(tape);
        let mut prev = CHAR_GO;
        let mut losses = Vec::with_capacity(chars.len());
        for &target in &chars {
            let e = tape.embed(table, &[prev])?;
            let x = tape.row(e, 0)?;
            h = self.cell.step(tape, &self.params, x, h)?;
            let wh = tape.matmul(w, h)?;
            let logits = tape.add(wh, b)?;
            losses.push(tape.cross_entropy(logits, target)?);
            prev = target;
        }
        let total = losses
            .into_iter()
            .reduce(|a, b| tape.add(a, b).expect("scalar add"))
            .expect("non-empty");
        Ok(tape.scale(total, 1.0 / chars.len() as f64))
    }

    /// Mean per-character cross-entropy (nats) over a corpus; exp of this
    /// is the perplexity.
    pub fn mean_loss(&self, corpus: &[Instance]) -> f64 {
        let mut total = 0.0;
        let mut n = 0usize;
        for inst in corpus {
            let mut tape = Tape::new();
            if let Ok(loss) = self.sequence_loss(&mut tape, inst) {
                total += tape.value(loss).item();
                n += 1;
            }
        }
        if n == 0 {
            f64::NAN
        } else {
            total / n as f64
        }
    }
}

/// Train a character LM on the corpus's input sequences.
pub fn pretrain_char_lm(
    corpus: &[Instance],
    config: &ModelConfig,
    steps: usize,
    batch_size: usize,
    learning_rate: f64,
    clip: f64,
    seed: u64,
) -> Result<CharLm> {
    let lm = CharLm::new(config, seed)?;
    train_char_lm(lm, corpus, steps, batch_size, learning_rate, clip, seed)
}

fn train_char_lm(
    mut lm: CharLm,
    corpus: &[Instance],
    steps: usize,
    batch_size: usize,
    learning_rate: f64,
    clip: f64,
    seed: u64,
) -> Result<CharLm> {
    if corpus.is_empty() {
        return Err(Error::Data("cannot pretrain on an empty corpus".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let mut adam = Adam::new(learning_rate);
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    let mut cursor = order.len();
    for _ in 0..steps {
        let mut tape = Tape::new();
        let mut losses = Vec::with_capacity(batch_size);
        for _ in 0..batch_size {
            if cursor == order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            let inst = &corpus[order[cursor]];
            cursor += 1;
            losses.push(lm.sequence_loss(&mut tape, inst)?);
        }
        let total = losses
            .into_iter()
            .reduce(|a, b| tape.add(a, b).expect("scalar add"))
            .expect("batch non-empty");
        let loss = tape.scale(total, 1.0 / batch_size as f64);
        let mut grads = tape.backward(loss)?;
        clip_gradients(&mut grads, clip);
        adam.step(&mut lm.params, &grads);
    }
    Ok(lm)
}

/// Copy the LM's recurrent weights into the first encoder layer and the
/// decoder of a character seq2seq model. Remaining weights are untouched.
pub fn init_from_lm(model: &mut CharSeq2SeqModel, lm: &CharLm) -> Result<()> {
    let lm_ids = lm.cell.param_ids();
    let enc_ids = model.layer1_cell().param_ids();
    let dec_ids = model.decoder_cell().param_ids();
    for (&src, &dst) in lm_ids.iter().zip(enc_ids.iter()) {
        let value = lm.params.value(src).clone();
        model.params_mut().get_mut(dst).value = value;
    }
    for (&src, &dst) in lm_ids.iter().zip(dec_ids.iter()) {
        let value = lm.params.value(src).clone();
        model.params_mut().get_mut(dst).value = value;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{Architecture, ModelContext};

    fn corpus() -> Vec<Instance> {
        vec![
            Instance::new("abba abba", "ab", vec!["abba".into()]).unwrap(),
            Instance::new("baab baab", "ab", vec!["baab".into()]).unwrap(),
        ]
    }

    #[test]
    fn lm_training_reduces_held_out_loss() {
        let config = ModelConfig::toy(Architecture::CharSeq2Seq);
        let c = corpus();
        let untrained = CharLm::new(&config, 77).unwrap();
        let before = untrained.mean_loss(&c);
        let trained = pretrain_char_lm(&c, &config, 60, 2, 0.01, 1.0, 77).unwrap();
        let after = trained.mean_loss(&c);
        assert!(
            after < before,
            "LM loss should decrease: {before} -> {after}"
        );
    }

    #[test]
    fn init_copies_weights_bit_exactly() {
        let config = ModelConfig::toy(Architecture::CharSeq2Seq);
        let c = corpus();
        let ctx = ModelContext::build(&c, &config).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut model = CharSeq2SeqModel::new(&config, ctx, &mut rng).unwrap();
        let lm = pretrain_char_lm(&c, &config, 10, 2, 0.01, 1.0, 5).unwrap();

        init_from_lm(&mut model, &lm).unwrap();

        for (src, dst) in lm
            .cell
            .param_ids()
            .into_iter()
            .zip(model.layer1_cell().param_ids())
        {
            assert_eq!(
                lm.params.value(src).data(),
                model.params().value(dst).data()
            );
        }
        for (src, dst) in lm
            .cell
            .param_ids()
            .into_iter()
            .zip(model.decoder_cell().param_ids())
        {
            assert_eq!(
                lm.params.value(src).data(),
                model.params().value(dst).data()
            );
        }
    }

    #[test]
    fn empty_corpus_rejected() {
        let config = ModelConfig::toy(Architecture::CharSeq2Seq);
        assert!(pretrain_char_lm(&[], &config, 5, 2, 0.01, 1.0, 0).is_err());
    }
}

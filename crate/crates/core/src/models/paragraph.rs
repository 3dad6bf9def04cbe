//! Paragraph Vector (PV-DBOW): an unsupervised phase learns one embedding
//! per distinct document by optimizing prediction of its constituent words
//! with a negative-sampling objective. The supervised classifier then
//! consumes the frozen document vector concatenated with the averaged
//! property embedding; document vectors get no fine-tuning.

use std::any::Any;
use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tapegrad::{init, NodeId, ParamId, ParamSet, Tape, Tensor};

use crate::data::instance::Instance;
use crate::data::tokenize::tokenize;
use crate::data::truncate;
use crate::eval::MethodClass;
use crate::models::classify::{argmax_prediction, AnswerTable};
use crate::models::{Architecture, Model, ModelConfig, ModelContext, Prediction};
use crate::Result;

/// Stable key for one distinct document string.
pub fn doc_key(document: &str) -> String {
    let mut hash: u64 = 0xcbf29ce484222325;
    for b in document.as_bytes() {
        hash ^= *b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    format!("{hash:016x}")
}

/// PV-DBOW unsupervised phase: returns (document keys, embedding matrix).
/// For each document vector and each word occurrence, one positive and
/// `negatives` sampled word targets drive a sigmoid dot-product loss.
pub fn train_doc_vectors(
    documents: &[String],
    config: &ModelConfig,
    seed: u64,
) -> Result<(Vec<String>, Tensor)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = config.d_in;

    let mut keys = Vec::new();
    let mut key_index: HashMap<String, usize> = HashMap::new();
    let mut doc_words: Vec<Vec<String>> = Vec::new();
    for doc in documents {
        let key = doc_key(doc);
        if !key_index.contains_key(&key) {
            key_index.insert(key.clone(), doc_words.len());
            keys.push(key);
            let toks = tokenize(doc);
            doc_words.push(truncate(&toks, config.doc_words).to_vec());
        }
    }
    let n_docs = doc_words.len();

    // word output vocabulary: every distinct word of the corpus
    let mut word_index: HashMap<&str, usize> = HashMap::new();
    let mut occurrences: Vec<usize> = Vec::new(); // flat multiset for unigram sampling
    for words in &doc_words {
        for w in words {
            let next = word_index.len();
            let idx = *word_index.entry(w.as_str()).or_insert(next);
            occurrences.push(idx);
        }
    }
    let n_words = word_index.len().max(2);

    let mut params = ParamSet::new();
    let doc_table = params.add("pv.docs", init::normal_embedding(&mut rng, n_docs.max(1), dim, 0.1))?;
    let word_table = params.add("pv.words", init::normal_embedding(&mut rng, n_words, dim, 0.1))?;

    let mut adam = crate::train::Adam::new(0.05);
    for _ in 0..config.pv_epochs {
        for d in 0..n_docs {
            if doc_words[d].is_empty() {
                continue;
            }
            let mut tape = Tape::new();
            let docs_node = tape.param(&params, doc_table);
            let words_node = tape.param(&params, word_table);
            let dvec = {
                let e = tape.embed(docs_node, &[d])?;
                tape.row(e, 0)?
            };
            let mut losses = Vec::new();
            for w in &doc_words[d] {
                let widx = word_index[w.as_str()];
                let mut ids = vec![widx];
                let mut targets = vec![1.0];
                for _ in 0..config.pv_negatives {
                    let pick = occurrences[rng.gen_range(0..occurrences.len())];
                    ids.push(pick);
                    targets.push(if pick == widx { 1.0 } else { 0.0 });
                }
                let wrows = tape.embed(words_node, &ids)?;
                let scores = tape.matmul(wrows, dvec)?;
                losses.push(tape.bce_with_logits(scores, &targets)?);
            }
            let total = losses
                .into_iter()
                .reduce(|a, b| tape.add(a, b).expect("scalar add"))
                .expect("document has words");
            let loss = tape.scale(total, 1.0 / doc_words[d].len() as f64);
            let grads = tape.backward(loss)?;
            adam.step(&mut params, &grads);
        }
    }

    Ok((keys, params.value(doc_table).clone()))
}

/// One PV-DBOW objective term for gradient checking: the loss of
/// predicting the given word ids (positives and negatives via `targets`)
/// from document `doc_idx`.
pub fn pv_objective_loss(
    tape: &mut Tape,
    params: &ParamSet,
    doc_table: ParamId,
    word_table: ParamId,
    doc_idx: usize,
    word_ids: &[usize],
    targets: &[f64],
) -> Result<NodeId> {
    let docs_node = tape.param(params, doc_table);
    let words_node = tape.param(params, word_table);
    let dvec = {
        let e = tape.embed(docs_node, &[doc_idx])?;
        tape.row(e, 0)?
    };
    let wrows = tape.embed(words_node, word_ids)?;
    let scores = tape.matmul(wrows, dvec)?;
    Ok(tape.bce_with_logits(scores, targets)?)
}

pub struct ParagraphVectorModel {
    config: ModelConfig,
    ctx: ModelContext,
    params: ParamSet,
    doc_table: ParamId,
    doc_index: HashMap<String, usize>,
    keys: Vec<String>,
    prop_embedding: ParamId,
    head: AnswerTable,
}

impl ParagraphVectorModel {
    pub fn new(
        config: &ModelConfig,
        ctx: ModelContext,
        corpus: &[Instance],
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let documents: Vec<String> = corpus.iter().map(|i| i.document.clone()).collect();
        let (keys, table) = train_doc_vectors(&documents, config, rng.gen())?;
        Self::from_parts(config, ctx, keys, table, rng)
    }

    /// Assemble from an already-trained document table (checkpoint restore).
    pub fn from_parts(
        config: &ModelConfig,
        ctx: ModelContext,
        keys: Vec<String>,
        doc_vectors: Tensor,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let mut params = ParamSet::new();
        // frozen: the supervised phase must not fine-tune document vectors
        let doc_table = params.add_frozen("pv.doc_vectors", doc_vectors)?;
        let prop_embedding = params.add(
            "pv.prop_embedding",
            init::normal_embedding(rng, ctx.vocab.size(), config.d_in, 0.1),
        )?;
        let head = AnswerTable::new(&mut params, "pv.answers", &ctx.answers, 2 * config.d_in, rng)?;
        let doc_index = keys
            .iter()
            .enumerate()
            .map(|(i, k)| (k.clone(), i))
            .collect();
        Ok(ParagraphVectorModel {
            config: config.clone(),
            ctx,
            params,
            doc_table,
            doc_index,
            keys,
            prop_embedding,
            head,
        })
    }

    fn joint(&self, tape: &mut Tape, inst: &Instance) -> Result<NodeId> {
        let dvec = match self.doc_index.get(&doc_key(&inst.document)) {
            Some(&idx) => {
                let table = tape.param(&self.params, self.doc_table);
                let e = tape.embed(table, &[idx])?;
                tape.row(e, 0)?
            }
            // unseen document: zero vector (no inference-time fitting)
            None => tape.constant(Tensor::vector(vec![0.0; self.config.d_in])),
        };
        let prop_tokens = tokenize(&inst.property);
        let prop_ids = self
            .ctx
            .vocab
            .encode(truncate(&prop_tokens, self.config.prop_words));
        let pvec = if prop_ids.is_empty() {
            tape.constant(Tensor::vector(vec![0.0; self.config.d_in]))
        } else {
            let table = tape.param(&self.params, self.prop_embedding);
            let rows = tape.embed(table, &prop_ids)?;
            tape.mean_rows(rows)?
        };
        Ok(tape.concat(&[dvec, pvec])?)
    }
}

impl Model for ParagraphVectorModel {
    fn arch(&self) -> Architecture {
        Architecture::ParagraphVector
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

    fn doc_keys(&self) -> Option<&[String]> {
        Some(&self.keys)
    }

    fn as_any(&self) -> &dyn Any {
        self
    }

    fn as_any_mut(&mut self) -> &mut dyn Any {
        self
    }
}

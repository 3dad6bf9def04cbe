//! The model zoo: classifiers over a fixed answer table, an extraction
//! labeler, and sequence decoders, all mapping a (property, document) pair
//! to an answer.

pub mod attentive;
pub mod avg_embed;
pub mod bow;
pub mod char_lm;
pub mod char_seq2seq;
pub mod classify;
pub mod labeler;
pub mod lstm_reader;
pub mod memnet;
pub mod paragraph;
pub mod seq2seq;
pub mod store;

use std::any::Any;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tapegrad::{NodeId, ParamSet, Tape};

use crate::data::instance::Instance;
use crate::data::tokenize::tokenize;
use crate::data::truncate;
use crate::data::vocab::{AnswerVocab, CharVocab, Vocabulary};
use crate::eval::MethodClass;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Architecture {
    SparseBow,
    AveragedEmbeddings,
    ParagraphVector,
    LstmReader,
    AttentiveReader,
    MemoryNetwork,
    RnnLabeler,
    Seq2Seq,
    PlaceholderSeq2Seq,
    CharSeq2Seq,
}

impl Architecture {
    pub fn all() -> [Architecture; 10] {
        [
            Architecture::SparseBow,
            Architecture::AveragedEmbeddings,
            Architecture::ParagraphVector,
            Architecture::LstmReader,
            Architecture::AttentiveReader,
            Architecture::MemoryNetwork,
            Architecture::RnnLabeler,
            Architecture::Seq2Seq,
            Architecture::PlaceholderSeq2Seq,
            Architecture::CharSeq2Seq,
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            Architecture::SparseBow => "sparse-bow",
            Architecture::AveragedEmbeddings => "averaged-embeddings",
            Architecture::ParagraphVector => "paragraph-vector",
            Architecture::LstmReader => "lstm-reader",
            Architecture::AttentiveReader => "attentive-reader",
            Architecture::MemoryNetwork => "memory-network",
            Architecture::RnnLabeler => "rnn-labeler",
            Architecture::Seq2Seq => "seq2seq",
            Architecture::PlaceholderSeq2Seq => "placeholder-seq2seq",
            Architecture::CharSeq2Seq => "char-seq2seq",
        }
    }

    pub fn from_name(name: &str) -> Option<Architecture> {
        Architecture::all().into_iter().find(|a| a.name() == name)
    }
}

impl std::fmt::Display for Architecture {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.name())
    }
}

/// Architecture selection plus every structural size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub arch: Architecture,
    /// Word embedding dimension.
    pub d_in: usize,
    /// Joint-representation dimension where a projection exists
    /// (Attentive Reader output).
    pub d_out: usize,
    pub hidden: usize,
    pub n_w: usize,
    pub n_ans: usize,
    pub n_doc: usize,
    pub doc_words: usize,
    pub prop_words: usize,
    pub doc_chars: usize,
    pub prop_chars: usize,
    pub char_dim: usize,
    /// Greedy decoding caps.
    pub answer_words: usize,
    pub answer_chars: usize,
    pub max_sentences: usize,
    /// Attentive Reader document LSTM direction flag.
    pub bidirectional: bool,
    /// Memory-network attention regularizer weight λ.
    pub entropy_reg: f64,
    pub hops: usize,
    /// Paragraph-vector unsupervised phase budget.
    pub pv_epochs: usize,
    pub pv_negatives: usize,
}

impl ModelConfig {
    /// Full-scale structural constants.
    pub fn paper(arch: Architecture) -> Self {
        ModelConfig {
            arch,
            d_in: 300,
            d_out: 300,
            hidden: 1024,
            n_w: if arch == Architecture::SparseBow {
                50_000
            } else {
                100_000
            },
            n_ans: 50_000,
            n_doc: 100,
            doc_words: 300,
            prop_words: 10,
            doc_chars: 400,
            prop_chars: 20,
            char_dim: 30,
            answer_words: 20,
            answer_chars: 60,
            max_sentences: 30,
            bidirectional: false,
            entropy_reg: 0.01,
            hops: 1,
            pv_epochs: 20,
            pv_negatives: 5,
        }
    }

    /// Desk-scale defaults: small enough to train on one CPU core.
    pub fn desk(arch: Architecture) -> Self {
        ModelConfig {
            d_in: 64,
            d_out: 64,
            hidden: 128,
            n_w: 5000,
            n_ans: 500,
            doc_words: 60,
            doc_chars: 200,
            ..ModelConfig::paper(arch)
        }
    }

    /// Tiny sizes for finite-difference gradient checks.
    pub fn toy(arch: Architecture) -> Self {
        ModelConfig {
            d_in: 8,
            d_out: 8,
            hidden: 8,
            n_w: 20,
            n_ans: 8,
            n_doc: 6,
            doc_words: 5,
            prop_words: 3,
            doc_chars: 16,
            prop_chars: 6,
            char_dim: 4,
            answer_words: 4,
            answer_chars: 8,
            pv_epochs: 2,
            pv_negatives: 2,
            ..ModelConfig::paper(arch)
        }
    }
}

/// Vocabularies shared by every architecture, built once per corpus.
#[derive(Debug, Clone)]
pub struct ModelContext {
    pub vocab: Vocabulary,
    pub answers: AnswerVocab,
    pub chars: CharVocab,
}

impl ModelContext {
    pub fn build(corpus: &[Instance], config: &ModelConfig) -> Result<Self> {
        Ok(ModelContext {
            vocab: Vocabulary::build(corpus, config.n_w, config.n_doc)?,
            answers: AnswerVocab::build(corpus, config.n_ans)?,
            chars: CharVocab::standard(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub answer: Option<String>,
    pub confidence: f64,
}

impl Prediction {
    pub fn none() -> Self {
        Prediction {
            answer: None,
            confidence: 0.0,
        }
    }

    pub fn as_set(&self) -> Vec<String> {
        self.answer.iter().cloned().collect()
    }
}

/// One row of a prediction dump (newline-delimited JSON).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub instance_id: String,
    pub predicted_answer: Option<String>,
    pub confidence: f64,
}

pub trait Model: Send {
    fn arch(&self) -> Architecture;
    fn config(&self) -> &ModelConfig;
    fn context(&self) -> &ModelContext;
    fn params(&self) -> &ParamSet;
    fn params_mut(&mut self) -> &mut ParamSet;

    /// Whether this instance can supervise the model (e.g. the target
    /// answer is inside the classifier table, or appears verbatim for the
    /// labeler). Evaluation still scores every instance.
    fn trainable_on(&self, inst: &Instance) -> bool;

    /// Record the training loss for one instance on the tape.
    fn instance_loss(
        &self,
        tape: &mut Tape,
        inst: &Instance,
        rng: &mut ChaCha8Rng,
    ) -> Result<NodeId>;

    fn predict(&self, inst: &Instance, rng: &mut ChaCha8Rng) -> Result<Prediction>;

    fn method_class(&self) -> MethodClass;

    /// Paragraph-vector document keys, for checkpoint manifests.
    fn doc_keys(&self) -> Option<&[String]> {
        None
    }

    fn as_any(&self) -> &dyn Any;
    fn as_any_mut(&mut self) -> &mut dyn Any;
}

/// Instantiate an architecture over a training corpus: builds vocabularies,
/// initializes parameters from the seed, and (for Paragraph Vector) runs
/// the unsupervised document-embedding phase.
pub fn build_model(config: &ModelConfig, corpus: &[Instance], seed: u64) -> Result<Box<dyn Model>> {
    let ctx = ModelContext::build(corpus, config)?;
    build_model_with_context(config, ctx, corpus, seed)
}

pub fn build_model_with_context(
    config: &ModelConfig,
    ctx: ModelContext,
    corpus: &[Instance],
    seed: u64,
) -> Result<Box<dyn Model>> {
    if ctx.answers.is_empty() {
        return Err(Error::Model("answer table is empty (N_ans = 0)".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(match config.arch {
        Architecture::SparseBow => Box::new(bow::SparseBowModel::new(config, ctx, &mut rng)?),
        Architecture::AveragedEmbeddings => Box::new(avg_embed::AveragedEmbeddingsModel::new(
            config, ctx, &mut rng,
        )?),
        Architecture::ParagraphVector => Box::new(paragraph::ParagraphVectorModel::new(
            config, ctx, corpus, &mut rng,
        )?),
        Architecture::LstmReader => {
            Box::new(lstm_reader::LstmReaderModel::new(config, ctx, &mut rng)?)
        }
        Architecture::AttentiveReader => {
            Box::new(attentive::AttentiveReaderModel::new(config, ctx, &mut rng)?)
        }
        Architecture::MemoryNetwork => {
            Box::new(memnet::MemoryNetworkModel::new(config, ctx, &mut rng)?)
        }
        Architecture::RnnLabeler => Box::new(labeler::RnnLabelerModel::new(config, ctx, &mut rng)?),
        Architecture::Seq2Seq => {
            Box::new(seq2seq::Seq2SeqModel::new(config, ctx, false, &mut rng)?)
        }
        Architecture::PlaceholderSeq2Seq => {
            Box::new(seq2seq::Seq2SeqModel::new(config, ctx, true, &mut rng)?)
        }
        Architecture::CharSeq2Seq => {
            Box::new(char_seq2seq::CharSeq2SeqModel::new(config, ctx, &mut rng)?)
        }
    })
}

/// Tokenized, truncated, and encoded word inputs for one instance.
pub(crate) fn word_inputs(
    ctx: &ModelContext,
    config: &ModelConfig,
    inst: &Instance,
) -> (Vec<usize>, Vec<usize>, Vec<String>) {
    let prop_tokens = tokenize(&inst.property);
    let doc_tokens = tokenize(&inst.document);
    let prop_ids = ctx.vocab.encode(truncate(&prop_tokens, config.prop_words));
    let doc_tokens: Vec<String> = truncate(&doc_tokens, config.doc_words).to_vec();
    let doc_ids = ctx.vocab.encode(&doc_tokens);
    (prop_ids, doc_ids, doc_tokens)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn architecture_names_round_trip() {
        for arch in Architecture::all() {
            assert_eq!(Architecture::from_name(arch.name()), Some(arch));
        }
        assert_eq!(Architecture::from_name("nope"), None);
    }

    #[test]
    fn presets_pin_structural_constants() {
        let p = ModelConfig::paper(Architecture::LstmReader);
        assert_eq!(
            (p.d_in, p.d_out, p.hidden, p.n_w, p.n_ans),
            (300, 300, 1024, 100_000, 50_000)
        );
        assert_eq!((p.doc_words, p.prop_words), (300, 10));
        assert_eq!((p.doc_chars, p.prop_chars, p.char_dim), (400, 20, 30));
        // the sparse baseline uses the smaller word space
        assert_eq!(ModelConfig::paper(Architecture::SparseBow).n_w, 50_000);

        let d = ModelConfig::desk(Architecture::LstmReader);
        assert_eq!((d.d_in, d.hidden, d.n_w, d.n_ans), (64, 128, 5000, 500));
        assert_eq!((d.doc_words, d.doc_chars), (60, 200));
    }
}

//! Model checkpoints: the parameter archive plus a JSON manifest carrying
//! the ModelConfig and the vocabularies needed to evaluate the checkpoint
//! standalone.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tapegrad::{checkpoint, Tensor};

use crate::data::vocab::{AnswerVocab, CharVocab, Vocabulary};
use crate::models::paragraph::ParagraphVectorModel;
use crate::models::{build_model_with_context, Architecture, Model, ModelConfig, ModelContext};
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub config: ModelConfig,
    pub words: Vec<String>,
    pub answers: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doc_keys: Option<Vec<String>>,
}

pub fn save_model(path: &Path, model: &dyn Model) -> Result<()> {
    let manifest = Manifest {
        config: model.config().clone(),
        words: model.context().vocab.words().to_vec(),
        answers: model.context().answers.answers().to_vec(),
        doc_keys: model.doc_keys().map(|k| k.to_vec()),
    };
    let json = serde_json::to_string(&manifest)?;
    checkpoint::save(path, &json, model.params())?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<Box<dyn Model>> {
    let (json, entries) = checkpoint::load(path)?;
    let manifest: Manifest = serde_json::from_str(&json)?;
    let config = manifest.config.clone();
    let ctx = ModelContext {
        vocab: Vocabulary::from_words(manifest.words.clone(), config.n_doc),
        answers: AnswerVocab::from_answers(manifest.answers.clone()),
        chars: CharVocab::standard(),
    };

    let mut model: Box<dyn Model> = if config.arch == Architecture::ParagraphVector {
        let keys = manifest.doc_keys.clone().unwrap_or_default();
        if keys.is_empty() {
            return Err(Error::Model(
                "paragraph-vector checkpoint lacks document keys".into(),
            ));
        }
        let placeholder_table = Tensor::zeros(vec![keys.len(), config.d_in]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        Box::new(ParagraphVectorModel::from_parts(
            &config,
            ctx,
            keys,
            placeholder_table,
            &mut rng,
        )?)
    } else {
        build_model_with_context(&config, ctx, &[], 0)?
    };

    checkpoint::restore(model.params_mut(), &entries)?;
    Ok(model)
}

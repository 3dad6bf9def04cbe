//! Plain key-value configuration files: one `key = value` per line, `#`
//! comments, with command-line `--set key=value` overrides applied on top.
//! Every structural model constant is a named key.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use docqa::data::synth::{CategoricalSpec, DateSpec, GenSpec, RelationalSpec};
use docqa::models::ModelConfig;
use docqa::train::{HyperParams, TrainSchedule};

#[derive(Debug, Clone, Default)]
pub struct KeyValues(BTreeMap<String, String>);

impl KeyValues {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut map = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("{}:{}: expected key = value", path.display(), lineno + 1))?;
            map.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(KeyValues(map))
    }

    pub fn apply_overrides(&mut self, sets: &[String]) -> Result<()> {
        for s in sets {
            let (key, value) = s
                .split_once('=')
                .ok_or_else(|| anyhow!("--set expects key=value, got {s:?}"))?;
            self.0.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(())
    }

    fn get<T: std::str::FromStr>(&self, key: &str, into: &mut T) -> Result<()>
    where
        T::Err: std::fmt::Display,
    {
        if let Some(v) = self.0.get(key) {
            *into = v
                .parse()
                .map_err(|e| anyhow!("config key {key}: {e}"))?;
        }
        Ok(())
    }

    /// Patch a ModelConfig with any present structural keys.
    pub fn apply_model_config(&self, config: &mut ModelConfig) -> Result<()> {
        self.get("d_in", &mut config.d_in)?;
        self.get("d_out", &mut config.d_out)?;
        self.get("hidden", &mut config.hidden)?;
        self.get("n_w", &mut config.n_w)?;
        self.get("n_ans", &mut config.n_ans)?;
        self.get("n_doc", &mut config.n_doc)?;
        self.get("doc_words", &mut config.doc_words)?;
        self.get("prop_words", &mut config.prop_words)?;
        self.get("doc_chars", &mut config.doc_chars)?;
        self.get("prop_chars", &mut config.prop_chars)?;
        self.get("char_dim", &mut config.char_dim)?;
        self.get("answer_words", &mut config.answer_words)?;
        self.get("answer_chars", &mut config.answer_chars)?;
        self.get("max_sentences", &mut config.max_sentences)?;
        self.get("bidirectional", &mut config.bidirectional)?;
        self.get("entropy_reg", &mut config.entropy_reg)?;
        self.get("hops", &mut config.hops)?;
        self.get("pv_epochs", &mut config.pv_epochs)?;
        self.get("pv_negatives", &mut config.pv_negatives)?;
        Ok(())
    }

    pub fn apply_hyperparams(&self, hp: &mut HyperParams) -> Result<()> {
        self.get("learning_rate", &mut hp.learning_rate)?;
        self.get("clip", &mut hp.clip)?;
        if let Some(v) = self.0.get("lambda") {
            hp.entropy_reg = Some(v.parse().map_err(|e| anyhow!("config key lambda: {e}"))?);
        }
        Ok(())
    }

    pub fn apply_schedule(&self, schedule: &mut TrainSchedule) -> Result<()> {
        self.get("max_steps", &mut schedule.max_steps)?;
        self.get("batch_size", &mut schedule.batch_size)?;
        self.get("eval_every", &mut schedule.eval_every)?;
        self.get("patience", &mut schedule.patience)?;
        if let Some(v) = self.0.get("target_f1") {
            schedule.target_f1 =
                Some(v.parse().map_err(|e| anyhow!("config key target_f1: {e}"))?);
        }
        Ok(())
    }

    /// Synthetic-corpus spec keys: counts of properties per family plus
    /// instances per property.
    pub fn gen_spec(&self) -> Result<GenSpec> {
        let mut categorical = 0usize;
        let mut categorical_answers = 4usize;
        let mut relational = 0usize;
        let mut date = 0usize;
        let mut instances = 1000usize;
        self.get("categorical", &mut categorical)?;
        self.get("categorical_answers", &mut categorical_answers)?;
        self.get("relational", &mut relational)?;
        self.get("date", &mut date)?;
        self.get("instances_per_property", &mut instances)?;
        if categorical_answers == 0 {
            bail!("categorical_answers must be at least 1");
        }
        let spec = GenSpec {
            categorical: (0..categorical)
                .map(|i| {
                    let mut c = GenSpec::uniform_categorical(
                        &format!("kind_{i}"),
                        categorical_answers,
                        instances,
                    );
                    c.name = format!("kind_{i}");
                    c
                })
                .collect::<Vec<CategoricalSpec>>(),
            relational: (0..relational)
                .map(|i| RelationalSpec {
                    name: format!("owner_{i}"),
                    instances,
                })
                .collect(),
            date: (0..date)
                .map(|i| DateSpec {
                    name: format!("date_of_record_{i}"),
                    instances,
                })
                .collect(),
        };
        Ok(spec)
    }
}

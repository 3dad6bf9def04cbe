//! The training loop: shuffled mini-batches, gradient clipping, Adam,
//! periodic validation by Mean F1, best-checkpoint retention, plateau
//! early-stopping, and divergence abort.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tapegrad::{Tape, Tensor};

use crate::data::instance::Instance;
use crate::eval::mean_f1;
use crate::models::Model;
use crate::train::{clip_gradients, Adam};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub learning_rate: f64,
    pub clip: f64,
    /// Memory-network attention regularizer override, swept in search.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entropy_reg: Option<f64>,
}

impl HyperParams {
    pub fn new(learning_rate: f64, clip: f64) -> Self {
        HyperParams {
            learning_rate,
            clip,
            entropy_reg: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainSchedule {
    pub max_steps: usize,
    pub batch_size: usize,
    /// Validation cadence in steps.
    pub eval_every: usize,
    /// Abort after this many evaluations without improvement.
    pub patience: usize,
    /// Stop as soon as validation Mean F1 reaches this value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_f1: Option<f64>,
    pub seed: u64,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        TrainSchedule {
            max_steps: 5000,
            batch_size: 32,
            eval_every: 100,
            patience: 5,
            target_f1: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub step: usize,
    pub train_loss: f64,
    pub validation_f1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TrialStatus {
    Completed,
    Diverged { step: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialResult {
    pub hyperparams: HyperParams,
    pub seed: u64,
    pub status: TrialStatus,
    pub best_validation_f1: f64,
    pub steps_run: usize,
    /// First evaluation step at which `target_f1` was reached.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps_to_target: Option<usize>,
    pub curve: Vec<CurvePoint>,
}

impl TrialResult {
    pub fn failed(&self) -> bool {
        matches!(self.status, TrialStatus::Diverged { .. })
    }
}

/// Mean F1 of the model's predictions over a corpus, with a deterministic
/// prediction rng derived from `seed`.
pub fn validation_f1(model: &dyn Model, corpus: &[Instance], seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    let mut predictions = Vec::with_capacity(corpus.len());
    for inst in corpus {
        let p = model.predict(inst, &mut rng)?;
        predictions.push(p.as_set());
    }
    Ok(mean_f1(&predictions, corpus))
}

/// Train a model in place. The best-scoring parameter snapshot is restored
/// into the model before returning.
pub fn train(
    model: &mut dyn Model,
    train_set: &[Instance],
    validation: &[Instance],
    hp: &HyperParams,
    schedule: &TrainSchedule,
) -> Result<TrialResult> {
    // hp.entropy_reg is applied at model build time (search patches the
    // ModelConfig before constructing each trial's model)
    let usable: Vec<&Instance> = train_set
        .iter()
        .filter(|inst| model.trainable_on(inst))
        .collect();
    if usable.is_empty() {
        return Err(Error::Data(
            "no trainable instances for this model (after filtering)".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(schedule.seed);
    let mut adam = Adam::new(hp.learning_rate);
    let mut order: Vec<usize> = (0..usable.len()).collect();
    let mut cursor = order.len();

    let mut curve = Vec::new();
    let mut best_f1 = f64::NEG_INFINITY;
    let mut best_snapshot: Option<Vec<Tensor>> = None;
    let mut stale_evals = 0usize;
    let mut steps_to_target = None;
    let mut last_loss = f64::NAN;
    let mut steps_run = 0usize;

    for step in 1..=schedule.max_steps {
        let mut tape = Tape::new();
        let mut losses = Vec::with_capacity(schedule.batch_size);
        for _ in 0..schedule.batch_size {
            if cursor == order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            let inst = usable[order[cursor]];
            cursor += 1;
            losses.push(model.instance_loss(&mut tape, inst, &mut rng)?);
        }
        let total = losses
            .into_iter()
            .reduce(|a, b| tape.add(a, b).expect("scalar add"))
            .expect("batch non-empty");
        let loss = tape.scale(total, 1.0 / schedule.batch_size as f64);
        last_loss = tape.value(loss).item();
        steps_run = step;

        if !last_loss.is_finite() {
            return Ok(TrialResult {
                hyperparams: *hp,
                seed: schedule.seed,
                status: TrialStatus::Diverged { step },
                best_validation_f1: if best_f1.is_finite() { best_f1 } else { 0.0 },
                steps_run: step,
                steps_to_target,
                curve,
            });
        }

        let mut grads = tape.backward(loss)?;
        clip_gradients(&mut grads, hp.clip);
        adam.step(model.params_mut(), &grads);

        if step % schedule.eval_every == 0 || step == schedule.max_steps {
            let f1 = validation_f1(model, validation, schedule.seed)?;
            curve.push(CurvePoint {
                step,
                train_loss: last_loss,
                validation_f1: f1,
            });
            if f1 > best_f1 {
                best_f1 = f1;
                best_snapshot = Some(snapshot(model));
                stale_evals = 0;
            } else {
                stale_evals += 1;
            }
            if let Some(target) = schedule.target_f1 {
                if f1 >= target && steps_to_target.is_none() {
                    steps_to_target = Some(step);
                    break;
                }
            }
            if stale_evals >= schedule.patience {
                break;
            }
        }
    }

    // keep the best-scoring parameters
    if let Some(snap) = best_snapshot {
        restore(model, snap);
    }
    let _ = last_loss;

    Ok(TrialResult {
        hyperparams: *hp,
        seed: schedule.seed,
        status: TrialStatus::Completed,
        best_validation_f1: if best_f1.is_finite() { best_f1 } else { 0.0 },
        steps_run,
        steps_to_target,
        curve,
    })
}

fn snapshot(model: &dyn Model) -> Vec<Tensor> {
    model
        .params()
        .iter()
        .map(|(_, p)| p.value.clone())
        .collect()
}

fn restore(model: &mut dyn Model, snap: Vec<Tensor>) {
    let params = model.params_mut();
    for (i, value) in snap.into_iter().enumerate() {
        params.get_mut(tapegrad::ParamId(i)).value = value;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_model, Architecture, ModelConfig};

    fn tiny_corpus() -> Vec<Instance> {
        vec![
            Instance::new("the kind is arketan place", "kind", vec!["Arketa".into()]).unwrap(),
            Instance::new("the kind is belunan place", "kind", vec!["Belun".into()]).unwrap(),
            Instance::new("the kind is corvian place", "kind", vec!["Corvia".into()]).unwrap(),
            Instance::new("the kind is arketan spot", "kind", vec!["Arketa".into()]).unwrap(),
        ]
    }

    #[test]
    fn zero_learning_rate_changes_nothing() {
        let corpus = tiny_corpus();
        let config = ModelConfig::toy(Architecture::AveragedEmbeddings);
        let mut model = build_model(&config, &corpus, 1).unwrap();
        let before: Vec<Tensor> = model.params().iter().map(|(_, p)| p.value.clone()).collect();
        let hp = HyperParams::new(0.0, 1.0);
        let schedule = TrainSchedule {
            max_steps: 20,
            batch_size: 2,
            eval_every: 10,
            ..Default::default()
        };
        train(model.as_mut(), &corpus, &corpus, &hp, &schedule).unwrap();
        for ((_, p), b) in model.params().iter().zip(&before) {
            assert_eq!(p.value.data(), b.data());
        }
    }

    #[test]
    fn same_seed_gives_identical_loss_curves() {
        let corpus = tiny_corpus();
        let config = ModelConfig::toy(Architecture::AveragedEmbeddings);
        let hp = HyperParams::new(0.01, 1.0);
        let schedule = TrainSchedule {
            max_steps: 30,
            batch_size: 2,
            eval_every: 10,
            seed: 42,
            ..Default::default()
        };
        let run = || {
            let mut model = build_model(&config, &corpus, 1).unwrap();
            train(model.as_mut(), &corpus, &corpus, &hp, &schedule).unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a.curve.len(), b.curve.len());
        for (x, y) in a.curve.iter().zip(&b.curve) {
            assert_eq!(x.train_loss.to_bits(), y.train_loss.to_bits());
            assert_eq!(x.validation_f1.to_bits(), y.validation_f1.to_bits());
        }
    }

    #[test]
    fn single_instance_memorization_drives_loss_down() {
        let corpus = vec![tiny_corpus().remove(0)];
        let config = ModelConfig::toy(Architecture::AveragedEmbeddings);
        let mut model = build_model(&config, &corpus, 3).unwrap();
        let hp = HyperParams::new(0.05, 5.0);
        let schedule = TrainSchedule {
            max_steps: 500,
            batch_size: 1,
            eval_every: 50,
            patience: 100,
            seed: 5,
            ..Default::default()
        };
        let result = train(model.as_mut(), &corpus, &corpus, &hp, &schedule).unwrap();
        assert!(!result.failed());
        let final_loss = result.curve.last().unwrap().train_loss;
        assert!(final_loss < 0.01, "loss {final_loss} did not reach < 0.01");
        assert_eq!(result.best_validation_f1, 1.0);
    }
}

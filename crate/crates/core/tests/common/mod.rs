//! Shared test support: toy corpora, per-architecture gradient checking,
//! and memorization runs.

#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tapegrad::{compare_gradients, GradCheckConfig, Gradients, Tape};

use docqa::data::synth::{GenSpec, RelationalSpec};
use docqa::data::Instance;
use docqa::models::{build_model, Architecture, Model, ModelConfig};
use docqa::train::{train, HyperParams, TrainSchedule, TrialResult};

/// A corpus small enough for finite differences: ≤5-token documents.
pub fn toy_corpus() -> Vec<Instance> {
    vec![
        Instance::new("name is Kel .", "owner", vec!["Kel".into()]).unwrap(),
        Instance::new("name is Tam .", "owner", vec!["Tam".into()]).unwrap(),
        Instance::new("kind arketan spot .", "kind", vec!["Arketa".into()]).unwrap(),
        Instance::new("kind belunan spot .", "kind", vec!["Belun".into()]).unwrap(),
    ]
}

/// Batch loss over the first two toy instances with a fixed encoding seed,
/// so repeated calls (finite-difference probes) see identical inputs.
fn batch_loss(model: &dyn Model, corpus: &[Instance], collect_grads: bool) -> (f64, Option<Gradients>) {
    let mut rng = ChaCha8Rng::seed_from_u64(1234);
    let mut tape = Tape::new();
    let losses: Vec<_> = corpus
        .iter()
        .take(2)
        .map(|inst| model.instance_loss(&mut tape, inst, &mut rng).expect("loss"))
        .collect();
    let total = losses
        .into_iter()
        .reduce(|a, b| tape.add(a, b).expect("add"))
        .expect("non-empty");
    let loss = tape.scale(total, 0.5);
    let value = tape.value(loss).item();
    let grads = collect_grads.then(|| tape.backward(loss).expect("backward"));
    (value, grads)
}

/// Central finite differences over every trainable parameter of a model,
/// evaluating the training loss through the model's own forward path.
pub fn model_finite_difference(
    model: &mut dyn Model,
    corpus: &[Instance],
    epsilon: f64,
) -> Gradients {
    let ids: Vec<(tapegrad::ParamId, usize)> = model
        .params()
        .iter()
        .filter(|(_, p)| p.trainable)
        .map(|(id, p)| (id, p.value.len()))
        .collect();
    let mut out = Gradients::default();
    for (id, len) in ids {
        let mut grad = vec![0.0; len];
        for j in 0..len {
            let orig = model.params().value(id).data()[j];
            model.params_mut().get_mut(id).value.data_mut()[j] = orig + epsilon;
            let plus = batch_loss(&*model, corpus, false).0;
            model.params_mut().get_mut(id).value.data_mut()[j] = orig - epsilon;
            let minus = batch_loss(&*model, corpus, false).0;
            model.params_mut().get_mut(id).value.data_mut()[j] = orig;
            grad[j] = (plus - minus) / (2.0 * epsilon);
        }
        out.insert(id, grad);
    }
    out
}

/// Finite-difference check of one architecture's training loss at toy
/// size. Returns the worst mismatch as an error string.
pub fn gradient_check_architecture(arch: Architecture) -> Result<(), String> {
    let corpus = toy_corpus();
    let config = ModelConfig::toy(arch);
    let mut model = build_model(&config, &corpus, 42).map_err(|e| e.to_string())?;

    let (_, grads) = batch_loss(model.as_ref(), &corpus, true);
    let analytic = grads.expect("gradients requested");
    let numeric = model_finite_difference(model.as_mut(), &corpus, 1e-4);

    let cfg = GradCheckConfig {
        epsilon: 1e-4,
        rel_tol: 1e-3,
        near_zero: 1e-6,
        abs_tol: 1e-6,
    };
    compare_gradients(model.params(), &analytic, &numeric, cfg)
        .map_err(|m| format!("{arch}: {m}"))
}

/// A relational synthetic corpus whose answers are verbatim by
/// construction, so every architecture family can reach them.
pub fn memorization_corpus(n: usize, seed: u64) -> Vec<Instance> {
    let spec = GenSpec {
        categorical: vec![],
        relational: vec![RelationalSpec {
            name: "owner".into(),
            instances: n,
        }],
        date: vec![],
    };
    let (instances, _) = docqa::data::generate_synthetic(&spec, seed);
    instances
}

/// Desk-scale memorization configuration for one architecture.
pub fn memorization_config(arch: Architecture) -> ModelConfig {
    let mut config = ModelConfig::desk(arch);
    // 50-instance corpora need no 5k-word table; smaller sizes keep the
    // run fast while remaining honest desk-scale models
    config.n_w = 1000;
    config.n_ans = 200;
    config.hidden = 64;
    config.d_in = 32;
    config.d_out = 32;
    config.n_doc = 20;
    config.doc_chars = 120;
    config
}

pub fn memorization_hp(arch: Architecture) -> HyperParams {
    let lr = match arch {
        Architecture::SparseBow => 0.05,
        Architecture::CharSeq2Seq => 0.005,
        _ => 0.01,
    };
    HyperParams::new(lr, 5.0)
}

/// Train until the model reaches `target` Mean F1 on its own training set.
pub fn memorize(
    model: &mut dyn Model,
    corpus: &[Instance],
    hp: &HyperParams,
    max_steps: usize,
    eval_every: usize,
    seed: u64,
    target: f64,
) -> TrialResult {
    let schedule = TrainSchedule {
        max_steps,
        batch_size: 16,
        eval_every,
        patience: usize::MAX,
        target_f1: Some(target),
        seed,
    };
    train(model, corpus, corpus, hp, &schedule).expect("training runs")
}

//! Random hyperparameter search: log-uniform sampling of the learning rate
//! over [1e-5, 1e-2] and the clip threshold over [1e-3, 1e1], independent
//! trials with derived seeds (base seed + trial index), winner by highest
//! validation Mean F1 with ties broken toward the lower learning rate.
//! The trial ledger is newline-delimited JSON and search resumes by
//! ledger replay.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::instance::Instance;
use crate::models::{build_model, Architecture, Model, ModelConfig};
use crate::train::trainer::{train, HyperParams, TrainSchedule, TrialResult};
use crate::{Error, Result};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

pub const LR_RANGE: (f64, f64) = (1e-5, 1e-2);
pub const CLIP_RANGE: (f64, f64) = (1e-3, 1e1);

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchConfig {
    pub trials: usize,
    pub base_seed: u64,
    pub lr_range: (f64, f64),
    pub clip_range: (f64, f64),
    /// Sweep the memory-network attention regularizer when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_range: Option<(f64, f64)>,
}

impl SearchConfig {
    pub fn new(trials: usize, base_seed: u64) -> Self {
        SearchConfig {
            trials,
            base_seed,
            lr_range: LR_RANGE,
            clip_range: CLIP_RANGE,
            lambda_range: None,
        }
    }
}

/// log(value) uniform on [log lo, log hi].
pub fn sample_loguniform(lo: f64, hi: f64, rng: &mut impl Rng) -> f64 {
    if lo == hi {
        return lo;
    }
    rng.gen_range(lo.ln()..=hi.ln()).exp()
}

/// Deterministic hyperparameters for one trial: the trial's rng is seeded
/// with base seed + trial index.
pub fn sample_hyperparams(cfg: &SearchConfig, trial: usize) -> (HyperParams, u64) {
    let trial_seed = cfg.base_seed.wrapping_add(trial as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
    let learning_rate = sample_loguniform(cfg.lr_range.0, cfg.lr_range.1, &mut rng);
    let clip = sample_loguniform(cfg.clip_range.0, cfg.clip_range.1, &mut rng);
    let entropy_reg = cfg
        .lambda_range
        .map(|(lo, hi)| sample_loguniform(lo, hi, &mut rng));
    (
        HyperParams {
            learning_rate,
            clip,
            entropy_reg,
        },
        trial_seed,
    )
}

/// Winner: highest validation Mean F1 among non-failed trials; exact ties
/// go to the lower learning rate, then to the lower trial index.
pub fn select_winner(results: &BTreeMap<usize, TrialResult>) -> Option<usize> {
    let mut best: Option<(usize, &TrialResult)> = None;
    for (&idx, r) in results {
        if r.failed() {
            continue;
        }
        let better = match best {
            None => true,
            Some((_, b)) => {
                r.best_validation_f1 > b.best_validation_f1
                    || (r.best_validation_f1 == b.best_validation_f1
                        && r.hyperparams.learning_rate < b.hyperparams.learning_rate)
            }
        };
        if better {
            best = Some((idx, r));
        }
    }
    best.map(|(idx, _)| idx)
}

/// Run all trials not present in `existing` through `run_trial`, merge,
/// and pick the winner. Trials are independent (derived seeds), so the
/// result set is invariant to execution order; the parallel path collects
/// in index order.
pub fn hyperparameter_search_with<F>(
    cfg: &SearchConfig,
    existing: BTreeMap<usize, TrialResult>,
    run_trial: F,
) -> Result<(Option<usize>, BTreeMap<usize, TrialResult>)>
where
    F: Fn(usize, &HyperParams, u64) -> Result<TrialResult> + Sync,
{
    let missing: Vec<usize> = (0..cfg.trials)
        .filter(|i| !existing.contains_key(i))
        .collect();

    let run_one = |&i: &usize| -> Result<(usize, TrialResult)> {
        let (hp, seed) = sample_hyperparams(cfg, i);
        Ok((i, run_trial(i, &hp, seed)?))
    };

    #[cfg(feature = "parallel")]
    let ran: Vec<(usize, TrialResult)> = missing
        .par_iter()
        .map(run_one)
        .collect::<Result<Vec<_>>>()?;
    #[cfg(not(feature = "parallel"))]
    let ran: Vec<(usize, TrialResult)> = missing
        .iter()
        .map(run_one)
        .collect::<Result<Vec<_>>>()?;

    let mut results = existing;
    results.extend(ran);
    Ok((select_winner(&results), results))
}

pub struct SearchOutcome {
    pub winner: usize,
    pub results: BTreeMap<usize, TrialResult>,
    /// The winning trial's trained model, rebuilt deterministically.
    pub model: Box<dyn Model>,
}

/// Full search over a model family: each trial builds a fresh model with
/// the trial's seed (and swept λ if configured) and trains it. The winner
/// is re-run to materialize its model.
pub fn run_search(
    config: &ModelConfig,
    train_set: &[Instance],
    validation: &[Instance],
    schedule: &TrainSchedule,
    search: &SearchConfig,
    existing: BTreeMap<usize, TrialResult>,
) -> Result<SearchOutcome> {
    if search.trials == 0 {
        return Err(Error::Data("search needs at least one trial".into()));
    }
    let run_trial = |_: usize, hp: &HyperParams, seed: u64| -> Result<TrialResult> {
        let (mut model, schedule) = trial_setup(config, train_set, hp, schedule, seed)?;
        train(model.as_mut(), train_set, validation, hp, &schedule)
    };
    let (winner, results) = hyperparameter_search_with(search, existing, run_trial)?;
    let winner = winner.ok_or_else(|| Error::Data("all trials diverged".into()))?;

    let (hp, seed) = sample_hyperparams(search, winner);
    let (mut model, schedule) = trial_setup(config, train_set, &hp, schedule, seed)?;
    train(model.as_mut(), train_set, validation, &hp, &schedule)?;
    Ok(SearchOutcome {
        winner,
        results,
        model,
    })
}

fn trial_setup(
    config: &ModelConfig,
    train_set: &[Instance],
    hp: &HyperParams,
    schedule: &TrainSchedule,
    seed: u64,
) -> Result<(Box<dyn Model>, TrainSchedule)> {
    let mut config = config.clone();
    if let Some(reg) = hp.entropy_reg {
        if config.arch == Architecture::MemoryNetwork {
            config.entropy_reg = reg;
        }
    }
    let model = build_model(&config, train_set, seed)?;
    let mut schedule = schedule.clone();
    schedule.seed = seed;
    Ok((model, schedule))
}

#[derive(Debug, Serialize, Deserialize)]
struct LedgerRow {
    trial: usize,
    #[serde(flatten)]
    result: TrialResult,
}

pub fn read_ledger(path: &Path) -> Result<BTreeMap<usize, TrialResult>> {
    let mut out = BTreeMap::new();
    if !path.exists() {
        return Ok(out);
    }
    let reader = BufReader::new(File::open(path)?);
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: LedgerRow = serde_json::from_str(&line)?;
        out.insert(row.trial, row.result);
    }
    Ok(out)
}

pub fn write_ledger(path: &Path, results: &BTreeMap<usize, TrialResult>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for (&trial, result) in results {
        let row = LedgerRow {
            trial,
            result: result.clone(),
        };
        serde_json::to_writer(&mut w, &row)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::train::trainer::TrialStatus;

    fn fake_trial(f1: f64, lr: f64) -> TrialResult {
        TrialResult {
            hyperparams: HyperParams {
                learning_rate: lr,
                clip: 1.0,
                entropy_reg: None,
            },
            seed: 0,
            status: TrialStatus::Completed,
            best_validation_f1: f1,
            steps_run: 10,
            steps_to_target: None,
            curve: vec![],
        }
    }

    #[test]
    fn loguniform_degenerate_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(sample_loguniform(0.5, 0.5, &mut rng), 0.5);
    }

    #[test]
    fn loguniform_within_range_and_median_centered() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut samples: Vec<f64> = (0..10_000)
            .map(|_| sample_loguniform(1e-5, 1e-2, &mut rng))
            .collect();
        assert!(samples.iter().all(|&v| (1e-5..=1e-2).contains(&v)));
        samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = samples[samples.len() / 2];
        // true median is 10^-3.5
        assert!(
            (10f64.powf(-3.6)..=10f64.powf(-3.4)).contains(&median),
            "median {median}"
        );
    }

    #[test]
    fn hyperparams_are_deterministic_per_trial() {
        let cfg = SearchConfig::new(50, 7);
        let (a, sa) = sample_hyperparams(&cfg, 3);
        let (b, sb) = sample_hyperparams(&cfg, 3);
        assert_eq!(a, b);
        assert_eq!(sa, sb);
        assert_eq!(sa, 7 + 3);
        let (c, _) = sample_hyperparams(&cfg, 4);
        assert_ne!(a, c);
        // ranges respected
        for i in 0..50 {
            let (hp, _) = sample_hyperparams(&cfg, i);
            assert!((1e-5..=1e-2).contains(&hp.learning_rate));
            assert!((1e-3..=1e1).contains(&hp.clip));
        }
    }

    #[test]
    fn single_trial_wins() {
        let mut results = BTreeMap::new();
        results.insert(0, fake_trial(0.4, 1e-3));
        assert_eq!(select_winner(&results), Some(0));
    }

    #[test]
    fn argmax_and_tie_breaking() {
        let mut results = BTreeMap::new();
        results.insert(0, fake_trial(0.4, 1e-3));
        results.insert(1, fake_trial(0.9, 1e-3));
        results.insert(2, fake_trial(0.6, 1e-4));
        assert_eq!(select_winner(&results), Some(1));
        // equal scores → lower learning rate
        let mut results = BTreeMap::new();
        results.insert(0, fake_trial(0.8, 1e-3));
        results.insert(1, fake_trial(0.8, 1e-4));
        assert_eq!(select_winner(&results), Some(1));
    }

    #[test]
    fn failed_trials_never_win() {
        let mut results = BTreeMap::new();
        let mut bad = fake_trial(0.99, 1e-3);
        bad.status = TrialStatus::Diverged { step: 5 };
        results.insert(0, bad);
        results.insert(1, fake_trial(0.1, 1e-3));
        assert_eq!(select_winner(&results), Some(1));
    }

    #[test]
    fn injected_oracle_scores_and_resume() {
        let cfg = SearchConfig::new(5, 100);
        let scores = [0.1, 0.7, 0.3, 0.7, 0.2];
        let ran = std::sync::Mutex::new(Vec::new());
        let run = |i: usize, hp: &HyperParams, _seed: u64| {
            ran.lock().unwrap().push(i);
            Ok(TrialResult {
                best_validation_f1: scores[i],
                ..fake_trial(scores[i], hp.learning_rate)
            })
        };
        let (winner, results) =
            hyperparameter_search_with(&cfg, BTreeMap::new(), run).unwrap();
        assert_eq!(results.len(), 5);
        // 0.7 tie between trials 1 and 3 → lower learning rate wins
        let w = winner.unwrap();
        let (hp1, _) = sample_hyperparams(&cfg, 1);
        let (hp3, _) = sample_hyperparams(&cfg, 3);
        let expected = if hp1.learning_rate <= hp3.learning_rate { 1 } else { 3 };
        assert_eq!(w, expected);

        // resume: completed trials are not re-run
        ran.lock().unwrap().clear();
        let run2 = |i: usize, hp: &HyperParams, _seed: u64| {
            ran.lock().unwrap().push(i);
            Ok(fake_trial(scores[i], hp.learning_rate))
        };
        let (_, results2) = hyperparameter_search_with(&cfg, results.clone(), run2).unwrap();
        assert!(ran.lock().unwrap().is_empty());
        assert_eq!(results2.len(), 5);
    }

    #[test]
    fn ledger_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trials.jsonl");
        let mut results = BTreeMap::new();
        results.insert(0, fake_trial(0.5, 2e-4));
        results.insert(2, fake_trial(0.7, 3e-3));
        write_ledger(&path, &results).unwrap();
        let back = read_ledger(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[&2].best_validation_f1, 0.7);
        assert_eq!(back[&0].hyperparams.learning_rate, 2e-4);
    }
}

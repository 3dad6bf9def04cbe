//! Batch CLI for the document/property reading pipeline: synthetic corpus
//! generation, dataset statistics, splitting, training, evaluation, and
//! random hyperparameter search. Commands run to completion and emit
//! files; all outputs are reproducible under a fixed seed.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 training
//! divergence.

mod config;

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use config::KeyValues;
use docqa::data::{
    corpus_stats, generate_synthetic, read_instances, split_dataset, stats::render_stats_tsv,
    write_instances, Instance,
};
use docqa::eval::{evaluate, render_report_tsv, MethodClass};
use docqa::models::char_lm::{init_from_lm, pretrain_char_lm};
use docqa::models::char_seq2seq::CharSeq2SeqModel;
use docqa::models::store::{load_model, save_model};
use docqa::models::{build_model, Architecture, Model, ModelConfig, PredictionRecord};
use docqa::train::{
    read_ledger, run_search, train, write_ledger, HyperParams, SearchConfig, TrainSchedule,
    TrialResult, TrialStatus,
};

/// Fixed default seed for reproducibility.
const DEFAULT_SEED: u64 = 17;

const EXIT_USAGE: i32 = 1;
const EXIT_DATA: i32 = 2;
const EXIT_DIVERGED: i32 = 3;

#[derive(Parser)]
#[command(name = "docqa", version, about = "document/property reading pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ModelArgs {
    /// Architecture name (e.g. lstm-reader, placeholder-seq2seq).
    #[arg(long)]
    arch: String,
    /// Structural preset: desk or paper.
    #[arg(long, default_value = "desk")]
    preset: String,
    /// Key-value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Inline config overrides, repeatable: --set key=value.
    #[arg(long = "set")]
    sets: Vec<String>,
    /// Pretrain a character LM and initialize from it (char-seq2seq only).
    #[arg(long)]
    pretrain_lm: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus with known construction.
    Generate {
        /// Key-value spec: categorical / relational / date property counts
        /// and instances_per_property.
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
    /// Property frequency/entropy/class table and corpus summary measures.
    Stats {
        #[arg(long)]
        input: PathBuf,
        /// Write the TSV report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// 85/10/5 split by per-instance seeded hash.
    Split {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
    /// Train one model and write a checkpoint.
    Train {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        input: PathBuf,
        /// Validation instances (defaults to the training file).
        #[arg(long)]
        validation: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Append the trial record to this newline-delimited JSON ledger.
        #[arg(long)]
        ledger: Option<PathBuf>,
    },
    /// Score a checkpoint or a prediction dump against gold instances.
    Eval {
        #[arg(long, conflicts_with = "predictions")]
        checkpoint: Option<PathBuf>,
        /// Newline-delimited JSON {instance_id, predicted_answer, confidence}.
        #[arg(long)]
        predictions: Option<PathBuf>,
        #[arg(long)]
        input: PathBuf,
        /// Method label for the report header.
        #[arg(long)]
        method: Option<String>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// TSV report path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the full report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
        /// Dump per-instance predictions (checkpoint mode).
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Random hyperparameter search; resumes from the ledger.
    Search {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        validation: Option<PathBuf>,
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Winning model checkpoint.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        ledger: PathBuf,
    },
}

fn main() {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints help/version through this path too
            let _ = e.print();
            let code = if e.exit_code() == 0 { 0 } else { EXIT_USAGE };
            std::process::exit(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => {}
        Err(e) => {
            let code = exit_code_for(&e);
            eprintln!("error code={code} msg={:?}", e.to_string());
            std::process::exit(code);
        }
    }
}

fn exit_code_for(e: &anyhow::Error) -> i32 {
    for cause in e.chain() {
        if let Some(docqa::Error::Diverged { .. }) = cause.downcast_ref::<docqa::Error>() {
            return EXIT_DIVERGED;
        }
    }
    if e.to_string().contains("diverged") {
        return EXIT_DIVERGED;
    }
    EXIT_DATA
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { spec, out, seed } => cmd_generate(&spec, &out, seed),
        Command::Stats { input, out } => cmd_stats(&input, out.as_deref()),
        Command::Split {
            input,
            out_dir,
            seed,
        } => cmd_split(&input, &out_dir, seed),
        Command::Train {
            model,
            input,
            validation,
            seed,
            out,
            ledger,
        } => cmd_train(&model, &input, validation.as_deref(), seed, &out, ledger.as_deref()),
        Command::Eval {
            checkpoint,
            predictions,
            input,
            method,
            seed,
            out,
            json,
            dump,
        } => cmd_eval(
            checkpoint.as_deref(),
            predictions.as_deref(),
            &input,
            method.as_deref(),
            seed,
            out.as_deref(),
            json.as_deref(),
            dump.as_deref(),
        ),
        Command::Search {
            model,
            input,
            validation,
            trials,
            seed,
            out,
            ledger,
        } => cmd_search(
            &model,
            &input,
            validation.as_deref(),
            trials,
            seed,
            &out,
            &ledger,
        ),
    }
}

fn load_keyvalues(model: &ModelArgs) -> Result<KeyValues> {
    let mut kv = match &model.config {
        Some(path) => KeyValues::from_file(path)?,
        None => KeyValues::default(),
    };
    kv.apply_overrides(&model.sets)?;
    Ok(kv)
}

fn resolve_model_setup(
    model: &ModelArgs,
) -> Result<(ModelConfig, HyperParams, TrainSchedule, KeyValues)> {
    let arch = Architecture::from_name(&model.arch)
        .ok_or_else(|| anyhow!("unknown architecture {:?}", model.arch))?;
    let mut config = match model.preset.as_str() {
        "desk" => ModelConfig::desk(arch),
        "paper" => ModelConfig::paper(arch),
        other => bail!("unknown preset {other:?} (expected desk or paper)"),
    };
    let kv = load_keyvalues(model)?;
    kv.apply_model_config(&mut config)?;
    let mut hp = HyperParams::new(1e-3, 1.0);
    kv.apply_hyperparams(&mut hp)?;
    let mut schedule = TrainSchedule::default();
    kv.apply_schedule(&mut schedule)?;
    Ok((config, hp, schedule, kv))
}

fn cmd_generate(spec_path: &Path, out: &Path, seed: u64) -> Result<()> {
    let kv = KeyValues::from_file(spec_path)?;
    let spec = kv.gen_spec()?;
    let (instances, truths) = generate_synthetic(&spec, seed);
    std::fs::create_dir_all(out)?;
    write_instances(&out.join("instances.jsonl"), &instances)?;
    let mut w = BufWriter::new(File::create(out.join("truth.tsv"))?);
    writeln!(w, "property\tkind\tinstances\texpected_scaled_entropy\texpected_class")?;
    for t in &truths {
        writeln!(
            w,
            "{}\t{:?}\t{}\t{:.6}\t{}",
            t.property,
            t.kind,
            t.instances,
            t.expected_scaled_entropy,
            t.expected_class
        )?;
    }
    w.flush()?;
    println!(
        "generated {} instances across {} properties into {}",
        instances.len(),
        truths.len(),
        out.display()
    );
    Ok(())
}

fn cmd_stats(input: &Path, out: Option<&Path>) -> Result<()> {
    let instances = read_instances(input)?;
    let stats = corpus_stats(&instances);
    let rendered = render_stats_tsv(&stats);
    match out {
        Some(path) => std::fs::write(path, rendered)?,
        None => print!("{rendered}"),
    }
    Ok(())
}

fn cmd_split(input: &Path, out_dir: &Path, seed: u64) -> Result<()> {
    let instances = read_instances(input)?;
    let (train, validation, test) = split_dataset(&instances, seed);
    std::fs::create_dir_all(out_dir)?;
    write_instances(&out_dir.join("train.jsonl"), &train)?;
    write_instances(&out_dir.join("validation.jsonl"), &validation)?;
    write_instances(&out_dir.join("test.jsonl"), &test)?;
    println!(
        "split {} instances into {}/{}/{}",
        instances.len(),
        train.len(),
        validation.len(),
        test.len()
    );
    Ok(())
}

fn build_with_optional_pretrain(
    config: &ModelConfig,
    corpus: &[Instance],
    seed: u64,
    pretrain_lm: bool,
    hp: &HyperParams,
    schedule: &TrainSchedule,
) -> Result<Box<dyn Model>> {
    let mut model = build_model(config, corpus, seed)?;
    if pretrain_lm {
        if config.arch != Architecture::CharSeq2Seq {
            bail!("--pretrain-lm applies only to char-seq2seq");
        }
        let lm_steps = (schedule.max_steps / 4).max(100);
        let lm = pretrain_char_lm(
            corpus,
            config,
            lm_steps,
            schedule.batch_size,
            hp.learning_rate.max(1e-3),
            hp.clip,
            seed,
        )?;
        let char_model = model
            .as_any_mut()
            .downcast_mut::<CharSeq2SeqModel>()
            .expect("char-seq2seq model");
        init_from_lm(char_model, &lm)?;
    }
    Ok(model)
}

fn cmd_train(
    model_args: &ModelArgs,
    input: &Path,
    validation: Option<&Path>,
    seed: u64,
    out: &Path,
    ledger: Option<&Path>,
) -> Result<()> {
    let (config, hp, mut schedule, _) = resolve_model_setup(model_args)?;
    schedule.seed = seed;
    let train_set = read_instances(input)?;
    let validation_set = match validation {
        Some(path) => read_instances(path)?,
        None => train_set.clone(),
    };
    let mut model = build_with_optional_pretrain(
        &config,
        &train_set,
        seed,
        model_args.pretrain_lm,
        &hp,
        &schedule,
    )?;
    let result = train(model.as_mut(), &train_set, &validation_set, &hp, &schedule)?;
    if let Some(path) = ledger {
        append_trial(path, 0, &result)?;
    }
    if let TrialStatus::Diverged { step } = result.status {
        return Err(docqa::Error::Diverged {
            step,
            loss: f64::NAN,
        }
        .into());
    }
    save_model(out, model.as_ref())?;
    println!(
        "trained {} for {} steps; best validation mean F1 {:.4}; checkpoint {}",
        config.arch,
        result.steps_run,
        result.best_validation_f1,
        out.display()
    );
    Ok(())
}

fn append_trial(path: &Path, trial: usize, result: &TrialResult) -> Result<()> {
    use std::fs::OpenOptions;
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    let mut row = serde_json::to_value(result)?;
    row.as_object_mut()
        .expect("object")
        .insert("trial".into(), serde_json::json!(trial));
    writeln!(f, "{row}")?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_eval(
    checkpoint: Option<&Path>,
    predictions: Option<&Path>,
    input: &Path,
    method: Option<&str>,
    seed: u64,
    out: Option<&Path>,
    json: Option<&Path>,
    dump: Option<&Path>,
) -> Result<()> {
    let gold = read_instances(input)?;
    let (label, method_class, prediction_sets) = match (checkpoint, predictions) {
        (Some(ckpt), None) => {
            let model = load_model(ckpt)?;
            let mut rng = {
                use rand::SeedableRng;
                rand_chacha::ChaCha8Rng::seed_from_u64(seed)
            };
            let mut sets = Vec::with_capacity(gold.len());
            let mut records = Vec::with_capacity(gold.len());
            for (i, inst) in gold.iter().enumerate() {
                let p = model.predict(inst, &mut rng)?;
                records.push(PredictionRecord {
                    instance_id: inst.key(i),
                    predicted_answer: p.answer.clone(),
                    confidence: p.confidence,
                });
                sets.push(p.as_set());
            }
            if let Some(path) = dump {
                let mut w = BufWriter::new(File::create(path)?);
                for r in &records {
                    serde_json::to_writer(&mut w, r)?;
                    w.write_all(b"\n")?;
                }
                w.flush()?;
            }
            (
                method
                    .map(|m| m.to_string())
                    .unwrap_or_else(|| model.arch().name().to_string()),
                model.method_class(),
                sets,
            )
        }
        (None, Some(preds)) => {
            let by_id = read_prediction_dump(preds)?;
            let sets: Vec<Vec<String>> = gold
                .iter()
                .enumerate()
                .map(|(i, inst)| {
                    by_id
                        .get(&inst.key(i))
                        .and_then(|p| p.clone())
                        .map(|a| vec![a])
                        .unwrap_or_default()
                })
                .collect();
            (
                method.map(|m| m.to_string()).unwrap_or_else(|| "predictions".into()),
                MethodClass::SingleValueGeneration,
                sets,
            )
        }
        _ => bail!("eval needs exactly one of --checkpoint or --predictions"),
    };

    let report = evaluate(&label, method_class, &prediction_sets, &gold);
    let rendered = render_report_tsv(&report);
    match out {
        Some(path) => std::fs::write(path, &rendered)?,
        None => print!("{rendered}"),
    }
    if let Some(path) = json {
        std::fs::write(path, serde_json::to_string_pretty(&report)?)?;
    }
    Ok(())
}

fn read_prediction_dump(path: &Path) -> Result<HashMap<String, Option<String>>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = HashMap::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: PredictionRecord = serde_json::from_str(&line)
            .with_context(|| format!("{}:{}", path.display(), lineno + 1))?;
        out.insert(rec.instance_id, rec.predicted_answer);
    }
    Ok(out)
}

fn cmd_search(
    model_args: &ModelArgs,
    input: &Path,
    validation: Option<&Path>,
    trials: usize,
    seed: u64,
    out: &Path,
    ledger: &Path,
) -> Result<()> {
    let (config, _, schedule, kv) = resolve_model_setup(model_args)?;
    let _ = kv;
    let train_set = read_instances(input)?;
    let validation_set = match validation {
        Some(path) => read_instances(path)?,
        None => train_set.clone(),
    };
    let mut search = SearchConfig::new(trials, seed);
    if config.arch == Architecture::MemoryNetwork {
        search.lambda_range = Some((1e-3, 1e-1));
    }
    let existing = read_ledger(ledger)?;
    let outcome = run_search(
        &config,
        &train_set,
        &validation_set,
        &schedule,
        &search,
        existing,
    )?;
    write_ledger(ledger, &outcome.results)?;
    save_model(out, outcome.model.as_ref())?;
    let best = &outcome.results[&outcome.winner];
    println!(
        "search over {} trials: winner trial {} (lr {:.3e}, clip {:.3e}) validation mean F1 {:.4}",
        trials,
        outcome.winner,
        best.hyperparams.learning_rate,
        best.hyperparams.clip,
        best.best_validation_f1
    );
    Ok(())
}

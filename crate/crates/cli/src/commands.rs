//! The five subcommand implementations.

use std::io::Write;
use std::path::{Path, PathBuf};

use memnet_core::checkpoint::{load_checkpoint, save_checkpoint};
use memnet_core::corpus::{parse_semeval_xml, stats_table, vocabulary, Instance};
use memnet_core::embed::EmbeddingTable;
use memnet_core::error::Error;
use memnet_core::eval::{
    bench_epochs, context_avg_baseline, evaluate_model, majority_baseline, render_bench_table,
};
use memnet_core::model::{forward, MemNetParams, ModelConfig};
use memnet_core::report::{render_html, render_text, report};
use memnet_core::train::train_with;

use crate::settings::{CliError, CliResult, Settings};
use crate::{AttnArgs, BenchArgs, CommonArgs, EvalArgs};

fn load_corpus(path: &Path) -> CliResult<(Vec<Instance>, memnet_core::DatasetStats)> {
    Ok(parse_semeval_xml(path)?)
}

fn load_table(
    path: &Path,
    instances: &[Instance],
    seed: u64,
) -> CliResult<EmbeddingTable> {
    let vocab = vocabulary(instances);
    Ok(EmbeddingTable::load_glove(path, Some(&vocab), seed)?)
}

fn ensure_out_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

pub fn train(args: &CommonArgs) -> CliResult<()> {
    let settings = Settings::resolve(args)?;
    let train_path = settings.require("train-xml", &settings.train_xml)?;
    let glove_path = settings.require("glove", &settings.glove)?;
    ensure_out_dir(&settings.out_dir)?;

    let (instances, stats) = load_corpus(&train_path)?;
    let table = load_table(&glove_path, &instances, settings.seed)?;
    println!(
        "loaded {} instances ({} conflict dropped), vocabulary {} of dim {}",
        instances.len(),
        stats.conflict_dropped,
        table.vocab_len(),
        table.dim()
    );

    let mut model = ModelConfig::new(table.dim(), settings.hops, settings.mode);
    model.max_len = settings.max_len;
    let config = settings.train_config();

    let checkpoint_path = settings.checkpoint_path();
    let every = settings.checkpoint_every;
    let out_dir = settings.out_dir.clone();
    let outcome = train_with(&instances, &table, model, &config, |epoch, params, record| {
        println!(
            "epoch {:>4}  loss {:>8.4}  acc {:>6.3}  {:>7.3}s",
            record.epoch, record.mean_loss, record.train_accuracy, record.seconds
        );
        if let Some(n) = every {
            if n > 0 && epoch % n == 0 {
                let path = out_dir.join(format!("checkpoint-epoch-{epoch}.txt"));
                if let Err(e) = save_checkpoint(&path, params, &table.oov_snapshot()) {
                    eprintln!("warning: could not write {}: {e}", path.display());
                }
            }
        }
    })?;

    save_checkpoint(&checkpoint_path, &outcome.params, &table.oov_snapshot())?;
    let log_path = settings.out_dir.join("train_log.jsonl");
    let mut log = std::fs::File::create(&log_path)?;
    for record in &outcome.log {
        writeln!(log, "{}", serde_json::to_string(record).expect("serializable"))?;
    }
    if outcome.clamp_events > 0 {
        println!("warning: loss clamp fired {} times", outcome.clamp_events);
    }
    println!("checkpoint written to {}", checkpoint_path.display());
    println!("training log written to {}", log_path.display());
    Ok(())
}

/// Load a checkpoint and reject flags that contradict it.
fn load_model(
    settings: &Settings,
    args: &CommonArgs,
    table: &EmbeddingTable,
) -> CliResult<MemNetParams> {
    let path = settings.require("checkpoint", &settings.checkpoint)?;
    let (params, oov) = load_checkpoint(&path)?;
    if params.config.dim != table.dim() {
        return Err(Error::ConfigMismatch {
            message: format!(
                "checkpoint has dim {}, embeddings have dim {}",
                params.config.dim,
                table.dim()
            ),
        }
        .into());
    }
    if let Some(hops) = args.hops {
        if hops != params.config.hops {
            return Err(Error::ConfigMismatch {
                message: format!(
                    "--hops {hops} but the checkpoint was trained with {}",
                    params.config.hops
                ),
            }
            .into());
        }
    }
    if let Some(mode) = &args.location_mode {
        if mode != params.config.mode.name() {
            return Err(Error::ConfigMismatch {
                message: format!(
                    "--location-mode {mode} but the checkpoint uses {}",
                    params.config.mode
                ),
            }
            .into());
        }
    }
    table.preload_oov(oov);
    Ok(params)
}

pub fn eval(args: &EvalArgs) -> CliResult<()> {
    let settings = Settings::resolve(&args.common)?;
    let test_path = settings.require("test-xml", &settings.test_xml)?;
    ensure_out_dir(&settings.out_dir)?;

    let (test_set, _) = load_corpus(&test_path)?;
    let (label, report) = match args.baseline.as_deref() {
        Some("majority") => {
            let train_path = settings.require("train-xml", &settings.train_xml)?;
            let (train_set, _) = load_corpus(&train_path)?;
            (
                "majority baseline".to_string(),
                majority_baseline(&train_set, &test_set)?,
            )
        }
        Some("contextavg") => {
            let train_path = settings.require("train-xml", &settings.train_xml)?;
            let glove_path = settings.require("glove", &settings.glove)?;
            let (train_set, _) = load_corpus(&train_path)?;
            let mut all = train_set.clone();
            all.extend(test_set.iter().cloned());
            let table = load_table(&glove_path, &all, settings.seed)?;
            (
                "ContextAVG baseline".to_string(),
                context_avg_baseline(&train_set, &test_set, &table, &settings.train_config())?,
            )
        }
        Some(other) => {
            return Err(CliError::BadValue(format!(
                "unknown baseline {other:?} (expected majority or contextavg)"
            )))
        }
        None => {
            let glove_path = settings.require("glove", &settings.glove)?;
            let table = load_table(&glove_path, &test_set, settings.seed)?;
            let params = load_model(&settings, &args.common, &table)?;
            let label = format!(
                "memnet hops={} mode={}",
                params.config.hops, params.config.mode
            );
            (label, evaluate_model(&params, &table, &test_set)?)
        }
    };

    println!("{label}");
    print!("{}", report.render_text());

    let record_path = settings.out_dir.join("eval_records.jsonl");
    let mut out = std::fs::File::create(&record_path)?;
    writeln!(
        out,
        "{}",
        serde_json::json!({
            "type": "summary",
            "model": label,
            "accuracy": report.accuracy(),
            "correct": report.correct(),
            "count": report.count,
            "confusion": report.confusion,
        })
    )?;
    println!("records written to {}", record_path.display());
    Ok(())
}

pub fn attn(args: &AttnArgs) -> CliResult<()> {
    let settings = Settings::resolve(&args.common)?;
    let test_path = settings.require("test-xml", &settings.test_xml)?;
    let glove_path = settings.require("glove", &settings.glove)?;
    ensure_out_dir(&settings.out_dir)?;

    let (test_set, _) = load_corpus(&test_path)?;
    let table = load_table(&glove_path, &test_set, settings.seed)?;
    let params = load_model(&settings, &args.common, &table)?;

    let indices: Vec<usize> = if args.index.is_empty() {
        (0..test_set.len()).collect()
    } else {
        for &i in &args.index {
            if i >= test_set.len() {
                return Err(CliError::BadValue(format!(
                    "--index {i} out of range (test set has {} instances)",
                    test_set.len()
                )));
            }
        }
        args.index.clone()
    };

    let mut reports = Vec::with_capacity(indices.len());
    for &i in &indices {
        let instance = &test_set[i];
        let trace = forward(instance, &table, &params)?;
        let rep = report(instance, &trace);
        let path = settings.out_dir.join(format!("attn_{i}.txt"));
        std::fs::write(&path, render_text(&rep))?;
        reports.push(rep);
    }
    let html_path = settings.out_dir.join("attention.html");
    std::fs::write(&html_path, render_html(&reports))?;
    println!(
        "{} text reports and {} written to {}",
        indices.len(),
        html_path.file_name().unwrap().to_string_lossy(),
        settings.out_dir.display()
    );
    Ok(())
}

pub fn bench(args: &BenchArgs) -> CliResult<()> {
    let settings = Settings::resolve(&args.common)?;
    let train_path = settings.require("train-xml", &settings.train_xml)?;
    let glove_path = settings.require("glove", &settings.glove)?;
    ensure_out_dir(&settings.out_dir)?;

    let hop_list: Vec<usize> = match &args.hop_list {
        None => (1..=9).collect(),
        Some(raw) => raw
            .split(',')
            .map(|s| s.trim().parse())
            .collect::<Result<_, _>>()
            .map_err(|_| CliError::BadValue(format!("--hop-list: cannot parse {raw:?}")))?,
    };
    let reps = args.reps.unwrap_or(3).max(1);

    let (instances, _) = load_corpus(&train_path)?;
    let table = load_table(&glove_path, &instances, settings.seed)?;
    let rows = bench_epochs(
        &instances,
        &table,
        &hop_list,
        settings.mode,
        reps,
        &settings.train_config(),
    )?;
    print!("{}", render_bench_table(&rows));

    let record_path = settings.out_dir.join("bench.jsonl");
    let mut out = std::fs::File::create(&record_path)?;
    for row in &rows {
        writeln!(out, "{}", serde_json::to_string(row).expect("serializable"))?;
    }
    println!("records written to {}", record_path.display());
    Ok(())
}

pub fn stats(args: &CommonArgs) -> CliResult<()> {
    let settings = Settings::resolve(args)?;
    if settings.train_xml.is_none() && settings.test_xml.is_none() {
        return Err(CliError::MissingInput(
            "stats needs --train-xml and/or --test-xml".into(),
        ));
    }
    let mut splits: Vec<(String, memnet_core::DatasetStats)> = Vec::new();
    let mut add = |name: &str, path: &Option<PathBuf>| -> CliResult<()> {
        if path.is_some() {
            let path = settings.require(
                if name == "train" { "train-xml" } else { "test-xml" },
                path,
            )?;
            let (_, stats) = load_corpus(&path)?;
            splits.push((name.to_string(), stats));
        }
        Ok(())
    };
    add("train", &settings.train_xml)?;
    add("test", &settings.test_xml)?;
    print!("{}", stats_table(&splits));
    Ok(())
}

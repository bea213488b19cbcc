use rayon::prelude::*;
use serde_json::json;

use asttrans_core::corpus::{query_tokens, read_parallel_files, TargetKind};
use asttrans_core::text_embed::{export_text, save_model, train_embedder as fit_embedder, EmbedConfig};
use asttrans_core::translator::{
    load_checkpoint, save_checkpoint, train_translator_with, translate as decode, DecodeMode, Seq2SeqConfig,
    TrainOptions,
};

use crate::args::{Profile, Target, TrainEmbedderArgs, TrainTranslatorArgs, TranslateArgs};
use crate::error::{CliError, CliResult, Context};
use crate::io::{create_parent, in_split, load_records, read_token_lines, to_json, write_lines};
use crate::manifest::{ensure_not_inputs, RunRecorder};

impl From<Target> for TargetKind {
    fn from(t: Target) -> Self {
        match t {
            Target::Asttrans => TargetKind::Asttrans,
            Target::CodeTokens => TargetKind::CodeTokens,
        }
    }
}

pub fn embed_config(args: &TrainEmbedderArgs) -> EmbedConfig {
    let base = match args.profile {
        Profile::Paper => EmbedConfig::default(),
        Profile::Desk => EmbedConfig {
            epochs: 10,
            buckets: 10_000,
            ..EmbedConfig::default()
        },
    };
    EmbedConfig {
        dim: args.dim,
        epochs: args.epochs.unwrap_or(base.epochs),
        window: args.window.unwrap_or(base.window),
        rng_seed: args.seed.unwrap_or(base.rng_seed),
        threads: args.shards.unwrap_or(base.threads),
        ..base
    }
}

pub fn train_embedder(args: &TrainEmbedderArgs) -> CliResult<()> {
    let cfg = embed_config(args);
    cfg.validate()?;
    let mut run = RunRecorder::new(
        "train-embedder",
        json!({ "args": to_json(args), "resolved": to_json(&cfg) }),
    );
    run.seed("embedder", cfg.rng_seed);
    let inputs: Vec<&std::path::Path> = args.corpora.iter().map(|p| p.as_path()).collect();
    let mut outputs = vec![args.out.as_path()];
    if let Some(p) = &args.export_text {
        outputs.push(p);
    }
    ensure_not_inputs(&inputs, &outputs)?;

    let mut corpus = Vec::new();
    for p in &args.corpora {
        run.input(p);
        corpus.extend(read_token_lines(p)?);
    }
    let out = fit_embedder(&corpus, &cfg).context("training embedder")?;
    log::info!(
        "embedder: {} tokens, final epoch loss {:.4}",
        out.model.vocab().len(),
        out.epoch_losses.last().copied().unwrap_or(f64::NAN)
    );
    create_parent(&args.out)?;
    save_model(&out.model, &args.out).context(args.out.display())?;
    run.output(&args.out);
    if let Some(p) = &args.export_text {
        create_parent(p)?;
        export_text(&out.model, p).context(p.display())?;
        run.output(p);
    }
    run.set_resolved("epoch_losses", json!(out.epoch_losses));
    run.finish(&args.out, false)?;
    Ok(())
}

pub fn translator_config(args: &TrainTranslatorArgs) -> Seq2SeqConfig {
    let base = match args.profile {
        Profile::Paper => Seq2SeqConfig::paper(),
        Profile::Desk => Seq2SeqConfig::desk(),
    };
    let hidden = args.hidden.unwrap_or(base.hidden_units);
    Seq2SeqConfig {
        train_steps: args.steps.unwrap_or(base.train_steps),
        validate_every: args.validate_every.unwrap_or(base.validate_every),
        checkpoint_every: args.checkpoint_every.unwrap_or(base.checkpoint_every),
        hidden_units: hidden,
        embedding_dim: args.hidden.unwrap_or(base.embedding_dim),
        batch_size: args.batch_size.unwrap_or(base.batch_size),
        rng_seed: args.seed.unwrap_or(base.rng_seed),
        decode: args.beam.map_or(base.decode, DecodeMode::Beam),
        ..base
    }
}

pub fn train_translator(args: &TrainTranslatorArgs) -> CliResult<()> {
    let cfg = translator_config(args);
    cfg.validate()?;
    let mut run = RunRecorder::new(
        "train-translator",
        json!({ "args": to_json(args), "resolved": to_json(&cfg) }),
    );
    run.seed("translator", cfg.rng_seed);
    let kind = TargetKind::from(args.target);
    for split in ["train", "valid", "test"] {
        for name in [
            format!("{split}.src"),
            format!("{split}.ids"),
            format!("{split}.{kind}.tgt"),
        ] {
            run.input(&args.corpus_dir.join(name));
        }
    }
    let log_path = {
        let mut name = args.out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
        name.push(".log.tsv");
        args.out.with_file_name(name)
    };
    let corpus = read_parallel_files(&args.corpus_dir, kind).context(args.corpus_dir.display())?;
    if corpus.is_empty() {
        return Err(CliError::data(format!(
            "{} holds no parallel files",
            args.corpus_dir.display()
        )));
    }
    let options = TrainOptions {
        checkpoint_dir: args.checkpoint_dir.clone(),
        log_every: (cfg.train_steps / 20).max(1),
    };
    let outcome = train_translator_with(&corpus, &cfg, &options).context("training translator")?;
    create_parent(&args.out)?;
    save_checkpoint(&outcome.model, &args.out).context(args.out.display())?;
    run.output(&args.out);

    let mut lines = vec!["split\tstep\tloss".to_string()];
    lines.extend(
        outcome
            .log
            .train_loss
            .iter()
            .map(|(s, l)| format!("train\t{s}\t{l:.9}")),
    );
    lines.extend(
        outcome
            .log
            .valid_loss
            .iter()
            .map(|(s, l)| format!("valid\t{s}\t{l:.9}")),
    );
    write_lines(&log_path, &lines)?;
    run.output(&log_path);
    for p in &outcome.log.checkpoints {
        run.output(p);
    }
    run.set_resolved("best_step", json!(outcome.log.best_step));
    run.set_resolved("parameters", json!(outcome.model.parameter_count()));
    run.finish(&args.out, false)?;
    Ok(())
}

pub fn translate(args: &TranslateArgs) -> CliResult<()> {
    let mut run = RunRecorder::new("translate", json!({ "args": to_json(args) }));
    run.input(&args.model);
    run.input(&args.data.dataset);
    ensure_not_inputs(&[&args.model, &args.data.dataset], &[&args.out])?;
    let model = load_checkpoint(&args.model).context(args.model.display())?;
    let records = in_split(&load_records(&args.data)?, args.split);
    if records.is_empty() {
        return Err(CliError::data(format!("no records in split {}", args.split)));
    }
    let lines: Vec<String> = records
        .par_iter()
        .map(|r| {
            let t = decode(&model, &query_tokens(&r.query));
            format!("{}\t{}", r.id, t.tokens.join(" "))
        })
        .collect();
    create_parent(&args.out)?;
    write_lines(&args.out, &lines)?;
    run.output(&args.out);
    run.finish(&args.out, false)?;
    Ok(())
}

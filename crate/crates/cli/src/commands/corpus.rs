use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use asttrans_core::ast_repr::{extract as extract_repr, ReprConfig};
use asttrans_core::corpus::{build_parallel_corpora, compute_stats, write_parallel_files, CodeSearchRecord};

use crate::args::{BuildCorporaArgs, ExtractArgs, StatsArgs};
use crate::cache::{Cache, KeyBuilder};
use crate::error::{CliError, CliResult, Context};
use crate::io::{create_dir, create_parent, in_split, load_records, to_json, write_lines};
use crate::manifest::{ensure_not_inputs, RunRecorder};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractedRepr {
    pub tokens: Vec<String>,
    pub node_count: usize,
    pub max_depth: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Extraction {
    pub id: String,
    pub outcome: Result<ExtractedRepr, String>,
}

/// Representations of `records` at `depth`, in record order. Cached by the
/// records' ids, languages and code plus the depth.
pub fn extract_records(records: &[CodeSearchRecord], depth: usize, cache: &Cache) -> CliResult<Vec<Extraction>> {
    let mut key = KeyBuilder::new("extract");
    key.part("depth", &(depth as u64).to_le_bytes());
    for r in records {
        key.part("id", r.id.as_bytes())
            .part("lang", r.language.as_str().as_bytes())
            .part("code", r.code.as_bytes());
    }
    let key = key.finish();
    let (out, hit) = cache.get_or_compute("extract", &key, || {
        let cfg = ReprConfig { depth_k: depth };
        Ok(records
            .par_iter()
            .map(|r| Extraction {
                id: r.id.clone(),
                outcome: extract_repr(&r.code, r.language, &cfg)
                    .map(|(repr, summary)| ExtractedRepr {
                        tokens: repr.tokens,
                        node_count: summary.node_count,
                        max_depth: summary.max_depth,
                    })
                    .map_err(|e| e.to_string()),
            })
            .collect::<Vec<_>>())
    })?;
    if out.len() != records.len() || out.iter().zip(records).any(|(e, r)| e.id != r.id) {
        return Err(CliError::invariant(format!(
            "cached extraction {key} does not line up with the dataset records"
        )));
    }
    log::info!(
        "extracted {} records at depth {depth}{}",
        out.len(),
        if hit { " (cached)" } else { "" }
    );
    Ok(out)
}

pub fn extract(args: &ExtractArgs, cache: &Cache) -> CliResult<()> {
    let mut run = RunRecorder::new("extract", json!({ "args": to_json(args) }));
    run.input(&args.data.dataset);
    let mut records = load_records(&args.data)?;
    if let Some(split) = args.split {
        records = in_split(&records, split);
    }
    create_dir(&args.out)?;
    let repr_path = args.out.join("asttrans.tsv");
    let table_path = args.out.join("extract_manifest.tsv");
    let errors_path = args.out.join("errors.tsv");
    ensure_not_inputs(&[&args.data.dataset], &[&repr_path, &table_path, &errors_path])?;

    let extracted = extract_records(&records, args.depth, cache)?;
    let mut reprs = Vec::new();
    let mut table = vec!["id\ttoken_count\tnode_count\tmax_depth".to_string()];
    let mut errors = Vec::new();
    for e in &extracted {
        match &e.outcome {
            Ok(r) => {
                reprs.push(format!("{}\t{}", e.id, r.tokens.join(" ")));
                table.push(format!(
                    "{}\t{}\t{}\t{}",
                    e.id,
                    r.tokens.len(),
                    r.node_count,
                    r.max_depth
                ));
            }
            Err(msg) => errors.push(format!("{}\t{}", e.id, msg.replace(['\t', '\n'], " "))),
        }
    }
    write_lines(&repr_path, &reprs)?;
    write_lines(&table_path, &table)?;
    run.output(&repr_path);
    run.output(&table_path);
    if errors.is_empty() {
        if errors_path.exists() {
            std::fs::remove_file(&errors_path).context(errors_path.display())?;
        }
    } else {
        write_lines(&errors_path, &errors)?;
        run.output(&errors_path);
    }
    run.finish(&args.out, true)?;
    if !errors.is_empty() {
        for e in errors.iter().take(10) {
            log::error!("{e}");
        }
        return Err(CliError::data(format!(
            "{} of {} records failed to parse; see {}",
            errors.len(),
            extracted.len(),
            errors_path.display()
        )));
    }
    Ok(())
}

pub fn build_corpora(args: &BuildCorporaArgs) -> CliResult<()> {
    let mut run = RunRecorder::new("build-corpora", json!({ "args": to_json(args) }));
    run.input(&args.data.dataset);
    let records = load_records(&args.data)?;
    create_dir(&args.out)?;
    let corpora = build_parallel_corpora(&records, &ReprConfig { depth_k: args.depth });
    if corpora.asttrans.is_empty() {
        return Err(CliError::data("no record could be parsed"));
    }
    let failures_path = args.out.join("failures.tsv");
    ensure_not_inputs(&[&args.data.dataset], &[&failures_path])?;
    for path in write_parallel_files(&args.out, &corpora).context(args.out.display())? {
        run.output(&path);
    }
    if !corpora.failures.is_empty() {
        log::warn!(
            "{} records excluded from both corpora (parse failures)",
            corpora.failures.len()
        );
        write_lines(
            &failures_path,
            corpora
                .failures
                .iter()
                .map(|(id, e)| format!("{id}\t{}", e.to_string().replace(['\t', '\n'], " "))),
        )?;
        run.output(&failures_path);
    }
    run.finish(&args.out, true)?;
    Ok(())
}

pub fn stats(args: &StatsArgs) -> CliResult<()> {
    let mut run = RunRecorder::new("stats", json!({ "args": to_json(args) }));
    run.input(&args.data.dataset);
    ensure_not_inputs(&[&args.data.dataset], &[&args.out])?;
    let records = load_records(&args.data)?;
    let stats = compute_stats(&records, &ReprConfig { depth_k: args.depth });
    create_parent(&args.out)?;
    let mut text = serde_json::to_string_pretty(&stats)?;
    text.push('\n');
    std::fs::write(&args.out, text).context(args.out.display())?;
    run.output(&args.out);
    run.finish(&args.out, false)?;
    Ok(())
}

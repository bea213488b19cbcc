use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::json;

use asttrans_core::corpus::{read_parallel_files, Split, TargetKind};
use asttrans_core::metrics::{
    average_effect_mrr, crystal_bleu_4, effect_mrr, mrr, write_rq1_report, write_rq2_report, EvaluationConfig,
    OriginalDim, OriginalModel, Rq1Row, Rq2Row, SearchCase,
};
use asttrans_core::search::RankedList;
use asttrans_core::translator::{load_checkpoint, translate};

use crate::args::{EvalArgs, Rq1Args};
use crate::commands::search::{CASES, COM_RANKINGS, ORG_RANKINGS};
use crate::error::{CliError, CliResult, Context};
use crate::io::{create_parent, to_json};
use crate::manifest::{ensure_not_inputs, RunRecorder};

/// `model:dim:dir`.
fn parse_run(spec: &str) -> CliResult<(OriginalModel, OriginalDim, PathBuf)> {
    let mut parts = spec.splitn(3, ':');
    let (Some(o), Some(d), Some(dir)) = (parts.next(), parts.next(), parts.next()) else {
        return Err(CliError::usage(format!("--run {spec:?}: expected model:dim:dir")));
    };
    let o = o
        .parse()
        .map_err(|e: String| CliError::usage(format!("--run {spec:?}: {e}")))?;
    let d = d
        .parse()
        .map_err(|e: String| CliError::usage(format!("--run {spec:?}: {e}")))?;
    Ok((o, d, PathBuf::from(dir)))
}

fn read_rankings(path: &Path) -> CliResult<BTreeMap<String, Vec<String>>> {
    let text = fs::read_to_string(path).context(path.display())?;
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let (q, rest) = line
            .split_once('\t')
            .ok_or_else(|| CliError::data(format!("{} line {}: expected query<TAB>ranking", path.display(), i + 1)))?;
        out.insert(q.to_string(), rest.split(' ').map(String::from).collect());
    }
    Ok(out)
}

/// Original and combined cases of one search output directory.
pub fn load_cases(dir: &Path) -> CliResult<(Vec<SearchCase>, Vec<SearchCase>)> {
    let cases_path = dir.join(CASES);
    let text = fs::read_to_string(&cases_path).context(cases_path.display())?;
    let org = read_rankings(&dir.join(ORG_RANKINGS))?;
    let com = read_rankings(&dir.join(COM_RANKINGS))?;
    let mut out = (Vec::new(), Vec::new());
    for (i, line) in text.lines().enumerate().skip(1) {
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < 2 {
            return Err(CliError::data(format!(
                "{} line {}: too few columns",
                cases_path.display(),
                i + 1
            )));
        }
        let (q, correct) = (cols[0], cols[1]);
        for (rankings, target, name) in [(&org, &mut out.0, ORG_RANKINGS), (&com, &mut out.1, COM_RANKINGS)] {
            let order = rankings
                .get(q)
                .ok_or_else(|| CliError::data(format!("{name} in {} has no ranking for {q:?}", dir.display())))?;
            target.push(SearchCase::new(q, correct, RankedList::from_order(q, order.clone()))?);
        }
    }
    Ok(out)
}

pub fn eval(args: &EvalArgs) -> CliResult<()> {
    let mut run = RunRecorder::new("eval", json!({ "args": to_json(args) }));
    let mut runs = BTreeMap::new();
    for spec in &args.runs {
        let (o, d, dir) = parse_run(spec)?;
        if runs.insert((o, d), dir).is_some() {
            return Err(CliError::usage(format!("configuration {o}:{d} given twice")));
        }
    }
    let mut inputs = Vec::new();
    for dir in runs.values() {
        for name in [CASES, ORG_RANKINGS, COM_RANKINGS] {
            inputs.push(dir.join(name));
        }
    }
    let in_refs: Vec<&Path> = inputs.iter().map(PathBuf::as_path).collect();
    ensure_not_inputs(&in_refs, &[&args.out])?;
    for p in &inputs {
        run.input(p);
    }

    let mut rows = Vec::new();
    let mut effects = BTreeMap::new();
    for ((o, d), dir) in &runs {
        let (org, com) = load_cases(dir)?;
        let cfg = EvaluationConfig {
            original_model: *o,
            original_dim: *d,
            augmented_model: "asttrans".into(),
        };
        let effect = effect_mrr(&org, &com, &cfg).context(dir.display())?;
        effects.insert((*o, *d), effect);
        rows.push(Rq2Row {
            dataset: args.dataset_name.clone(),
            original_model: *o,
            original_dim: *d,
            mrr_org: mrr(&org)?,
            mrr_com: mrr(&com)?,
            effect_mrr: effect,
        });
    }
    let mut buf = Vec::new();
    write_rq2_report(&mut buf, &rows)?;
    if effects.len() == OriginalModel::ALL.len() * 2 {
        let avg = average_effect_mrr(&effects)?;
        writeln!(buf, "{}\taverage\tall\tNA\tNA\t{avg:.6}", args.dataset_name)?;
        run.set_resolved("average_effect_mrr", json!(avg));
    } else {
        log::info!(
            "average EffectMRR needs all four model/dimension runs; {} given",
            effects.len()
        );
    }
    create_parent(&args.out)?;
    fs::write(&args.out, buf).context(args.out.display())?;
    run.output(&args.out);
    run.finish(&args.out, false)?;
    Ok(())
}

type Segments = Vec<Vec<String>>;

/// Decoded hypotheses and references for `split`, in corpus order.
fn hypotheses(dir: &Path, kind: TargetKind, model_path: &Path, split: Split) -> CliResult<(Segments, Segments)> {
    let corpus = read_parallel_files(dir, kind).context(dir.display())?;
    let pairs: Vec<_> = corpus.split(split).collect();
    if pairs.is_empty() {
        return Err(CliError::data(format!(
            "{} has no {split} pairs for {kind}",
            dir.display()
        )));
    }
    let model = load_checkpoint(model_path).context(model_path.display())?;
    let hyps = pairs.par_iter().map(|p| translate(&model, &p.source).tokens).collect();
    let refs = pairs.iter().map(|p| p.target.clone()).collect();
    Ok((hyps, refs))
}

pub fn rq1(args: &Rq1Args) -> CliResult<()> {
    let mut run = RunRecorder::new("rq1", json!({ "args": to_json(args) }));
    run.input(&args.asttrans_model);
    run.input(&args.code_tokens_model);
    for kind in [TargetKind::CodeTokens, TargetKind::Asttrans] {
        for name in [format!("{}.src", args.split), format!("{}.{kind}.tgt", args.split)] {
            run.input(&args.corpus_dir.join(name));
        }
    }
    ensure_not_inputs(&[&args.asttrans_model, &args.code_tokens_model], &[&args.out])?;
    let mut rows = Vec::new();
    for (kind, model) in [
        (TargetKind::CodeTokens, &args.code_tokens_model),
        (TargetKind::Asttrans, &args.asttrans_model),
    ] {
        let (hyps, refs) = hypotheses(&args.corpus_dir, kind, model, args.split)?;
        let score = crystal_bleu_4(&hyps, &refs, args.trivially_shared)?;
        log::info!("{kind}: CrystalBLEU-4 {score:.4} over {} segments", hyps.len());
        rows.push(Rq1Row {
            dataset: args.dataset_name.clone(),
            target_kind: kind,
            crystal_bleu4: score,
        });
    }
    let mut buf = Vec::new();
    write_rq1_report(&mut buf, &rows)?;
    create_parent(&args.out)?;
    fs::write(&args.out, buf).context(args.out.display())?;
    run.output(&args.out);
    run.finish(&args.out, false)?;
    Ok(())
}

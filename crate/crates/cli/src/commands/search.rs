use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use asttrans_core::corpus::CodeSearchRecord;
use asttrans_core::metrics::{mrr, top_k_accuracy, SearchCase};
use asttrans_core::search::{
    build_sim_matrix, combine, concat_embeddings, pca_reduce, rank_all, CombineConfig, EmbeddingSet, EmbeddingSource,
    RankedList, SimKind, SimMatrix,
};
use asttrans_core::text_embed::{embed_tokens, load_model, EmbedError};
use asttrans_core::vecfile::write_vectors_file;

use crate::args::{SearchArgs, SearchInputs, Strategy, SweepArgs, SweepParam, Switch, SynthVectorsArgs};
use crate::cache::Cache;
use crate::commands::corpus::extract_records;
use crate::error::{CliError, CliResult, Context};
use crate::io::{create_dir, create_parent, id_list, in_split, load_records, read_id_tokens, to_json, write_lines};
use crate::manifest::{ensure_not_inputs, RunRecorder};

pub const QUERY_PREFIX: &str = "q:";
pub const CODE_PREFIX: &str = "c:";

pub fn synth_vectors(args: &SynthVectorsArgs) -> CliResult<()> {
    if args.dim == 0 {
        return Err(CliError::usage("--dim must be >= 1"));
    }
    if !(args.noise >= 0.0 && args.noise.is_finite()) {
        return Err(CliError::usage("--noise must be a finite value >= 0"));
    }
    let mut run = RunRecorder::new("synth-vectors", json!({ "args": to_json(args) }));
    run.input(&args.data.dataset);
    run.seed("vectors", args.seed);
    ensure_not_inputs(&[&args.data.dataset], &[&args.out])?;
    let records = load_records(&args.data)?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut rows = Vec::with_capacity(2 * records.len());
    for r in &records {
        let code: Vec<f64> = (0..args.dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let query: Vec<f64> = code.iter().map(|c| c + args.noise * rng.gen_range(-1.0..1.0)).collect();
        rows.push((format!("{CODE_PREFIX}{}", r.id), code));
        rows.push((format!("{QUERY_PREFIX}{}", r.id), query));
    }
    create_parent(&args.out)?;
    write_vectors_file(&args.out, args.dim, rows.iter().map(|(id, v)| (id.as_str(), v.clone())))
        .context(args.out.display())?;
    run.output(&args.out);
    run.finish(&args.out, false)?;
    Ok(())
}

/// Substitutes `{k}` in a path template.
fn at_depth(template: &str, depth: usize) -> PathBuf {
    PathBuf::from(template.replace("{k}", &depth.to_string()))
}

/// Search pool: queries and candidates are the records of one split; the
/// correct candidate of a query is the record it came from.
struct Pool {
    ids: Vec<String>,
    records: Vec<CodeSearchRecord>,
}

fn load_pool(inputs: &SearchInputs) -> CliResult<Pool> {
    let records = in_split(&load_records(&inputs.data)?, inputs.split);
    if records.len() < 2 {
        return Err(CliError::data(format!(
            "split {} has {} records; search needs at least 2",
            inputs.split,
            records.len()
        )));
    }
    Ok(Pool {
        ids: records.iter().map(|r| r.id.clone()).collect(),
        records,
    })
}

/// Query and candidate sets of one track, both keyed by bare record id.
struct Track {
    queries: EmbeddingSet,
    candidates: EmbeddingSet,
    zero_queries: usize,
    zero_candidates: usize,
}

fn rekey(set: &EmbeddingSet, prefix: &str, ids: &[String], source: EmbeddingSource) -> CliResult<EmbeddingSet> {
    let wanted: Vec<String> = ids.iter().map(|id| format!("{prefix}{id}")).collect();
    let sub = set.select(&wanted)?;
    let rows = ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.clone(), sub.row(i).to_vec()))
        .collect();
    Ok(EmbeddingSet::from_rows(rows, set.dim(), source)?)
}

fn original_track(inputs: &SearchInputs, pool: &Pool) -> CliResult<Track> {
    let path = &inputs.original_vectors;
    let all = EmbeddingSet::read(path, EmbeddingSource::ExternalOriginal).context(path.display())?;
    let have: std::collections::HashSet<&str> = all.ids().iter().map(String::as_str).collect();
    let missing: Vec<String> = pool
        .ids
        .iter()
        .flat_map(|id| [format!("{QUERY_PREFIX}{id}"), format!("{CODE_PREFIX}{id}")])
        .filter(|k| !have.contains(k.as_str()))
        .collect();
    if !missing.is_empty() {
        return Err(CliError::data(format!(
            "{} lacks vectors for {} ids: {}",
            path.display(),
            missing.len(),
            id_list(&missing)
        )));
    }
    let src = EmbeddingSource::ExternalOriginal;
    let mut queries = rekey(&all, QUERY_PREFIX, &pool.ids, src)?;
    let mut candidates = rekey(&all, CODE_PREFIX, &pool.ids, src)?;
    if let Some(k) = inputs.pca_dim {
        let (reduced, model) = pca_reduce(&candidates, k).context("--pca-dim")?;
        queries = model.transform(&queries)?;
        candidates = reduced;
    }
    Ok(Track {
        queries,
        candidates,
        zero_queries: 0,
        zero_candidates: 0,
    })
}

fn augmented_track(inputs: &SearchInputs, pool: &Pool, depth: usize, cache: &Cache) -> CliResult<Track> {
    let (Some(tr), Some(emb)) = (&inputs.translations, &inputs.embedder) else {
        return Err(CliError::usage("--augmented on needs --translations and --embedder"));
    };
    let (tr, emb) = (at_depth(tr, depth), at_depth(emb, depth));
    let model = load_model(&emb).context(emb.display())?;
    let translations = read_id_tokens(&tr)?;
    let missing: Vec<String> = pool
        .ids
        .iter()
        .filter(|id| !translations.contains_key(*id))
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(CliError::data(format!(
            "{} lacks translations for {} queries: {}",
            tr.display(),
            missing.len(),
            id_list(&missing)
        )));
    }
    let dim = model.dim();
    let vector = |tokens: &[String]| -> CliResult<Option<Vec<f64>>> {
        match embed_tokens(&model, tokens) {
            Ok(v) if v.norm() > 0.0 => Ok(Some(v.into_values())),
            Ok(_) | Err(EmbedError::EmptySequence) => Ok(None),
            Err(e) => Err(e.into()),
        }
    };
    let src = EmbeddingSource::AsttransAugmented;
    let mut zero_queries = 0;
    let mut rows = Vec::with_capacity(pool.ids.len());
    for id in &pool.ids {
        let v = vector(&translations[id])?.unwrap_or_else(|| {
            zero_queries += 1;
            vec![0.0; dim]
        });
        rows.push((id.clone(), v));
    }
    let queries = EmbeddingSet::from_rows(rows, dim, src)?;

    let mut zero_candidates = 0;
    let mut rows = Vec::with_capacity(pool.ids.len());
    for e in extract_records(&pool.records, depth, cache)? {
        let v = match &e.outcome {
            Ok(r) => vector(&r.tokens)?,
            Err(msg) => {
                log::warn!("candidate {} has no representation: {msg}", e.id);
                None
            }
        };
        let v = v.unwrap_or_else(|| {
            zero_candidates += 1;
            vec![0.0; dim]
        });
        rows.push((e.id, v));
    }
    let candidates = EmbeddingSet::from_rows(rows, dim, src)?;
    if zero_queries + zero_candidates > 0 {
        log::warn!("zero augmented vectors: {zero_queries} queries, {zero_candidates} candidates");
    }
    Ok(Track {
        queries,
        candidates,
        zero_queries,
        zero_candidates,
    })
}

struct Matrices {
    org: SimMatrix,
    aug: Option<SimMatrix>,
    com: SimMatrix,
}

fn org_matrix(org: &Track) -> CliResult<SimMatrix> {
    Ok(build_sim_matrix(&org.queries, &org.candidates, SimKind::Original)?)
}

fn aug_matrix(aug: &Track) -> CliResult<SimMatrix> {
    Ok(build_sim_matrix(&aug.queries, &aug.candidates, SimKind::Augmented)?)
}

fn matrices(
    strategy: Strategy,
    w: f64,
    org: &Track,
    org_sim: &SimMatrix,
    aug: Option<(&Track, &SimMatrix)>,
) -> CliResult<Matrices> {
    let com = match (aug, strategy) {
        (None, _) => SimMatrix {
            kind: SimKind::Combined,
            ..org_sim.clone()
        },
        (Some((_, aug_sim)), Strategy::Matrix) => combine(org_sim, aug_sim, CombineConfig::new(w)?)?,
        (Some((a, _)), Strategy::Concat) => build_sim_matrix(
            &concat_embeddings(&org.queries, &a.queries)?,
            &concat_embeddings(&org.candidates, &a.candidates)?,
            SimKind::Combined,
        )?,
    };
    Ok(Matrices {
        org: org_sim.clone(),
        aug: aug.map(|(_, m)| m.clone()),
        com,
    })
}

fn cases(rankings: &[RankedList]) -> CliResult<Vec<SearchCase>> {
    rankings
        .iter()
        .map(|r| SearchCase::new(&r.query_id, &r.query_id, r.clone()).map_err(CliError::from))
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct SearchSummary {
    pub queries: usize,
    pub candidates: usize,
    pub mrr_org: f64,
    pub mrr_com: f64,
    pub effect_mrr: f64,
    pub top_k_org: BTreeMap<usize, f64>,
    pub top_k_com: BTreeMap<usize, f64>,
    pub zero_vector_queries: usize,
    pub zero_vector_candidates: usize,
    pub zero_vector_pairs: usize,
}

struct Evaluated {
    rank_org: Vec<RankedList>,
    rank_com: Vec<RankedList>,
    summary: SearchSummary,
}

fn evaluate(m: &Matrices, aug: Option<&Track>) -> CliResult<Evaluated> {
    let rank_org = rank_all(&m.org);
    let rank_com = rank_all(&m.com);
    let (co, cc) = (cases(&rank_org)?, cases(&rank_com)?);
    let (mrr_org, mrr_com) = (mrr(&co)?, mrr(&cc)?);
    let mut top_k_org = BTreeMap::new();
    let mut top_k_com = BTreeMap::new();
    for k in [1, 5, 10] {
        top_k_org.insert(k, top_k_accuracy(&co, k)?);
        top_k_com.insert(k, top_k_accuracy(&cc, k)?);
    }
    Ok(Evaluated {
        summary: SearchSummary {
            queries: m.org.query_ids.len(),
            candidates: m.org.candidate_ids.len(),
            mrr_org,
            mrr_com,
            effect_mrr: mrr_com - mrr_org,
            top_k_org,
            top_k_com,
            zero_vector_queries: aug.map_or(0, |a| a.zero_queries),
            zero_vector_candidates: aug.map_or(0, |a| a.zero_candidates),
            zero_vector_pairs: m.com.zero_vector_pairs,
        },
        rank_org,
        rank_com,
    })
}

pub const ORG_MATRIX: &str = "org.tsv";
pub const AUG_MATRIX: &str = "aug.tsv";
pub const COM_MATRIX: &str = "combined.tsv";
pub const ORG_RANKINGS: &str = "rankings_org.tsv";
pub const COM_RANKINGS: &str = "rankings_combined.tsv";
pub const CASES: &str = "cases.tsv";
pub const SUMMARY: &str = "summary.json";

fn ranking_lines(rankings: &[RankedList]) -> Vec<String> {
    rankings
        .iter()
        .map(|r| format!("{}\t{}", r.query_id, r.candidates().join(" ")))
        .collect()
}

fn record_inputs(run: &mut RunRecorder, inputs: &SearchInputs, depths: &[usize]) {
    run.input(&inputs.data.dataset);
    run.input(&inputs.original_vectors);
    for &k in depths {
        for t in [&inputs.translations, &inputs.embedder].into_iter().flatten() {
            run.input(&at_depth(t, k));
        }
    }
}

fn input_paths(inputs: &SearchInputs, depths: &[usize]) -> Vec<PathBuf> {
    let mut v = vec![inputs.data.dataset.clone(), inputs.original_vectors.clone()];
    for &k in depths {
        v.extend(
            [&inputs.translations, &inputs.embedder]
                .into_iter()
                .flatten()
                .map(|t| at_depth(t, k)),
        );
    }
    v
}

fn guard_outputs(inputs: &SearchInputs, depths: &[usize], outputs: &[PathBuf]) -> CliResult<()> {
    let ins = input_paths(inputs, depths);
    let ins: Vec<&Path> = ins.iter().map(PathBuf::as_path).collect();
    let outs: Vec<&Path> = outputs.iter().map(PathBuf::as_path).collect();
    ensure_not_inputs(&ins, &outs)
}

pub fn search(args: &SearchArgs, cache: &Cache) -> CliResult<()> {
    let w = CombineConfig::new(args.w).context("--w")?.weight_w;
    let inputs = &args.inputs;
    let mut run = RunRecorder::new("search", json!({ "args": to_json(args) }));
    record_inputs(&mut run, inputs, &[inputs.depth]);
    let out = &args.out;
    let names = [
        ORG_MATRIX,
        AUG_MATRIX,
        COM_MATRIX,
        ORG_RANKINGS,
        COM_RANKINGS,
        CASES,
        SUMMARY,
    ];
    guard_outputs(inputs, &[inputs.depth], &names.map(|n| out.join(n)))?;

    let pool = load_pool(inputs)?;
    let org = original_track(inputs, &pool)?;
    let org_sim = org_matrix(&org)?;
    let aug = match inputs.augmented {
        Switch::On => Some(augmented_track(inputs, &pool, inputs.depth, cache)?),
        Switch::Off => None,
    };
    let aug_sim = aug.as_ref().map(aug_matrix).transpose()?;
    let m = matrices(inputs.strategy, w, &org, &org_sim, aug.as_ref().zip(aug_sim.as_ref()))?;
    let ev = evaluate(&m, aug.as_ref())?;

    create_dir(out)?;
    let mut written = Vec::new();
    let mut put = |name: &str, f: &dyn Fn(&Path) -> CliResult<()>| -> CliResult<()> {
        let p = out.join(name);
        f(&p)?;
        written.push(p);
        Ok(())
    };
    put(ORG_MATRIX, &|p| m.org.write_tsv_file(p).context(p.display()))?;
    match &m.aug {
        Some(a) => put(AUG_MATRIX, &|p| a.write_tsv_file(p).context(p.display()))?,
        None => {
            let stale = out.join(AUG_MATRIX);
            if stale.exists() {
                std::fs::remove_file(&stale).context(stale.display())?;
            }
        }
    }
    put(COM_MATRIX, &|p| m.com.write_tsv_file(p).context(p.display()))?;
    put(ORG_RANKINGS, &|p| write_lines(p, ranking_lines(&ev.rank_org)))?;
    put(COM_RANKINGS, &|p| write_lines(p, ranking_lines(&ev.rank_com)))?;
    put(CASES, &|p| {
        let mut lines = vec!["query_id\tcorrect_id\trank_org\trank_com".to_string()];
        for (o, c) in ev.rank_org.iter().zip(&ev.rank_com) {
            let id = &o.query_id;
            let (ro, rc) = (o.rank_of(id).unwrap_or(0), c.rank_of(id).unwrap_or(0));
            lines.push(format!("{id}\t{id}\t{ro}\t{rc}"));
        }
        write_lines(p, lines)
    })?;
    put(SUMMARY, &|p| {
        let mut text = serde_json::to_string_pretty(&ev.summary)?;
        text.push('\n');
        std::fs::write(p, text).context(p.display())
    })?;
    for p in &written {
        run.output(p);
    }
    log::info!(
        "MRR org {:.4}, combined {:.4}, effect {:+.4}",
        ev.summary.mrr_org,
        ev.summary.mrr_com,
        ev.summary.effect_mrr
    );
    run.finish(out, true)?;
    Ok(())
}

/// Parses `a,b,c`, `a..b` or `a..b:step` (inclusive).
pub fn parse_range(spec: &str, default_step: f64) -> CliResult<Vec<f64>> {
    let bad = || CliError::usage(format!("cannot parse range {spec:?}"));
    let num = |s: &str| s.trim().parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(bad);
    let values = if let Some((lo, rest)) = spec.split_once("..") {
        let (hi, step) = match rest.split_once(':') {
            Some((hi, step)) => (num(hi)?, num(step)?),
            None => (num(rest)?, default_step),
        };
        let lo = num(lo)?;
        if step <= 0.0 || hi < lo {
            return Err(bad());
        }
        let n = ((hi - lo) / step + 1e-9).floor() as usize;
        (0..=n).map(|i| ((lo + i as f64 * step) * 1e9).round() / 1e9).collect()
    } else {
        spec.split(',').map(num).collect::<CliResult<Vec<_>>>()?
    };
    if values.is_empty() {
        return Err(bad());
    }
    Ok(values)
}

pub const SWEEP_REPORT: &str = "sweep.tsv";

pub fn sweep(args: &SweepArgs, cache: &Cache) -> CliResult<()> {
    let inputs = &args.inputs;
    if inputs.augmented == Switch::Off {
        return Err(CliError::usage("a sweep needs --augmented on"));
    }
    let (weights, depths): (Vec<f64>, Vec<usize>) = match args.param {
        SweepParam::Weight => {
            if inputs.strategy == Strategy::Concat {
                return Err(CliError::usage("the concat strategy has no weight to sweep"));
            }
            let ws = parse_range(&args.range, 0.1)?;
            for &w in &ws {
                CombineConfig::new(w).context("--range")?;
            }
            (ws, vec![inputs.depth])
        }
        SweepParam::Depth => {
            CombineConfig::new(args.w).context("--w")?;
            let ks = parse_range(&args.range, 1.0)?;
            if ks.iter().any(|k| *k < 0.0 || k.fract() != 0.0) {
                return Err(CliError::usage("depths must be non-negative integers"));
            }
            (vec![args.w], ks.into_iter().map(|k| k as usize).collect())
        }
    };
    let mut run = RunRecorder::new("sweep", json!({ "args": to_json(args) }));
    run.set_resolved("weights", json!(weights));
    run.set_resolved("depths", json!(depths));
    record_inputs(&mut run, inputs, &depths);
    let report = args.out.join(SWEEP_REPORT);
    guard_outputs(inputs, &depths, std::slice::from_ref(&report))?;

    let pool = load_pool(inputs)?;
    let org = original_track(inputs, &pool)?;
    let org_sim = org_matrix(&org)?;
    let mut lines = vec!["param\tvalue\tMRR_org\tMRR_com\tEffectMRR".to_string()];
    for &k in &depths {
        let aug = augmented_track(inputs, &pool, k, cache)?;
        let aug_sim = aug_matrix(&aug)?;
        for &w in &weights {
            let m = matrices(inputs.strategy, w, &org, &org_sim, Some((&aug, &aug_sim)))?;
            let s = evaluate(&m, Some(&aug))?.summary;
            let value = match args.param {
                SweepParam::Weight => format!("{w}"),
                SweepParam::Depth => format!("{k}"),
            };
            let param = match args.param {
                SweepParam::Weight => "weight",
                SweepParam::Depth => "depth",
            };
            lines.push(format!(
                "{param}\t{value}\t{:.6}\t{:.6}\t{:.6}",
                s.mrr_org, s.mrr_com, s.effect_mrr
            ));
        }
    }
    create_dir(&args.out)?;
    write_lines(&report, &lines)?;
    run.output(&report);
    run.finish(&args.out, true)?;
    Ok(())
}

//! File helpers shared by the commands.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use asttrans_core::corpus::{load_dataset, CodeSearchRecord, DatasetFormat, LoadMode, Split};

use crate::args::DatasetArgs;
use crate::error::{CliError, CliResult, Context};

pub fn load_records(args: &DatasetArgs) -> CliResult<Vec<CodeSearchRecord>> {
    let mode = if args.lenient {
        LoadMode::Lenient
    } else {
        LoadMode::Strict
    };
    let report = load_dataset(&args.dataset, DatasetFormat::Jsonl, mode).context(args.dataset.display())?;
    for e in &report.errors {
        log::warn!("{} line {}: {}", args.dataset.display(), e.line, e.message);
    }
    if report.records.is_empty() {
        return Err(CliError::data(format!(
            "{} has no usable records",
            args.dataset.display()
        )));
    }
    Ok(report.records)
}

pub fn in_split(records: &[CodeSearchRecord], split: Split) -> Vec<CodeSearchRecord> {
    records.iter().filter(|r| r.split == split).cloned().collect()
}

pub fn write_lines<I, S>(path: &Path, lines: I) -> CliResult<()>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let file = File::create(path).context(path.display())?;
    let mut w = BufWriter::new(file);
    for l in lines {
        w.write_all(l.as_ref().as_bytes())?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).context(dir.display())
}

pub fn create_parent(file: &Path) -> CliResult<()> {
    match file.parent() {
        Some(p) if !p.as_os_str().is_empty() => create_dir(p),
        _ => Ok(()),
    }
}

/// Reads `id<TAB>space separated tokens` lines.
pub fn read_id_tokens(path: &Path) -> CliResult<BTreeMap<String, Vec<String>>> {
    let text = fs::read_to_string(path).context(path.display())?;
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let (id, rest) = line
            .split_once('\t')
            .ok_or_else(|| CliError::data(format!("{} line {}: expected id<TAB>tokens", path.display(), i + 1)))?;
        let tokens = rest.split_whitespace().map(String::from).collect();
        if out.insert(id.to_string(), tokens).is_some() {
            return Err(CliError::data(format!(
                "{} line {}: duplicate id {id:?}",
                path.display(),
                i + 1
            )));
        }
    }
    Ok(out)
}

/// Token sequences from a plain or `id<TAB>tokens` file; blank lines skipped.
pub fn read_token_lines(path: &Path) -> CliResult<Vec<Vec<String>>> {
    let text = fs::read_to_string(path).context(path.display())?;
    Ok(text
        .lines()
        .map(|l| l.split_once('\t').map_or(l, |(_, rest)| rest))
        .map(|l| l.split_whitespace().map(String::from).collect::<Vec<_>>())
        .filter(|t| !t.is_empty())
        .collect())
}

/// Shortened id list for error messages.
pub fn id_list(ids: &[String]) -> String {
    const SHOWN: usize = 10;
    let mut s = ids.iter().take(SHOWN).cloned().collect::<Vec<_>>().join(", ");
    if ids.len() > SHOWN {
        s.push_str(&format!(", ... ({} more)", ids.len() - SHOWN));
    }
    s
}

pub fn to_json<T: serde::Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("argument structs serialize")
}

//! JSONL dataset ingestion, parallel-corpus generation and dataset statistics.
//!
//! Input records are one JSON object per line with string fields `id`,
//! `query`, `code`, `lang` (`java` | `python`) and `split`
//! (`train` | `valid` | `test`). Extra fields are ignored.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ast_repr::{parse_code, text_seq, AstError, Language, ReprConfig};
use crate::translator::{tokenize, ParallelCorpus, ParallelPair};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Valid, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "valid" | "validation" | "dev" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeSearchRecord {
    pub id: String,
    pub query: String,
    pub code: String,
    #[serde(rename = "lang")]
    pub language: Language,
    pub split: Split,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    Jsonl,
}

impl FromStr for DatasetFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "jsonl" => Ok(DatasetFormat::Jsonl),
            other => Err(format!("unsupported dataset format {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoadMode {
    /// Fail on the first malformed line.
    Strict,
    /// Collect malformed lines into the report and keep going.
    Lenient,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}{}: {message}", field.as_ref().map(|f| format!(", field `{f}`")).unwrap_or_default())]
pub struct SchemaError {
    pub line: usize,
    pub field: Option<String>,
    pub message: String,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Schema(#[from] SchemaError),
}

#[derive(Debug, Clone, Default)]
pub struct LoadReport {
    pub records: Vec<CodeSearchRecord>,
    pub errors: Vec<SchemaError>,
}

#[derive(Deserialize)]
struct RawRecord {
    id: Option<serde_json::Value>,
    query: Option<String>,
    code: Option<String>,
    lang: Option<String>,
    split: Option<String>,
}

fn parse_line(line: &str, line_no: usize) -> Result<CodeSearchRecord, SchemaError> {
    let err = |field: Option<&str>, message: String| SchemaError {
        line: line_no,
        field: field.map(String::from),
        message,
    };
    let raw: RawRecord = serde_json::from_str(line).map_err(|e| err(None, format!("invalid JSON: {e}")))?;
    let id = match raw.id {
        Some(serde_json::Value::String(s)) => s,
        Some(serde_json::Value::Number(n)) => n.to_string(),
        Some(_) => return Err(err(Some("id"), "must be a string".into())),
        None => return Err(err(Some("id"), "missing".into())),
    };
    let non_empty = |v: Option<String>, field: &str| -> Result<String, SchemaError> {
        match v {
            Some(s) if !s.trim().is_empty() => Ok(s),
            Some(_) => Err(err(Some(field), "must not be empty".into())),
            None => Err(err(Some(field), "missing".into())),
        }
    };
    if id.trim().is_empty() {
        return Err(err(Some("id"), "must not be empty".into()));
    }
    if id.chars().any(char::is_whitespace) {
        return Err(err(Some("id"), "must not contain whitespace".into()));
    }
    let query = non_empty(raw.query, "query")?;
    let code = non_empty(raw.code, "code")?;
    let language: Language = non_empty(raw.lang, "lang")?
        .parse()
        .map_err(|e: AstError| err(Some("lang"), e.to_string()))?;
    let split: Split = non_empty(raw.split, "split")?
        .parse()
        .map_err(|e| err(Some("split"), e))?;
    Ok(CodeSearchRecord {
        id,
        query,
        code,
        language,
        split,
    })
}

pub fn load_dataset(path: &Path, format: DatasetFormat, mode: LoadMode) -> Result<LoadReport, CorpusError> {
    let DatasetFormat::Jsonl = format;
    let reader = BufReader::new(File::open(path)?);
    let mut report = LoadReport::default();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = parse_line(&line, line_no).and_then(|r| {
            if seen.contains(&r.id) {
                Err(SchemaError {
                    line: line_no,
                    field: Some("id".into()),
                    message: format!("duplicate id {:?}", r.id),
                })
            } else {
                Ok(r)
            }
        });
        match parsed {
            Ok(r) => {
                seen.insert(r.id.clone());
                report.records.push(r);
            }
            Err(e) if mode == LoadMode::Strict => return Err(e.into()),
            Err(e) => report.errors.push(e),
        }
    }
    Ok(report)
}

pub fn save_dataset(path: &Path, records: &[CodeSearchRecord]) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

/// Lowercased whitespace tokens of a natural-language query.
pub fn query_tokens(query: &str) -> Vec<String> {
    tokenize(query, true)
}

/// Terminal tokens of `code`, with whitespace inside a token (string literals)
/// replaced by `\u{2581}` so that every token survives space-joined files.
pub fn code_tokens(code: &str, language: Language) -> Result<Vec<String>, AstError> {
    let ast = parse_code(code, language)?;
    Ok(ast
        .terminal_tokens()
        .into_iter()
        .map(|t| t.split_whitespace().collect::<Vec<_>>().join("\u{2581}"))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    CodeTokens,
    Asttrans,
}

impl TargetKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TargetKind::CodeTokens => "code_tokens",
            TargetKind::Asttrans => "asttrans",
        }
    }
}

impl fmt::Display for TargetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TargetKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "code_tokens" => Ok(TargetKind::CodeTokens),
            "asttrans" => Ok(TargetKind::Asttrans),
            other => Err(format!("unknown target kind {other:?}")),
        }
    }
}

/// Query-to-code-tokens and query-to-representation corpora over the same
/// records, plus the records that could not be parsed.
#[derive(Debug, Clone)]
pub struct ParallelCorpora {
    pub code_tokens: ParallelCorpus,
    pub asttrans: ParallelCorpus,
    pub failures: Vec<(String, AstError)>,
}

impl ParallelCorpora {
    pub fn get(&self, kind: TargetKind) -> &ParallelCorpus {
        match kind {
            TargetKind::CodeTokens => &self.code_tokens,
            TargetKind::Asttrans => &self.asttrans,
        }
    }
}

pub fn build_parallel_corpora(records: &[CodeSearchRecord], cfg: &ReprConfig) -> ParallelCorpora {
    let mut code = Vec::new();
    let mut repr = Vec::new();
    let mut failures = Vec::new();
    for r in records {
        let source = query_tokens(&r.query);
        let parsed = parse_code(&r.code, r.language).and_then(|ast| {
            let reprs = text_seq(&ast, cfg.depth_k)?;
            let toks = ast
                .terminal_tokens()
                .into_iter()
                .map(|t| t.split_whitespace().collect::<Vec<_>>().join("\u{2581}"))
                .collect::<Vec<_>>();
            Ok((toks, reprs.tokens))
        });
        match parsed {
            Ok((toks, reprs)) => {
                code.push(ParallelPair {
                    id: r.id.clone(),
                    source: source.clone(),
                    target: toks,
                    split: r.split,
                });
                repr.push(ParallelPair {
                    id: r.id.clone(),
                    source,
                    target: reprs,
                    split: r.split,
                });
            }
            Err(e) => {
                log::warn!("record {} excluded: {e}", r.id);
                failures.push((r.id.clone(), e));
            }
        }
    }
    ParallelCorpora {
        code_tokens: ParallelCorpus { pairs: code },
        asttrans: ParallelCorpus { pairs: repr },
        failures,
    }
}

/// Writes `{split}.src`, `{split}.ids` and `{split}.{kind}.tgt` for each
/// split present. Line `i` of every file refers to the same record.
pub fn write_parallel_files(dir: &Path, corpora: &ParallelCorpora) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for split in Split::ALL {
        let pairs: Vec<_> = corpora.asttrans.split(split).collect();
        if pairs.is_empty() {
            continue;
        }
        let code: Vec<_> = corpora.code_tokens.split(split).collect();
        let mut files = vec![
            (
                dir.join(format!("{split}.src")),
                pairs.iter().map(|p| p.source.join(" ")).collect::<Vec<_>>(),
            ),
            (
                dir.join(format!("{split}.ids")),
                pairs.iter().map(|p| p.id.clone()).collect(),
            ),
            (
                dir.join(format!("{split}.asttrans.tgt")),
                pairs.iter().map(|p| p.target.join(" ")).collect(),
            ),
        ];
        files.push((
            dir.join(format!("{split}.code_tokens.tgt")),
            code.iter().map(|p| p.target.join(" ")).collect(),
        ));
        for (path, lines) in files {
            let mut w = BufWriter::new(File::create(&path)?);
            for l in lines {
                writeln!(w, "{l}")?;
            }
            w.flush()?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Reads the files written by [`write_parallel_files`] for one target kind.
pub fn read_parallel_files(dir: &Path, kind: TargetKind) -> Result<ParallelCorpus, CorpusError> {
    let read =
        |p: PathBuf| -> io::Result<Vec<String>> { Ok(fs::read_to_string(p)?.lines().map(String::from).collect()) };
    let mut pairs = Vec::new();
    for split in Split::ALL {
        let src_path = dir.join(format!("{split}.src"));
        if !src_path.exists() {
            continue;
        }
        let src = read(src_path)?;
        let ids = read(dir.join(format!("{split}.ids")))?;
        let tgt = read(dir.join(format!("{split}.{kind}.tgt")))?;
        if src.len() != ids.len() || src.len() != tgt.len() {
            return Err(SchemaError {
                line: src.len().min(ids.len()).min(tgt.len()) + 1,
                field: None,
                message: format!("{split} files are not aligned"),
            }
            .into());
        }
        for ((id, s), t) in ids.into_iter().zip(src).zip(tgt) {
            pairs.push(ParallelPair {
                id,
                source: tokenize(&s, false),
                target: tokenize(&t, false),
                split,
            });
        }
    }
    Ok(ParallelCorpus { pairs })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DatasetStats {
    pub split_counts: BTreeMap<Split, usize>,
    pub parsed: usize,
    pub unparsed: usize,
    pub code_token_vocab: usize,
    pub asttrans_vocab: usize,
    pub distinct_node_types: usize,
    pub mean_ast_depth: f64,
}

pub fn compute_stats(records: &[CodeSearchRecord], cfg: &ReprConfig) -> DatasetStats {
    let mut stats = DatasetStats::default();
    let mut code_vocab = BTreeSet::new();
    let mut repr_vocab = BTreeSet::new();
    let mut node_types = BTreeSet::new();
    let mut depth_sum = 0usize;
    for r in records {
        *stats.split_counts.entry(r.split).or_default() += 1;
        let ast = match parse_code(&r.code, r.language) {
            Ok(a) => a,
            Err(_) => {
                stats.unparsed += 1;
                continue;
            }
        };
        let Ok(repr) = text_seq(&ast, cfg.depth_k) else {
            stats.unparsed += 1;
            continue;
        };
        stats.parsed += 1;
        depth_sum += ast.max_depth();
        for t in ast.terminal_tokens() {
            code_vocab.insert(t.split_whitespace().collect::<Vec<_>>().join("\u{2581}"));
        }
        node_types.extend(ast.nodes().iter().map(|n| n.node_type.clone()));
        repr_vocab.extend(repr.tokens);
    }
    stats.code_token_vocab = code_vocab.len();
    stats.asttrans_vocab = repr_vocab.len();
    stats.distinct_node_types = node_types.len();
    if stats.parsed > 0 {
        stats.mean_ast_depth = depth_sum as f64 / stats.parsed as f64;
    }
    stats
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, code: &str, split: Split) -> CodeSearchRecord {
        CodeSearchRecord {
            id: id.into(),
            query: "Returns the Value".into(),
            code: code.into(),
            language: Language::Java,
            split,
        }
    }

    fn write(dir: &Path, body: &str) -> PathBuf {
        let p = dir.join("d.jsonl");
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn loads_valid_lines() {
        let dir = tempfile::tempdir().unwrap();
        let body = (0..3)
            .map(|i| {
                format!(
                    r#"{{"id":"r{i}","query":"q {i}","code":"int f(){{return {i};}}","lang":"java","split":"train"}}"#
                )
            })
            .collect::<Vec<_>>()
            .join("\n");
        let rep = load_dataset(&write(dir.path(), &body), DatasetFormat::Jsonl, LoadMode::Strict).unwrap();
        assert_eq!(rep.records.len(), 3);
        assert!(rep.errors.is_empty());
    }

    #[test]
    fn missing_code_names_line_and_field() {
        let dir = tempfile::tempdir().unwrap();
        let body = "{\"id\":\"a\",\"query\":\"q\",\"code\":\"int x;\",\"lang\":\"java\",\"split\":\"test\"}\n\
                    {\"id\":\"b\",\"query\":\"q\",\"lang\":\"java\",\"split\":\"test\"}\n";
        let p = write(dir.path(), body);
        match load_dataset(&p, DatasetFormat::Jsonl, LoadMode::Strict) {
            Err(CorpusError::Schema(e)) => {
                assert_eq!(e.line, 2);
                assert_eq!(e.field.as_deref(), Some("code"));
            }
            other => panic!("{other:?}"),
        }
        let rep = load_dataset(&p, DatasetFormat::Jsonl, LoadMode::Lenient).unwrap();
        assert_eq!(rep.records.len(), 1);
        assert_eq!(rep.errors.len(), 1);
    }

    #[test]
    fn bad_language_and_duplicates() {
        let dir = tempfile::tempdir().unwrap();
        let body = "{\"id\":\"a\",\"query\":\"q\",\"code\":\"x\",\"lang\":\"cobol\",\"split\":\"test\"}\n\
                    {\"id\":\"b\",\"query\":\"q\",\"code\":\"x\",\"lang\":\"python\",\"split\":\"test\"}\n\
                    {\"id\":\"b\",\"query\":\"q\",\"code\":\"x\",\"lang\":\"python\",\"split\":\"test\"}\n";
        let rep = load_dataset(&write(dir.path(), body), DatasetFormat::Jsonl, LoadMode::Lenient).unwrap();
        assert_eq!(rep.records.len(), 1);
        let fields: Vec<_> = rep.errors.iter().map(|e| (e.line, e.field.clone().unwrap())).collect();
        assert_eq!(fields, vec![(1, "lang".to_string()), (3, "id".to_string())]);
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let records = vec![
            rec("a", "int f() { return \"x y\".length(); }", Split::Train),
            rec("b", "void g() {}", Split::Test),
        ];
        let p = dir.path().join("out.jsonl");
        save_dataset(&p, &records).unwrap();
        let back = load_dataset(&p, DatasetFormat::Jsonl, LoadMode::Strict).unwrap();
        assert_eq!(back.records, records);
    }

    #[test]
    fn one_record_gives_one_pair_each() {
        let c = build_parallel_corpora(&[rec("a", "int f(){return 1;}", Split::Train)], &ReprConfig::default());
        assert_eq!(c.code_tokens.len(), 1);
        assert_eq!(c.asttrans.len(), 1);
        assert_eq!(c.code_tokens.pairs[0].source, c.asttrans.pairs[0].source);
        assert_eq!(c.code_tokens.pairs[0].source, vec!["returns", "the", "value"]);
    }

    #[test]
    fn unparseable_record_excluded_from_both() {
        let records = vec![
            rec("ok", "int f(){return 1;}", Split::Train),
            rec("bad", "int f( {", Split::Train),
        ];
        let c = build_parallel_corpora(&records, &ReprConfig::default());
        assert_eq!(c.failures.len(), 1);
        assert_eq!(c.failures[0].0, "bad");
        let ids = |pc: &ParallelCorpus| pc.pairs.iter().map(|p| p.id.clone()).collect::<Vec<_>>();
        assert_eq!(ids(&c.code_tokens), vec!["ok"]);
        assert_eq!(ids(&c.asttrans), vec!["ok"]);
    }

    #[test]
    fn string_literal_with_spaces_is_one_token() {
        let toks = code_tokens("String s = \"a b\";", Language::Java).unwrap();
        assert!(toks.contains(&"\"a\u{2581}b\"".to_string()), "{toks:?}");
    }

    #[test]
    fn empty_stats_are_zero() {
        let s = compute_stats(&[], &ReprConfig::default());
        assert_eq!(s, DatasetStats::default());
    }

    #[test]
    fn stats_for_single_method_match_hand_count() {
        // program > method_declaration > [integral_type > "int", identifier "f",
        //   formal_parameters > ["(", ")"], block > ["{", return_statement >
        //   ["return", decimal_integer_literal "1", ";"], "}"]]
        let s = compute_stats(&[rec("a", "int f(){return 1;}", Split::Train)], &ReprConfig::default());
        assert_eq!(s.parsed, 1);
        assert_eq!(s.mean_ast_depth, 4.0);
        // int f ( ) { return 1 ; }
        assert_eq!(s.code_token_vocab, 9);
        // program, method_declaration, integral_type, int, identifier,
        // formal_parameters, (, ), block, {, return_statement, return,
        // decimal_integer_literal, ;, }
        assert_eq!(s.distinct_node_types, 15);
        // integral_type#L + 1, method_declaration#L + 4, formal_parameters#L + 2,
        // block#L + 3, return_statement#L + 3
        assert_eq!(s.asttrans_vocab, 18);
    }
}

//! Similarity matrices over query and candidate embeddings, their weighted
//! combination, embedding concatenation, PCA reduction and ranking.

mod pca;

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{concatenate, Array2, ArrayView1, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::vecfile::{read_vectors_file, write_vectors_file, VecFileError};

pub use pca::{pca_reduce, PcaModel};

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("id order mismatch: {0}")]
    IdOrderMismatch(String),
    #[error("unknown query {0:?}")]
    UnknownQuery(String),
    #[error("target dimension {target} exceeds the maximum {max}")]
    TargetDimTooLarge { target: usize, max: usize },
    #[error("invalid embedding set: {0}")]
    InvalidSet(String),
    #[error("combination weight {0} is outside [0, 1]")]
    InvalidWeight(f64),
    #[error("similarity matrix line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    VecFile(#[from] VecFileError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingSource {
    ExternalOriginal,
    AsttransAugmented,
    Concatenated,
}

/// Row `i` of `vectors` is the embedding of `ids[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    ids: Vec<String>,
    vectors: Array2<f64>,
    source: EmbeddingSource,
}

impl EmbeddingSet {
    pub fn new(ids: Vec<String>, vectors: Array2<f64>, source: EmbeddingSource) -> Result<Self, SearchError> {
        if ids.len() != vectors.nrows() {
            return Err(SearchError::InvalidSet(format!(
                "{} ids for {} rows",
                ids.len(),
                vectors.nrows()
            )));
        }
        let mut seen = HashSet::new();
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(SearchError::InvalidSet(format!("duplicate id {id:?}")));
            }
        }
        if let Some(pos) = vectors.iter().position(|v| !v.is_finite()) {
            return Err(SearchError::InvalidSet(format!(
                "non-finite value in row {}",
                pos / vectors.ncols().max(1)
            )));
        }
        Ok(EmbeddingSet { ids, vectors, source })
    }

    pub fn from_rows(rows: Vec<(String, Vec<f64>)>, dim: usize, source: EmbeddingSource) -> Result<Self, SearchError> {
        let mut ids = Vec::with_capacity(rows.len());
        let mut flat = Vec::with_capacity(rows.len() * dim);
        for (id, v) in rows {
            if v.len() != dim {
                return Err(SearchError::DimMismatch {
                    left: dim,
                    right: v.len(),
                });
            }
            ids.push(id);
            flat.extend(v);
        }
        let n = ids.len();
        let vectors = Array2::from_shape_vec((n, dim), flat).expect("row lengths checked");
        Self::new(ids, vectors, source)
    }

    pub fn read(path: &Path, source: EmbeddingSource) -> Result<Self, SearchError> {
        let table = read_vectors_file(path)?;
        let n = table.ids.len();
        let vectors = Array2::from_shape_vec((n, table.dim), table.values).expect("reader checks row lengths");
        Self::new(table.ids, vectors, source)
    }

    pub fn write(&self, path: &Path) -> io::Result<()> {
        write_vectors_file(
            path,
            self.dim(),
            self.ids
                .iter()
                .zip(self.vectors.rows())
                .map(|(id, r)| (id.as_str(), r.to_vec())),
        )
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn vectors(&self) -> &Array2<f64> {
        &self.vectors
    }

    pub fn source(&self) -> EmbeddingSource {
        self.source
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.vectors.row(i)
    }

    /// Rows reordered to follow `ids`.
    pub fn select(&self, ids: &[String]) -> Result<Self, SearchError> {
        let index: HashMap<&str, usize> = self.ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
        let rows: Vec<usize> = ids
            .iter()
            .map(|id| {
                index
                    .get(id.as_str())
                    .copied()
                    .ok_or_else(|| SearchError::IdOrderMismatch(format!("id {id:?} not in set")))
            })
            .collect::<Result<_, _>>()?;
        Self::new(ids.to_vec(), self.vectors.select(Axis(0), &rows), self.source)
    }
}

/// Cosine of the angle between `u` and `v`, clamped to `[-1, 1]`. A zero
/// vector on either side gives 0.
pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64, SearchError> {
    if u.len() != v.len() {
        return Err(SearchError::DimMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    Ok(cosine_unchecked(u.iter().copied(), v.iter().copied()).0)
}

/// Cosine plus whether a zero vector was involved.
fn cosine_unchecked(u: impl Iterator<Item = f64>, v: impl Iterator<Item = f64>) -> (f64, bool) {
    let (mut dot, mut uu, mut vv) = (0.0, 0.0, 0.0);
    for (a, b) in u.zip(v) {
        dot += a * b;
        uu += a * a;
        vv += b * b;
    }
    if uu == 0.0 || vv == 0.0 {
        return (0.0, true);
    }
    ((dot / (uu.sqrt() * vv.sqrt())).clamp(-1.0, 1.0), false)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimKind {
    Original,
    Augmented,
    Combined,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimMatrix {
    pub query_ids: Vec<String>,
    pub candidate_ids: Vec<String>,
    /// `|queries| x |candidates|`.
    pub values: Array2<f64>,
    pub kind: SimKind,
    /// Entries where the query or candidate vector was all zeros.
    pub zero_vector_pairs: usize,
}

pub fn build_sim_matrix(
    queries: &EmbeddingSet,
    candidates: &EmbeddingSet,
    kind: SimKind,
) -> Result<SimMatrix, SearchError> {
    if queries.dim() != candidates.dim() {
        return Err(SearchError::DimMismatch {
            left: queries.dim(),
            right: candidates.dim(),
        });
    }
    let n = candidates.len();
    let rows: Vec<(Vec<f64>, usize)> = (0..queries.len())
        .into_par_iter()
        .map(|i| {
            let q = queries.row(i);
            let mut zeros = 0;
            let row = (0..n)
                .map(|j| {
                    let (s, zero) = cosine_unchecked(q.iter().copied(), candidates.row(j).iter().copied());
                    zeros += zero as usize;
                    s
                })
                .collect();
            (row, zeros)
        })
        .collect();
    let zero_vector_pairs = rows.iter().map(|r| r.1).sum();
    if zero_vector_pairs > 0 {
        log::warn!("{zero_vector_pairs} similarity entries involve a zero vector");
    }
    let flat: Vec<f64> = rows.into_iter().flat_map(|r| r.0).collect();
    Ok(SimMatrix {
        query_ids: queries.ids().to_vec(),
        candidate_ids: candidates.ids().to_vec(),
        values: Array2::from_shape_vec((queries.len(), n), flat).expect("rows have candidate length"),
        kind,
        zero_vector_pairs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CombineConfig {
    pub weight_w: f64,
}

impl Default for CombineConfig {
    fn default() -> Self {
        CombineConfig { weight_w: 0.1 }
    }
}

impl CombineConfig {
    pub fn new(weight_w: f64) -> Result<Self, SearchError> {
        if !(0.0..=1.0).contains(&weight_w) {
            return Err(SearchError::InvalidWeight(weight_w));
        }
        Ok(CombineConfig { weight_w })
    }
}

/// `org * (1 - w) + aug * w`, entry-wise.
pub fn combine(org: &SimMatrix, aug: &SimMatrix, cfg: CombineConfig) -> Result<SimMatrix, SearchError> {
    let w = CombineConfig::new(cfg.weight_w)?.weight_w;
    if org.values.dim() != aug.values.dim() {
        return Err(SearchError::ShapeMismatch(format!(
            "{:?} vs {:?}",
            org.values.dim(),
            aug.values.dim()
        )));
    }
    if org.query_ids != aug.query_ids {
        return Err(SearchError::IdOrderMismatch("query ids differ".into()));
    }
    if org.candidate_ids != aug.candidate_ids {
        return Err(SearchError::IdOrderMismatch("candidate ids differ".into()));
    }
    let mut values = org.values.clone();
    values.zip_mut_with(&aug.values, |o, &a| *o = (*o * (1.0 - w) + a * w).clamp(-1.0, 1.0));
    Ok(SimMatrix {
        query_ids: org.query_ids.clone(),
        candidate_ids: org.candidate_ids.clone(),
        values,
        kind: SimKind::Combined,
        zero_vector_pairs: org.zero_vector_pairs + aug.zero_vector_pairs,
    })
}

/// Row `i` of the result is org row `i` followed by aug row `i`.
pub fn concat_embeddings(org: &EmbeddingSet, aug: &EmbeddingSet) -> Result<EmbeddingSet, SearchError> {
    if org.ids() != aug.ids() {
        return Err(SearchError::IdOrderMismatch("embedding sets list different ids".into()));
    }
    let vectors = concatenate(Axis(1), &[org.vectors().view(), aug.vectors().view()]).expect("row counts equal");
    EmbeddingSet::new(org.ids().to_vec(), vectors, EmbeddingSource::Concatenated)
}

/// Decimal with 9 significant digits.
fn format_sig9(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let magnitude = v.abs().log10().floor() as i32;
    let decimals = (8 - magnitude).max(0) as usize;
    format!("{v:.decimals$}")
}

impl SimMatrix {
    /// TSV: a header of candidate ids after an empty cell, then one row per
    /// query with its id and scores.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> io::Result<()> {
        for c in &self.candidate_ids {
            write!(out, "\t{c}")?;
        }
        writeln!(out)?;
        for (q, row) in self.query_ids.iter().zip(self.values.rows()) {
            out.write_all(q.as_bytes())?;
            for v in row {
                write!(out, "\t{}", format_sig9(*v))?;
            }
            writeln!(out)?;
        }
        out.flush()
    }

    pub fn write_tsv_file(&self, path: &Path) -> io::Result<()> {
        self.write_tsv(BufWriter::new(File::create(path)?))
    }

    pub fn read_tsv<R: BufRead>(input: R, kind: SimKind) -> Result<SimMatrix, SearchError> {
        let mut lines = input.lines();
        let header = lines.next().ok_or(SearchError::Format {
            line: 1,
            message: "missing header".into(),
        })??;
        let mut cells = header.split('\t');
        if cells.next() != Some("") {
            return Err(SearchError::Format {
                line: 1,
                message: "header must start with an empty cell".into(),
            });
        }
        let candidate_ids: Vec<String> = cells.map(String::from).collect();
        let mut query_ids = Vec::new();
        let mut flat = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let mut cells = line.split('\t');
            query_ids.push(cells.next().unwrap_or_default().to_string());
            let before = flat.len();
            for c in cells {
                flat.push(c.parse::<f64>().map_err(|_| SearchError::Format {
                    line: i + 2,
                    message: format!("not a number: {c:?}"),
                })?);
            }
            if flat.len() - before != candidate_ids.len() {
                return Err(SearchError::Format {
                    line: i + 2,
                    message: format!("expected {} scores", candidate_ids.len()),
                });
            }
        }
        let values = Array2::from_shape_vec((query_ids.len(), candidate_ids.len()), flat).expect("row lengths checked");
        Ok(SimMatrix {
            query_ids,
            candidate_ids,
            values,
            kind,
            zero_vector_pairs: 0,
        })
    }

    pub fn read_tsv_file(path: &Path, kind: SimKind) -> Result<SimMatrix, SearchError> {
        Self::read_tsv(BufReader::new(File::open(path)?), kind)
    }
}

/// Candidates for one query, best first.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    pub query_id: String,
    candidates: Vec<String>,
    scores: Vec<f64>,
    positions: HashMap<String, usize>,
}

impl RankedList {
    /// Sorts by descending score, ties by candidate id.
    pub fn from_scores(query_id: &str, scored: Vec<(String, f64)>) -> Self {
        let mut scored = scored;
        scored.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| a.0.cmp(&b.0))
        });
        let positions = scored
            .iter()
            .enumerate()
            .map(|(i, (c, _))| (c.clone(), i + 1))
            .collect();
        let (candidates, scores) = scored.into_iter().unzip();
        RankedList {
            query_id: query_id.to_string(),
            candidates,
            scores,
            positions,
        }
    }

    /// A list in the given order, with descending placeholder scores.
    pub fn from_order(query_id: &str, order: Vec<String>) -> Self {
        let n = order.len();
        Self::from_scores(
            query_id,
            order
                .into_iter()
                .enumerate()
                .map(|(i, c)| (c, (n - i) as f64))
                .collect(),
        )
    }

    pub fn candidates(&self) -> &[String] {
        &self.candidates
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    /// 1-based rank.
    pub fn rank_of(&self, candidate: &str) -> Option<usize> {
        self.positions.get(candidate).copied()
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }
}

pub fn rank(matrix: &SimMatrix, query_id: &str) -> Result<RankedList, SearchError> {
    let row = matrix
        .query_ids
        .iter()
        .position(|q| q == query_id)
        .ok_or_else(|| SearchError::UnknownQuery(query_id.to_string()))?;
    Ok(rank_row(matrix, row))
}

fn rank_row(matrix: &SimMatrix, row: usize) -> RankedList {
    let scored = matrix
        .candidate_ids
        .iter()
        .cloned()
        .zip(matrix.values.row(row).iter().copied())
        .collect();
    RankedList::from_scores(&matrix.query_ids[row], scored)
}

/// Rankings for every query, in matrix row order.
pub fn rank_all(matrix: &SimMatrix) -> Vec<RankedList> {
    (0..matrix.query_ids.len())
        .into_par_iter()
        .map(|i| rank_row(matrix, i))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn set(ids: &[&str], v: Array2<f64>) -> EmbeddingSet {
        EmbeddingSet::new(
            ids.iter().map(|s| s.to_string()).collect(),
            v,
            EmbeddingSource::ExternalOriginal,
        )
        .unwrap()
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert_eq!(cosine_similarity(&[0.3, -2.0], &[0.3, -2.0]).unwrap(), 1.0);
        assert!(matches!(
            cosine_similarity(&[1.0], &[1.0, 2.0]),
            Err(SearchError::DimMismatch { left: 1, right: 2 })
        ));
        assert_eq!(cosine_similarity(&[0.0, 0.0], &[1.0, 2.0]).unwrap(), 0.0);
    }

    #[test]
    fn invalid_sets_rejected() {
        let ids = vec!["a".to_string(), "a".to_string()];
        assert!(EmbeddingSet::new(ids, Array2::zeros((2, 1)), EmbeddingSource::ExternalOriginal).is_err());
        let bad = array![[f64::NAN]];
        assert!(EmbeddingSet::new(vec!["a".into()], bad, EmbeddingSource::ExternalOriginal).is_err());
        assert!(EmbeddingSet::new(
            vec!["a".into()],
            Array2::zeros((2, 1)),
            EmbeddingSource::ExternalOriginal
        )
        .is_err());
    }

    #[test]
    fn self_similarity_diagonal() {
        let s = set(&["a", "b", "c"], array![[1.0, 2.0], [-1.0, 0.5], [3.0, 3.0]]);
        let m = build_sim_matrix(&s, &s, SimKind::Original).unwrap();
        for i in 0..3 {
            assert!((m.values[[i, i]] - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_vectors_are_counted() {
        let q = set(&["q"], array![[0.0, 0.0]]);
        let c = set(&["a", "b"], array![[1.0, 0.0], [0.0, 1.0]]);
        let m = build_sim_matrix(&q, &c, SimKind::Augmented).unwrap();
        assert_eq!(m.zero_vector_pairs, 2);
        assert_eq!(m.values, array![[0.0, 0.0]]);
    }

    fn matrix(values: Array2<f64>, kind: SimKind) -> SimMatrix {
        SimMatrix {
            query_ids: (0..values.nrows()).map(|i| format!("q{i}")).collect(),
            candidate_ids: (0..values.ncols()).map(|i| format!("c{i}")).collect(),
            values,
            kind,
            zero_vector_pairs: 0,
        }
    }

    #[test]
    fn combine_examples() {
        let org = matrix(array![[0.8, -0.3]], SimKind::Original);
        let aug = matrix(array![[0.4, 0.9]], SimKind::Augmented);
        let w0 = combine(&org, &aug, CombineConfig::new(0.0).unwrap()).unwrap();
        assert_eq!(w0.values, org.values);
        let w1 = combine(&org, &aug, CombineConfig::new(1.0).unwrap()).unwrap();
        assert_eq!(w1.values, aug.values);
        let c = combine(&org, &aug, CombineConfig::default()).unwrap();
        assert!((c.values[[0, 0]] - 0.76).abs() < 1e-12);
        assert_eq!(c.kind, SimKind::Combined);
    }

    #[test]
    fn combine_errors() {
        let org = matrix(array![[0.8, -0.3]], SimKind::Original);
        let wide = matrix(array![[0.8, -0.3, 0.1]], SimKind::Augmented);
        assert!(matches!(
            combine(&org, &wide, CombineConfig::default()),
            Err(SearchError::ShapeMismatch(_))
        ));
        let mut renamed = org.clone();
        renamed.candidate_ids.swap(0, 1);
        assert!(matches!(
            combine(&org, &renamed, CombineConfig::default()),
            Err(SearchError::IdOrderMismatch(_))
        ));
        assert!(CombineConfig::new(1.5).is_err());
    }

    #[test]
    fn concat_example() {
        let org = set(&["x"], array![[1.0, 2.0]]);
        let aug = set(&["x"], array![[3.0, 4.0]]);
        let c = concat_embeddings(&org, &aug).unwrap();
        assert_eq!(c.vectors(), &array![[1.0, 2.0, 3.0, 4.0]]);
        let empty = set(&["x"], Array2::zeros((1, 0)));
        assert_eq!(concat_embeddings(&org, &empty).unwrap().vectors(), org.vectors());
        let other = set(&["y"], array![[3.0, 4.0]]);
        assert!(matches!(
            concat_embeddings(&org, &other),
            Err(SearchError::IdOrderMismatch(_))
        ));
    }

    #[test]
    fn rank_examples() {
        let m = SimMatrix {
            query_ids: vec!["q".into()],
            candidate_ids: vec!["c1".into(), "c2".into(), "c3".into()],
            values: array![[0.2, 0.9, 0.5]],
            kind: SimKind::Original,
            zero_vector_pairs: 0,
        };
        let r = rank(&m, "q").unwrap();
        assert_eq!(r.candidates(), ["c2", "c3", "c1"]);
        assert_eq!(r.rank_of("c2"), Some(1));
        assert!(matches!(rank(&m, "nope"), Err(SearchError::UnknownQuery(_))));

        let flat = SimMatrix {
            candidate_ids: vec!["b".into(), "c".into(), "a".into()],
            values: array![[0.5, 0.5, 0.5]],
            ..m
        };
        assert_eq!(rank(&flat, "q").unwrap().candidates(), ["a", "b", "c"]);
    }

    #[test]
    fn sig9_formatting() {
        assert_eq!(format_sig9(0.974631846), "0.974631846");
        assert_eq!(format_sig9(1.0), "1.00000000");
        assert_eq!(format_sig9(-0.0123456789123), "-0.0123456789");
        assert_eq!(format_sig9(0.0), "0");
    }

    #[test]
    fn tsv_round_trip() {
        let m = matrix(array![[0.123456789, -1.0], [0.5, 0.0]], SimKind::Combined);
        let mut buf = Vec::new();
        m.write_tsv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("\tc0\tc1\nq0\t0.123456789\t-1.00000000\n"), "{text}");
        let back = SimMatrix::read_tsv(&buf[..], SimKind::Combined).unwrap();
        assert_eq!(back, m);
    }
}

//! Retrieval metrics (Top-K accuracy, MRR, EffectMRR and its average over the
//! four original-embedding configurations) and CrystalBLEU-4.

mod bleu;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::TargetKind;
use crate::search::RankedList;

pub use bleu::{crystal_bleu_4, trivially_shared_ngrams, Ngram, DEFAULT_TRIVIALLY_SHARED};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("no search cases")]
    EmptyCaseSet,
    #[error("k must be >= 1")]
    InvalidK,
    #[error("case sets differ: {0}")]
    CaseSetMismatch(String),
    #[error("missing configuration {0}")]
    MissingConfiguration(String),
    #[error("{hypotheses} hypotheses for {references} references")]
    LengthMismatch { hypotheses: usize, references: usize },
    #[error("correct candidate {candidate:?} is not ranked for query {query:?}")]
    CorrectNotRanked { query: String, candidate: String },
}

/// One query, its ground-truth candidate and the ranking produced for it.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchCase {
    pub query_id: String,
    pub correct_candidate_id: String,
    pub ranked: RankedList,
    correct_rank: usize,
}

impl SearchCase {
    pub fn new(query_id: &str, correct_candidate_id: &str, ranked: RankedList) -> Result<Self, MetricsError> {
        let correct_rank = ranked
            .rank_of(correct_candidate_id)
            .ok_or_else(|| MetricsError::CorrectNotRanked {
                query: query_id.to_string(),
                candidate: correct_candidate_id.to_string(),
            })?;
        Ok(SearchCase {
            query_id: query_id.to_string(),
            correct_candidate_id: correct_candidate_id.to_string(),
            ranked,
            correct_rank,
        })
    }

    /// 1-based rank of the correct candidate.
    pub fn correct_rank(&self) -> usize {
        self.correct_rank
    }
}

pub fn top_k_accuracy(cases: &[SearchCase], k: usize) -> Result<f64, MetricsError> {
    if k == 0 {
        return Err(MetricsError::InvalidK);
    }
    if cases.is_empty() {
        return Err(MetricsError::EmptyCaseSet);
    }
    let hits = cases.iter().filter(|c| c.correct_rank <= k).count();
    Ok(hits as f64 / cases.len() as f64)
}

/// Mean reciprocal rank of the correct candidate.
pub fn mrr(cases: &[SearchCase]) -> Result<f64, MetricsError> {
    if cases.is_empty() {
        return Err(MetricsError::EmptyCaseSet);
    }
    Ok(cases.iter().map(|c| 1.0 / c.correct_rank as f64).sum::<f64>() / cases.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OriginalModel {
    Gcb,
    #[serde(rename = "unixcoder")]
    UniXcoder,
}

impl OriginalModel {
    pub const ALL: [OriginalModel; 2] = [OriginalModel::Gcb, OriginalModel::UniXcoder];

    pub fn as_str(self) -> &'static str {
        match self {
            OriginalModel::Gcb => "gcb",
            OriginalModel::UniXcoder => "unixcoder",
        }
    }
}

impl fmt::Display for OriginalModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OriginalModel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "gcb" | "graphcodebert" => Ok(OriginalModel::Gcb),
            "unixcoder" | "unix" => Ok(OriginalModel::UniXcoder),
            other => Err(format!("unknown original model {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OriginalDim {
    #[serde(rename = "20")]
    D20,
    #[serde(rename = "768")]
    D768,
}

impl OriginalDim {
    pub const ALL: [OriginalDim; 2] = [OriginalDim::D20, OriginalDim::D768];

    pub fn size(self) -> usize {
        match self {
            OriginalDim::D20 => 20,
            OriginalDim::D768 => 768,
        }
    }
}

impl fmt::Display for OriginalDim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.size())
    }
}

impl FromStr for OriginalDim {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "20" => Ok(OriginalDim::D20),
            "768" => Ok(OriginalDim::D768),
            other => Err(format!("original dimension must be 20 or 768, got {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationConfig {
    pub original_model: OriginalModel,
    pub original_dim: OriginalDim,
    pub augmented_model: String,
}

fn case_map(cases: &[SearchCase]) -> HashMap<&str, &str> {
    cases
        .iter()
        .map(|c| (c.query_id.as_str(), c.correct_candidate_id.as_str()))
        .collect()
}

/// `MRR_com - MRR_org`; positive when the augmented search ranks the correct
/// candidates higher.
pub fn effect_mrr(
    org_cases: &[SearchCase],
    com_cases: &[SearchCase],
    cfg: &EvaluationConfig,
) -> Result<f64, MetricsError> {
    let (org, com) = (case_map(org_cases), case_map(com_cases));
    if org.len() != org_cases.len() || com.len() != com_cases.len() {
        return Err(MetricsError::CaseSetMismatch("duplicate query ids".into()));
    }
    if org != com {
        return Err(MetricsError::CaseSetMismatch(format!(
            "original and combined cases for {}/{} cover different queries or answers",
            cfg.original_model, cfg.original_dim
        )));
    }
    Ok(mrr(com_cases)? - mrr(org_cases)?)
}

/// Mean EffectMRR over the four (model, dimension) configurations.
pub fn average_effect_mrr(effects: &BTreeMap<(OriginalModel, OriginalDim), f64>) -> Result<f64, MetricsError> {
    let mut sum = 0.0;
    for o in OriginalModel::ALL {
        for d in OriginalDim::ALL {
            sum += effects
                .get(&(o, d))
                .ok_or_else(|| MetricsError::MissingConfiguration(format!("{o}/{d}")))?;
        }
    }
    Ok(sum / 4.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rq2Row {
    pub dataset: String,
    pub original_model: OriginalModel,
    pub original_dim: OriginalDim,
    pub mrr_org: f64,
    pub mrr_com: f64,
    pub effect_mrr: f64,
}

pub fn write_rq2_report<W: Write>(mut out: W, rows: &[Rq2Row]) -> io::Result<()> {
    writeln!(out, "dataset\to\td\tMRR_org\tMRR_com\tEffectMRR")?;
    for r in rows {
        writeln!(
            out,
            "{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}",
            r.dataset, r.original_model, r.original_dim, r.mrr_org, r.mrr_com, r.effect_mrr
        )?;
    }
    out.flush()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rq1Row {
    pub dataset: String,
    pub target_kind: TargetKind,
    pub crystal_bleu4: f64,
}

/// The Meteor column is always `NA`.
pub fn write_rq1_report<W: Write>(mut out: W, rows: &[Rq1Row]) -> io::Result<()> {
    writeln!(out, "dataset\ttarget_kind\tCrystalBLEU4\tMeteor")?;
    for r in rows {
        writeln!(out, "{}\t{}\t{:.6}\tNA", r.dataset, r.target_kind, r.crystal_bleu4)?;
    }
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// A case whose correct candidate sits at `rank` in a pool of `pool`.
    fn case(q: &str, rank: usize, pool: usize) -> SearchCase {
        let mut order: Vec<String> = (0..pool).map(|i| format!("x{i:03}")).collect();
        order[rank - 1] = "gold".into();
        SearchCase::new(q, "gold", RankedList::from_order(q, order)).unwrap()
    }

    fn cases(ranks: &[usize]) -> Vec<SearchCase> {
        ranks
            .iter()
            .enumerate()
            .map(|(i, &r)| case(&format!("q{i}"), r, 10))
            .collect()
    }

    fn cfg() -> EvaluationConfig {
        EvaluationConfig {
            original_model: OriginalModel::Gcb,
            original_dim: OriginalDim::D768,
            augmented_model: "asttrans".into(),
        }
    }

    #[test]
    fn correct_rank_is_looked_up() {
        assert_eq!(case("q", 4, 10).correct_rank(), 4);
        let r = RankedList::from_order("q", vec!["a".into()]);
        assert!(matches!(
            SearchCase::new("q", "b", r),
            Err(MetricsError::CorrectNotRanked { .. })
        ));
    }

    #[test]
    fn top_k_examples() {
        assert_eq!(top_k_accuracy(&cases(&[1, 1]), 1).unwrap(), 1.0);
        assert!((top_k_accuracy(&cases(&[1, 3, 5]), 3).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(top_k_accuracy(&cases(&[7, 10, 2]), 10).unwrap(), 1.0);
        assert_eq!(top_k_accuracy(&[], 1), Err(MetricsError::EmptyCaseSet));
        assert_eq!(top_k_accuracy(&cases(&[1]), 0), Err(MetricsError::InvalidK));
    }

    #[test]
    fn mrr_examples() {
        assert!((mrr(&cases(&[1, 2, 4])).unwrap() - 1.75 / 3.0).abs() < 1e-15);
        assert_eq!(mrr(&cases(&[1, 1, 1])).unwrap(), 1.0);
        assert_eq!(mrr(&[]), Err(MetricsError::EmptyCaseSet));
    }

    #[test]
    fn effect_examples() {
        let org = cases(&[2, 2]);
        assert_eq!(effect_mrr(&org, &org, &cfg()).unwrap(), 0.0);
        assert_eq!(effect_mrr(&org, &cases(&[1, 1]), &cfg()).unwrap(), 0.5);
        assert_eq!(effect_mrr(&cases(&[1, 1]), &org, &cfg()).unwrap(), -0.5);
        let mut other = cases(&[1, 1]);
        other[1].query_id = "elsewhere".into();
        assert!(matches!(
            effect_mrr(&org, &other, &cfg()),
            Err(MetricsError::CaseSetMismatch(_))
        ));
    }

    #[test]
    fn average_requires_all_four() {
        let mut m = BTreeMap::new();
        m.insert((OriginalModel::Gcb, OriginalDim::D20), 1.0);
        m.insert((OriginalModel::Gcb, OriginalDim::D768), 2.0);
        m.insert((OriginalModel::UniXcoder, OriginalDim::D20), 3.0);
        assert!(matches!(
            average_effect_mrr(&m),
            Err(MetricsError::MissingConfiguration(_))
        ));
        m.insert((OriginalModel::UniXcoder, OriginalDim::D768), 4.0);
        assert_eq!(average_effect_mrr(&m).unwrap(), 2.5);
    }

    #[test]
    fn reports_have_expected_headers() {
        let mut buf = Vec::new();
        write_rq2_report(
            &mut buf,
            &[Rq2Row {
                dataset: "desk".into(),
                original_model: OriginalModel::UniXcoder,
                original_dim: OriginalDim::D20,
                mrr_org: 0.5,
                mrr_com: 0.75,
                effect_mrr: 0.25,
            }],
        )
        .unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "dataset\to\td\tMRR_org\tMRR_com\tEffectMRR\ndesk\tunixcoder\t20\t0.500000\t0.750000\t0.250000\n"
        );
        let mut buf = Vec::new();
        write_rq1_report(
            &mut buf,
            &[Rq1Row {
                dataset: "desk".into(),
                target_kind: TargetKind::Asttrans,
                crystal_bleu4: 0.1,
            }],
        )
        .unwrap();
        assert!(String::from_utf8(buf)
            .unwrap()
            .ends_with("desk\tasttrans\t0.100000\tNA\n"));
    }
}

//! Typed syntax trees and their depth-k non-terminal token representation.
//!
//! Every terminal is mapped to a representative ancestor at depth `k` (or its
//! parent when it is shallower); the distinct representatives, in leaf order,
//! are each written as `type#L child_type#R ...`.

mod ast;
mod grammar;
mod repr;

use thiserror::Error;

pub use ast::{Ast, AstBuilder, AstNode, Language, NodeId};
pub use grammar::{grammar_for, parse_code, GrammarAdapter};
pub use repr::{ancestors, dep_rep, node_seq, text_rep, text_seq, AstTransRepr, ReprConfig, LEFT_MARKER, RIGHT_MARKER};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AstError {
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("unsupported language: {0}")]
    UnsupportedLanguage(String),
    #[error("node {0} is not in the tree")]
    NodeNotInTree(NodeId),
    #[error("node {0} is a terminal; a non-terminal is required")]
    TerminalNodeGiven(NodeId),
    #[error("node {0} is not a terminal")]
    NotATerminal(NodeId),
    #[error("malformed tree: {0}")]
    Malformed(String),
}

/// Per-candidate extraction summary, one row of the extraction manifest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractionSummary {
    pub token_count: usize,
    pub node_count: usize,
    pub max_depth: usize,
}

/// Parses `source` and returns its representation at `cfg.depth_k`.
pub fn extract(
    source: &str,
    language: Language,
    cfg: &ReprConfig,
) -> Result<(AstTransRepr, ExtractionSummary), AstError> {
    let ast = parse_code(source, language)?;
    let repr = text_seq(&ast, cfg.depth_k)?;
    let summary = ExtractionSummary {
        token_count: repr.len(),
        node_count: ast.len(),
        max_depth: ast.max_depth(),
    };
    Ok((repr, summary))
}

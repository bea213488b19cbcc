//! Code-search augmentation from AST non-terminal representations.
//!
//! Candidates are summarized by the non-terminal nodes of their syntax tree at
//! a fixed depth ([`ast_repr`]). A sequence-to-sequence model ([`translator`])
//! learns to predict that summary from a natural-language query, both sides are
//! vectorized with a skip-gram embedder ([`text_embed`]), and the resulting
//! similarity matrix is blended with an external model's matrix ([`search`]).
//! [`metrics`] scores retrieval and translation; [`corpus`] handles datasets.

pub mod ast_repr;
pub mod corpus;
pub mod metrics;
pub mod search;
pub mod text_embed;
pub mod translator;
pub mod vecfile;

//! Tree-sitter adapters. Adding a language means adding a [`GrammarAdapter`]
//! impl and a [`Language`] variant; nothing downstream inspects grammar details.

use tree_sitter::{Node, Parser};

use super::ast::{Ast, AstBuilder, Language, NodeId};
use super::AstError;

pub trait GrammarAdapter: Sync {
    fn ts_language(&self) -> tree_sitter::Language;

    /// Node kinds kept as a single terminal even though the grammar exposes
    /// children (string literals and similar).
    fn atomic_kinds(&self) -> &'static [&'static str];
}

struct JavaGrammar;
struct PythonGrammar;

impl GrammarAdapter for JavaGrammar {
    fn ts_language(&self) -> tree_sitter::Language {
        tree_sitter_java::LANGUAGE.into()
    }

    fn atomic_kinds(&self) -> &'static [&'static str] {
        &["string_literal", "text_block", "character_literal"]
    }
}

impl GrammarAdapter for PythonGrammar {
    fn ts_language(&self) -> tree_sitter::Language {
        tree_sitter_python::LANGUAGE.into()
    }

    fn atomic_kinds(&self) -> &'static [&'static str] {
        &["string"]
    }
}

pub fn grammar_for(language: Language) -> &'static dyn GrammarAdapter {
    match language {
        Language::Java => &JavaGrammar,
        Language::Python => &PythonGrammar,
    }
}

/// Owned intermediate tree; ERROR subtrees, MISSING tokens, extras (comments)
/// and zero-width tokens are already removed.
enum Pending {
    Leaf { kind: String, text: String },
    Inner { kind: String, children: Vec<Pending> },
}

struct Converter<'a> {
    source: &'a str,
    atomic: &'static [&'static str],
    skipped_errors: usize,
    first_error: Option<usize>,
}

impl Converter<'_> {
    fn convert(&mut self, node: Node<'_>) -> Option<Pending> {
        if node.is_error() {
            self.skipped_errors += 1;
            self.first_error.get_or_insert(node.start_byte());
            return None;
        }
        if node.is_missing() {
            self.first_error.get_or_insert(node.start_byte());
            return None;
        }
        if node.is_extra() {
            return None;
        }
        let kind = node.kind().to_string();
        if node.child_count() == 0 || self.atomic.contains(&node.kind()) {
            let range = node.byte_range();
            if range.is_empty() {
                return None;
            }
            return Some(Pending::Leaf {
                kind,
                text: self.source[range].to_string(),
            });
        }
        let mut cursor = node.walk();
        let children: Vec<Pending> = node
            .children(&mut cursor)
            .collect::<Vec<_>>()
            .into_iter()
            .filter_map(|c| self.convert(c))
            .collect();
        if children.is_empty() {
            return None;
        }
        Some(Pending::Inner { kind, children })
    }
}

fn attach(builder: &mut AstBuilder, parent: NodeId, children: Vec<Pending>) {
    for child in children {
        match child {
            Pending::Leaf { kind, text } => {
                builder.leaf(parent, &kind, &text);
            }
            Pending::Inner { kind, children } => {
                let id = builder.node(parent, &kind);
                attach(builder, id, children);
            }
        }
    }
}

/// Parses `source` into an [`Ast`].
///
/// Comments are dropped. ERROR regions of a partial parse are skipped; the
/// parse only fails when nothing well-formed is left.
pub fn parse_code(source: &str, language: Language) -> Result<Ast, AstError> {
    if source.trim().is_empty() {
        return Err(AstError::Parse {
            offset: 0,
            message: "empty source".into(),
        });
    }
    let grammar = grammar_for(language);
    let mut parser = Parser::new();
    parser
        .set_language(&grammar.ts_language())
        .map_err(|e| AstError::Parse {
            offset: 0,
            message: format!("grammar load failed: {e}"),
        })?;
    let tree = parser.parse(source, None).ok_or(AstError::Parse {
        offset: 0,
        message: "parser produced no tree".into(),
    })?;

    let mut conv = Converter {
        source,
        atomic: grammar.atomic_kinds(),
        skipped_errors: 0,
        first_error: None,
    };
    let root = tree.root_node();
    let pending = if root.is_error() {
        conv.first_error = Some(root.start_byte());
        None
    } else {
        conv.convert(root)
    };
    let (kind, children) = match pending {
        Some(Pending::Inner { kind, children }) => (kind, children),
        _ => {
            return Err(AstError::Parse {
                offset: conv.first_error.unwrap_or(0),
                message: "no well-formed syntax found".into(),
            })
        }
    };
    let mut builder = AstBuilder::new(language, &kind);
    let root_id = builder.root();
    attach(&mut builder, root_id, children);
    Ok(builder.build()?.with_skipped_errors(conv.skipped_errors))
}

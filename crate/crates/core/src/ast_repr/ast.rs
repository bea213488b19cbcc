use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::AstError;

/// Source languages with a bundled grammar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    Java,
    Python,
}

impl Language {
    pub fn as_str(self) -> &'static str {
        match self {
            Language::Java => "java",
            Language::Python => "python",
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Language {
    type Err = AstError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "java" => Ok(Language::Java),
            "python" | "py" => Ok(Language::Python),
            other => Err(AstError::UnsupportedLanguage(other.to_string())),
        }
    }
}

/// Index of a node inside its owning [`Ast`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AstNode {
    pub id: NodeId,
    /// Grammar production name, or the literal itself for anonymous tokens (`&&`, `;`).
    pub node_type: String,
    pub depth: usize,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
    /// Source text, present on terminals only.
    pub text: Option<String>,
}

impl AstNode {
    pub fn is_terminal(&self) -> bool {
        self.children.is_empty()
    }
}

/// An immutable concrete-syntax tree.
///
/// Invariants enforced at construction: a single root at depth 0, child depth
/// is parent depth plus one, terminals are exactly the childless nodes and
/// carry text, and the root itself is non-terminal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ast {
    nodes: Vec<AstNode>,
    leaves: Vec<NodeId>,
    language: Language,
    skipped_error_regions: usize,
}

impl Ast {
    pub fn root(&self) -> NodeId {
        NodeId(0)
    }

    pub fn language(&self) -> Language {
        self.language
    }

    pub fn node(&self, id: NodeId) -> Result<&AstNode, AstError> {
        self.nodes.get(id.0).ok_or(AstError::NodeNotInTree(id))
    }

    pub fn nodes(&self) -> &[AstNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Terminal nodes in left-to-right order.
    pub fn leaves(&self) -> &[NodeId] {
        &self.leaves
    }

    /// Source text of the terminals, in order.
    pub fn terminal_tokens(&self) -> Vec<&str> {
        self.leaves
            .iter()
            .map(|id| self.nodes[id.0].text.as_deref().unwrap_or(""))
            .collect()
    }

    pub fn max_depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    /// Number of ERROR subtrees dropped while converting a partial parse.
    pub fn skipped_error_regions(&self) -> usize {
        self.skipped_error_regions
    }

    /// First node of the given type in pre-order.
    pub fn find_first(&self, node_type: &str) -> Option<NodeId> {
        self.nodes.iter().find(|n| n.node_type == node_type).map(|n| n.id)
    }

    /// Copy of the subtree rooted at `id`, re-rooted at depth 0.
    pub fn subtree(&self, id: NodeId) -> Result<Ast, AstError> {
        let top = self.node(id)?;
        if top.is_terminal() {
            return Err(AstError::TerminalNodeGiven(id));
        }
        let mut builder = AstBuilder::new(self.language, &top.node_type);
        let mut stack: Vec<(NodeId, NodeId)> = top.children.iter().rev().map(|c| (*c, builder.root())).collect();
        while let Some((src, parent)) = stack.pop() {
            let n = &self.nodes[src.0];
            match &n.text {
                Some(text) if n.is_terminal() => {
                    builder.leaf(parent, &n.node_type, text);
                }
                _ => {
                    let id = builder.node(parent, &n.node_type);
                    stack.extend(n.children.iter().rev().map(|c| (*c, id)));
                }
            }
        }
        builder.build()
    }

    /// Indented s-expression-like dump, one node per line.
    pub fn pretty(&self) -> String {
        let mut out = String::new();
        for n in &self.nodes {
            out.push_str(&"  ".repeat(n.depth));
            out.push_str(&n.node_type);
            if let Some(t) = &n.text {
                if t != &n.node_type {
                    out.push_str(&format!(" {t:?}"));
                }
            }
            out.push('\n');
        }
        out
    }

    pub(crate) fn with_skipped_errors(mut self, count: usize) -> Self {
        self.skipped_error_regions = count;
        self
    }
}

/// Incremental constructor for hand-built trees and grammar adapters.
///
/// Children are ordered by insertion; the parse adapter inserts in pre-order so
/// parsed trees get pre-order ids.
#[derive(Debug)]
pub struct AstBuilder {
    nodes: Vec<AstNode>,
    language: Language,
}

impl AstBuilder {
    pub fn new(language: Language, root_type: &str) -> Self {
        AstBuilder {
            nodes: vec![AstNode {
                id: NodeId(0),
                node_type: root_type.to_string(),
                depth: 0,
                parent: None,
                children: Vec::new(),
                text: None,
            }],
            language,
        }
    }

    pub fn root(&self) -> NodeId {
        NodeId(0)
    }

    /// Adds a non-terminal under `parent`.
    pub fn node(&mut self, parent: NodeId, node_type: &str) -> NodeId {
        self.push(parent, node_type, None)
    }

    /// Adds a terminal carrying `text` under `parent`.
    pub fn leaf(&mut self, parent: NodeId, node_type: &str, text: &str) -> NodeId {
        self.push(parent, node_type, Some(text.to_string()))
    }

    fn push(&mut self, parent: NodeId, node_type: &str, text: Option<String>) -> NodeId {
        let id = NodeId(self.nodes.len());
        let depth = self.nodes[parent.0].depth + 1;
        assert!(
            self.nodes[parent.0].text.is_none(),
            "cannot attach children to terminal {parent}"
        );
        self.nodes[parent.0].children.push(id);
        self.nodes.push(AstNode {
            id,
            node_type: node_type.to_string(),
            depth,
            parent: Some(parent),
            children: Vec::new(),
            text,
        });
        id
    }

    pub fn build(self) -> Result<Ast, AstError> {
        if self.nodes[0].children.is_empty() {
            return Err(AstError::Malformed("root has no children".into()));
        }
        for n in &self.nodes {
            if n.children.is_empty() && n.text.is_none() {
                return Err(AstError::Malformed(format!(
                    "non-terminal {} ({}) has no children",
                    n.id, n.node_type
                )));
            }
        }
        let mut leaves = Vec::new();
        let mut stack = vec![NodeId(0)];
        while let Some(id) = stack.pop() {
            let n = &self.nodes[id.0];
            if n.is_terminal() {
                leaves.push(id);
            } else {
                stack.extend(n.children.iter().rev());
            }
        }
        Ok(Ast {
            nodes: self.nodes,
            leaves,
            language: self.language,
            skipped_error_regions: 0,
        })
    }
}

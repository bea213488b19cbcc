use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::ast::{Ast, NodeId};
use super::AstError;

pub const LEFT_MARKER: &str = "#L";
pub const RIGHT_MARKER: &str = "#R";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ReprConfig {
    pub depth_k: usize,
}

impl Default for ReprConfig {
    fn default() -> Self {
        ReprConfig { depth_k: 5 }
    }
}

/// Token sequence describing an AST by its non-terminal nodes at a fixed depth.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AstTransRepr {
    pub tokens: Vec<String>,
    /// Contributing non-terminals, one per `#L` token.
    pub node_ids: Vec<NodeId>,
}

impl AstTransRepr {
    /// Single-line serialization, tokens joined by one space.
    pub fn to_line(&self) -> String {
        self.tokens.join(" ")
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

fn terminal(a: &Ast, t: NodeId) -> Result<&super::AstNode, AstError> {
    let node = a.node(t)?;
    if !node.is_terminal() {
        return Err(AstError::NotATerminal(t));
    }
    Ok(node)
}

/// Path from the root down to the parent of terminal `t`; its length equals
/// the depth of `t`.
pub fn ancestors(a: &Ast, t: NodeId) -> Result<Vec<NodeId>, AstError> {
    let node = terminal(a, t)?;
    let mut path = Vec::with_capacity(node.depth);
    let mut cur = node.parent;
    while let Some(id) = cur {
        path.push(id);
        cur = a.node(id)?.parent;
    }
    path.reverse();
    Ok(path)
}

/// Representative ancestor of terminal `t` at depth `k`: the ancestor sitting
/// exactly at depth `k` when `t` is deeper than `k`, otherwise `t`'s parent.
pub fn dep_rep(a: &Ast, t: NodeId, k: usize) -> Result<NodeId, AstError> {
    let node = terminal(a, t)?;
    let parent = node
        .parent
        .ok_or_else(|| AstError::Malformed(format!("terminal {t} has no parent")))?;
    if node.depth <= k {
        return Ok(parent);
    }
    let mut cur = parent;
    loop {
        let n = a.node(cur)?;
        if n.depth == k {
            return Ok(cur);
        }
        cur = n
            .parent
            .ok_or_else(|| AstError::Malformed(format!("broken parent chain at {cur}")))?;
    }
}

/// `type#L` followed by `child_type#R` for each child in order.
pub fn text_rep(a: &Ast, n: NodeId) -> Result<Vec<String>, AstError> {
    let node = a.node(n)?;
    if node.is_terminal() {
        return Err(AstError::TerminalNodeGiven(n));
    }
    let mut out = Vec::with_capacity(node.children.len() + 1);
    out.push(format!("{}{LEFT_MARKER}", node.node_type));
    for c in &node.children {
        out.push(format!("{}{RIGHT_MARKER}", a.node(*c)?.node_type));
    }
    Ok(out)
}

/// Distinct depth-`k` representatives of all leaves, in order of first
/// occurrence along the leaves.
pub fn node_seq(a: &Ast, k: usize) -> Result<Vec<NodeId>, AstError> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for &leaf in a.leaves() {
        let rep = dep_rep(a, leaf, k)?;
        if seen.insert(rep) {
            out.push(rep);
        }
    }
    Ok(out)
}

pub fn text_seq(a: &Ast, k: usize) -> Result<AstTransRepr, AstError> {
    let node_ids = node_seq(a, k)?;
    let mut tokens = Vec::new();
    for &n in &node_ids {
        tokens.extend(text_rep(a, n)?);
    }
    Ok(AstTransRepr { tokens, node_ids })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast_repr::{parse_code, AstBuilder, Language};

    /// root(0) -> stmt(1) -> expr(2) -> id(3) leaf; root -> ";" leaf at depth 1
    fn small() -> (Ast, NodeId, NodeId) {
        let mut b = AstBuilder::new(Language::Java, "program");
        let root = b.root();
        let stmt = b.node(root, "statement");
        let expr = b.node(stmt, "expression");
        let deep = b.leaf(expr, "identifier", "x");
        let semi = b.leaf(root, ";", ";");
        (b.build().unwrap(), deep, semi)
    }

    #[test]
    fn ancestors_of_direct_child_is_root() {
        let (a, _, semi) = small();
        assert_eq!(ancestors(&a, semi).unwrap(), vec![a.root()]);
    }

    #[test]
    fn ancestors_length_matches_depth() {
        let (a, deep, _) = small();
        let path = ancestors(&a, deep).unwrap();
        assert_eq!(path.len(), 3);
        let depths: Vec<usize> = path.iter().map(|id| a.node(*id).unwrap().depth).collect();
        assert_eq!(depths, vec![0, 1, 2]);
    }

    #[test]
    fn dep_rep_zero_is_root() {
        let (a, deep, semi) = small();
        assert_eq!(dep_rep(&a, deep, 0).unwrap(), a.root());
        assert_eq!(dep_rep(&a, semi, 0).unwrap(), a.root());
    }

    #[test]
    fn non_terminal_rejected() {
        let (a, _, _) = small();
        assert!(matches!(dep_rep(&a, a.root(), 1), Err(AstError::NotATerminal(_))));
        assert!(matches!(ancestors(&a, NodeId(99)), Err(AstError::NodeNotInTree(_))));
        assert!(matches!(text_rep(&a, NodeId(3)), Err(AstError::TerminalNodeGiven(_))));
    }

    #[test]
    fn single_child_text_rep() {
        let (a, _, _) = small();
        let expr = a.find_first("expression").unwrap();
        assert_eq!(
            text_rep(&a, expr).unwrap(),
            vec!["expression#L".to_string(), "identifier#R".to_string()]
        );
    }

    #[test]
    fn flat_tree_collapses_to_root() {
        let mut b = AstBuilder::new(Language::Python, "module");
        let r = b.root();
        for t in ["a", "b", "c"] {
            b.leaf(r, "identifier", t);
        }
        let a = b.build().unwrap();
        for k in [1, 2, 7] {
            assert_eq!(node_seq(&a, k).unwrap(), vec![a.root()]);
        }
    }

    #[test]
    fn deep_k_gives_leaf_parents_once() {
        let a = parse_code("boolean b;", Language::Java).unwrap();
        let seq = text_seq(&a, 50).unwrap();
        // local_variable_declaration holds "boolean"'s type node and ";"; the
        // declarator holds "b"; boolean_type is itself a leaf.
        assert_eq!(
            seq.to_line(),
            "local_variable_declaration#L boolean_type#R variable_declarator#R ;#R \
             variable_declarator#L identifier#R"
        );
    }
}

//! Deep syntax dependency trees and their sequence encodings.
//!
//! A tree is an ordered tree of lemma+formeme nodes under a technical root
//! that carries neither. Two encodings exist:
//!
//!   * bracketed, for the seq2seq generator:
//!     `node := "(" lemma formeme node* ")"`, children in order, the root
//!     emitting just its children's serializations. `(` and `)` are single
//!     tokens.
//!   * flat, for the reranker: the pre-order list of lemma, formeme pairs
//!     with structure disregarded.
//!
//! Decoder output can be malformed, so parsing has a recovery mode: unclosed
//! brackets are closed at end of input, stray closers are dropped, and a node
//! missing its formeme gets the formeme `x`. Every recovery action is counted.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

pub const OPEN: &str = "(";
pub const CLOSE: &str = ")";

/// Formeme assigned when the decoder omitted one.
pub const RECOVERY_FORMEME: &str = "x";

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DeepSyntaxNode {
    pub lemma: String,
    pub formeme: String,
    pub children: Vec<DeepSyntaxNode>,
}

impl DeepSyntaxNode {
    pub fn new(lemma: impl Into<String>, formeme: impl Into<String>) -> DeepSyntaxNode {
        DeepSyntaxNode {
            lemma: lemma.into(),
            formeme: formeme.into(),
            children: Vec::new(),
        }
    }

    pub fn with_children(mut self, children: Vec<DeepSyntaxNode>) -> DeepSyntaxNode {
        self.children = children;
        self
    }
}

/// The technical root holds only an ordered child list.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct DeepSyntaxTree {
    pub roots: Vec<DeepSyntaxNode>,
}

impl DeepSyntaxTree {
    pub fn new(roots: Vec<DeepSyntaxNode>) -> DeepSyntaxTree {
        DeepSyntaxTree { roots }
    }

    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }

    pub fn node_count(&self) -> usize {
        fn count(node: &DeepSyntaxNode) -> usize {
            1 + node.children.iter().map(count).sum::<usize>()
        }
        self.roots.iter().map(count).sum()
    }

    /// Pre-order lemma list (used by the slot-error counter in tree mode).
    pub fn lemmas(&self) -> Vec<String> {
        tree_to_flat(self)
            .into_iter()
            .step_by(2)
            .collect()
    }
}

/// Pre-order bracketed serialization; deterministic.
pub fn tree_to_bracketed(tree: &DeepSyntaxTree) -> Vec<String> {
    fn emit(node: &DeepSyntaxNode, out: &mut Vec<String>) {
        out.push(OPEN.to_string());
        out.push(node.lemma.clone());
        out.push(node.formeme.clone());
        for child in &node.children {
            emit(child, out);
        }
        out.push(CLOSE.to_string());
    }
    let mut out = Vec::new();
    for root in &tree.roots {
        emit(root, &mut out);
    }
    out
}

/// Flat pre-order `[lemma1, formeme1, lemma2, formeme2, ...]` without
/// brackets; length is always twice the node count.
pub fn tree_to_flat(tree: &DeepSyntaxTree) -> Vec<String> {
    fn emit(node: &DeepSyntaxNode, out: &mut Vec<String>) {
        out.push(node.lemma.clone());
        out.push(node.formeme.clone());
        for child in &node.children {
            emit(child, out);
        }
    }
    let mut out = Vec::new();
    for root in &tree.roots {
        emit(root, &mut out);
    }
    out
}

/// Outcome of parsing a (possibly malformed) bracketed token sequence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParsedTree {
    pub tree: DeepSyntaxTree,
    /// Number of recovery actions taken; 0 for well-formed input.
    pub recovered: usize,
}

/// Parse a bracketed token sequence back into a tree, recovering from the
/// kinds of damage a sequence decoder can produce.
pub fn bracketed_to_tree(tokens: &[String]) -> Result<ParsedTree> {
    if tokens.is_empty() {
        return Err(Error::data("cannot parse an empty token sequence"));
    }

    struct Open {
        node: DeepSyntaxNode,
    }

    let mut recovered = 0usize;
    let mut stack: Vec<Open> = Vec::new();
    let mut roots: Vec<DeepSyntaxNode> = Vec::new();
    let mut i = 0usize;

    let close_top = |stack: &mut Vec<Open>, roots: &mut Vec<DeepSyntaxNode>| {
        let done = stack.pop().expect("caller checks non-empty").node;
        match stack.last_mut() {
            Some(parent) => parent.node.children.push(done),
            None => roots.push(done),
        }
    };

    while i < tokens.len() {
        match tokens[i].as_str() {
            OPEN => {
                // a node needs a lemma; "(" followed by a bracket or the end
                // of input is irrecoverable garbage
                let lemma = match tokens.get(i + 1).map(String::as_str) {
                    Some(OPEN) | Some(CLOSE) | None => {
                        return Err(Error::Parse {
                            position: i,
                            message: "open bracket without a lemma".to_string(),
                        });
                    }
                    Some(lemma) => lemma.to_string(),
                };
                i += 2;
                let formeme = match tokens.get(i).map(String::as_str) {
                    Some(OPEN) | Some(CLOSE) | None => {
                        recovered += 1;
                        RECOVERY_FORMEME.to_string()
                    }
                    Some(f) => {
                        i += 1;
                        f.to_string()
                    }
                };
                stack.push(Open {
                    node: DeepSyntaxNode::new(lemma, formeme),
                });
            }
            CLOSE => {
                if stack.is_empty() {
                    // stray closer
                    recovered += 1;
                } else {
                    close_top(&mut stack, &mut roots);
                }
                i += 1;
            }
            _ => {
                // bare token outside any node structure: skip it
                recovered += 1;
                i += 1;
            }
        }
    }

    // close whatever is still open at end of input
    while !stack.is_empty() {
        recovered += 1;
        close_top(&mut stack, &mut roots);
    }

    if roots.is_empty() {
        return Err(Error::Parse {
            position: tokens.len(),
            message: "no tree nodes could be recovered".to_string(),
        });
    }
    Ok(ParsedTree {
        tree: DeepSyntaxTree::new(roots),
        recovered,
    })
}

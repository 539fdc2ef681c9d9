//! Data model: dialogue acts, sentences, deep syntax trees, their sequence
//! encodings, and vocabularies.
//!
//! Token sequences appear in two forms throughout the crate: `Vec<String>`
//! before a vocabulary is applied and `Vec<usize>` after. All types here are
//! immutable after construction and all operations are pure.

pub mod corpus;
pub mod da;
pub mod token;
pub mod tree;
pub mod vocab;

pub use corpus::{Corpus, CorpusInstance, CorpusRecord};
pub use da::{decode_da_tokens, encode_da, parse_da, DaTriple, DialogueAct};
pub use token::{relexicalize, Tokenizer};
pub use tree::{
    bracketed_to_tree, tree_to_bracketed, tree_to_flat, DeepSyntaxNode, DeepSyntaxTree, ParsedTree,
};
pub use vocab::{Vocabulary, GO, PAD, RESERVED, STOP, UNK};

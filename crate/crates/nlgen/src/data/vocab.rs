//! Token vocabularies with reserved control tokens.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const PAD: usize = 0;
pub const GO: usize = 1;
pub const STOP: usize = 2;
pub const UNK: usize = 3;

pub const RESERVED: [&str; 4] = ["<pad>", "<go>", "<stop>", "<unk>"];

/// Bidirectional token/id map. Ids 0..4 are the reserved PAD/GO/STOP/UNK
/// tokens and are stable across save/load; the rest cover every token seen
/// in the build corpus (tiny vocabularies make a frequency cutoff pointless).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    tokens: Vec<String>,
    #[serde(skip)]
    index: BTreeMap<String, usize>,
    frequencies: BTreeMap<String, u64>,
}

impl Vocabulary {
    /// Build from a corpus of token sequences. Ordering is deterministic:
    /// reserved tokens first, then corpus tokens by descending frequency,
    /// ties broken lexicographically.
    pub fn build<'a, I>(corpus: I) -> Result<Vocabulary>
    where
        I: IntoIterator<Item = &'a [String]>,
    {
        let mut frequencies: BTreeMap<String, u64> = BTreeMap::new();
        let mut any = false;
        for seq in corpus {
            any = true;
            for token in seq {
                *frequencies.entry(token.clone()).or_insert(0) += 1;
            }
        }
        if !any {
            return Err(Error::EmptyInput("Vocabulary::build"));
        }
        let mut ordered: Vec<(&String, &u64)> = frequencies.iter().collect();
        ordered.sort_by(|a, b| b.1.cmp(a.1).then_with(|| a.0.cmp(b.0)));

        let mut tokens: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        tokens.extend(ordered.into_iter().map(|(t, _)| t.clone()));
        let mut vocab = Vocabulary {
            tokens,
            index: BTreeMap::new(),
            frequencies,
        };
        vocab.rebuild_index();
        Ok(vocab)
    }

    /// Rebuild the token -> id map; needed after deserialization.
    pub fn rebuild_index(&mut self) {
        self.index = self
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn frequency(&self, token: &str) -> u64 {
        self.frequencies.get(token).copied().unwrap_or(0)
    }

    /// Map tokens to ids, substituting UNK for unknown tokens.
    /// Returns (ids, number of UNK substitutions).
    pub fn to_ids(&self, tokens: &[String]) -> (Vec<usize>, usize) {
        let mut unk = 0;
        let ids = tokens
            .iter()
            .map(|t| match self.id(t) {
                Some(i) => i,
                None => {
                    unk += 1;
                    UNK
                }
            })
            .collect();
        (ids, unk)
    }

    /// Map ids back to tokens. Out-of-range ids are an error.
    pub fn to_tokens(&self, ids: &[usize]) -> Result<Vec<String>> {
        ids.iter()
            .map(|&i| {
                self.token(i)
                    .map(String::from)
                    .ok_or_else(|| Error::data(format!("id {i} out of vocabulary range")))
            })
            .collect()
    }
}

//! Automatic slot-error counting.
//!
//! A deterministic, pattern-based stand-in for manual semantic-error
//! assessment: each (slot, value) class carries a set of surface patterns
//! (token sequences) that realize it. Matching claims token positions
//! globally, longest pattern first, so `near X` is attributed to the `near`
//! slot before a bare-`x` name pattern can grab its placeholder. A DA item
//! with no claimed match is missing; a claimed class absent from the DA is
//! superfluous; extra disjoint matches of one DA item count as repeated.
//!
//! Strings are matched on their tokenized form; trees are matched on the
//! lemma sequence of their flat encoding.

use crate::data::tree::DeepSyntaxTree;
use crate::data::DialogueAct;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LexiconEntry {
    pub slot: String,
    pub value: String,
    /// Lowercase token-sequence patterns, each non-empty.
    pub patterns: Vec<Vec<String>>,
}

/// Ordered pattern inventory over (slot, value) classes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlotPatternLexicon {
    entries: Vec<LexiconEntry>,
}

impl SlotPatternLexicon {
    /// Validates at load time: every class has at least one pattern, every
    /// pattern is a non-empty lowercase token sequence, no duplicate class.
    pub fn new(entries: Vec<LexiconEntry>) -> Result<SlotPatternLexicon> {
        let mut seen = BTreeSet::new();
        for e in &entries {
            if !seen.insert((e.slot.clone(), e.value.clone())) {
                return Err(Error::data(format!(
                    "slot pattern lexicon: duplicate class {}={}",
                    e.slot, e.value
                )));
            }
            if e.patterns.is_empty() {
                return Err(Error::data(format!(
                    "slot pattern lexicon: class {}={} has no patterns",
                    e.slot, e.value
                )));
            }
            for p in &e.patterns {
                if p.is_empty() {
                    return Err(Error::data(format!(
                        "slot pattern lexicon: class {}={} has an empty pattern",
                        e.slot, e.value
                    )));
                }
                if p.iter().any(|t| t.chars().any(|c| c.is_uppercase())) {
                    return Err(Error::data(format!(
                        "slot pattern lexicon: class {}={} has a non-lowercase pattern",
                        e.slot, e.value
                    )));
                }
            }
        }
        Ok(SlotPatternLexicon { entries })
    }

    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }

    pub fn class_index(&self, slot: &str, value: &str) -> Option<usize> {
        self.entries
            .iter()
            .position(|e| e.slot == slot && e.value == value)
    }
}

/// Output under evaluation: a tokenized sentence or a deep syntax tree.
pub enum GeneratedOutput<'a> {
    Text(&'a [String]),
    Tree(&'a DeepSyntaxTree),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotErrors {
    pub missing: usize,
    pub superfluous: usize,
    pub repeated: usize,
}

impl SlotErrors {
    pub fn total(&self) -> usize {
        self.missing + self.superfluous + self.repeated
    }

    pub fn add(&mut self, other: &SlotErrors) {
        self.missing += other.missing;
        self.superfluous += other.superfluous;
        self.repeated += other.repeated;
    }
}

/// Count per-class disjoint pattern matches under global position claiming.
///
/// Matching proceeds in rounds; within a round, longer patterns go first
/// (ties by class order) and each class may claim at most one new disjoint
/// match. The rounds stop when nothing new is claimed. This lets `near X`
/// take its placeholder before a bare name pattern grabs it, while classes
/// that legitimately share a surface (two bare `x` lemmas in a tree) still
/// each get one.
fn match_counts(tokens: &[String], lex: &SlotPatternLexicon) -> Vec<usize> {
    let mut attempts: Vec<(&[String], usize)> = Vec::new();
    for (ci, entry) in lex.entries.iter().enumerate() {
        for p in &entry.patterns {
            attempts.push((p.as_slice(), ci));
        }
    }
    attempts.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then(a.1.cmp(&b.1)));

    let mut claimed = vec![false; tokens.len()];
    let mut counts = vec![0usize; lex.entries.len()];
    loop {
        let mut progressed = false;
        let mut done_this_round = vec![false; lex.entries.len()];
        for &(pattern, class) in &attempts {
            if done_this_round[class] {
                continue;
            }
            let plen = pattern.len();
            if plen == 0 || plen > tokens.len() {
                continue;
            }
            let mut pos = 0;
            while pos + plen <= tokens.len() {
                let free = claimed[pos..pos + plen].iter().all(|&c| !c);
                if free && &tokens[pos..pos + plen] == pattern {
                    claimed[pos..pos + plen].iter_mut().for_each(|c| *c = true);
                    counts[class] += 1;
                    done_this_round[class] = true;
                    progressed = true;
                    break;
                }
                pos += 1;
            }
        }
        if !progressed {
            break;
        }
    }
    counts
}

/// Count missing, superfluous, and repeated information items in an output
/// relative to its input DA. DA items whose class is outside the lexicon
/// cannot be judged and are skipped.
pub fn slot_errors(
    output: GeneratedOutput,
    da: &DialogueAct,
    lex: &SlotPatternLexicon,
) -> SlotErrors {
    let tokens: Vec<String> = match output {
        GeneratedOutput::Text(tokens) => tokens.to_vec(),
        GeneratedOutput::Tree(tree) => tree.lemmas(),
    };
    let counts = match_counts(&tokens, lex);

    let mut in_da = vec![false; lex.entries.len()];
    let mut errors = SlotErrors::default();
    for t in da.triples() {
        if t.slot.is_empty() {
            continue;
        }
        match lex.class_index(&t.slot, &t.value) {
            Some(ci) => {
                in_da[ci] = true;
                if counts[ci] == 0 {
                    errors.missing += 1;
                } else {
                    errors.repeated += counts[ci] - 1;
                }
            }
            None => {
                log::debug!(
                    "slot_errors: DA item {}={} outside the pattern lexicon, skipped",
                    t.slot,
                    t.value
                );
            }
        }
    }
    for (ci, &count) in counts.iter().enumerate() {
        if !in_da[ci] {
            errors.superfluous += count;
        }
    }
    errors
}

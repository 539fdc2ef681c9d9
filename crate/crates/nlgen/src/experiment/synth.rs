//! Synthetic restaurant-domain corpus generation.
//!
//! A grammar config (see `data/grammar.toml`) lists slots, value inventories
//! with surface/tree fragments, and the pattern lexicon entries. Each
//! sampled DA gets two paraphrases from two frames with controlled
//! variation:
//!
//!   1. adjectival: `X is a <price> <food> <eattype> <area-pp> <near-pp>.`
//!   2. locative/relative: `X is a <price> <eattype> [located <area-alt>
//!      <near-pp>] [that serves <food> food].`
//!
//! The gold deep syntax tree is built from the first frame's tree fragments,
//! so the stored tree and `refs[0]` describe the same sentence; reference
//! strings are assembled from the text fragments independently of the
//! realizer, which keeps the realize-the-gold-tree corpus check meaningful.

use crate::data::corpus::{Corpus, CorpusRecord};
use crate::data::da::{DaTriple, DialogueAct};
use crate::data::token::Tokenizer;
use crate::data::tree::{bracketed_to_tree, tree_to_bracketed, DeepSyntaxNode, DeepSyntaxTree};
use crate::error::{Error, Result};
use crate::eval::slots::{LexiconEntry, SlotPatternLexicon};
use crate::generator::Mode;
use crate::realizer::fix_articles;
use crate::rng::DetRng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

pub const DEFAULT_GRAMMAR: &str = include_str!("../../data/grammar.toml");

pub const GRAMMAR_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ValueSpec {
    pub slot: String,
    pub value: String,
    /// Surface fragment for the first frame (lowercase tokens).
    pub text: String,
    /// Variant fragment for the second frame; defaults to `text`.
    #[serde(default)]
    pub text_alt: Option<String>,
    /// Bracketed deep-syntax fragment for the first frame.
    pub tree: String,
    #[serde(default)]
    pub tree_alt: Option<String>,
    /// Surface patterns for the slot-error counter (string outputs).
    pub patterns: Vec<Vec<String>>,
    /// Lemma-sequence patterns for the slot-error counter (tree outputs).
    pub tree_patterns: Vec<Vec<String>>,
}

impl ValueSpec {
    fn text_tokens(&self, alt: bool) -> Vec<String> {
        let text = if alt {
            self.text_alt.as_deref().unwrap_or(&self.text)
        } else {
            &self.text
        };
        text.split_whitespace().map(String::from).collect()
    }

    fn tree_node(&self, alt: bool) -> Result<DeepSyntaxNode> {
        let text = if alt {
            self.tree_alt.as_deref().unwrap_or(&self.tree)
        } else {
            &self.tree
        };
        let tokens: Vec<String> = text.split_whitespace().map(String::from).collect();
        let parsed = bracketed_to_tree(&tokens)
            .map_err(|e| Error::config(format!("grammar fragment '{text}': {e}")))?;
        if parsed.recovered > 0 || parsed.tree.roots.len() != 1 {
            return Err(Error::config(format!(
                "grammar fragment '{text}' is not a single well-formed node"
            )));
        }
        Ok(parsed.tree.roots.into_iter().next().expect("one root"))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Grammar {
    pub version: u32,
    pub names: Vec<String>,
    pub near_names: Vec<String>,
    pub values: Vec<ValueSpec>,
}

impl Grammar {
    pub fn from_toml(text: &str) -> Result<Grammar> {
        let grammar: Grammar =
            toml::from_str(text).map_err(|e| Error::config(format!("grammar: {e}")))?;
        if grammar.version != GRAMMAR_VERSION {
            return Err(Error::config(format!(
                "grammar version {} not supported (expected {GRAMMAR_VERSION})",
                grammar.version
            )));
        }
        grammar.validate()?;
        Ok(grammar)
    }

    pub fn load(path: &std::path::Path) -> Result<Grammar> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read grammar {}: {e}", path.display())))?;
        Grammar::from_toml(&text)
    }

    pub fn builtin() -> Grammar {
        Grammar::from_toml(DEFAULT_GRAMMAR).expect("builtin grammar parses")
    }

    fn validate(&self) -> Result<()> {
        if self.names.is_empty() || self.near_names.is_empty() {
            return Err(Error::config("grammar needs names and near_names"));
        }
        for slot in ["name", "near", "eattype", "food", "area", "pricerange"] {
            if self.values_for(slot).is_empty() {
                return Err(Error::config(format!("grammar: no values for slot '{slot}'")));
            }
        }
        for v in &self.values {
            v.tree_node(false)?;
            v.tree_node(true)?;
        }
        Ok(())
    }

    pub fn values_for(&self, slot: &str) -> Vec<&ValueSpec> {
        self.values.iter().filter(|v| v.slot == slot).collect()
    }

    fn value_of(&self, slot: &str, value: &str) -> Result<&ValueSpec> {
        self.values
            .iter()
            .find(|v| v.slot == slot && v.value == value)
            .ok_or_else(|| Error::config(format!("grammar: unknown value {slot}={value}")))
    }

    /// Pattern lexicon for the slot-error counter, over every grammar class.
    pub fn lexicon(&self, mode: Mode) -> Result<SlotPatternLexicon> {
        let entries = self
            .values
            .iter()
            .map(|v| LexiconEntry {
                slot: v.slot.clone(),
                value: v.value.clone(),
                patterns: match mode {
                    Mode::Strings => v.patterns.clone(),
                    Mode::Trees => v.tree_patterns.clone(),
                },
            })
            .collect();
        SlotPatternLexicon::new(entries)
    }

    /// Number of distinct DAs the sampler can produce.
    pub fn distinct_da_count(&self) -> usize {
        let e = self.values_for("eattype").len();
        let p = self.values_for("pricerange").len() + 1;
        let a = self.values_for("area").len() + 1;
        let f = self.values_for("food").len();
        let food_options = 1 + f + f * (f - 1) / 2;
        // minus combos where food, area, and near are all absent
        e * p * a * 2 * food_options - e * p
    }
}

/// One sampled DA shape.
struct DaDraw<'a> {
    eattype: &'a ValueSpec,
    price: Option<&'a ValueSpec>,
    foods: Vec<&'a ValueSpec>,
    area: Option<&'a ValueSpec>,
    near: bool,
}

impl<'a> DaDraw<'a> {
    fn key(&self) -> String {
        format!(
            "{}|{}|{}|{}|{}",
            self.eattype.value,
            self.price.map(|p| p.value.as_str()).unwrap_or("-"),
            self.foods
                .iter()
                .map(|f| f.value.as_str())
                .collect::<Vec<_>>()
                .join("+"),
            self.area.map(|a| a.value.as_str()).unwrap_or("-"),
            self.near
        )
    }
}

fn draw_da<'a>(grammar: &'a Grammar, rng: &mut DetRng) -> DaDraw<'a> {
    let eattypes = grammar.values_for("eattype");
    let prices = grammar.values_for("pricerange");
    let areas = grammar.values_for("area");
    let foods = grammar.values_for("food");
    loop {
        let eattype = *rng.choose(&eattypes);
        let price = match rng.below(prices.len() + 1) {
            0 => None,
            i => Some(prices[i - 1]),
        };
        let n_food = foods.len();
        let n_pairs = n_food * (n_food - 1) / 2;
        let food_pick = rng.below(1 + n_food + n_pairs);
        let picked_foods: Vec<&ValueSpec> = if food_pick == 0 {
            Vec::new()
        } else if food_pick <= n_food {
            vec![foods[food_pick - 1]]
        } else {
            // decode pair index into (i, j), i < j
            let mut k = food_pick - 1 - n_food;
            let mut i = 0;
            loop {
                let row = n_food - 1 - i;
                if k < row {
                    break;
                }
                k -= row;
                i += 1;
            }
            vec![foods[i], foods[i + 1 + k]]
        };
        let area = match rng.below(areas.len() + 1) {
            0 => None,
            i => Some(areas[i - 1]),
        };
        let near = rng.below(2) == 1;
        if picked_foods.is_empty() && area.is_none() && !near {
            continue;
        }
        return DaDraw {
            eattype,
            price,
            foods: picked_foods,
            area,
            near,
        };
    }
}

fn build_da(grammar: &Grammar, draw: &DaDraw) -> Result<DialogueAct> {
    let mut triples = vec![DaTriple {
        act_type: "inform".to_string(),
        slot: "name".to_string(),
        value: "X-name".to_string(),
    }];
    let mut push = |slot: &str, value: &str| {
        triples.push(DaTriple {
            act_type: "inform".to_string(),
            slot: slot.to_string(),
            value: value.to_string(),
        })
    };
    push("eattype", &draw.eattype.value);
    if let Some(p) = draw.price {
        push("pricerange", &p.value);
    }
    for f in &draw.foods {
        push("food", &f.value);
    }
    if let Some(a) = draw.area {
        push("area", &a.value);
    }
    if draw.near {
        push("near", "X-near");
    }
    let _ = grammar;
    DialogueAct::new(triples)
}

fn join_food_texts(foods: &[&ValueSpec]) -> Vec<String> {
    let mut out = Vec::new();
    for (i, f) in foods.iter().enumerate() {
        if i > 0 {
            out.push(if i + 1 == foods.len() { "and" } else { "," }.to_string());
        }
        out.extend(f.text_tokens(false));
    }
    out
}

/// Frame 1: adjectival. Returns (tokens, tree).
fn frame_adjectival(draw: &DaDraw) -> Result<(Vec<String>, DeepSyntaxTree)> {
    let mut tokens: Vec<String> = ["x", "is", "a"].map(String::from).to_vec();
    if let Some(p) = draw.price {
        tokens.extend(p.text_tokens(false));
    }
    tokens.extend(join_food_texts(&draw.foods));
    tokens.extend(draw.eattype.text_tokens(false));
    if let Some(a) = draw.area {
        tokens.extend(a.text_tokens(false));
    }
    if draw.near {
        tokens.extend(["near", "x"].map(String::from));
    }
    tokens.push(".".to_string());
    fix_articles(&mut tokens);

    let mut head = draw.eattype.tree_node(false)?;
    let mut fronted: Vec<DeepSyntaxNode> = Vec::new();
    if let Some(p) = draw.price {
        fronted.push(p.tree_node(false)?);
    }
    for f in &draw.foods {
        fronted.push(f.tree_node(false)?);
    }
    fronted.append(&mut head.children);
    head.children = fronted;
    if let Some(a) = draw.area {
        head.children.push(a.tree_node(false)?);
    }
    if draw.near {
        head.children.push(DeepSyntaxNode::new("x", "n:near+X"));
    }
    let root = DeepSyntaxNode::new("be", "v:fin").with_children(vec![
        DeepSyntaxNode::new("x", "n:subj"),
        head,
    ]);
    Ok((tokens, DeepSyntaxTree::new(vec![root])))
}

/// Frame 2: locative "located" block plus a relative clause for food.
fn frame_locative(draw: &DaDraw) -> Result<(Vec<String>, DeepSyntaxTree)> {
    let mut tokens: Vec<String> = ["x", "is", "a"].map(String::from).to_vec();
    if let Some(p) = draw.price {
        tokens.extend(p.text_tokens(true));
    }
    tokens.extend(draw.eattype.text_tokens(true));
    if draw.area.is_some() || draw.near {
        tokens.push("located".to_string());
        if let Some(a) = draw.area {
            tokens.extend(a.text_tokens(true));
        }
        if draw.near {
            tokens.extend(["near", "x"].map(String::from));
        }
    }
    if !draw.foods.is_empty() {
        tokens.extend(["that", "serves"].map(String::from));
        tokens.extend(join_food_texts(&draw.foods));
        tokens.push("food".to_string());
    }
    tokens.push(".".to_string());
    fix_articles(&mut tokens);

    let mut head = draw.eattype.tree_node(true)?;
    let mut fronted: Vec<DeepSyntaxNode> = Vec::new();
    if let Some(p) = draw.price {
        fronted.push(p.tree_node(true)?);
    }
    fronted.append(&mut head.children);
    head.children = fronted;
    if draw.area.is_some() || draw.near {
        let mut located = DeepSyntaxNode::new("located", "adj:loc");
        if let Some(a) = draw.area {
            located.children.push(a.tree_node(true)?);
        }
        if draw.near {
            located.children.push(DeepSyntaxNode::new("x", "n:near+X"));
        }
        head.children.push(located);
    }
    if !draw.foods.is_empty() {
        let mut food = DeepSyntaxNode::new("food", "n:dobj");
        for f in &draw.foods {
            food.children.push(f.tree_node(true)?);
        }
        head.children.push(
            DeepSyntaxNode::new("serve", "v:rc").with_children(vec![food]),
        );
    }
    let root = DeepSyntaxNode::new("be", "v:fin").with_children(vec![
        DeepSyntaxNode::new("x", "n:subj"),
        head,
    ]);
    Ok((tokens, DeepSyntaxTree::new(vec![root])))
}

/// Generate a corpus of `n_das` distinct DAs with two paraphrases each, a
/// gold tree for the first paraphrase, and placeholder lexicalizations.
/// Deterministic under `seed`; byte-identical files for identical calls.
pub fn synthesize_corpus(grammar: &Grammar, n_das: usize, seed: u64) -> Result<Corpus> {
    if n_das == 0 {
        return Err(Error::config("synthesize: n_das must be positive"));
    }
    let capacity = grammar.distinct_da_count();
    if n_das > capacity {
        return Err(Error::config(format!(
            "synthesize: grammar supports only {capacity} distinct DAs, {n_das} requested"
        )));
    }

    let mut rng = DetRng::derived(seed, "synthesize");
    let tokenizer = Tokenizer::new();
    let mut seen = BTreeSet::new();
    let mut records = Vec::with_capacity(n_das);
    let mut attempts = 0usize;
    while records.len() < n_das {
        attempts += 1;
        if attempts > n_das.saturating_mul(10_000) {
            return Err(Error::config(
                "synthesize: sampling stalled; inventory too small for the requested corpus",
            ));
        }
        let draw = draw_da(grammar, &mut rng);
        if !seen.insert(draw.key()) {
            continue;
        }
        let da = build_da(grammar, &draw)?;
        let (tokens1, tree1) = frame_adjectival(&draw)?;
        let (tokens2, _tree2) = frame_locative(&draw)?;

        let mut lex = std::collections::BTreeMap::new();
        lex.insert("X-name".to_string(), rng.choose(&grammar.names).clone());
        if draw.near {
            lex.insert(
                "X-near".to_string(),
                rng.choose(&grammar.near_names).clone(),
            );
        }

        records.push(CorpusRecord {
            da: da.format(),
            refs: vec![tokenizer.detokenize(&tokens1), tokenizer.detokenize(&tokens2)],
            tree: Some(tree_to_bracketed(&tree1).join(" ")),
            lex,
        });
    }
    Corpus::from_records(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::parse_da;
    use crate::eval::slots::{slot_errors, GeneratedOutput, SlotErrors};
    use crate::realizer::{realize, RealizationRules};

    #[test]
    fn builtin_grammar_parses_and_counts() {
        let g = Grammar::builtin();
        assert!(g.distinct_da_count() > 1000);
        assert_eq!(g.values_for("food").len(), 6);
        assert!(g.lexicon(Mode::Strings).is_ok());
        assert!(g.lexicon(Mode::Trees).is_ok());
    }

    #[test]
    fn synthesizes_distinct_parseable_das() {
        let g = Grammar::builtin();
        let corpus = synthesize_corpus(&g, 202, 99).unwrap();
        assert_eq!(corpus.len(), 202);
        let mut das = BTreeSet::new();
        for inst in &corpus.instances {
            assert!(das.insert(inst.record.da.clone()), "duplicate DA");
            assert_eq!(inst.record.refs.len(), 2);
            assert_ne!(inst.record.refs[0], inst.record.refs[1], "paraphrases identical");
            assert!(inst.tree.is_some());
            // the DA string parses back to the same triples
            assert_eq!(&parse_da(&inst.record.da).unwrap(), &inst.da);
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let g = Grammar::builtin();
        let a = synthesize_corpus(&g, 50, 7).unwrap();
        let b = synthesize_corpus(&g, 50, 7).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let pa = dir.path().join("a.jsonl");
        let pb = dir.path().join("b.jsonl");
        a.save(&pa).unwrap();
        b.save(&pb).unwrap();
        assert_eq!(std::fs::read(&pa).unwrap(), std::fs::read(&pb).unwrap());
    }

    #[test]
    fn too_many_das_rejected() {
        let g = Grammar::builtin();
        let too_many = g.distinct_da_count() + 1;
        assert!(synthesize_corpus(&g, too_many, 1).is_err());
    }

    #[test]
    fn references_have_zero_slot_errors_against_their_da() {
        let g = Grammar::builtin();
        let corpus = synthesize_corpus(&g, 100, 3).unwrap();
        let tokenizer = Tokenizer::new();
        let string_lex = g.lexicon(Mode::Strings).unwrap();
        let tree_lex = g.lexicon(Mode::Trees).unwrap();
        for inst in &corpus.instances {
            for reference in &inst.record.refs {
                let tokens = tokenizer.tokenize(reference);
                let errors = slot_errors(GeneratedOutput::Text(&tokens), &inst.da, &string_lex);
                assert_eq!(
                    errors,
                    SlotErrors::default(),
                    "slot errors in reference {reference:?} of {}",
                    inst.record.da
                );
            }
            let tree = inst.tree.as_ref().unwrap();
            let errors = slot_errors(GeneratedOutput::Tree(tree), &inst.da, &tree_lex);
            assert_eq!(
                errors,
                SlotErrors::default(),
                "slot errors in tree of {}",
                inst.record.da
            );
        }
    }

    #[test]
    fn gold_trees_realize_to_the_first_reference() {
        let g = Grammar::builtin();
        let rules = RealizationRules::builtin();
        let tokenizer = rules.tokenizer();
        let corpus = synthesize_corpus(&g, 100, 11).unwrap();
        let mut mismatches = 0;
        for inst in &corpus.instances {
            let out = realize(inst.tree.as_ref().unwrap(), &rules);
            assert_eq!(out.fallbacks, 0, "fallbacks for {}", inst.record.da);
            let realized = tokenizer.tokenize(&out.text);
            let reference = tokenizer.tokenize(&inst.record.refs[0]);
            if realized != reference {
                mismatches += 1;
                eprintln!(
                    "mismatch:\n  da   {}\n  tree {:?}\n  ref  {:?}",
                    inst.record.da, realized, reference
                );
            }
        }
        assert!(
            mismatches * 20 <= corpus.len(),
            "{mismatches}/{} realized trees diverge from references",
            corpus.len()
        );
    }

    #[test]
    fn tokenize_detokenize_roundtrip_on_corpus() {
        let g = Grammar::builtin();
        let rules = RealizationRules::builtin();
        let tokenizer = rules.tokenizer();
        let corpus = synthesize_corpus(&g, 120, 5).unwrap();
        for inst in &corpus.instances {
            for reference in &inst.record.refs {
                let tokens = tokenizer.tokenize(reference);
                let rebuilt = tokenizer.detokenize(&tokens);
                assert_eq!(
                    tokenizer.tokenize(&rebuilt),
                    tokens,
                    "roundtrip failed for {reference:?}"
                );
            }
        }
    }
}

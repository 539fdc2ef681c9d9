//! Rule-based surface realizer for the two-step pipeline.
//!
//! Linearizes deep syntax trees into sentences with a small formeme-driven
//! rule table scoped to the restaurant domain. The table is data (a TOML
//! file, see `data/realizer_rules.toml`), so the domain can be extended
//! without rebuilding. Realization is a pure function: a deterministic
//! in-order traversal where each formeme rule decides placement relative to
//! the head, function words (prepositions, articles, relative markers), verb
//! form, and plural morphology from the noun lexicon.

use crate::data::token::Tokenizer;
use crate::data::tree::{DeepSyntaxNode, DeepSyntaxTree};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// Rules file carried by this build; written out by `prepare` for editing.
pub const DEFAULT_RULES: &str = include_str!("../data/realizer_rules.toml");

pub const RULES_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Placement {
    Before,
    #[default]
    After,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RuleKind {
    Verb,
    #[default]
    Noun,
    Modifier,
    Punct,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum VerbForm {
    #[default]
    #[serde(rename = "3sg")]
    ThirdSingular,
    #[serde(rename = "gerund")]
    Gerund,
    #[serde(rename = "bare")]
    Bare,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct FormemeRule {
    pub kind: RuleKind,
    pub placement: Option<Placement>,
    pub article: Option<String>,
    pub preposition: Option<String>,
    pub prefix: Vec<String>,
    pub form: VerbForm,
    pub coordinate: bool,
}

impl FormemeRule {
    fn placement(&self) -> Placement {
        self.placement.unwrap_or(Placement::After)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RealizationRules {
    pub version: u32,
    pub plural_nouns: BTreeSet<String>,
    /// Irregular third-person-singular forms; default is lemma + "s".
    pub verbs: BTreeMap<String, String>,
    /// Irregular gerunds; default is lemma + "ing".
    pub gerunds: BTreeMap<String, String>,
    pub formemes: BTreeMap<String, FormemeRule>,
}

impl Default for RealizationRules {
    fn default() -> RealizationRules {
        RealizationRules {
            version: RULES_VERSION,
            plural_nouns: BTreeSet::new(),
            verbs: BTreeMap::new(),
            gerunds: BTreeMap::new(),
            formemes: BTreeMap::new(),
        }
    }
}

impl RealizationRules {
    pub fn from_toml(text: &str) -> Result<RealizationRules> {
        let rules: RealizationRules =
            toml::from_str(text).map_err(|e| Error::config(format!("realization rules: {e}")))?;
        if rules.version != RULES_VERSION {
            return Err(Error::config(format!(
                "realization rules version {} not supported (expected {RULES_VERSION})",
                rules.version
            )));
        }
        Ok(rules)
    }

    pub fn load(path: &std::path::Path) -> Result<RealizationRules> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read rules {}: {e}", path.display())))?;
        RealizationRules::from_toml(&text)
    }

    pub fn builtin() -> RealizationRules {
        RealizationRules::from_toml(DEFAULT_RULES).expect("builtin rules parse")
    }

    pub fn tokenizer(&self) -> Tokenizer {
        Tokenizer::with_plurals(self.plural_nouns.iter().cloned())
    }
}

#[derive(Clone, Debug, Default)]
pub struct RealizationResult {
    /// Detokenized sentence: capitalized, terminal punctuation attached.
    pub text: String,
    /// The token sequence before detokenization.
    pub tokens: Vec<String>,
    /// Lemmas emitted as content words, in output order.
    pub content_tokens: Vec<String>,
    /// Unknown formemes that fell back to bare-lemma emission.
    pub fallbacks: usize,
    pub warnings: Vec<String>,
}

struct Realizer<'a> {
    rules: &'a RealizationRules,
    out: RealizationResult,
}

enum ResolvedRule<'a> {
    Table(&'a FormemeRule),
    Prepositional(String),
}

/// A formeme resolves to a rule via: exact table match; the generic
/// `n:<prep>+X` prepositional template; otherwise bare-lemma fallback.
fn resolve<'a>(rules: &'a RealizationRules, formeme: &str) -> Option<ResolvedRule<'a>> {
    if let Some(rule) = rules.formemes.get(formeme) {
        return Some(ResolvedRule::Table(rule));
    }
    if let Some(rest) = formeme.strip_prefix("n:") {
        if let Some(prep) = rest.strip_suffix("+X") {
            if !prep.is_empty() && prep.chars().all(|c| c.is_ascii_alphabetic()) {
                return Some(ResolvedRule::Prepositional(prep.to_string()));
            }
        }
    }
    None
}

fn base_formeme(formeme: &str) -> (&str, bool) {
    match formeme.strip_suffix(":pl") {
        Some(base) => (base, true),
        None => (formeme, false),
    }
}

impl<'a> Realizer<'a> {
    fn verb_form(&self, lemma: &str, form: VerbForm) -> String {
        match form {
            VerbForm::ThirdSingular => self
                .rules
                .verbs
                .get(lemma)
                .cloned()
                .unwrap_or_else(|| format!("{lemma}s")),
            VerbForm::Gerund => self
                .rules
                .gerunds
                .get(lemma)
                .cloned()
                .unwrap_or_else(|| format!("{lemma}ing")),
            VerbForm::Bare => lemma.to_string(),
        }
    }

    /// Emit one node (with its subtree) into `tokens`.
    fn emit(&mut self, node: &DeepSyntaxNode, tokens: &mut Vec<String>) {
        let (formeme, plural) = base_formeme(&node.formeme);

        let fallback_rule;
        let pp_rule;
        let rule: &FormemeRule = match resolve(self.rules, formeme) {
            Some(ResolvedRule::Table(rule)) => rule,
            Some(ResolvedRule::Prepositional(prep)) => {
                pp_rule = FormemeRule {
                    kind: RuleKind::Noun,
                    placement: Some(Placement::After),
                    article: Some("the".to_string()),
                    preposition: Some(prep),
                    ..FormemeRule::default()
                };
                &pp_rule
            }
            None => {
                self.out.fallbacks += 1;
                self.out.warnings.push(format!(
                    "unknown formeme '{}', emitted bare lemma",
                    node.formeme
                ));
                fallback_rule = FormemeRule::default();
                &fallback_rule
            }
        };

        tokens.extend(rule.prefix.iter().cloned());
        if let Some(prep) = &rule.preposition {
            tokens.push(prep.clone());
        }
        // no article on plural heads or proper-name placeholders
        let placeholder = node.lemma == "x" || node.lemma.starts_with("x-");
        if !plural && !placeholder {
            if let Some(article) = &rule.article {
                tokens.push(article.clone());
            }
        }

        let (before, after): (Vec<&DeepSyntaxNode>, Vec<&DeepSyntaxNode>) =
            node.children.iter().partition(|child| {
                let (base, _) = base_formeme(&child.formeme);
                match resolve(self.rules, base) {
                    Some(ResolvedRule::Table(r)) => r.placement() == Placement::Before,
                    _ => false,
                }
            });

        self.emit_children(&before, tokens);

        match rule.kind {
            RuleKind::Verb => {
                tokens.push(self.verb_form(&node.lemma, rule.form));
                self.out.content_tokens.push(node.lemma.clone());
            }
            RuleKind::Punct => {
                tokens.push(node.lemma.clone());
            }
            RuleKind::Noun | RuleKind::Modifier => {
                tokens.push(node.lemma.clone());
                self.out.content_tokens.push(node.lemma.clone());
                if plural {
                    if self.rules.plural_nouns.contains(&node.lemma) {
                        tokens.push(crate::data::token::PLURAL_TOKEN.to_string());
                    } else {
                        self.out.warnings.push(format!(
                            "plural marked on '{}' which is not in the plural lexicon",
                            node.lemma
                        ));
                    }
                }
            }
        }

        self.emit_children(&after, tokens);
    }

    /// Emit a sibling group, coordinating consecutive runs of the same
    /// coordinate-flagged formeme with commas and a final "and".
    fn emit_children(&mut self, children: &[&DeepSyntaxNode], tokens: &mut Vec<String>) {
        let mut i = 0;
        while i < children.len() {
            let child = children[i];
            let run_len = match resolve(self.rules, base_formeme(&child.formeme).0) {
                Some(ResolvedRule::Table(r)) if r.coordinate => {
                    let mut len = 1;
                    while i + len < children.len() && children[i + len].formeme == child.formeme {
                        len += 1;
                    }
                    len
                }
                _ => 1,
            };
            if run_len > 1 {
                for (k, member) in children[i..i + run_len].iter().enumerate() {
                    if k > 0 {
                        if k + 1 == run_len {
                            tokens.push("and".to_string());
                        } else {
                            tokens.push(",".to_string());
                        }
                    }
                    self.emit(member, tokens);
                }
            } else {
                self.emit(child, tokens);
            }
            i += run_len;
        }
    }
}

/// "a" before a vowel-initial word becomes "an".
pub fn fix_articles(tokens: &mut [String]) {
    for i in 0..tokens.len().saturating_sub(1) {
        if tokens[i] == "a"
            && tokens[i + 1]
                .chars()
                .next()
                .is_some_and(|c| "aeiou".contains(c))
        {
            tokens[i] = "an".to_string();
        }
    }
}

/// Linearize a deep syntax tree into a sentence. Unknown formemes emit the
/// bare lemma and increment the fallback counter; an empty tree produces an
/// empty string with a warning.
pub fn realize(tree: &DeepSyntaxTree, rules: &RealizationRules) -> RealizationResult {
    let mut realizer = Realizer {
        rules,
        out: RealizationResult::default(),
    };
    if tree.is_empty() {
        log::warn!("realize: empty tree");
        realizer.out.warnings.push("empty tree".to_string());
        return realizer.out;
    }
    let mut tokens = Vec::new();
    let roots: Vec<&DeepSyntaxNode> = tree.roots.iter().collect();
    realizer.emit_children(&roots, &mut tokens);

    let terminal = matches!(
        tokens.last().map(String::as_str),
        Some(".") | Some("!") | Some("?")
    );
    if !terminal {
        tokens.push(".".to_string());
    }
    fix_articles(&mut tokens);
    let tokenizer = rules.tokenizer();
    realizer.out.text = tokenizer.detokenize(&tokens);
    realizer.out.tokens = tokens;
    realizer.out
}

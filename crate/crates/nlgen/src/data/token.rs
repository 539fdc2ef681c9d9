//! Sentence tokenization, detokenization, and relexicalization.
//!
//! Tokenization lowercases, splits punctuation into separate tokens, and
//! splits the plural `-s` morpheme off nouns listed in a plural lexicon
//! (`restaurants` -> `restaurant`, `-s`). Blind suffix stripping would corrupt
//! verbs like `serves`, so only lexicon nouns are split. Detokenization is the
//! exact inverse on anything the tokenizer can produce.

use crate::data::da::DialogueAct;
use regex::Regex;
use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::sync::OnceLock;

/// Characters split off as standalone punctuation tokens.
const PUNCT: &[char] = &['.', ',', '!', '?', ';', ':'];

/// Token emitted for a split plural morpheme.
pub const PLURAL_TOKEN: &str = "-s";

#[derive(Clone, Debug, Default)]
pub struct Tokenizer {
    plural_nouns: BTreeSet<String>,
}

impl Tokenizer {
    pub fn new() -> Tokenizer {
        Tokenizer::default()
    }

    pub fn with_plurals<I: IntoIterator<Item = S>, S: Into<String>>(nouns: I) -> Tokenizer {
        Tokenizer {
            plural_nouns: nouns.into_iter().map(Into::into).collect(),
        }
    }

    pub fn plural_nouns(&self) -> &BTreeSet<String> {
        &self.plural_nouns
    }

    /// Lowercase and split into tokens: words, standalone punctuation, and
    /// `-s` plural morphemes for lexicon nouns.
    pub fn tokenize(&self, text: &str) -> Vec<String> {
        let mut tokens = Vec::new();
        for raw in text.split_whitespace() {
            let word = raw.to_lowercase();
            let mut rest = word.as_str();
            // leading punctuation
            while let Some(c) = rest.chars().next() {
                if PUNCT.contains(&c) {
                    tokens.push(c.to_string());
                    rest = &rest[c.len_utf8()..];
                } else {
                    break;
                }
            }
            // trailing punctuation, collected in order
            let mut trailing = Vec::new();
            while let Some(c) = rest.chars().last() {
                if PUNCT.contains(&c) {
                    trailing.push(c.to_string());
                    rest = &rest[..rest.len() - c.len_utf8()];
                } else {
                    break;
                }
            }
            trailing.reverse();
            if !rest.is_empty() {
                match rest.strip_suffix('s') {
                    Some(stem) if self.plural_nouns.contains(stem) => {
                        tokens.push(stem.to_string());
                        tokens.push(PLURAL_TOKEN.to_string());
                    }
                    _ => tokens.push(rest.to_string()),
                }
            }
            tokens.extend(trailing);
        }
        tokens
    }

    /// Inverse of [`tokenize`](Self::tokenize): rejoins `-s` and punctuation,
    /// restores placeholder tokens (`x`, `x-name`) to their `X` form, and
    /// capitalizes sentence-initially. A leading `-s` token has nothing to
    /// attach to; it is left verbatim with a warning.
    pub fn detokenize(&self, tokens: &[String]) -> String {
        let mut out = String::new();
        for (i, token) in tokens.iter().enumerate() {
            let display = restore_placeholder(token);
            if token == PLURAL_TOKEN {
                if i == 0 {
                    log::warn!("detokenize: leading '-s' token left verbatim");
                    out.push_str(token);
                } else {
                    out.push('s');
                }
            } else if token.len() == 1 && PUNCT.contains(&token.chars().next().unwrap()) {
                out.push_str(token);
            } else {
                if !out.is_empty() {
                    out.push(' ');
                }
                out.push_str(&display);
            }
        }
        capitalize_first(&out)
    }
}

fn capitalize_first(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().collect::<String>() + chars.as_str(),
        None => String::new(),
    }
}

/// `x` / `x-name` style placeholder tokens print with an uppercase X.
fn restore_placeholder(token: &str) -> String {
    if token == "x" || token.starts_with("x-") {
        format!("X{}", &token[1..])
    } else {
        token.to_string()
    }
}

fn placeholder_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\bX(-[a-z0-9_]+)?\b").expect("valid regex"))
}

/// Substitute delexicalized placeholders in `text` from the lexical map
/// attached to the DA instance.
///
/// Named placeholders (`X-name`) look themselves up directly. Bare `X`
/// placeholders are assigned the map entries of the DA's placeholder-valued
/// triples in triple order. Unmatched placeholders are left intact and
/// counted. Returns (relexicalized text, unresolved count).
pub fn relexicalize(
    text: &str,
    da: &DialogueAct,
    lexical_map: &BTreeMap<String, String>,
) -> (String, usize) {
    let ordered: Vec<&str> = da.placeholder_values();
    let mut next_bare = 0usize;
    let mut unresolved = 0usize;

    let result = placeholder_regex().replace_all(text, |caps: &regex::Captures| {
        let whole = caps.get(0).unwrap().as_str();
        let key = if caps.get(1).is_some() {
            // named placeholder: canonicalize the leading x
            Some(format!("X{}", &whole[1..]))
        } else {
            // bare X: take the next placeholder value in DA order
            let k = ordered.get(next_bare).map(|v| v.to_string());
            next_bare += 1;
            k
        };
        match key.and_then(|k| lexical_map.get(&k)) {
            Some(surface) => surface.clone(),
            None => {
                unresolved += 1;
                whole.to_string()
            }
        }
    });
    (result.into_owned(), unresolved)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::da::parse_da;

    fn tok() -> Tokenizer {
        Tokenizer::with_plurals(["restaurant", "place", "meal"])
    }

    #[test]
    fn tokenizes_reference_sentence() {
        let tokens = tok().tokenize("X is a French restaurant on the riverside.");
        let expect: Vec<&str> = vec!["x", "is", "a", "french", "restaurant", "on", "the", "riverside", "."];
        assert_eq!(tokens, expect);
    }

    #[test]
    fn empty_text_empty_tokens() {
        assert!(tok().tokenize("").is_empty());
        assert_eq!(tok().detokenize(&[]), "");
    }

    #[test]
    fn plural_split_is_lexicon_driven() {
        assert_eq!(tok().tokenize("restaurants"), vec!["restaurant", "-s"]);
        // verbs are untouched even though they end in s
        assert_eq!(tok().tokenize("serves"), vec!["serves"]);
        // unknown nouns are untouched
        assert_eq!(tok().tokenize("pubs"), vec!["pubs"]);
    }

    #[test]
    fn detokenize_inverts_plural_and_punctuation() {
        let t = tok();
        assert_eq!(t.detokenize(&ts(&["restaurant", "-s"])), "Restaurants");
        assert_eq!(
            t.detokenize(&ts(&["x", "is", "a", "french", "restaurant", "."])),
            "X is a french restaurant."
        );
    }

    #[test]
    fn leading_plural_token_left_verbatim() {
        assert_eq!(tok().detokenize(&ts(&["-s", "up"])), "-s up");
    }

    #[test]
    fn roundtrip_on_sentence_shapes() {
        let t = tok();
        for text in [
            "X is a French restaurant on the riverside.",
            "There are cheap meals at X-name, near X-near.",
            "It serves Japanese food, Chinese takeaway!",
            "Is it close? Yes: very close; really.",
        ] {
            let tokens = t.tokenize(text);
            let joined = t.detokenize(&tokens);
            assert_eq!(t.tokenize(&joined), tokens, "roundtrip failed for {text:?}");
        }
    }

    fn ts(tokens: &[&str]) -> Vec<String> {
        tokens.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn relexicalize_bare_placeholders_in_da_order() {
        let da = parse_da("inform(name=X-name, near=X-near)").unwrap();
        let map: BTreeMap<String, String> = [
            ("X-name".to_string(), "Golden Wok".to_string()),
            ("X-near".to_string(), "the station".to_string()),
        ]
        .into();
        let (text, unresolved) = relexicalize("X is near X.", &da, &map);
        assert_eq!(text, "Golden Wok is near the station.");
        assert_eq!(unresolved, 0);
    }

    #[test]
    fn relexicalize_named_placeholders() {
        let da = parse_da("inform(name=X-name)").unwrap();
        let map: BTreeMap<String, String> =
            [("X-name".to_string(), "Caffe Uno".to_string())].into();
        let (text, unresolved) = relexicalize("X-name is nice.", &da, &map);
        assert_eq!(text, "Caffe Uno is nice.");
        assert_eq!(unresolved, 0);
    }

    #[test]
    fn relexicalize_counts_unmatched() {
        let da = parse_da("inform(name=X-name)").unwrap();
        let map = BTreeMap::new();
        let (text, unresolved) = relexicalize("X is nice.", &da, &map);
        assert_eq!(text, "X is nice.");
        assert_eq!(unresolved, 1);

        let (text, unresolved) = relexicalize("no placeholders here.", &da, &map);
        assert_eq!(text, "no placeholders here.");
        assert_eq!(unresolved, 0);
    }
}

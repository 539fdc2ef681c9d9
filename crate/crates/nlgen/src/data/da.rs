//! Dialogue acts: parsing, canonical formatting, and sequence encoding.
//!
//! A dialogue act is an ordered list of (act type, slot, value) triples, e.g.
//! `inform(name=X-name, food=French)` holds two triples sharing the act type
//! `inform`. Values may be quoted to include commas or spaces. Slot-less acts
//! are written with the `_` sentinel, e.g. `bye(_)`.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Sentinel written for acts that carry no slot.
pub const EMPTY_SLOT: &str = "_";

/// Prefixes that namespace DA tokens in the generator's input vocabulary, so
/// a slot named like a value can never collide with it.
pub const ACT_PREFIX: &str = "act:";
pub const SLOT_PREFIX: &str = "slot:";
pub const VALUE_PREFIX: &str = "val:";

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DaTriple {
    pub act_type: String,
    /// Empty string for slot-less acts.
    pub slot: String,
    /// Empty string for slot-less acts; otherwise a literal value or a
    /// delexicalized placeholder such as `X-name`.
    pub value: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DialogueAct {
    triples: Vec<DaTriple>,
}

impl DialogueAct {
    /// Validates: at least one triple, non-empty act types, and no duplicate
    /// (slot, value) pair within the DA.
    pub fn new(triples: Vec<DaTriple>) -> Result<DialogueAct> {
        if triples.is_empty() {
            return Err(Error::data("dialogue act must have at least one triple"));
        }
        for t in &triples {
            if t.act_type.is_empty() {
                return Err(Error::data("dialogue act type must be non-empty"));
            }
        }
        for (i, a) in triples.iter().enumerate() {
            for b in &triples[i + 1..] {
                if a.slot == b.slot && a.value == b.value {
                    return Err(Error::data(format!(
                        "duplicate slot-value pair: {}={}",
                        a.slot, a.value
                    )));
                }
            }
        }
        Ok(DialogueAct { triples })
    }

    pub fn triples(&self) -> &[DaTriple] {
        &self.triples
    }

    /// Values that are delexicalized placeholders (start with `X`), in
    /// triple order. Drives the relexicalization order convention.
    pub fn placeholder_values(&self) -> Vec<&str> {
        self.triples
            .iter()
            .filter(|t| t.value.starts_with('X'))
            .map(|t| t.value.as_str())
            .collect()
    }

    /// Canonical text form; `parse_da(format_da(da)) == da`.
    pub fn format(&self) -> String {
        let mut out = String::new();
        let mut i = 0;
        while i < self.triples.len() {
            let act = &self.triples[i].act_type;
            let mut j = i;
            while j < self.triples.len() && self.triples[j].act_type == *act {
                j += 1;
            }
            if !out.is_empty() {
                out.push('&');
            }
            out.push_str(act);
            out.push('(');
            for (n, t) in self.triples[i..j].iter().enumerate() {
                if n > 0 {
                    out.push_str(", ");
                }
                if t.slot.is_empty() {
                    out.push_str(EMPTY_SLOT);
                } else {
                    out.push_str(&t.slot);
                    out.push('=');
                    if needs_quoting(&t.value) {
                        out.push('"');
                        out.push_str(&t.value);
                        out.push('"');
                    } else {
                        out.push_str(&t.value);
                    }
                }
            }
            out.push(')');
            i = j;
        }
        out
    }
}

fn needs_quoting(value: &str) -> bool {
    value.is_empty() || value.chars().any(|c| " ,()\"&=".contains(c))
}

struct Parser<'a> {
    text: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            position: self.pos,
            message: message.into(),
        }
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(b' ') | Some(b'\t')) {
            self.pos += 1;
        }
    }

    fn take_while<F: Fn(char) -> bool>(&mut self, pred: F) -> &'a str {
        let start = self.pos;
        for (off, ch) in self.text[start..].char_indices() {
            if !pred(ch) {
                self.pos = start + off;
                return &self.text[start..self.pos];
            }
        }
        self.pos = self.text.len();
        &self.text[start..]
    }

    fn expect(&mut self, ch: u8) -> Result<()> {
        if self.peek() == Some(ch) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(format!(
                "expected '{}', found {}",
                ch as char,
                self.peek()
                    .map(|b| format!("'{}'", b as char))
                    .unwrap_or_else(|| "end of input".to_string())
            )))
        }
    }

    fn parse_act_group(&mut self, triples: &mut Vec<DaTriple>) -> Result<()> {
        self.skip_ws();
        let act = self.take_while(|c| c.is_alphanumeric() || c == '_' || c == '-');
        if act.is_empty() {
            return Err(self.err("expected act name"));
        }
        self.skip_ws();
        self.expect(b'(')?;
        self.skip_ws();
        if self.peek() == Some(b')') {
            return Err(self.err(format!(
                "act '{act}' has no slots; write '{act}({EMPTY_SLOT})' for a slot-less act"
            )));
        }
        loop {
            self.skip_ws();
            let slot = self.take_while(|c| c.is_alphanumeric() || c == '_' || c == '-');
            if slot.is_empty() {
                return Err(self.err("expected slot name"));
            }
            self.skip_ws();
            if slot == EMPTY_SLOT {
                triples.push(DaTriple {
                    act_type: act.to_string(),
                    slot: String::new(),
                    value: String::new(),
                });
            } else {
                self.expect(b'=')?;
                self.skip_ws();
                let value = self.parse_value()?;
                triples.push(DaTriple {
                    act_type: act.to_string(),
                    slot: slot.to_string(),
                    value,
                });
            }
            self.skip_ws();
            match self.peek() {
                Some(b',') => {
                    self.pos += 1;
                }
                Some(b')') => {
                    self.pos += 1;
                    return Ok(());
                }
                _ => return Err(self.err("expected ',' or ')'")),
            }
        }
    }

    fn parse_value(&mut self) -> Result<String> {
        if self.peek() == Some(b'"') {
            self.pos += 1;
            let v = self.take_while(|c| c != '"');
            self.expect(b'"')?;
            Ok(v.to_string())
        } else {
            let v = self.take_while(|c| c != ',' && c != ')');
            let trimmed = v.trim_end();
            if trimmed.is_empty() {
                return Err(self.err("empty value"));
            }
            Ok(trimmed.to_string())
        }
    }
}

/// Parse the `act(slot=value, ...)` syntax, with `&` joining several act
/// groups. Quoted values may contain commas and spaces. Errors carry the
/// byte position of the failure.
pub fn parse_da(text: &str) -> Result<DialogueAct> {
    let mut parser = Parser {
        text,
        bytes: text.as_bytes(),
        pos: 0,
    };
    let mut triples = Vec::new();
    parser.parse_act_group(&mut triples)?;
    loop {
        parser.skip_ws();
        match parser.peek() {
            None => break,
            Some(b'&') => {
                parser.pos += 1;
                parser.parse_act_group(&mut triples)?;
            }
            Some(c) => {
                return Err(parser.err(format!("unexpected trailing '{}'", c as char)));
            }
        }
    }
    DialogueAct::new(triples)
}

/// Sequence encoding of a DA: one namespaced (act, slot, value) token triple
/// per slot, concatenated in source order. Length is 3x the triple count.
pub fn encode_da(da: &DialogueAct) -> Vec<String> {
    let mut tokens = Vec::with_capacity(3 * da.triples().len());
    for t in da.triples() {
        tokens.push(format!("{ACT_PREFIX}{}", t.act_type));
        let slot = if t.slot.is_empty() { EMPTY_SLOT } else { &t.slot };
        let value = if t.value.is_empty() {
            EMPTY_SLOT
        } else {
            &t.value
        };
        tokens.push(format!("{SLOT_PREFIX}{slot}"));
        tokens.push(format!("{VALUE_PREFIX}{value}"));
    }
    tokens
}

/// Inverse of [`encode_da`]: recovers the original triples exactly.
pub fn decode_da_tokens(tokens: &[String]) -> Result<DialogueAct> {
    if tokens.len() % 3 != 0 {
        return Err(Error::data(format!(
            "DA token sequence length {} is not a multiple of 3",
            tokens.len()
        )));
    }
    let mut triples = Vec::new();
    for chunk in tokens.chunks(3) {
        let act = chunk[0]
            .strip_prefix(ACT_PREFIX)
            .ok_or_else(|| Error::data(format!("expected act token, got '{}'", chunk[0])))?;
        let slot = chunk[1]
            .strip_prefix(SLOT_PREFIX)
            .ok_or_else(|| Error::data(format!("expected slot token, got '{}'", chunk[1])))?;
        let value = chunk[2]
            .strip_prefix(VALUE_PREFIX)
            .ok_or_else(|| Error::data(format!("expected value token, got '{}'", chunk[2])))?;
        let (slot, value) = if slot == EMPTY_SLOT && value == EMPTY_SLOT {
            (String::new(), String::new())
        } else {
            (slot.to_string(), value.to_string())
        };
        triples.push(DaTriple {
            act_type: act.to_string(),
            slot,
            value,
        });
    }
    DialogueAct::new(triples)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_bagel_style_da() {
        let da = parse_da(
            "inform(name=X-name, type=placetoeat, eattype=restaurant, area=riverside, food=French)",
        )
        .unwrap();
        assert_eq!(da.triples().len(), 5);
        assert!(da.triples().iter().all(|t| t.act_type == "inform"));
        let last = da.triples().last().unwrap();
        assert_eq!(last.slot, "food");
        assert_eq!(last.value, "French");
    }

    #[test]
    fn quoted_values_and_repeated_slots() {
        let da = parse_da("inform(food=\"Chinese takeaway\", food=Japanese)").unwrap();
        assert_eq!(da.triples().len(), 2);
        assert_eq!(da.triples()[0].value, "Chinese takeaway");
        assert_eq!(da.triples()[1].value, "Japanese");
    }

    #[test]
    fn empty_parens_are_an_error() {
        let err = parse_da("inform()").unwrap_err();
        match err {
            Error::Parse { position, .. } => assert!(position > 0),
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn slotless_sentinel() {
        let da = parse_da("bye(_)").unwrap();
        assert_eq!(da.triples().len(), 1);
        assert_eq!(da.triples()[0].slot, "");
        assert_eq!(da.triples()[0].value, "");
        assert_eq!(da.format(), "bye(_)");
    }

    #[test]
    fn malformed_inputs_report_positions() {
        for bad in [
            "inform(name=X-name",
            "(name=X)",
            "inform(=x)",
            "inform(name=)",
            "inform(name=X))",
            "inform(food=\"unterminated)",
        ] {
            let err = parse_da(bad).unwrap_err();
            assert!(matches!(err, Error::Parse { .. }), "input {bad:?}: {err}");
        }
    }

    #[test]
    fn duplicate_slot_value_rejected() {
        assert!(parse_da("inform(food=French, food=French)").is_err());
    }

    #[test]
    fn format_parse_is_fixed_point() {
        let texts = [
            "inform(name=X-name, type=placetoeat, eattype=restaurant, area=citycentre, near=X-near, food=\"Chinese takeaway\", food=Japanese)",
            "inform(area=riverside, food=French)",
            "confirm(food=French)&inform(area=riverside)",
            "bye(_)",
        ];
        for text in texts {
            let da = parse_da(text).unwrap();
            let formatted = da.format();
            let reparsed = parse_da(&formatted).unwrap();
            assert_eq!(da, reparsed);
            assert_eq!(formatted, reparsed.format());
        }
    }

    #[test]
    fn encode_preserves_order_and_namespaces() {
        let da = parse_da("inform(area=riverside, food=French)").unwrap();
        let tokens = encode_da(&da);
        assert_eq!(
            tokens,
            vec![
                "act:inform",
                "slot:area",
                "val:riverside",
                "act:inform",
                "slot:food",
                "val:French"
            ]
        );
    }

    #[test]
    fn encode_length_is_three_per_triple() {
        let da = parse_da("inform(food=French)").unwrap();
        assert_eq!(encode_da(&da).len(), 3);

        let table2_block1 = parse_da(
            "inform(name=X-name, type=placetoeat, eattype=restaurant, area=citycentre, near=X-near, food=\"Chinese takeaway\", food=Japanese)",
        )
        .unwrap();
        assert_eq!(table2_block1.triples().len(), 7);
        assert_eq!(encode_da(&table2_block1).len(), 21);
    }

    #[test]
    fn encode_decode_roundtrip() {
        let texts = [
            "inform(name=X-name, food=\"Chinese takeaway\", food=Japanese)",
            "bye(_)",
            "confirm(food=French)&inform(area=riverside)",
        ];
        for text in texts {
            let da = parse_da(text).unwrap();
            let decoded = decode_da_tokens(&encode_da(&da)).unwrap();
            assert_eq!(da, decoded);
        }
    }

    #[test]
    fn placeholder_values_in_triple_order() {
        let da = parse_da("inform(name=X-name, food=French, near=X-near)").unwrap();
        assert_eq!(da.placeholder_values(), vec!["X-name", "X-near"]);
    }
}

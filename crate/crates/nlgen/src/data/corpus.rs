//! Corpus file handling.
//!
//! A corpus is UTF-8 JSONL with LF line endings, one DA per line:
//!
//! ```json
//! {"da": "inform(name=X-name, food=French)",
//!  "refs": ["X is a French restaurant.", "X serves French food."],
//!  "tree": "( be v:fin ( x-name n:subj ) ( restaurant n:obj ( french adj:attr ) ) )",
//!  "lex": {"X-name": "Caffe Uno"}}
//! ```
//!
//! `tree` (a bracketed deep syntax tree for the first reference, tokens
//! joined by single spaces) and `lex` (placeholder -> surface map) are
//! optional.

use crate::data::da::{parse_da, DialogueAct};
use crate::data::tree::{bracketed_to_tree, DeepSyntaxTree};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub da: String,
    pub refs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tree: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub lex: BTreeMap<String, String>,
}

/// A corpus record with its DA parsed and tree decoded.
#[derive(Clone, Debug)]
pub struct CorpusInstance {
    pub record: CorpusRecord,
    pub da: DialogueAct,
    pub tree: Option<DeepSyntaxTree>,
}

#[derive(Clone, Debug, Default)]
pub struct Corpus {
    pub instances: Vec<CorpusInstance>,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn from_records(records: Vec<CorpusRecord>) -> Result<Corpus> {
        let mut instances = Vec::with_capacity(records.len());
        for (i, record) in records.into_iter().enumerate() {
            let da = parse_da(&record.da)
                .map_err(|e| Error::data(format!("record {}: bad DA: {e}", i + 1)))?;
            if record.refs.is_empty() {
                return Err(Error::data(format!("record {}: no references", i + 1)));
            }
            let tree = match &record.tree {
                Some(text) => {
                    let tokens: Vec<String> =
                        text.split_whitespace().map(String::from).collect();
                    let parsed = bracketed_to_tree(&tokens)
                        .map_err(|e| Error::data(format!("record {}: bad tree: {e}", i + 1)))?;
                    if parsed.recovered > 0 {
                        return Err(Error::data(format!(
                            "record {}: corpus tree needed {} recovery actions",
                            i + 1,
                            parsed.recovered
                        )));
                    }
                    Some(parsed.tree)
                }
                None => None,
            };
            instances.push(CorpusInstance { record, da, tree });
        }
        Ok(Corpus { instances })
    }

    pub fn load(path: &Path) -> Result<Corpus> {
        let file = std::fs::File::open(path)
            .map_err(|e| Error::data(format!("cannot open corpus {}: {e}", path.display())))?;
        let reader = std::io::BufReader::new(file);
        let mut records = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record: CorpusRecord = serde_json::from_str(&line)
                .map_err(|e| Error::data(format!("line {}: {e}", i + 1)))?;
            records.push(record);
        }
        Corpus::from_records(records)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut file = std::fs::File::create(path)?;
        for instance in &self.instances {
            serde_json::to_writer(&mut file, &instance.record)?;
            file.write_all(b"\n")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(da: &str, refs: &[&str], tree: Option<&str>) -> CorpusRecord {
        CorpusRecord {
            da: da.to_string(),
            refs: refs.iter().map(|s| s.to_string()).collect(),
            tree: tree.map(String::from),
            lex: BTreeMap::new(),
        }
    }

    #[test]
    fn roundtrips_through_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.jsonl");
        let corpus = Corpus::from_records(vec![
            record(
                "inform(name=X-name, food=French)",
                &["X is French.", "X serves French food."],
                Some("( be v:fin ( x-name n:subj ) )"),
            ),
            record("inform(area=riverside)", &["It is on the riverside."], None),
        ])
        .unwrap();
        corpus.save(&path).unwrap();
        let loaded = Corpus::load(&path).unwrap();
        assert_eq!(loaded.len(), 2);
        assert_eq!(loaded.instances[0].record, corpus.instances[0].record);
        assert!(loaded.instances[0].tree.is_some());
        assert!(loaded.instances[1].tree.is_none());
    }

    #[test]
    fn bad_da_is_rejected_with_record_number() {
        let err = Corpus::from_records(vec![record("inform()", &["x"], None)]).unwrap_err();
        assert!(err.to_string().contains("record 1"));
    }

    #[test]
    fn malformed_corpus_tree_is_rejected() {
        let err = Corpus::from_records(vec![record(
            "inform(food=French)",
            &["x"],
            Some("( be v:fin"),
        )])
        .unwrap_err();
        assert!(err.to_string().contains("recovery"));
    }
}

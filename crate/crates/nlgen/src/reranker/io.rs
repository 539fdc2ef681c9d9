//! Reranker persistence, sharing the generator's model-file envelope; the
//! class inventory is serialized alongside the parameters.

use super::{ClassInventory, RerankerModel, RerankerParams};
use crate::data::vocab::Vocabulary;
use crate::error::{Error, Result};
use crate::generator::io::{check_version, pack_tensors, unpack_tensors, NamedTensor, FORMAT_VERSION};
use crate::generator::Mode;
use crate::rng::DetRng;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Serialize, Deserialize)]
struct RerankerFile {
    format_version: u32,
    kind: String,
    mode: Mode,
    vocab: Vocabulary,
    inventory: ClassInventory,
    embedding_size: usize,
    cell_size: usize,
    tensors: Vec<NamedTensor>,
    train_da_ids: Vec<usize>,
}

pub fn save_reranker(model: &RerankerModel, path: &Path) -> Result<()> {
    let file = RerankerFile {
        format_version: FORMAT_VERSION,
        kind: "reranker".to_string(),
        mode: model.mode,
        vocab: model.vocab.clone(),
        inventory: model.inventory.clone(),
        embedding_size: model.params.embedding_size,
        cell_size: model.params.cell_size,
        tensors: pack_tensors(&model.params.tensors()),
        train_da_ids: model.train_da_ids.clone(),
    };
    let out = std::fs::File::create(path)?;
    serde_json::to_writer(std::io::BufWriter::new(out), &file)?;
    Ok(())
}

pub fn load_reranker(path: &Path) -> Result<RerankerModel> {
    let input = std::fs::File::open(path)
        .map_err(|e| Error::Model(format!("cannot open model {}: {e}", path.display())))?;
    let file: RerankerFile = serde_json::from_reader(std::io::BufReader::new(input))?;
    check_version(file.format_version, &file.kind, "reranker")?;

    let mut vocab = file.vocab;
    vocab.rebuild_index();
    let mut params = RerankerParams::init(
        vocab.len(),
        file.inventory.len(),
        file.embedding_size,
        file.cell_size,
        &mut DetRng::new(0),
    );
    let names: Vec<String> = params.tensors().iter().map(|(n, _)| n.clone()).collect();
    unpack_tensors(&file.tensors, &names, params.tensors_mut())?;

    Ok(RerankerModel {
        mode: file.mode,
        vocab,
        inventory: file.inventory,
        params,
        train_da_ids: file.train_da_ids,
    })
}

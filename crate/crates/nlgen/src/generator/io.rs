//! Model persistence: a single self-describing JSON file with a format
//! version, config echo, vocabularies, and all parameter tensors with shape
//! headers. The reranker shares the same envelope (see `reranker::io`).

use super::{GeneratorModel, GeneratorParams, Mode, TrainConfig};
use crate::data::vocab::Vocabulary;
use crate::error::{Error, Result};
use crate::nn::tensor::Tensor;
use crate::rng::DetRng;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

pub fn pack_tensors(pairs: &[(String, &Tensor)]) -> Vec<NamedTensor> {
    pairs
        .iter()
        .map(|(name, t)| NamedTensor {
            name: name.clone(),
            shape: t.shape().to_vec(),
            values: t.values().to_vec(),
        })
        .collect()
}

/// Copy named tensors into a parameter struct via its canonical catalog.
/// Every expected name must be present with the expected shape.
pub fn unpack_tensors(
    stored: &[NamedTensor],
    expected_names: &[String],
    targets: Vec<&mut Tensor>,
) -> Result<()> {
    for (name, target) in expected_names.iter().zip(targets) {
        let found = stored
            .iter()
            .find(|nt| &nt.name == name)
            .ok_or_else(|| Error::Model(format!("missing tensor '{name}' in model file")))?;
        if found.shape != target.shape() {
            return Err(Error::Model(format!(
                "tensor '{name}': stored shape {:?} does not match expected {:?}",
                found.shape,
                target.shape()
            )));
        }
        target.values_mut().copy_from_slice(&found.values);
    }
    Ok(())
}

pub fn check_version(found: u32, kind_found: &str, kind_expected: &str) -> Result<()> {
    if found != FORMAT_VERSION {
        return Err(Error::Model(format!(
            "model file format version {found} is not supported (this build reads version {FORMAT_VERSION})"
        )));
    }
    if kind_found != kind_expected {
        return Err(Error::Model(format!(
            "model file holds a '{kind_found}' model, expected '{kind_expected}'"
        )));
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct GeneratorFile {
    format_version: u32,
    kind: String,
    mode: Mode,
    config: TrainConfig,
    input_vocab: Vocabulary,
    output_vocab: Vocabulary,
    embedding_size: usize,
    cell_size: usize,
    tensors: Vec<NamedTensor>,
    train_da_ids: Vec<usize>,
    best_validation_bleu: f64,
}

pub fn save_generator(model: &GeneratorModel, path: &Path) -> Result<()> {
    let file = GeneratorFile {
        format_version: FORMAT_VERSION,
        kind: "generator".to_string(),
        mode: model.mode,
        config: model.config.clone(),
        input_vocab: model.input_vocab.clone(),
        output_vocab: model.output_vocab.clone(),
        embedding_size: model.params.embedding_size,
        cell_size: model.params.cell_size,
        tensors: pack_tensors(&model.params.tensors()),
        train_da_ids: model.train_da_ids.clone(),
        best_validation_bleu: model.best_validation_bleu,
    };
    let out = std::fs::File::create(path)?;
    serde_json::to_writer(std::io::BufWriter::new(out), &file)?;
    Ok(())
}

pub fn load_generator(path: &Path) -> Result<GeneratorModel> {
    let input = std::fs::File::open(path)
        .map_err(|e| Error::Model(format!("cannot open model {}: {e}", path.display())))?;
    let file: GeneratorFile = serde_json::from_reader(std::io::BufReader::new(input))?;
    check_version(file.format_version, &file.kind, "generator")?;

    let mut input_vocab = file.input_vocab;
    let mut output_vocab = file.output_vocab;
    input_vocab.rebuild_index();
    output_vocab.rebuild_index();

    let mut params = GeneratorParams::init(
        input_vocab.len(),
        output_vocab.len(),
        file.embedding_size,
        file.cell_size,
        &mut DetRng::new(0),
    );
    let names: Vec<String> = params.tensors().iter().map(|(n, _)| n.clone()).collect();
    unpack_tensors(&file.tensors, &names, params.tensors_mut())?;

    Ok(GeneratorModel {
        mode: file.mode,
        config: file.config,
        input_vocab,
        output_vocab,
        params,
        train_da_ids: file.train_da_ids,
        best_validation_bleu: file.best_validation_bleu,
    })
}

//! Attention encoder-decoder over token sequences.
//!
//! The encoder LSTM reads the linearized dialogue act left to right; the
//! decoder LSTM starts from the final encoder state and emits one token per
//! step, conditioned on an attention context vector. Per step t:
//!
//! ```text
//! alpha_t = softmax(v . tanh(W_a s_{t-1} + U_a h_i))   over encoder states i
//! c_t     = sum_i alpha_ti h_i
//! s_t     = lstm((embed(y_{t-1}) o c_t) W_S, s_{t-1})
//! p(y_t)  = softmax((s_t o c_t) W_Y)
//! ```
//!
//! Attention conditions on the previous decoder state, the only ordering
//! consistent with c_t feeding the recurrence that produces s_t. Decoding is
//! read-only over the parameters and safe to parallelize across inputs.

pub mod beam;
pub mod graph;
pub mod io;
pub mod train;

pub use beam::beam_search;
pub use train::{train, RestartReport, TrainInstance, TrainReport, ValidationInstance};

use crate::data::da::{encode_da, DialogueAct};
use crate::data::vocab::{Vocabulary, GO, PAD, STOP};
use crate::error::{Error, Result};
use crate::nn::lstm::{lstm_step, LstmCellParams};
use crate::nn::ops;
use crate::nn::tensor::Tensor;
use crate::rng::DetRng;
use serde::{Deserialize, Serialize};

/// Generation target: surface strings (joint mode) or bracketed deep syntax
/// trees (two-step mode, realized afterwards).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "string")]
    Strings,
    #[serde(rename = "tree")]
    Trees,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Strings => "string",
            Mode::Trees => "tree",
        }
    }

    /// Default decode-length cap: roughly 1.5x the longest sequences the
    /// corpus produces in each mode.
    pub fn default_max_decode_length(&self) -> usize {
        match self {
            Mode::Strings => 60,
            Mode::Trees => 120,
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Mode> {
        match s {
            "string" | "strings" => Ok(Mode::Strings),
            "tree" | "trees" => Ok(Mode::Trees),
            other => Err(Error::config(format!(
                "unknown mode '{other}' (expected 'string' or 'tree')"
            ))),
        }
    }
}

/// Training hyperparameters. The defaults are the working configuration of
/// the whole system; profiles only shrink them for quick runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub embedding_size: usize,
    pub cell_size: usize,
    pub batch_size: usize,
    pub max_passes: usize,
    /// Stop when the set of top tracked validation BLEU values is unchanged
    /// for this many passes.
    pub patience_passes: usize,
    pub top_k_tracked: usize,
    pub restarts: usize,
    /// 0 means: use the mode's default cap.
    pub max_decode_length: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> TrainConfig {
        TrainConfig {
            learning_rate: 0.001,
            embedding_size: 50,
            cell_size: 128,
            batch_size: 20,
            max_passes: 1000,
            patience_passes: 100,
            top_k_tracked: 10,
            restarts: 10,
            max_decode_length: 0,
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn decode_length_for(&self, mode: Mode) -> usize {
        if self.max_decode_length > 0 {
            self.max_decode_length
        } else {
            mode.default_max_decode_length()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("learning_rate", self.learning_rate > 0.0),
            ("embedding_size", self.embedding_size > 0),
            ("cell_size", self.cell_size > 0),
            ("batch_size", self.batch_size > 0),
            ("max_passes", self.max_passes > 0),
            ("patience_passes", self.patience_passes > 0),
            ("top_k_tracked", self.top_k_tracked > 0),
            ("restarts", self.restarts > 0),
        ];
        for (name, ok) in positive {
            if !ok {
                return Err(Error::config(format!(
                    "TrainConfig: {name} must be positive"
                )));
            }
        }
        Ok(())
    }
}

/// Scale of the uniform parameter initialization.
pub const INIT_SCALE: f64 = 0.1;

/// All learned arrays of the seq2seq model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub embedding_size: usize,
    pub cell_size: usize,
    /// [input vocab, embedding]
    pub input_embedding: Tensor,
    /// [output vocab, embedding]
    pub output_embedding: Tensor,
    pub encoder: LstmCellParams,
    pub decoder: LstmCellParams,
    /// Attention state projection W_a, [cell, cell].
    pub attn_state: Tensor,
    /// Attention encoder projection U_a, [cell, cell].
    pub attn_enc: Tensor,
    /// Attention scoring vector v for the tanh hidden layer, [cell].
    pub attn_score: Tensor,
    /// Decoder input projection W_S, [embedding + cell, embedding].
    pub w_s: Tensor,
    /// Output projection W_Y, [2 * cell, output vocab].
    pub w_y: Tensor,
}

impl GeneratorParams {
    pub fn init(
        input_vocab: usize,
        output_vocab: usize,
        embedding_size: usize,
        cell_size: usize,
        rng: &mut DetRng,
    ) -> GeneratorParams {
        let u = |shape: &[usize], rng: &mut DetRng| {
            Tensor::uniform(shape, -INIT_SCALE, INIT_SCALE, rng)
        };
        GeneratorParams {
            embedding_size,
            cell_size,
            input_embedding: u(&[input_vocab, embedding_size], rng),
            output_embedding: u(&[output_vocab, embedding_size], rng),
            encoder: LstmCellParams::uniform(embedding_size, cell_size, INIT_SCALE, rng),
            decoder: LstmCellParams::uniform(embedding_size, cell_size, INIT_SCALE, rng),
            attn_state: u(&[cell_size, cell_size], rng),
            attn_enc: u(&[cell_size, cell_size], rng),
            attn_score: u(&[cell_size], rng),
            w_s: u(&[embedding_size + cell_size, embedding_size], rng),
            w_y: u(&[2 * cell_size, output_vocab], rng),
        }
    }

    /// All parameter tensors in canonical order with stable names. This
    /// ordering defines the gradient slot layout for training and the
    /// serialization layout of model files.
    pub fn tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out = vec![
            ("input_embedding".to_string(), &self.input_embedding),
            ("output_embedding".to_string(), &self.output_embedding),
        ];
        out.extend(self.encoder.tensors("encoder"));
        out.extend(self.decoder.tensors("decoder"));
        out.push(("attn_state".to_string(), &self.attn_state));
        out.push(("attn_enc".to_string(), &self.attn_enc));
        out.push(("attn_score".to_string(), &self.attn_score));
        out.push(("w_s".to_string(), &self.w_s));
        out.push(("w_y".to_string(), &self.w_y));
        out
    }

    /// Mutable views in the same canonical order as [`tensors`](Self::tensors).
    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out: Vec<&mut Tensor> =
            vec![&mut self.input_embedding, &mut self.output_embedding];
        out.extend(self.encoder.tensors_mut());
        out.extend(self.decoder.tensors_mut());
        out.push(&mut self.attn_state);
        out.push(&mut self.attn_enc);
        out.push(&mut self.attn_score);
        out.push(&mut self.w_s);
        out.push(&mut self.w_y);
        out
    }

    fn embed(&self, table: &Tensor, id: usize, context: &'static str) -> Result<Tensor> {
        if id >= table.rows() {
            return Err(Error::data(format!(
                "{context}: unknown token id {id} (vocabulary size {})",
                table.rows()
            )));
        }
        Tensor::from_values(&[table.cols()], table.row(id).to_vec())
    }
}

/// Encoder pass output: hidden states h_1..h_n plus the final memory cell.
/// `enc_proj` caches U_a h_i so attention does not recompute it per step.
#[derive(Clone, Debug)]
pub struct EncoderStates {
    pub h: Vec<Tensor>,
    pub final_cell: Tensor,
    enc_proj: Vec<Tensor>,
}

impl EncoderStates {
    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }
}

/// Decoder state after a step: hidden s_t, memory cell, context c_t, and the
/// attention weights over the encoder states (non-negative, sum 1).
#[derive(Clone, Debug)]
pub struct DecoderState {
    pub s: Tensor,
    pub cell: Tensor,
    pub context: Tensor,
    pub attention: Vec<f64>,
}

/// A candidate output sequence under construction.
#[derive(Clone, Debug)]
pub struct Hypothesis {
    /// Output token ids, without GO/STOP.
    pub tokens: Vec<usize>,
    /// Accumulated log probability, including the STOP step once finished.
    pub log_prob: f64,
    pub state: DecoderState,
    pub finished: bool,
    /// Set when decoding hit the length cap before STOP.
    pub truncated: bool,
}

/// Run the encoder over a non-empty id sequence, starting from zero states.
pub fn encode(params: &GeneratorParams, input_ids: &[usize]) -> Result<EncoderStates> {
    if input_ids.is_empty() {
        return Err(Error::EmptyInput("encode"));
    }
    let mut h = Tensor::zeros(&[params.cell_size]);
    let mut c = Tensor::zeros(&[params.cell_size]);
    let mut states = Vec::with_capacity(input_ids.len());
    for &id in input_ids {
        let x = params.embed(&params.input_embedding, id, "encode")?;
        let (h2, c2) = lstm_step(&params.encoder, &x, &h, &c)?;
        h = h2;
        c = c2;
        states.push(h.clone());
    }
    let enc_proj = states
        .iter()
        .map(|hi| ops::vecmat(hi, &params.attn_enc))
        .collect::<Result<Vec<_>>>()?;
    Ok(EncoderStates {
        h: states,
        final_cell: c,
        enc_proj,
    })
}

/// Alignment model: a feed-forward scorer with a single tanh hidden layer.
/// Returns the attention weights and the context vector.
pub fn attend(
    params: &GeneratorParams,
    s_prev: &Tensor,
    enc: &EncoderStates,
) -> Result<(Vec<f64>, Tensor)> {
    if enc.is_empty() {
        return Err(Error::EmptyInput("attend"));
    }
    let query = ops::vecmat(s_prev, &params.attn_state)?;
    let mut scores = Vec::with_capacity(enc.len());
    for proj in &enc.enc_proj {
        let hidden = ops::tanh(&ops::add(&query, proj)?);
        let score: f64 = hidden
            .values()
            .iter()
            .zip(params.attn_score.values())
            .map(|(a, b)| a * b)
            .sum();
        scores.push(score);
    }
    let alpha = ops::softmax(&Tensor::from_values(&[scores.len()], scores)?)?;
    let mut context = Tensor::zeros(&[params.cell_size]);
    for (w, hi) in alpha.values().iter().zip(&enc.h) {
        for (c, &v) in context.values_mut().iter_mut().zip(hi.values()) {
            *c += w * v;
        }
    }
    Ok((alpha.values().to_vec(), context))
}

/// Decoder state before the first step: s_0 is the last encoder hidden state
/// and the memory cell carries over from the encoder.
pub fn initial_decoder_state(params: &GeneratorParams, enc: &EncoderStates) -> DecoderState {
    DecoderState {
        s: enc.h.last().expect("encode rejects empty input").clone(),
        cell: enc.final_cell.clone(),
        context: Tensor::zeros(&[params.cell_size]),
        attention: Vec::new(),
    }
}

/// One decoder step: consume the previous output token, produce the
/// distribution over the next token and the new state.
pub fn decode_step(
    params: &GeneratorParams,
    y_prev: usize,
    state: &DecoderState,
    enc: &EncoderStates,
) -> Result<(Tensor, DecoderState)> {
    let (attention, context) = attend(params, &state.s, enc)?;
    let emb = params.embed(&params.output_embedding, y_prev, "decode_step")?;
    let x = ops::vecmat(&ops::concat(&emb, &context)?, &params.w_s)?;
    let (s, cell) = lstm_step(&params.decoder, &x, &state.s, &state.cell)?;
    let logits = ops::vecmat(&ops::concat(&s, &context)?, &params.w_y)?;
    let distribution = ops::softmax(&logits)?;
    Ok((
        distribution,
        DecoderState {
            s,
            cell,
            context,
            attention,
        },
    ))
}

/// Argmax over a distribution, excluding PAD and GO, ties to the smallest id.
fn argmax_token(distribution: &Tensor) -> usize {
    let mut best = STOP;
    let mut best_p = f64::NEG_INFINITY;
    for (id, &p) in distribution.values().iter().enumerate() {
        if id == PAD || id == GO {
            continue;
        }
        if p > best_p {
            best_p = p;
            best = id;
        }
    }
    best
}

/// Greedy decoding over encoded input ids: repeatedly takes the argmax token
/// until STOP or `max_len`. Returns tokens without GO/STOP plus a truncation
/// flag.
pub fn greedy_decode_ids(
    params: &GeneratorParams,
    input_ids: &[usize],
    max_len: usize,
) -> Result<(Vec<usize>, bool)> {
    let enc = encode(params, input_ids)?;
    let mut state = initial_decoder_state(params, &enc);
    let mut tokens = Vec::new();
    let mut prev = GO;
    for _ in 0..max_len {
        let (dist, next) = decode_step(params, prev, &state, &enc)?;
        state = next;
        let tok = argmax_token(&dist);
        if tok == STOP {
            return Ok((tokens, false));
        }
        tokens.push(tok);
        prev = tok;
    }
    Ok((tokens, true))
}

/// A trained generator: parameters plus everything needed to run it.
#[derive(Clone, Debug)]
pub struct GeneratorModel {
    pub mode: Mode,
    pub config: TrainConfig,
    pub input_vocab: Vocabulary,
    pub output_vocab: Vocabulary,
    pub params: GeneratorParams,
    /// Corpus DA indices this model was trained on (leakage checks).
    pub train_da_ids: Vec<usize>,
    pub best_validation_bleu: f64,
}

impl GeneratorModel {
    /// Encode a DA into input ids via the namespaced triple encoding.
    pub fn da_to_ids(&self, da: &DialogueAct) -> Vec<usize> {
        let tokens = encode_da(da);
        let (ids, unk) = self.input_vocab.to_ids(&tokens);
        if unk > 0 {
            log::debug!("da_to_ids: {unk} unknown DA tokens mapped to UNK");
        }
        ids
    }

    /// Greedy decode for a DA; output as token strings.
    pub fn greedy(&self, da: &DialogueAct, max_len: usize) -> Result<(Vec<String>, bool)> {
        let (ids, truncated) = greedy_decode_ids(&self.params, &self.da_to_ids(da), max_len)?;
        Ok((self.output_vocab.to_tokens(&ids)?, truncated))
    }

    /// Beam search for a DA; hypotheses ordered by log probability.
    pub fn beam(
        &self,
        da: &DialogueAct,
        beam_size: usize,
        max_len: usize,
    ) -> Result<Vec<Hypothesis>> {
        beam_search(&self.params, &self.da_to_ids(da), beam_size, max_len)
    }

    pub fn hypothesis_tokens(&self, hyp: &Hypothesis) -> Result<Vec<String>> {
        self.output_vocab.to_tokens(&hyp.tokens)
    }

    pub fn max_decode_length(&self) -> usize {
        self.config.decode_length_for(self.mode)
    }
}

//! Tape construction for the teacher-forced training pass.
//!
//! Mirrors the decode path in the parent module op for op; a unit test pins
//! the two routes to identical loss values so they cannot drift.

use super::GeneratorParams;
use crate::data::vocab::GO;
use crate::error::Result;
use crate::nn::tape::{GradientTape, TapedLstmCell, Var};
use crate::nn::tensor::Tensor;

/// Generator parameters bound to a tape. Slot layout follows the canonical
/// order of [`GeneratorParams::tensors`].
pub struct GeneratorVars {
    pub input_embedding: Var,
    pub output_embedding: Var,
    pub encoder: TapedLstmCell,
    pub decoder: TapedLstmCell,
    pub attn_state: Var,
    pub attn_enc: Var,
    pub attn_score: Var,
    pub w_s: Var,
    pub w_y: Var,
}

pub fn bind(tape: &mut GradientTape, params: &GeneratorParams) -> GeneratorVars {
    let input_embedding = tape.param(0, &params.input_embedding);
    let output_embedding = tape.param(1, &params.output_embedding);
    let encoder = TapedLstmCell::bind(tape, 2, &params.encoder);
    let decoder = TapedLstmCell::bind(tape, 14, &params.decoder);
    let attn_state = tape.param(26, &params.attn_state);
    let attn_enc = tape.param(27, &params.attn_enc);
    let attn_score = tape.param(28, &params.attn_score);
    let w_s = tape.param(29, &params.w_s);
    let w_y = tape.param(30, &params.w_y);
    GeneratorVars {
        input_embedding,
        output_embedding,
        encoder,
        decoder,
        attn_state,
        attn_enc,
        attn_score,
        w_s,
        w_y,
    }
}

/// Teacher-forced sequence cross-entropy for one instance: the unweighted
/// sum of per-step losses over the target tokens plus the final STOP.
pub fn sequence_loss(
    tape: &mut GradientTape,
    vars: &GeneratorVars,
    cell_size: usize,
    input_ids: &[usize],
    target_ids: &[usize],
    stop_id: usize,
) -> Result<Var> {
    // encoder
    let mut h = tape.input(Tensor::zeros(&[cell_size]));
    let mut c = tape.input(Tensor::zeros(&[cell_size]));
    let mut states = Vec::with_capacity(input_ids.len());
    for &id in input_ids {
        let x = tape.embed_row(vars.input_embedding, id)?;
        let (h2, c2) = vars.encoder.step(tape, x, h, c)?;
        h = h2;
        c = c2;
        states.push(h);
    }
    let enc_matrix = tape.stack_rows(&states)?;
    let enc_proj = tape.matmul(enc_matrix, vars.attn_enc)?;

    // decoder, teacher-forced
    let mut s = h;
    let mut cell = c;
    let mut prev = GO;
    let mut losses = Vec::with_capacity(target_ids.len() + 1);
    for step in 0..=target_ids.len() {
        let target = if step < target_ids.len() {
            target_ids[step]
        } else {
            stop_id
        };
        // attention over the previous decoder state
        let query = tape.vecmat(s, vars.attn_state)?;
        let pre = tape.add_rows(enc_proj, query)?;
        let hidden = tape.tanh(pre);
        let scores = tape.matvec(hidden, vars.attn_score)?;
        let alpha = tape.softmax(scores)?;
        let context = tape.vecmat(alpha, enc_matrix)?;
        // decoder input and recurrence
        let emb = tape.embed_row(vars.output_embedding, prev)?;
        let joined = tape.concat(emb, context)?;
        let x = tape.vecmat(joined, vars.w_s)?;
        let (s2, cell2) = vars.decoder.step(tape, x, s, cell)?;
        s = s2;
        cell = cell2;
        // output distribution
        let out = tape.concat(s, context)?;
        let logits = tape.vecmat(out, vars.w_y)?;
        losses.push(tape.softmax_xent(logits, target)?);
        prev = target;
    }
    tape.add_scalars(&losses)
}

#[cfg(test)]
mod tests {
    use super::super::tests::tiny_params;
    use super::super::{decode_step, encode, initial_decoder_state};
    use super::*;
    use crate::data::vocab::STOP;

    /// The taped training loss must equal the loss computed by chaining the
    /// pure decode path teacher-forced.
    #[test]
    fn taped_loss_matches_decode_path() {
        let params = tiny_params(6, 9, 555);
        let input = [1usize, 5, 2];
        let target = [4usize, 7, 4, 8];

        let mut tape = GradientTape::new();
        let vars = bind(&mut tape, &params);
        let loss_var =
            sequence_loss(&mut tape, &vars, params.cell_size, &input, &target, STOP).unwrap();
        let taped = tape.value(loss_var).item();

        let enc = encode(&params, &input).unwrap();
        let mut state = initial_decoder_state(&params, &enc);
        let mut prev = GO;
        let mut pure = 0.0;
        for step in 0..=target.len() {
            let tok = if step < target.len() { target[step] } else { STOP };
            let (dist, next) = decode_step(&params, prev, &state, &enc).unwrap();
            pure -= dist.values()[tok].ln();
            state = next;
            prev = tok;
        }
        assert!(
            (taped - pure).abs() < 1e-9,
            "taped {taped} vs decode-path {pure}"
        );
    }

    /// Finite-difference check through the full seq2seq graph for a sample of
    /// parameters (the acceptance suite sweeps all of them en masse).
    #[test]
    fn seq2seq_gradients_match_finite_differences() {
        let params = tiny_params(6, 9, 777);
        let input = [2usize, 4];
        let target = [5usize, 6];

        let loss_of = |p: &GeneratorParams| -> f64 {
            let mut tape = GradientTape::new();
            let vars = bind(&mut tape, p);
            let loss =
                sequence_loss(&mut tape, &vars, p.cell_size, &input, &target, STOP).unwrap();
            tape.value(loss).item()
        };

        let mut tape = GradientTape::new();
        let vars = bind(&mut tape, &params);
        let loss =
            sequence_loss(&mut tape, &vars, params.cell_size, &input, &target, STOP).unwrap();
        let grads = tape.backward(loss).unwrap();

        // w_y (slot 30), attn_score (28), encoder forget-gate bias (slot 11)
        for slot in [30usize, 28, 11] {
            let names = params.tensors();
            let (_, tensor) = &names[slot];
            let mut numeric = Tensor::zeros(tensor.shape());
            for i in 0..tensor.numel() {
                let mut plus = params.clone();
                plus.tensors_mut()[slot].values_mut()[i] += 1e-5;
                let mut minus = params.clone();
                minus.tensors_mut()[slot].values_mut()[i] -= 1e-5;
                numeric.values_mut()[i] = (loss_of(&plus) - loss_of(&minus)) / 2e-5;
            }
            let analytic = grads.get(slot).unwrap();
            for (a, n) in analytic.values().iter().zip(numeric.values()) {
                let denom = a.abs().max(n.abs()).max(1e-4);
                assert!(
                    ((a - n).abs() / denom) < 1e-4,
                    "slot {slot}: {a} vs {n}"
                );
            }
        }
    }
}
